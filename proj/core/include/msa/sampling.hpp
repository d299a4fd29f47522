#pragma once

#include <vector>

#include "msa/image.hpp"
#include "msa/motion_gt.hpp"
#include "msa/rng.hpp"
#include "msa/tensor.hpp"

namespace msa {

// Segment-based frame sampling. Test mode picks the segment centers
// floor(k*T/N + T/(2N)); train mode draws uniformly inside each of the N
// equal segments from the augmentation stream. Indices strictly increase.
std::vector<int> sample_frames(int t_total, int n, bool train, RngStream* aug = nullptr);

// Crop/flip/rescale applied identically to every frame of a sample, expressed
// in coordinates of the height-resized image.
struct FrameTransform {
    int resize_h = 72;   // aspect-preserving height resize applied first
    int crop_y = 0, crop_x = 0;
    int crop_size = 64;  // source square side (scale jitter shrinks it)
    int out_size = 64;   // network input side
    bool flip = false;
};

// Deterministic center crop, no flip, crop_size == out_size.
FrameTransform test_transform(int native_h, int native_w, int resize_h, int out_size);

// TSN-style draw: corner/center position x scale in {1.0, 0.875, 0.75} x
// horizontal flip with p=0.5. One draw per sample, shared by all its frames.
FrameTransform draw_augmentation(int native_h, int native_w, int resize_h, int out_size,
                                 RngStream& aug);

// Resize to transform.resize_h (aspect preserved), crop, rescale to out_size,
// flip. Returns [3, out, out] in [0,1].
Tensor<float> preprocess_frame(const ImageRGB& native, const FrameTransform& t);

// s x s soft motion target aligned with the transformed frame: the transform
// rectangle is mapped back to native mask coordinates and area-averaged.
MotionMap map_for_transform(const MaskU8& native_mask, const FrameTransform& t, int s);

}  // namespace msa
