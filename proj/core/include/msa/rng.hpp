#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msa {

// Stable 64-bit seed for a named substream. mt19937_64 itself is fully
// specified by the standard, and all distribution math below is hand-rolled,
// so a (root_seed, name) pair produces the same draws on every platform.
std::uint64_t mix_seed(std::uint64_t root_seed, std::string_view stream_name);

// A named, cursor-tracked random stream. The cursor counts raw engine draws
// and is persisted in checkpoints; seek() replays the engine to a cursor.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t root_seed, std::string name);

    std::uint64_t next_u64();
    double uniform();                                   // [0,1)
    double uniform(double lo, double hi);               // [lo,hi)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive, unbiased
    double normal();                                    // N(0,1), Box-Muller
    bool bernoulli(double p);

    // Fisher-Yates over [0,n) index vector.
    std::vector<std::size_t> permutation(std::size_t n);

    const std::string& name() const { return name_; }
    std::uint64_t cursor() const { return draws_; }
    void seek(std::uint64_t cursor);

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
    std::uint64_t root_seed_ = 0;
    std::string name_;
};

// Registry of named substreams sharing one root seed. Streams are created on
// first use; cursors() lists them sorted by name for checkpointing.
class RngHub {
public:
    explicit RngHub(std::uint64_t root_seed) : root_(root_seed) {}

    RngStream& stream(std::string_view name);
    std::uint64_t root_seed() const { return root_; }

    std::vector<std::pair<std::string, std::uint64_t>> cursors() const;
    void restore(const std::vector<std::pair<std::string, std::uint64_t>>& cursors);

private:
    std::uint64_t root_;
    std::map<std::string, RngStream, std::less<>> streams_;
};

}  // namespace msa
