#include "msa/rng.hpp"

#include <cmath>

#include "msa/error.hpp"

namespace msa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr double kInv64 = 1.0 / 18446744073709551616.0;  // 2^-64

}  // namespace

std::uint64_t mix_seed(std::uint64_t root_seed, std::string_view stream_name) {
    return splitmix64(splitmix64(root_seed) ^ fnv1a(stream_name));
}

RngStream::RngStream(std::uint64_t root_seed, std::string name)
    : engine_(mix_seed(root_seed, name)), root_seed_(root_seed), name_(std::move(name)) {}

std::uint64_t RngStream::next_u64() {
    ++draws_;
    return engine_();
}

double RngStream::uniform() {
    // 53-bit mantissa, strictly in [0,1).
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ContractError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
}

double RngStream::normal() {
    // Trig-form Box-Muller: exactly two raw draws per call, no cached spare,
    // which keeps the cursor a pure function of the call count.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < kInv64) u1 = kInv64;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

void RngStream::seek(std::uint64_t cursor) {
    engine_.seed(mix_seed(root_seed_, name_));
    engine_.discard(cursor);
    draws_ = cursor;
}

RngStream& RngHub::stream(std::string_view name) {
    auto it = streams_.find(name);
    if (it == streams_.end())
        it = streams_.emplace(std::string(name), RngStream(root_, std::string(name))).first;
    return it->second;
}

std::vector<std::pair<std::string, std::uint64_t>> RngHub::cursors() const {
    std::vector<std::pair<std::string, std::uint64_t>> out;
    out.reserve(streams_.size());
    for (const auto& [name, s] : streams_) out.emplace_back(name, s.cursor());
    return out;
}

void RngHub::restore(const std::vector<std::pair<std::string, std::uint64_t>>& cursors) {
    for (const auto& [name, cursor] : cursors) stream(name).seek(cursor);
}

}  // namespace msa
