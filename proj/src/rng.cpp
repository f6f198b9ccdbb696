#include "capspoe/rng.hpp"

#include <cmath>

namespace capspoe {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 output mix.
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

} // namespace

std::uint64_t SeededRng::next_u64() {
    state_ += kGamma;
    return mix64(state_);
}

double SeededRng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_uniform_open0() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    // Always draw the pair in the same order.
    double u1 = next_uniform_open0();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

std::uint64_t SeededRng::stream_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(root + kGamma * (a + 1)) ^ mix64(b + kGamma));
}

void SeededRng::restore(const State& s) {
    state_ = s.state;
    has_cached_ = s.has_cached;
    cached_ = s.cached;
}

} // namespace capspoe
