#pragma once

#include <cstdint>

namespace capspoe {

/// Deterministic, platform-stable random stream.
///
/// The generator is SplitMix64 (Steele, Lea & Flood 2014): the 64-bit state
/// advances by the fixed odd constant 0x9E3779B97F4A7C15 and each output is a
/// bit-mix of the new state, so the stream is a pure function of
/// (seed, draw index) on any platform with 64-bit integers. Gaussians come
/// from Box-Muller over fixed pairs of uniforms; each pair always consumes
/// exactly two uniforms and the second normal is cached, so consumption is
/// reproducible and the full stream state is (state, cache).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_uniform();

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_uniform_open0();

    /// Standard normal draw.
    double next_gaussian();

    /// One uniform consumed per call; returns 1 with probability p.
    bool next_bernoulli(double p) { return next_uniform() < p; }

    /// Deterministically derives a seed for an independent stream keyed by
    /// (root, a, b). Training uses one stream per (epoch, sample) so results
    /// do not depend on batch partitioning or thread count.
    static std::uint64_t stream_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

    struct State {
        std::uint64_t state = 0;
        bool has_cached = false;
        double cached = 0.0;
    };
    State save() const { return {state_, has_cached_, cached_}; }
    void restore(const State& s);

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

} // namespace capspoe
