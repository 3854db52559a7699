#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace icf {

/// Portable random source used by every seeded operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random>, because the standard library distributions are allowed to
/// differ between implementations. Given the same seed, every method below
/// produces the same values on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) built from the top 53 bits of one draw.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection on the top of the 64-bit range.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via the Box-Muller transform (one draw pair per call).
    double normal();

    /// Poisson variate. Knuth's product method below mean 30, rounded normal
    /// approximation above.
    std::uint64_t poisson(double mean);

    /// Fisher-Yates, walking i from size-1 down to 1 and swapping with
    /// uniform_int(i + 1). A span of size <= 1 consumes no draws.
    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace icf
