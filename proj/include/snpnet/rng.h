#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace snpnet
{

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, stream index); lets per-column work run
/// in any order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

/// mt19937_64 with hand-rolled draws so sequences do not depend on the
/// standard library's distribution implementations.
class Rng
{
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % n));
        std::uint64_t x = 0;
        do
        {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one draw per call).
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0)
        {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename It>
    void shuffle(It first, It last)
    {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i)
        {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace snpnet
