#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace hubl {

/**
 * Seeded generator used everywhere randomness is needed.
 *
 * Engine: std::mt19937_64, whose output sequence is fixed by the standard.
 * The distributions below are written out by hand because the std::
 * distribution classes are implementation-defined, and datasets must be
 * bit-identical across toolchains.
 *
 *   uniform()     53 high bits of one draw, scaled to [0, 1)
 *   below(n)      rejection sampling on the top bits, unbiased
 *   categorical   inverse CDF on one uniform()
 *   dirichlet1    normalized -log(1 - u) exponentials
 *
 * Independent streams come from derive(): SplitMix64 mixing of
 * (seed, stream id).
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(splitmix64(seed) ^ stream));
    }

    std::uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t below(std::uint64_t n) {
        // n == 0 is a caller bug; return 0 rather than loop forever.
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return x % n;
    }

    /// Samples an index from a probability vector.
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

    /// Symmetric Dirichlet(1, ..., 1) sample, i.e. uniform on the simplex.
    std::vector<double> dirichlet1(std::size_t n) {
        std::vector<double> out(n);
        double total = 0.0;
        for (auto& x : out) {
            x = -std::log1p(-uniform());
            total += x;
        }
        if (total <= 0.0) {
            std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
            return out;
        }
        for (auto& x : out) x /= total;
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace hubl
