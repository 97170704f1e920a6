#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "levynbe/error.hpp"

namespace levynbe {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// A (root seed, stream id) pair names one independent random stream.
// Child streams are derived by hashing tags into the stream id, so work
// split across (draw, replicate) pairs never depends on evaluation order.
struct SeedSpec {
    std::uint64_t root_seed = 0;
    std::uint64_t stream_id = 0;

    SeedSpec child(std::initializer_list<std::uint64_t> tags) const noexcept {
        std::uint64_t s = splitmix64(stream_id ^ 0x5bd1e9955bd1e995ULL);
        for (std::uint64_t t : tags) s = splitmix64(s ^ splitmix64(t + 0x632be59bd9b4e019ULL));
        return {root_seed, s};
    }

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

// Stream tags used across the library. Fixed values keep derived streams
// stable across releases.
namespace stream_tag {
inline constexpr std::uint64_t prior = 1;
inline constexpr std::uint64_t simulate = 2;
inline constexpr std::uint64_t redraw = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t shuffle = 5;
inline constexpr std::uint64_t split = 6;
inline constexpr std::uint64_t restart = 7;
inline constexpr std::uint64_t bootstrap = 8;
inline constexpr std::uint64_t test_set = 9;
inline constexpr std::uint64_t gap_fill = 10;
}  // namespace stream_tag

// Random source with hand-written samplers. std::mt19937_64 is specified
// bit-for-bit by the standard; the distributions below are written out so
// draws do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(SeedSpec seed)
        : engine_(splitmix64(seed.root_seed) ^ splitmix64(seed.stream_id ^ 0xd1b54a32d192ed03ULL)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw InvalidArgument("Rng::below: empty range");
        // Lemire's nearly-divisionless method with rejection.
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal, Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Gamma(shape, scale); mean shape*scale. Shapes below 1 use the
    // shape+1 boost: G(a) = G(a+1) * U^(1/a), evaluated in log space.
    double gamma(double shape, double scale) {
        if (!(shape >= 1e-12)) throw GammaShapeUnderflow(shape);
        if (shape < 1.0) {
            const double g = gamma_unit_ge1(shape + 1.0);
            return scale * std::exp(std::log(g) + std::log(uniform()) / shape);
        }
        return scale * gamma_unit_ge1(shape);
    }

    std::uint64_t poisson(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("poisson: bad rate");
        if (lambda == 0.0) return 0;
        if (lambda < 30.0) {
            // Multiplication (inversion) method.
            const double limit = std::exp(-lambda);
            std::uint64_t k = 0;
            double prod = uniform();
            while (prod > limit) {
                ++k;
                prod *= uniform();
            }
            return k;
        }
        return poisson_ptrs(lambda);
    }

private:
    // Marsaglia & Tsang for shape >= 1, unit scale.
    double gamma_unit_ge1(double shape) {
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Hormann's transformed rejection with squeeze (PTRS), large rates.
    std::uint64_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                -lambda + k * loglam - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace levynbe
