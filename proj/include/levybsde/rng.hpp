#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace levybsde {

// Counter-based splittable random stream. Output i of a stream with key K is
// mix(K + (i+1)*GAMMA), i.e. SplitMix64 with initial state K; child streams
// are derived by hashing (key, tag) so the tree of streams is reproducible
// independently of thread scheduling or call order.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ 0x1905fbbcdd1aa4e3ULL)) {}

    RngStream split(std::uint64_t tag) const {
        RngStream child;
        child.key_ = mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL));
        return child;
    }

    std::uint64_t next_u64() {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix(key_ + counter_);
    }

    // Uniform on the open interval (0,1); 53-bit resolution, never 0 or 1.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via inverse CDF (rational approximation plus one Halley
    // refinement); keeps the stream consumption at exactly one draw per call.
    double normal() { return normal_quantile(uniform()); }

    // Poisson by CDF inversion. Exact and deterministic; large means are
    // split into chunks so the term-by-term recursion never underflows.
    std::int64_t poisson(double mean);

    static double normal_quantile(double p);

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

inline double RngStream::normal_quantile(double p) {
    // Acklam's approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against erfc brings the result to full double accuracy.
    const double sqrt2pi = 2.5066282746310005024;
    double e = 0.5 * std::erfc(-x / 1.4142135623730950488) - p;
    double u = e * sqrt2pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

inline std::int64_t RngStream::poisson(double mean) {
    if (!(mean >= 0.0)) return 0;
    std::int64_t total = 0;
    // Chunking keeps exp(-chunk) representable.
    while (mean > 500.0) {
        double chunk = 500.0;
        mean -= chunk;
        double u = uniform();
        double pk = std::exp(-chunk);
        double cdf = pk;
        std::int64_t k = 0;
        while (u > cdf && k < 100000) {
            ++k;
            pk *= chunk / static_cast<double>(k);
            cdf += pk;
        }
        total += k;
    }
    double u = uniform();
    double pk = std::exp(-mean);
    double cdf = pk;
    std::int64_t k = 0;
    while (u > cdf && k < 100000) {
        ++k;
        pk *= mean / static_cast<double>(k);
        cdf += pk;
    }
    return total + k;
}

} // namespace levybsde
