/**
 * @file random.hpp
 * @brief Counter-based random streams (Philox4x32-10) and the inverse normal CDF
 *
 * Every variate is a pure function of (seed, domain, a, b, c), so results do not
 * depend on evaluation order or on how work is split across threads.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gexpect::random {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeylA;
                key[1] += kWeylB;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Separates independent consumers of the same seed.
enum class Domain : std::uint32_t {
    brownian = 1,
    assumption_sampling = 2,
    property_sampling = 3,
    test_targets = 4,
};

/**
 * Stateless stream: `uniform(a, b, c)` maps a 3-part index to a double in (0, 1).
 *
 * Counter layout: {lo32(a), hi32(a), b, domain << 24 ^ c}; key = seed.
 */
class CounterStream {
public:
    constexpr CounterStream(std::uint64_t seed, Domain domain) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          tag_(static_cast<std::uint32_t>(domain) << 24) {}

    constexpr double uniform(std::uint64_t a, std::uint32_t b, std::uint32_t c) const noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                                      b, tag_ ^ c};
        const auto out = Philox4x32::block(ctr, key_);
        const std::uint64_t bits = ((static_cast<std::uint64_t>(out[0]) << 32) | out[1]) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(std::uint64_t a, std::uint32_t b, std::uint32_t c, double lo, double hi) const noexcept {
        return lo + (hi - lo) * uniform(a, b, c);
    }

    double normal(std::uint64_t a, std::uint32_t b, std::uint32_t c) const noexcept;

private:
    Philox4x32::Key key_;
    std::uint32_t tag_;
};

namespace detail {

inline double horner(const double (&coef)[8], double r) noexcept {
    double acc = coef[7];
    for (int i = 6; i >= 0; --i) acc = acc * r + coef[i];
    return acc;
}

} // namespace detail

/**
 * Inverse standard normal CDF, Wichura's AS 241 (PPND16), relative accuracy ~1e-16.
 * Requires 0 < p < 1.
 */
inline double inverse_normal_cdf(double p) noexcept {
    static constexpr double a[8] = {3.3871328727963666080e0, 1.3314166789178437745e+2,
                                    1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                    4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                    3.3430575583588128105e+4, 2.5090809287301226727e+3};
    static constexpr double b[8] = {1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                    5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                    3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                    5.2264952788528545610e+3};
    static constexpr double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                                    5.76949722146069140550e0, 3.64784832476320460504e0,
                                    1.27045825245236838258e0, 2.41780725177450611770e-1,
                                    2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double d[8] = {1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                                    6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                    1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                    1.05075007164441684324e-9};
    static constexpr double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                                    1.78482653991729133580e0, 2.96560571828504891230e-1,
                                    2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                    2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[8] = {1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                    1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                    1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                    2.04426310338993978564e-15};

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * detail::horner(a, r) / detail::horner(b, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = detail::horner(c, r) / detail::horner(d, r);
    } else {
        r -= 5.0;
        value = detail::horner(e, r) / detail::horner(f, r);
    }
    return q < 0.0 ? -value : value;
}

inline double CounterStream::normal(std::uint64_t a, std::uint32_t b, std::uint32_t c) const noexcept {
    return inverse_normal_cdf(uniform(a, b, c));
}

} // namespace gexpect::random
