/**
 * @file representation.hpp
 * @brief Generator recovery from small-horizon solutions, and local time averages
 *
 * For affine terminal data y + z.(B_{t+eps} - B_t) the slope
 * (Y_t - y) / eps tends to g(t, y, z) as eps -> 0. Slopes are computed on a
 * decreasing eps schedule and extrapolated linearly in eps.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/expectation.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/lsmc.hpp"
#include "gexpect/model.hpp"

namespace gexpect {

struct RecoveryOptions {
    double horizon = 1.0;
    std::size_t steps_per_eps = 64;
    Method method = Method::lattice;
    Scheme scheme = Scheme::implicit;
    LsmcOptions lsmc;
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    /// Levels of the F_t lattice used for nodewise slopes when t > 0.
    std::size_t filtration_levels = 16;
};

/// {2^-4, ..., 2^-8} * T.
inline std::vector<double> default_eps_schedule(double horizon) {
    std::vector<double> eps;
    for (int k = 4; k <= 8; ++k) eps.push_back(std::ldexp(horizon, -k));
    return eps;
}

struct RecoveryResult {
    double t = 0.0;
    double y = 0.0;
    std::vector<double> z;
    std::vector<double> eps_schedule;
    std::vector<double> raw_slopes;
    double extrapolated = 0.0;
    double residual = 0.0;
    /// Interior t on the lattice: weighted L1 distance of nodewise slopes to their limits, per eps.
    std::vector<double> node_l1_gap;
};

namespace detail {

inline void require_schedule(std::span<const double> eps, double t, double horizon) {
    if (eps.empty()) throw PreconditionError("eps schedule is empty");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] > 0.0)) throw PreconditionError("eps schedule entries must be positive");
        if (k > 0 && !(eps[k] < eps[k - 1])) throw PreconditionError("eps schedule must be strictly decreasing");
    }
    if (t < 0.0 || t + eps[0] > horizon)
        throw PreconditionError("eps schedule: t + max(eps) = " + GeneratorSpec::number(t + eps[0]) +
                                " exceeds the horizon " + GeneratorSpec::number(horizon));
}

/// Linear-in-eps extrapolation through the last two points.
inline double richardson(std::span<const double> eps, std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 1) return values[0];
    const double ea = eps[n - 2], eb = eps[n - 1];
    return (ea * values[n - 1] - eb * values[n - 2]) / (ea - eb);
}

inline GeneratorSpec time_shifted(const GeneratorSpec& g, double t0) {
    return GeneratorSpec(
        g.dimension(), [g, t0](double t, double y, std::span<const double> z) { return g(t0 + t, y, z); },
        g.lipschitz(), g.label(), g.flags());
}

/// Y at the root of a lattice over [t, t + eps] started from B_t = x0, terminal y + z (B - x0).
inline double lattice_small_horizon(const GeneratorSpec& g, double y, double z, double t, double eps, double x0,
                                    const RecoveryOptions& opts) {
    LatticeOptions lo;
    lo.scheme = opts.scheme;
    lo.time_offset = t;
    lo.state_offset = x0;
    const TimeGrid grid(eps, opts.steps_per_eps);
    const Claim claim = Claim::terminal(
        1, [y, z, x0](std::span<const double> x) { return y + z * (x[0] - x0); }, std::fabs(z), "affine");
    return solve_lattice(g, claim, grid, lo).y0();
}

} // namespace detail

/**
 * Slopes (Y_t(g, t + eps, y + z.(B_{t+eps} - B_t)) - y) / eps over the schedule,
 * extrapolated at eps -> 0 from the last two; `residual` is their difference.
 */
inline RecoveryResult recover_generator(const GeneratorSpec& g, double y, std::span<const double> z, double t,
                                        std::span<const double> eps_schedule, const RecoveryOptions& opts = {}) {
    detail::require_schedule(eps_schedule, t, opts.horizon);
    if (z.size() != g.dimension()) throw PreconditionError("recover_generator: z has the wrong dimension");
    if (opts.method == Method::lattice && g.dimension() != 1)
        throw PreconditionError("recover_generator: lattice method requires d = 1");

    RecoveryResult r;
    r.t = t;
    r.y = y;
    r.z.assign(z.begin(), z.end());
    r.eps_schedule.assign(eps_schedule.begin(), eps_schedule.end());

    if (opts.method == Method::lattice && t > 0.0) {
        // Nodewise slopes over an F_t lattice; the reported slope is their weighted mean.
        const std::size_t levels = opts.filtration_levels;
        const double h = std::sqrt(t / static_cast<double>(levels));
        const auto weights = LatticeSolution::node_weights(levels);
        std::vector<std::vector<double>> node_slopes(levels + 1);
        for (double eps : eps_schedule) {
            double mean = 0.0;
            for (std::size_t j = 0; j <= levels; ++j) {
                const double x0 = (2.0 * static_cast<double>(j) - static_cast<double>(levels)) * h;
                const double s = (detail::lattice_small_horizon(g, y, z[0], t, eps, x0, opts) - y) / eps;
                if (!std::isfinite(s)) throw NumericError("recover_generator: non-finite slope");
                node_slopes[j].push_back(s);
                mean += weights[j] * s;
            }
            r.raw_slopes.push_back(mean);
        }
        std::vector<double> limits(levels + 1);
        for (std::size_t j = 0; j <= levels; ++j) limits[j] = detail::richardson(eps_schedule, node_slopes[j]);
        for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
            double gap = 0.0;
            for (std::size_t j = 0; j <= levels; ++j) gap += weights[j] * std::fabs(node_slopes[j][k] - limits[j]);
            r.node_l1_gap.push_back(gap);
        }
    } else {
        for (double eps : eps_schedule) {
            double y_root;
            if (opts.method == Method::lattice) {
                y_root = detail::lattice_small_horizon(g, y, z[0], t, eps, 0.0, opts);
            } else {
                const TimeGrid grid(eps, opts.steps_per_eps);
                const auto paths = simulate_paths(g.dimension(), grid, opts.paths, opts.seed, opts.lsmc.threads);
                const std::vector<double> zz(z.begin(), z.end());
                const Claim claim = Claim::terminal(
                    g.dimension(),
                    [y, zz](std::span<const double> x) {
                        double v = y;
                        for (std::size_t k = 0; k < zz.size(); ++k) v += zz[k] * x[k];
                        return v;
                    },
                    0.0, "affine");
                y_root = solve_lsmc(detail::time_shifted(g, t), claim, paths, opts.lsmc).y0;
                // Control variate: z.(B_{t+eps} - B_t) has mean zero, so its sample mean is removed.
                const auto inc = paths.raw();
                const std::size_t d = g.dimension();
                for (std::size_t k = 0; k < d; ++k) {
                    double sum = 0.0;
                    for (std::size_t q = k; q < inc.size(); q += d) sum += inc[q];
                    y_root -= zz[k] * sum / static_cast<double>(paths.paths());
                }
            }
            const double s = (y_root - y) / eps;
            if (!std::isfinite(s)) throw NumericError("recover_generator: non-finite slope");
            r.raw_slopes.push_back(s);
        }
    }
    r.extrapolated = detail::richardson(eps_schedule, r.raw_slopes);
    const std::size_t n = r.raw_slopes.size();
    r.residual = n >= 2 ? std::fabs(r.raw_slopes[n - 1] - r.raw_slopes[n - 2]) : 0.0;
    return r;
}

inline RecoveryResult recover_generator(const GeneratorSpec& g, double y, double z1, double t,
                                        std::span<const double> eps_schedule, const RecoveryOptions& opts = {}) {
    return recover_generator(g, y, std::span<const double>(&z1, 1), t, eps_schedule, opts);
}

/// (1/eps) * integral of psi over [t, t + eps], composite Simpson with 128 subintervals.
inline double local_average(const std::function<double(double)>& psi, double t, double eps) {
    if (!(eps > 0.0)) throw PreconditionError("local_average: eps must be positive");
    constexpr int n = 128;
    const double h = eps / n;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double s = t + static_cast<double>(k) * h;
        const double v = psi(s);
        if (!std::isfinite(v)) throw EvaluationError("local_average: non-finite value at s = " + GeneratorSpec::number(s));
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        sum += w * v;
    }
    return sum * h / 3.0 / eps;
}

struct LimitEquivalence {
    std::vector<double> eps_schedule;
    std::vector<double> slopes;   ///< candidate (i): solution slopes
    std::vector<double> averages; ///< candidate (ii): local averages of s -> g(s, y, z)
    std::vector<double> gaps;
    double max_gap = 0.0;
    double slope_limit = 0.0;
    double average_limit = 0.0;
    double limit_gap = 0.0;
};

/// Compares the two limit candidates per eps for a generator deterministic in (t, z).
inline LimitEquivalence limit_equivalence_check(const GeneratorSpec& g, double y, std::span<const double> z, double t,
                                                std::span<const double> eps_schedule,
                                                const RecoveryOptions& opts = {}) {
    const auto rec = recover_generator(g, y, z, t, eps_schedule, opts);
    const std::vector<double> zz(z.begin(), z.end());
    LimitEquivalence out;
    out.eps_schedule = rec.eps_schedule;
    out.slopes = rec.raw_slopes;
    for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
        const double avg = local_average([&](double s) { return g.checked(s, y, zz); }, t, eps_schedule[k]);
        out.averages.push_back(avg);
        out.gaps.push_back(std::fabs(avg - out.slopes[k]));
        out.max_gap = std::max(out.max_gap, out.gaps.back());
    }
    out.slope_limit = rec.extrapolated;
    out.average_limit = detail::richardson(eps_schedule, out.averages);
    out.limit_gap = std::fabs(out.slope_limit - out.average_limit);
    return out;
}

inline LimitEquivalence limit_equivalence_check(const GeneratorSpec& g, double y, double z1, double t,
                                                std::span<const double> eps_schedule,
                                                const RecoveryOptions& opts = {}) {
    return limit_equivalence_check(g, y, std::span<const double>(&z1, 1), t, eps_schedule, opts);
}

} // namespace gexpect
