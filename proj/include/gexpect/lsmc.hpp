/**
 * @file lsmc.hpp
 * @brief Least-squares Monte Carlo solver for BSDEs in any dimension
 *
 * Backward induction over a simulated path bundle. At step i the conditional
 * mean of Y_{i+1} and each Z component (regressand Y_{i+1} dB_i^k / dt) are
 * projected on a total-degree polynomial basis of the state at t_i, and
 * Y_i = E_i + g(s_i, Y_i, Z_i) dt is solved by Picard sweeps.
 *
 * Per-path contributions xi + sum_i g_i dt average to the fitted Y_0 (OLS
 * with an intercept preserves sample means), so y0 is their mean and the
 * standard error is their sample deviation over sqrt(M).
 *
 * All path loops run over fixed blocks and all reductions are pairwise trees
 * over block index, so results do not depend on the thread count.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/model.hpp"
#include "gexpect/parallel.hpp"
#include "gexpect/random.hpp"

namespace gexpect {

/// M Brownian paths on a grid, stored as increments dB[i][m][k].
class PathBundle {
public:
    PathBundle(std::size_t dimension, TimeGrid grid, std::size_t paths, std::uint64_t seed)
        : dimension_(dimension), grid_(grid), paths_(paths), seed_(seed) {
        const std::size_t n = grid.steps();
        if (paths != 0 && (n > std::numeric_limits<std::size_t>::max() / paths / dimension))
            throw ResourceError(request_text());
        try {
            increments_.assign(n * paths * dimension, 0.0);
        } catch (const std::bad_alloc&) {
            throw ResourceError(request_text());
        }
    }

    std::size_t dimension() const noexcept { return dimension_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t paths() const noexcept { return paths_; }
    std::uint64_t seed() const noexcept { return seed_; }

    double increment(std::size_t i, std::size_t m, std::size_t k) const noexcept {
        return increments_[(i * paths_ + m) * dimension_ + k];
    }
    std::span<const double> raw() const noexcept { return increments_; }

private:
    friend PathBundle simulate_paths(std::size_t, const TimeGrid&, std::size_t, std::uint64_t, unsigned);

    std::string request_text() const {
        return "cannot allocate path bundle: d=" + std::to_string(dimension_) + ", N=" +
               std::to_string(grid_.steps()) + ", M=" + std::to_string(paths_);
    }

    std::size_t dimension_;
    TimeGrid grid_;
    std::size_t paths_;
    std::uint64_t seed_;
    std::vector<double> increments_;
};

/// Increments sqrt(dt) * N(0,1), each keyed by (seed, path, step, coordinate). B_0 = 0.
inline PathBundle simulate_paths(std::size_t d, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                                 unsigned threads = 1) {
    if (paths < 2) throw PreconditionError("simulate_paths: need at least 2 paths");
    if (d < 1) throw PreconditionError("simulate_paths: dimension must be >= 1");
    PathBundle bundle(d, grid, paths, seed);
    const random::CounterStream stream(seed, random::Domain::brownian);
    const double sd = std::sqrt(grid.dt());
    const std::size_t n = grid.steps();
    parallel::for_blocks(paths, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t m = begin; m < end; ++m)
                for (std::size_t k = 0; k < d; ++k)
                    bundle.increments_[(i * paths + m) * d + k] =
                        sd * stream.normal(m, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k));
    });
    return bundle;
}

/// Monomials of total degree <= degree in `state_dim` variables, graded then lexicographic.
class PolynomialBasis {
public:
    PolynomialBasis(std::size_t state_dim, int degree) : state_dim_(state_dim), degree_(degree) {
        if (degree < 1) throw PreconditionError("basis degree must be >= 1");
        std::vector<int> e(state_dim, 0);
        for (int total = 0; total <= degree; ++total) enumerate(e, 0, total);
    }

    std::size_t size() const noexcept { return exponents_.size(); }
    std::size_t state_dim() const noexcept { return state_dim_; }
    int degree() const noexcept { return degree_; }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }

    /// Writes basis values at `u` into `out` (size()).
    void evaluate(std::span<const double> u, std::span<double> out) const {
        double powers[16][9];
        for (std::size_t k = 0; k < state_dim_; ++k) {
            powers[k][0] = 1.0;
            for (int p = 1; p <= degree_; ++p) powers[k][p] = powers[k][p - 1] * u[k];
        }
        for (std::size_t b = 0; b < exponents_.size(); ++b) {
            double v = 1.0;
            for (std::size_t k = 0; k < state_dim_; ++k) v *= powers[k][exponents_[b][k]];
            out[b] = v;
        }
    }

private:
    void enumerate(std::vector<int>& e, std::size_t k, int remaining) {
        if (k + 1 == e.size()) {
            e[k] = remaining;
            exponents_.push_back(e);
            return;
        }
        for (int p = remaining; p >= 0; --p) {
            e[k] = p;
            enumerate(e, k + 1, remaining - p);
        }
        e[k] = 0;
    }

    std::size_t state_dim_;
    int degree_;
    std::vector<std::vector<int>> exponents_;
};

struct LsmcOptions {
    int degree = 3;
    int picard_iters = 3;
    unsigned threads = 1;
    double ridge = 1e-8;
    DriverTime driver_time = DriverTime::midpoint;
};

/// Regression weights at one step. State is divided by `scale` before the basis.
struct StepCoefficients {
    std::vector<double> mean;
    std::vector<std::vector<double>> z;
    double scale = 1.0;
    bool ridge = false;
};

class LsmcSolution {
public:
    double y0 = 0.0;
    double std_error = 0.0;
    std::size_t paths_used = 0;
    std::vector<StepCoefficients> steps;
    std::vector<std::size_t> ridge_steps;

    LsmcSolution(GeneratorSpec g, TimeGrid grid, PolynomialBasis basis, PathState state, LsmcOptions opts)
        : g_(std::move(g)), grid_(grid), basis_(std::move(basis)), state_(state), opts_(opts) {}

    const PolynomialBasis& basis() const noexcept { return basis_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    PathState path_state() const noexcept { return state_; }
    bool ridge_fallback() const noexcept { return !ridge_steps.empty(); }
    std::size_t levels() const noexcept { return steps.size(); }

    /// Regression estimate of E[Y_{i+1} | state_i].
    double conditional_mean(std::size_t i, std::span<const double> state) const {
        return dot(coefficients(i).mean, basis_values(i, state));
    }

    std::vector<double> z_at(std::size_t i, std::span<const double> state) const {
        const auto phi = basis_values(i, state);
        const auto& c = coefficients(i);
        std::vector<double> z(c.z.size());
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(c.z[k], phi);
        return z;
    }

    /// Regression representation of Y_{t_i} as a function of the state at t_i.
    double y_at(std::size_t i, std::span<const double> state) const {
        const auto phi = basis_values(i, state);
        const auto& c = coefficients(i);
        std::vector<double> z(c.z.size());
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(c.z[k], phi);
        const double mean = dot(c.mean, phi);
        const double s = driver_time(i);
        double y = mean;
        for (int p = 0; p < opts_.picard_iters; ++p) y = mean + g_.checked(s, y, z) * grid_.dt();
        return y;
    }

    double driver_time(std::size_t i) const noexcept {
        return opts_.driver_time == DriverTime::midpoint ? (static_cast<double>(i) + 0.5) * grid_.dt()
                                                         : grid_.time(i);
    }

private:
    const StepCoefficients& coefficients(std::size_t i) const {
        if (i >= steps.size())
            throw PreconditionError("lsmc: regression available for time indices 0.." +
                                    std::to_string(steps.size() - 1));
        return steps[i];
    }

    std::vector<double> basis_values(std::size_t i, std::span<const double> state) const {
        if (state.size() != basis_.state_dim()) throw PreconditionError("lsmc: state dimension mismatch");
        const double scale = coefficients(i).scale;
        std::vector<double> u(state.begin(), state.end());
        for (auto& v : u) v /= scale;
        std::vector<double> phi(basis_.size());
        basis_.evaluate(u, phi);
        return phi;
    }

    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return s;
    }

    GeneratorSpec g_;
    TimeGrid grid_;
    PolynomialBasis basis_;
    PathState state_;
    LsmcOptions opts_;
};

namespace detail {

inline std::size_t extra_state_width(PathState s, std::size_t d) {
    switch (s) {
    case PathState::none: return 0;
    case PathState::running_max:
    case PathState::running_min: return d;
    case PathState::running_extrema: return 2 * d;
    }
    return 0;
}

/// In-place Cholesky of a P x P row-major SPD matrix. False on a pivot below `floor`.
inline bool cholesky(std::vector<double>& a, std::size_t p, double floor) {
    for (std::size_t j = 0; j < p; ++j) {
        double diag = a[j * p + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * p + k] * a[j * p + k];
        if (!(diag > floor)) return false;
        const double l = std::sqrt(diag);
        a[j * p + j] = l;
        for (std::size_t i = j + 1; i < p; ++i) {
            double v = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * p + k] * a[j * p + k];
            a[i * p + j] = v / l;
        }
    }
    return true;
}

inline std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t p, std::vector<double> b) {
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * p + k] * b[k];
        b[i] /= l[i * p + i];
    }
    for (std::size_t i = p; i-- > 0;) {
        for (std::size_t k = i + 1; k < p; ++k) b[i] -= l[k * p + i] * b[k];
        b[i] /= l[i * p + i];
    }
    return b;
}

/// Normal equations accumulated per block: Gram (P x P) and right-hand sides (R x P).
struct NormalEquations {
    std::vector<double> gram;
    std::vector<double> rhs;
    void add(const NormalEquations& o) {
        for (std::size_t k = 0; k < gram.size(); ++k) gram[k] += o.gram[k];
        for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += o.rhs[k];
    }
};

} // namespace detail

/**
 * Backward LSMC from explicit per-path terminal values at level `levels`.
 * `states` holds (levels + 1) x M x state_dim regression states.
 */
inline LsmcSolution lsmc_backward(const GeneratorSpec& g, const PathBundle& paths, std::size_t levels,
                                  std::span<const double> states, std::size_t state_dim,
                                  std::vector<double> terminal_values, PathState state_kind,
                                  const LsmcOptions& opts) {
    if (opts.degree < 1) throw PreconditionError("lsmc: basis degree must be >= 1");
    if (opts.picard_iters < 1) throw PreconditionError("lsmc: picard_iters must be >= 1");
    if (g.dimension() != paths.dimension()) throw PreconditionError("lsmc: generator and paths differ in dimension");
    if (levels < 1 || levels > paths.grid().steps()) throw PreconditionError("lsmc: invalid terminal level");

    const std::size_t M = paths.paths();
    const std::size_t d = paths.dimension();
    const TimeGrid& grid = paths.grid();
    const double dt = grid.dt();
    const unsigned threads = std::max(1u, opts.threads);

    PolynomialBasis basis(state_dim, opts.degree);
    if (state_dim > 16 || opts.degree > 8) throw PreconditionError("lsmc: basis limited to 16 states, degree 8");
    const std::size_t P = basis.size();
    const std::size_t R = 1 + d; // mean + Z components

    LsmcSolution sol(g, grid, basis, state_kind, opts);
    sol.paths_used = M;
    sol.steps.resize(levels);

    std::vector<double> y_next = std::move(terminal_values);
    std::vector<double> contrib = y_next;
    std::vector<double> y_cur(M);
    const std::size_t blocks = parallel::block_count(M);

    for (std::size_t ii = levels; ii-- > 0;) {
        const double t = grid.time(ii);
        const double scale = t > 0.0 ? std::sqrt(t) : 1.0;
        const double s = sol.driver_time(ii);
        const auto state_at = [&](std::size_t m) { return states.subspan((ii * M + m) * state_dim, state_dim); };

        StepCoefficients coef;
        coef.scale = scale;
        coef.mean.assign(P, 0.0);
        coef.z.assign(d, std::vector<double>(P, 0.0));

        // Normal equations over fixed blocks.
        std::vector<detail::NormalEquations> parts(blocks);
        parallel::for_blocks(M, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
            auto& ne = parts[b];
            ne.gram.assign(P * P, 0.0);
            ne.rhs.assign(R * P, 0.0);
            std::vector<double> u(state_dim), phi(P), target(R);
            for (std::size_t m = begin; m < end; ++m) {
                const auto st = state_at(m);
                for (std::size_t k = 0; k < state_dim; ++k) u[k] = st[k] / scale;
                basis.evaluate(u, phi);
                target[0] = y_next[m];
                for (std::size_t k = 0; k < d; ++k) target[1 + k] = y_next[m] * paths.increment(ii, m, k) / dt;
                for (std::size_t a = 0; a < P; ++a) {
                    for (std::size_t c = 0; c <= a; ++c) ne.gram[a * P + c] += phi[a] * phi[c];
                    for (std::size_t r = 0; r < R; ++r) ne.rhs[r * P + a] += phi[a] * target[r];
                }
            }
        });
        auto total = parallel::tree_reduce(std::move(parts),
                                           [](detail::NormalEquations& a, const detail::NormalEquations& b) { a.add(b); });
        const double inv_m = 1.0 / static_cast<double>(M);
        for (std::size_t a = 0; a < P; ++a)
            for (std::size_t c = 0; c <= a; ++c) {
                total.gram[a * P + c] *= inv_m;
                total.gram[c * P + a] = total.gram[a * P + c];
            }
        for (auto& v : total.rhs) v *= inv_m;

        if (ii == 0) {
            // F_0 is trivial: every path shares B_0, so only the intercept is identified.
            for (std::size_t r = 0; r < R; ++r) {
                const double v = total.rhs[r * P] / total.gram[0];
                if (r == 0) coef.mean[0] = v;
                else coef.z[r - 1][0] = v;
            }
        } else {
            double max_diag = 0.0;
            for (std::size_t a = 0; a < P; ++a) max_diag = std::max(max_diag, total.gram[a * P + a]);
            std::vector<double> l = total.gram;
            if (!detail::cholesky(l, P, 1e-12 * max_diag)) {
                l = total.gram;
                for (std::size_t a = 0; a < P; ++a) l[a * P + a] += opts.ridge;
                if (!detail::cholesky(l, P, 0.0))
                    throw NumericError("lsmc: regression singular at step " + std::to_string(ii) + " even with ridge");
                coef.ridge = true;
                sol.ridge_steps.push_back(ii);
            }
            for (std::size_t r = 0; r < R; ++r) {
                std::vector<double> b(total.rhs.begin() + static_cast<std::ptrdiff_t>(r * P),
                                      total.rhs.begin() + static_cast<std::ptrdiff_t>((r + 1) * P));
                auto w = detail::cholesky_solve(l, P, std::move(b));
                if (r == 0) coef.mean = std::move(w);
                else coef.z[r - 1] = std::move(w);
            }
        }
        for (const auto& w : coef.mean)
            if (!std::isfinite(w)) throw NumericError("lsmc: non-finite regression weight at step " + std::to_string(ii));

        // Fitted values and Picard sweeps per path.
        parallel::for_blocks(M, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> u(state_dim), phi(P), z(d);
            for (std::size_t m = begin; m < end; ++m) {
                const auto st = state_at(m);
                for (std::size_t k = 0; k < state_dim; ++k) u[k] = st[k] / scale;
                basis.evaluate(u, phi);
                double mean = 0.0;
                for (std::size_t a = 0; a < P; ++a) mean += coef.mean[a] * phi[a];
                for (std::size_t k = 0; k < d; ++k) {
                    double zk = 0.0;
                    for (std::size_t a = 0; a < P; ++a) zk += coef.z[k][a] * phi[a];
                    z[k] = zk;
                }
                double y = mean;
                double drift = 0.0;
                try {
                    for (int p = 0; p < opts.picard_iters; ++p) {
                        drift = g.checked(s, y, z);
                        y = mean + drift * dt;
                    }
                } catch (const EvaluationError& e) {
                    throw NumericError("lsmc step " + std::to_string(ii) + ": " + e.what());
                }
                if (!std::isfinite(y)) throw NumericError("lsmc: non-finite Y at step " + std::to_string(ii));
                y_cur[m] = y;
                contrib[m] += drift * dt;
            }
        });
        sol.steps[ii] = std::move(coef);
        std::swap(y_next, y_cur);
    }

    const double mean = parallel::deterministic_sum(contrib) / static_cast<double>(M);
    std::vector<double> sq(M);
    for (std::size_t m = 0; m < M; ++m) sq[m] = (contrib[m] - mean) * (contrib[m] - mean);
    const double var = parallel::deterministic_sum(sq) / static_cast<double>(M - 1);
    sol.y0 = mean;
    sol.std_error = std::sqrt(var / static_cast<double>(M));
    std::reverse(sol.ridge_steps.begin(), sol.ridge_steps.end());
    return sol;
}

/// Regression states at every level: B_{t_i}, then running max / min per coordinate as requested.
inline std::vector<double> build_states(const PathBundle& paths, PathState state_kind, std::size_t& state_dim,
                                        unsigned threads = 1) {
    const std::size_t M = paths.paths();
    const std::size_t d = paths.dimension();
    const std::size_t n = paths.grid().steps();
    const bool want_max = state_kind == PathState::running_max || state_kind == PathState::running_extrema;
    const bool want_min = state_kind == PathState::running_min || state_kind == PathState::running_extrema;
    state_dim = d + detail::extra_state_width(state_kind, d);
    std::vector<double> states;
    try {
        states.assign((n + 1) * M * state_dim, 0.0);
    } catch (const std::bad_alloc&) {
        throw ResourceError("cannot allocate regression states for N=" + std::to_string(n) +
                            ", M=" + std::to_string(M));
    }
    const std::size_t sd = state_dim;
    parallel::for_blocks(M, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t m = begin; m < end; ++m) {
            for (std::size_t i = 1; i <= n; ++i) {
                const double* prev = &states[((i - 1) * M + m) * sd];
                double* cur = &states[(i * M + m) * sd];
                for (std::size_t k = 0; k < d; ++k) {
                    cur[k] = prev[k] + paths.increment(i - 1, m, k);
                    std::size_t off = d;
                    if (want_max) {
                        cur[off + k] = std::max(prev[off + k], cur[k]);
                        off += d;
                    }
                    if (want_min) cur[off + k] = std::min(prev[off + k], cur[k]);
                }
            }
        }
    });
    return states;
}

/// Full-horizon LSMC for a terminal-function or path-functional claim.
inline LsmcSolution solve_lsmc(const GeneratorSpec& g, const Claim& xi, const PathBundle& paths,
                               const LsmcOptions& opts = {}) {
    if (xi.dimension() != paths.dimension()) throw PreconditionError("lsmc: claim and paths differ in dimension");
    const std::size_t M = paths.paths();
    const std::size_t d = paths.dimension();
    const std::size_t n = paths.grid().steps();
    std::size_t state_dim = 0;
    const auto states = build_states(paths, xi.path_state(), state_dim, opts.threads);

    std::vector<double> terminal(M);
    parallel::for_blocks(M, std::max(1u, opts.threads), [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> path((n + 1) * d);
        for (std::size_t m = begin; m < end; ++m) {
            for (std::size_t i = 0; i <= n; ++i)
                for (std::size_t k = 0; k < d; ++k) path[i * d + k] = states[(i * M + m) * state_dim + k];
            const double v = xi.path_value(PathView{path, d});
            if (!std::isfinite(v)) throw EvaluationError("claim '" + xi.label() + "' not finite on path " + std::to_string(m));
            terminal[m] = v;
        }
    });
    return lsmc_backward(g, paths, n, states, state_dim, std::move(terminal), xi.path_state(), opts);
}

} // namespace gexpect
