/**
 * @file lattice.hpp
 * @brief Recombining random-walk lattice for one-dimensional BSDEs
 *
 * Node j at level i sits at x = x_offset + (2j - i) * sqrt(dt). Each backward step
 * averages the two children and reads Z off their difference:
 *
 *     ybar = (Y[i+1][j+1] + Y[i+1][j]) / 2
 *     Z    = (Y[i+1][j+1] - Y[i+1][j]) / (2 sqrt(dt))
 *     implicit: Y = ybar + g(s_i, Y, Z) dt      (fixed point)
 *     explicit: Y = ybar + g(s_i, ybar, Z) dt
 *
 * With Lipschitz constant K the implicit map contracts when K dt < 1; solves
 * require K dt <= 1/2. The discrete comparison principle additionally needs
 * K sqrt(dt) <= 1.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/model.hpp"

namespace gexpect {

enum class Scheme { implicit, explicit_step };

/// Time argument fed to the driver on step [t_i, t_{i+1}].
enum class DriverTime { left, midpoint };

struct LatticeOptions {
    Scheme scheme = Scheme::implicit;
    DriverTime driver_time = DriverTime::midpoint;
    double fixed_point_tol = 1e-14;
    int max_iterations = 100;
    double time_offset = 0.0;  ///< calendar time of level 0
    double state_offset = 0.0; ///< B at the root node
};

/// Triangular storage of Y (levels 0..N) and Z (levels 0..N-1).
class LatticeSolution {
public:
    LatticeSolution(TimeGrid grid, std::size_t levels, LatticeOptions options)
        : grid_(grid), levels_(levels), options_(options), sqrt_dt_(std::sqrt(grid.dt())) {
        values_.resize(offset(levels + 1));
        z_.resize(offset(levels));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    const LatticeOptions& options() const noexcept { return options_; }
    /// Number of backward steps; the terminal level index.
    std::size_t levels() const noexcept { return levels_; }
    double y0() const noexcept { return values_[0]; }
    int max_iterations_used() const noexcept { return iterations_; }

    std::span<const double> values(std::size_t i) const {
        check_level(i, levels_);
        return {values_.data() + offset(i), i + 1};
    }
    std::span<const double> z(std::size_t i) const {
        if (i >= levels_) throw PreconditionError("lattice: Z is defined for levels 0..N-1 only");
        return {z_.data() + offset(i), i + 1};
    }
    double state(std::size_t i, std::size_t j) const noexcept {
        return options_.state_offset + (2.0 * static_cast<double>(j) - static_cast<double>(i)) * sqrt_dt_;
    }
    std::vector<double> states(std::size_t i) const {
        check_level(i, levels_);
        std::vector<double> out(i + 1);
        for (std::size_t j = 0; j <= i; ++j) out[j] = state(i, j);
        return out;
    }
    double time(std::size_t i) const noexcept { return options_.time_offset + grid_.time(i); }

    /// Random-walk probability of reaching node j at level i: C(i, j) / 2^i.
    static std::vector<double> node_weights(std::size_t i) {
        std::vector<double> w(i + 1, 0.0);
        w[0] = 1.0;
        for (std::size_t k = 1; k <= i; ++k) {
            for (std::size_t j = k; j > 0; --j) w[j] = 0.5 * (w[j] + w[j - 1]);
            w[0] *= 0.5;
        }
        return w;
    }

private:
    template <class Fn>
    friend LatticeSolution backward_induction(const GeneratorSpec&, const TimeGrid&, std::size_t, Fn&&,
                                              const LatticeOptions&);

    static std::size_t offset(std::size_t i) noexcept { return i * (i + 1) / 2; }
    static void check_level(std::size_t i, std::size_t levels) {
        if (i > levels)
            throw PreconditionError("lattice: time index " + std::to_string(i) + " outside 0.." +
                                    std::to_string(levels));
    }

    TimeGrid grid_;
    std::size_t levels_;
    LatticeOptions options_;
    double sqrt_dt_;
    std::vector<double> values_;
    std::vector<double> z_;
    int iterations_ = 0;
};

namespace detail {

inline void require_lattice_step(const GeneratorSpec& g, const TimeGrid& grid) {
    if (g.dimension() != 1) throw PreconditionError("lattice solver requires d = 1");
    const double kdt = g.lipschitz() * grid.dt();
    if (kdt > 0.5) {
        const auto need = static_cast<std::size_t>(std::ceil(2.0 * g.lipschitz() * grid.horizon()));
        throw PreconditionError("lattice: K*dt = " + GeneratorSpec::number(kdt) +
                                " exceeds 0.5; use at least N = " + std::to_string(need) + " steps");
    }
}

} // namespace detail

/**
 * Backward induction from level `terminal_level` (values supplied by
 * `terminal(j, x)`) down to level 0 on `grid`'s step size.
 */
template <class Fn>
LatticeSolution backward_induction(const GeneratorSpec& g, const TimeGrid& grid, std::size_t terminal_level,
                                   Fn&& terminal, const LatticeOptions& opts) {
    detail::require_lattice_step(g, grid);
    if (terminal_level > grid.steps()) throw PreconditionError("lattice: terminal level beyond grid");

    LatticeSolution sol(grid, terminal_level, opts);
    const double dt = grid.dt();
    const double half_inv_sqrt_dt = 0.5 / sol.sqrt_dt_;
    const std::size_t n = terminal_level;

    double* last = sol.values_.data() + LatticeSolution::offset(n);
    for (std::size_t j = 0; j <= n; ++j) {
        const double v = terminal(j, sol.state(n, j));
        if (!std::isfinite(v))
            throw EvaluationError("terminal claim not finite at node x = " + GeneratorSpec::number(sol.state(n, j)));
        last[j] = v;
    }

    int worst = 0;
    for (std::size_t ii = n; ii-- > 0;) {
        const double s = opts.time_offset + (opts.driver_time == DriverTime::midpoint
                                                 ? (static_cast<double>(ii) + 0.5) * dt
                                                 : grid.time(ii));
        const double* next = sol.values_.data() + LatticeSolution::offset(ii + 1);
        double* cur = sol.values_.data() + LatticeSolution::offset(ii);
        double* zc = sol.z_.data() + LatticeSolution::offset(ii);
        for (std::size_t j = 0; j <= ii; ++j) {
            const double up = next[j + 1];
            const double down = next[j];
            const double ybar = 0.5 * (up + down);
            const double z = (up - down) * half_inv_sqrt_dt;
            double v;
            try {
                if (opts.scheme == Scheme::explicit_step) {
                    v = ybar + g.checked(s, ybar, z) * dt;
                } else {
                    v = ybar + g.checked(s, ybar, z) * dt;
                    int it = 1;
                    for (;; ++it) {
                        const double nv = ybar + g.checked(s, v, z) * dt;
                        const double delta = std::fabs(nv - v);
                        v = nv;
                        if (delta <= opts.fixed_point_tol * std::max(1.0, std::fabs(v))) break;
                        if (it >= opts.max_iterations)
                            throw NumericError("lattice: fixed point did not converge in " +
                                               std::to_string(opts.max_iterations) + " iterations at level " +
                                               std::to_string(ii) + ", node " + std::to_string(j));
                    }
                    if (it > worst) worst = it;
                }
            } catch (const EvaluationError& e) {
                throw NumericError(std::string("lattice level ") + std::to_string(ii) + ", node " +
                                   std::to_string(j) + ": " + e.what());
            }
            if (!std::isfinite(v))
                throw NumericError("lattice: non-finite value at level " + std::to_string(ii) + ", node " +
                                   std::to_string(j));
            cur[j] = v;
            zc[j] = z;
        }
    }
    sol.iterations_ = worst;
    return sol;
}

/// Solves for a terminal-function claim phi(B_T) over the whole grid.
inline LatticeSolution solve_lattice(const GeneratorSpec& g, const Claim& phi, const TimeGrid& grid,
                                     const LatticeOptions& opts = {}) {
    if (phi.kind() != ClaimKind::terminal_function || phi.dimension() != 1)
        throw PreconditionError("lattice: claim '" + phi.label() + "' must be a one-dimensional terminal function");
    return backward_induction(g, grid, grid.steps(), [&](std::size_t, double x) { return phi.terminal_value(x); },
                              opts);
}

/// Solves from explicit node values at level `terminal_level` (size terminal_level + 1).
inline LatticeSolution solve_lattice_from(const GeneratorSpec& g, const TimeGrid& grid, std::size_t terminal_level,
                                          std::span<const double> terminal_values, const LatticeOptions& opts = {}) {
    if (terminal_values.size() != terminal_level + 1)
        throw PreconditionError("lattice: expected " + std::to_string(terminal_level + 1) + " terminal node values");
    return backward_induction(g, grid, terminal_level, [&](std::size_t j, double) { return terminal_values[j]; },
                              opts);
}

/// Lattice representation of E_g[xi | F_{t_i}]: the node values at level i.
inline std::span<const double> conditional_slice(const LatticeSolution& sol, std::size_t i) {
    return sol.values(i);
}

} // namespace gexpect
