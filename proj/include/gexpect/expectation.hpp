/**
 * @file expectation.hpp
 * @brief g-expectation operators E_g[xi] and E_g[xi | F_t] over the lattice and LSMC solvers
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/lsmc.hpp"
#include "gexpect/model.hpp"

namespace gexpect {

enum class Method { lattice, lsmc };

/// strict: g(t, y, 0) != 0 is an error. raw: they become diagnostics (plain BSDE solve).
enum class Mode { strict, raw };

struct ExpectationOptions {
    Method method = Method::lattice;
    Mode mode = Mode::strict;
    LatticeOptions lattice;
    LsmcOptions lsmc;
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    std::size_t assumption_samples = kDefaultAssumptionSamples;
    double assumption_tol = 1e-9;
    std::optional<SampleBox> box;
};

struct GExpectationResult {
    double value = 0.0;
    Method method = Method::lattice;
    double error_estimate = 0.0;
    std::vector<std::string> diagnostics;
};

/**
 * Discrete representation of E_g[xi | F_{t_i}]: node values on the lattice,
 * or a regression function of the state for LSMC.
 */
struct ConditionalValue {
    Method method = Method::lattice;
    std::size_t t_index = 0;
    double time = 0.0;
    std::vector<double> states;
    std::vector<double> values;
    std::function<double(std::span<const double>)> function;

    /// Lattice: value at the node whose state matches (nearest). LSMC: regression value.
    double at(std::span<const double> state) const {
        if (method == Method::lsmc) return function(state);
        std::size_t best = 0;
        for (std::size_t j = 1; j < states.size(); ++j)
            if (std::fabs(states[j] - state[0]) < std::fabs(states[best] - state[0])) best = j;
        return values[best];
    }
};

/// Operator bound to one generator and grid; assumptions are validated once, on construction.
class GExpectation {
public:
    GExpectation(GeneratorSpec g, TimeGrid grid, ExpectationOptions opts = {})
        : g_(std::move(g)), grid_(grid), opts_(std::move(opts)) {
        const SampleBox box = opts_.box.value_or(SampleBox::for_grid(grid_));
        report_ = validate_assumptions(g_, box, opts_.assumption_samples, opts_.assumption_tol, opts_.seed);
        if (!report_.lipschitz_pass)
            throw AssumptionError("Lipschitz bound falsified for '" + g_.label() + "': quotient " +
                                  GeneratorSpec::number(report_.lipschitz_max_quotient) + " > K = " +
                                  GeneratorSpec::number(g_.lipschitz()) + " at " + report_.lipschitz_witness);
        if (!report_.zero_z_pass) {
            const std::string msg = "g(t,y,0) = 0 falsified for '" + g_.label() + "': |g(t,y,0)| = " +
                                    GeneratorSpec::number(report_.zero_z_max_abs) + " at " + report_.zero_z_witness;
            if (opts_.mode == Mode::strict) throw AssumptionError(msg);
            warnings_.push_back(msg);
        }
        if (opts_.method == Method::lsmc)
            paths_ = std::make_shared<const PathBundle>(
                simulate_paths(g_.dimension(), grid_, opts_.paths, opts_.seed, opts_.lsmc.threads));
    }

    const GeneratorSpec& generator() const noexcept { return g_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const ExpectationOptions& options() const noexcept { return opts_; }
    const AssumptionReport& assumptions() const noexcept { return report_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    const PathBundle& paths() const {
        if (!paths_) throw PreconditionError("no path bundle: operator was built for the lattice method");
        return *paths_;
    }

    LatticeSolution lattice(const Claim& xi) const { return solve_lattice(g_, xi, grid_, opts_.lattice); }

    LsmcSolution lsmc(const Claim& xi) const { return solve_lsmc(g_, xi, paths(), opts_.lsmc); }

    GExpectationResult evaluate(const Claim& xi) const {
        GExpectationResult r;
        r.method = opts_.method;
        r.diagnostics = warnings_;
        if (opts_.method == Method::lattice) {
            const auto sol = lattice(xi);
            r.value = sol.y0();
            r.diagnostics.push_back("fixed-point iterations (max): " + std::to_string(sol.max_iterations_used()));
        } else {
            const auto sol = lsmc(xi);
            r.value = sol.y0;
            r.error_estimate = sol.std_error;
            if (sol.ridge_fallback())
                r.diagnostics.push_back("ridge fallback at " + std::to_string(sol.ridge_steps.size()) + " step(s)");
        }
        return r;
    }

    ConditionalValue conditional(const Claim& xi, std::size_t t_index) const {
        if (t_index > grid_.steps())
            throw PreconditionError("conditional: time index " + std::to_string(t_index) + " outside 0.." +
                                    std::to_string(grid_.steps()));
        ConditionalValue cv;
        cv.method = opts_.method;
        cv.t_index = t_index;
        cv.time = grid_.time(t_index);
        if (opts_.method == Method::lattice) {
            const auto sol = lattice(xi);
            const auto slice = conditional_slice(sol, t_index);
            cv.values.assign(slice.begin(), slice.end());
            cv.states = sol.states(t_index);
            return cv;
        }
        if (t_index == grid_.steps()) {
            if (xi.kind() != ClaimKind::terminal_function)
                throw PreconditionError("conditional at T of a path functional has no state representation");
            cv.function = [xi](std::span<const double> s) { return xi.terminal_value(s); };
            return cv;
        }
        auto sol = std::make_shared<const LsmcSolution>(lsmc(xi));
        cv.function = [sol, t_index](std::span<const double> s) { return sol->y_at(t_index, s); };
        return cv;
    }

private:
    GeneratorSpec g_;
    TimeGrid grid_;
    ExpectationOptions opts_;
    AssumptionReport report_;
    std::vector<std::string> warnings_;
    std::shared_ptr<const PathBundle> paths_;
};

inline GExpectationResult g_expectation(const GeneratorSpec& g, const Claim& xi, const TimeGrid& grid,
                                        const ExpectationOptions& opts = {}) {
    return GExpectation(g, grid, opts).evaluate(xi);
}

inline ConditionalValue conditional_g_expectation(const GeneratorSpec& g, const Claim& xi, const TimeGrid& grid,
                                                  std::size_t t_index, const ExpectationOptions& opts = {}) {
    return GExpectation(g, grid, opts).conditional(xi, t_index);
}

struct TowerResult {
    double lhs = 0.0; ///< E_g[E_g[xi | F_t]] on the horizon [0, t]
    double rhs = 0.0; ///< E_g[xi]
    double difference = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/**
 * A = Omega instance of the defining identity: the conditional value at t_i,
 * used as terminal data on [0, t_i], must reproduce E_g[xi].
 * For LSMC a negative `tol` means 3 * combined standard error.
 */
inline TowerResult tower_check(const GExpectation& op, const Claim& xi, std::size_t t_index, double tol) {
    const TimeGrid& grid = op.grid();
    if (t_index > grid.steps()) throw PreconditionError("tower_check: time index out of range");
    TowerResult r;
    if (op.options().method == Method::lattice) {
        const auto full = op.lattice(xi);
        const auto slice = conditional_slice(full, t_index);
        const auto nested = solve_lattice_from(op.generator(), grid, t_index, slice, op.options().lattice);
        r.lhs = nested.y0();
        r.rhs = full.y0();
        r.tol = tol < 0.0 ? 1e-10 : tol;
    } else {
        const auto& paths = op.paths();
        const auto full = op.lsmc(xi);
        r.rhs = full.y0;
        double se = full.std_error;
        if (t_index == grid.steps()) {
            r.lhs = full.y0;
        } else {
            std::size_t state_dim = 0;
            const auto states = build_states(paths, xi.path_state(), state_dim, op.options().lsmc.threads);
            const std::size_t M = paths.paths();
            if (t_index == 0) {
                r.lhs = full.y_at(0, std::span<const double>(states.data(), state_dim));
            } else {
                std::vector<double> eta(M);
                for (std::size_t m = 0; m < M; ++m)
                    eta[m] = full.y_at(t_index, std::span<const double>(states.data() + (t_index * M + m) * state_dim,
                                                                        state_dim));
                const auto nested = lsmc_backward(op.generator(), paths, t_index, states, state_dim, std::move(eta),
                                                  xi.path_state(), op.options().lsmc);
                r.lhs = nested.y0;
                se = std::sqrt(se * se + nested.std_error * nested.std_error);
            }
        }
        r.tol = tol < 0.0 ? 3.0 * se : tol;
    }
    r.difference = std::fabs(r.lhs - r.rhs);
    r.pass = r.difference <= r.tol;
    return r;
}

struct FactorizationResult {
    double max_difference = 0.0;
    bool pass = false;
    double y0_indicator = 0.0;      ///< E_g[1_A xi]
    std::vector<double> indicator_slice; ///< E_g[1_A xi | F_t] per node, solved directly
    std::vector<double> masked_slice;    ///< 1_A E_g[xi | F_t]
    std::string diagnostic;
};

/**
 * Indicator factorization E_g[1_A X | F_t] = 1_A E_g[X | F_t] on the lattice.
 *
 * `event` marks nodes at level t_index. The left side is solved directly: from
 * each node at t_index a separate sub-lattice carries the claim 1_A xi
 * (xi on paths through A, 0 elsewhere) back to that node.
 */
inline FactorizationResult indicator_factorization_check(const GExpectation& op, const Claim& xi,
                                                         std::size_t t_index, const std::vector<bool>& event,
                                                         double tol) {
    if (op.options().method != Method::lattice)
        throw PreconditionError("indicator_factorization_check runs on the lattice");
    const TimeGrid& grid = op.grid();
    if (t_index > grid.steps()) throw PreconditionError("indicator_factorization_check: time index out of range");
    if (event.size() != t_index + 1)
        throw PreconditionError("indicator_factorization_check: event must list " + std::to_string(t_index + 1) +
                                " nodes");

    FactorizationResult r;
    const auto full = op.lattice(xi);
    const auto slice = conditional_slice(full, t_index);
    const std::size_t remaining = grid.steps() - t_index;
    const Claim zero = Claim::constant(1, 0.0);

    bool any = false;
    r.indicator_slice.resize(t_index + 1);
    r.masked_slice.resize(t_index + 1);
    for (std::size_t j = 0; j <= t_index; ++j) {
        any = any || event[j];
        r.masked_slice[j] = event[j] ? slice[j] : 0.0;
        if (remaining == 0) {
            r.indicator_slice[j] = event[j] ? slice[j] : 0.0;
            continue;
        }
        LatticeOptions sub = op.options().lattice;
        sub.time_offset = grid.time(t_index);
        sub.state_offset = full.state(t_index, j);
        const TimeGrid sub_grid(static_cast<double>(remaining) * grid.dt(), remaining);
        const Claim& leg = event[j] ? xi : zero;
        r.indicator_slice[j] = solve_lattice(op.generator(), leg, sub_grid, sub).y0();
    }
    for (std::size_t j = 0; j <= t_index; ++j)
        r.max_difference = std::max(r.max_difference, std::fabs(r.indicator_slice[j] - r.masked_slice[j]));
    r.y0_indicator = solve_lattice_from(op.generator(), grid, t_index, r.indicator_slice, op.options().lattice).y0();
    if (!any) r.diagnostic = "event is empty; both sides are E_g[0 | F_t] = 0";
    r.pass = r.max_difference <= tol;
    return r;
}

} // namespace gexpect
