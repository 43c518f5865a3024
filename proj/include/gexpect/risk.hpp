/**
 * @file risk.hpp
 * @brief Risk measures rho(X) = E_g[-X] and rho_t(X) = E_g[-X | F_t], axiom checks and classification
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/expectation.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/model.hpp"
#include "gexpect/properties.hpp"

namespace gexpect {

inline double rho_static(const GeneratorSpec& g, const Claim& x, const TimeGrid& grid,
                         const ExpectationOptions& opts = {}) {
    return g_expectation(g, x.negated(), grid, opts).value;
}

inline ConditionalValue rho_dynamic(const GeneratorSpec& g, const Claim& x, const TimeGrid& grid, std::size_t t_index,
                                    const ExpectationOptions& opts = {}) {
    return conditional_g_expectation(g, x.negated(), grid, t_index, opts);
}

enum class Route { operator_tested, generator_implied };

struct RiskVerdicts {
    bool monetary = false;
    bool convex = false;
    bool coherent = false;
};

inline std::string describe(const RiskVerdicts& v) {
    if (v.coherent) return "coherent";
    if (v.convex) return "convex, not coherent";
    if (v.monetary) return "monetary, not convex";
    return "not monetary";
}

struct RiskClassification {
    bool monetary = false;
    bool convex = false;
    bool coherent = false;
    Route route = Route::operator_tested;
    RiskVerdicts operator_route;
    RiskVerdicts generator_route;
    /// Static and dynamic reports per axiom, then the terminal identity.
    std::vector<PropertyReport> axiom_reports;
    GeneratorSideReport generator_reports;
    PropertyReport terminal_identity;
    /// Static verdicts that held were matched by the nodewise dynamic checks.
    bool dynamic_follows_static = true;
    std::vector<std::string> notes;
};

/// The operator route and the generator route disagree; both sets of reports are carried.
class ClassificationError : public Error {
public:
    ClassificationError(const std::string& message, RiskClassification c)
        : Error(message), classification_(std::move(c)) {}
    const RiskClassification& classification() const noexcept { return classification_; }

private:
    RiskClassification classification_;
};

/**
 * Checks the monetary, convex and coherent axioms for rho = E_g[-.] on the claim
 * battery (static and nodewise), derives the generator-implied verdicts
 * (y-free; then convex in z; then positively homogeneous), and throws
 * ClassificationError if the two disagree.
 */
inline RiskClassification classify(const GeneratorSpec& g, const TimeGrid& grid, const PropertyConfig& cfg = {}) {
    if (cfg.claims.empty()) throw PreconditionError("classify: position battery is empty");
    const auto positions = claims_from_sources(cfg.claims, g.dimension());
    const OperatorProbe rho(g, grid, cfg.expectation, -1.0);

    const auto mono = check_monotonicity(rho, positions, cfg.constants, cfg.tol);
    const auto cash = check_translation_invariance(rho, positions, cfg.constants, cfg.tol);
    const auto conv = check_convexity(rho, positions, cfg.alphas, cfg.tol);
    const auto homog = check_positive_homogeneity(rho, positions, cfg.lambdas, cfg.tol);

    RiskClassification c;
    for (const auto* chk : {&mono, &cash, &conv, &homog}) {
        c.axiom_reports.push_back(chk->static_report);
        if (chk->dynamic_report) c.axiom_reports.push_back(*chk->dynamic_report);
    }

    // rho_T(X) = -X at every terminal node.
    c.terminal_identity.property = Property::constant_preservation;
    c.terminal_identity.level = Level::dynamic_operator;
    if (rho.is_lattice()) {
        for (const auto& x : positions) {
            const auto sol = rho.operator_().lattice(x.negated());
            const auto slice = conditional_slice(sol, grid.steps());
            const auto nodes = rho.terminal_nodes(x);
            double m = 0.0;
            for (std::size_t j = 0; j < slice.size(); ++j) m = std::max(m, std::fabs(slice[j] + nodes[j]));
            c.terminal_identity.add("X=" + x.label() + ", t=T", m);
        }
    }
    c.terminal_identity.finish(cfg.tol < 0.0 ? 0.0 : cfg.tol);
    c.axiom_reports.push_back(c.terminal_identity);

    c.operator_route.monetary = mono.pass() && cash.pass();
    c.operator_route.convex = c.operator_route.monetary && conv.pass();
    c.operator_route.coherent = c.operator_route.convex && homog.pass();

    const bool static_monetary = mono.static_report.pass && cash.static_report.pass;
    const bool static_convex = static_monetary && conv.static_report.pass;
    const bool static_coherent = static_convex && homog.static_report.pass;
    c.dynamic_follows_static = (!static_monetary || c.operator_route.monetary) &&
                               (!static_convex || c.operator_route.convex) &&
                               (!static_coherent || c.operator_route.coherent);
    if (!c.dynamic_follows_static) c.notes.push_back("a static verdict held but its nodewise dynamic check failed");

    c.generator_reports = check_generator_side(g, cfg.box.value_or(SampleBox::for_grid(grid)), cfg.generator_samples,
                                               cfg.seed, cfg.generator_tol);
    const auto& gr = c.generator_reports;
    c.generator_route.monetary = gr.y_independence.pass;
    c.generator_route.convex = c.generator_route.monetary && gr.convexity.pass;
    c.generator_route.coherent = c.generator_route.convex && gr.homogeneity.pass;

    c.route = Route::operator_tested;
    c.monetary = c.operator_route.monetary;
    c.convex = c.operator_route.convex;
    c.coherent = c.operator_route.coherent;

    // A generator failure within 10 tol of the threshold does not contradict either outcome.
    auto marginal = [](const PropertyReport& r) { return !r.pass && r.max_violation <= 10.0 * r.tol; };
    const bool mismatch =
        (c.operator_route.monetary != c.generator_route.monetary && !marginal(gr.y_independence)) ||
        (c.operator_route.monetary && c.generator_route.monetary &&
         c.operator_route.convex != c.generator_route.convex && !marginal(gr.convexity)) ||
        (c.operator_route.convex && c.generator_route.convex &&
         c.operator_route.coherent != c.generator_route.coherent && !marginal(gr.homogeneity));
    if (mismatch)
        throw ClassificationError("classify: operator route says '" + describe(c.operator_route) +
                                      "' but generator route says '" + describe(c.generator_route) + "'",
                                  c);
    return c;
}

} // namespace gexpect
