/**
 * @file properties.hpp
 * @brief Operator-level and generator-level checks of translation invariance,
 *        convexity, subadditivity and positive homogeneity, plus their equivalence verdicts
 *
 * Operator checks evaluate a functional v(X) = E_g[s X] (s = +1 for the
 * g-expectation itself, s = -1 for the induced risk measure) on a claim battery,
 * statically at t = 0 and nodewise on the lattice at two interior times.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/expectation.hpp"
#include "gexpect/gdsl.hpp"
#include "gexpect/lattice.hpp"
#include "gexpect/model.hpp"
#include "gexpect/random.hpp"

namespace gexpect {

enum class Property {
    translation_invariance,
    convexity,
    subadditivity,
    positive_homogeneity,
    monotonicity,
    constant_preservation,
};

enum class Level { static_operator, dynamic_operator, generator };

inline const char* to_string(Property p) {
    switch (p) {
    case Property::translation_invariance: return "translation_invariance";
    case Property::convexity: return "convexity";
    case Property::subadditivity: return "subadditivity";
    case Property::positive_homogeneity: return "positive_homogeneity";
    case Property::monotonicity: return "monotonicity";
    case Property::constant_preservation: return "constant_preservation";
    }
    return "?";
}

inline const char* to_string(Level l) {
    switch (l) {
    case Level::static_operator: return "static_operator";
    case Level::dynamic_operator: return "dynamic_operator";
    case Level::generator: return "generator";
    }
    return "?";
}

struct InstanceResult {
    std::string instance;
    double violation = 0.0;
};

struct PropertyReport {
    Property property = Property::translation_invariance;
    Level level = Level::static_operator;
    std::vector<InstanceResult> instances;
    std::size_t instances_tested = 0;
    double max_violation = 0.0;
    std::string witness;
    double tol = 0.0;
    bool pass = true;

    void add(std::string instance, double violation) {
        if (instances.empty() || violation > max_violation) {
            max_violation = violation;
            witness = instance;
        }
        instances.push_back({std::move(instance), violation});
        instances_tested = instances.size();
    }

    void finish(double tolerance) {
        tol = tolerance;
        pass = max_violation <= tol;
    }
};

/// Static (t = 0) and nodewise dynamic (interior times) reports of one property.
struct OperatorCheck {
    PropertyReport static_report;
    std::optional<PropertyReport> dynamic_report;

    bool pass() const { return static_report.pass && (!dynamic_report || dynamic_report->pass); }
    double max_violation() const {
        return std::max(static_report.max_violation, dynamic_report ? dynamic_report->max_violation : 0.0);
    }
};

namespace detail {

template <class F>
auto attributed(const std::string& instance, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const NumericError& e) {
        throw NumericError("instance " + instance + ": " + e.what());
    } catch (const EvaluationError& e) {
        throw EvaluationError("instance " + instance + ": " + e.what());
    } catch (const PreconditionError& e) {
        throw PreconditionError("instance " + instance + ": " + e.what());
    } catch (const ResourceError& e) {
        throw ResourceError("instance " + instance + ": " + e.what());
    }
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b, double shift = 0.0) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::fabs(a[j] - b[j] - shift));
    return m;
}

} // namespace detail

/**
 * Evaluates v(X) = E_g[sign * X] at t = 0 and, on the lattice, the node values of
 * E_g[sign * X | F_t] at the dynamic time indices.
 */
class OperatorProbe {
public:
    struct Value {
        double y0 = 0.0;
        double std_error = 0.0;
        std::vector<std::vector<double>> slices; ///< one per dynamic index (lattice only)
    };

    OperatorProbe(GeneratorSpec g, TimeGrid grid, ExpectationOptions opts = {}, double sign = 1.0)
        : op_(std::move(g), grid, std::move(opts)), sign_(sign) {
        const std::size_t n = grid.steps();
        for (std::size_t idx : {grid.index_of(0.25 * grid.horizon()), grid.index_of(0.5 * grid.horizon())})
            if (idx > 0 && idx < n && std::find(dynamic_.begin(), dynamic_.end(), idx) == dynamic_.end())
                dynamic_.push_back(idx);
    }

    const GExpectation& operator_() const noexcept { return op_; }
    const GeneratorSpec& generator() const noexcept { return op_.generator(); }
    const TimeGrid& grid() const noexcept { return op_.grid(); }
    double sign() const noexcept { return sign_; }
    bool is_lattice() const noexcept { return op_.options().method == Method::lattice; }
    const std::vector<std::size_t>& dynamic_indices() const noexcept { return dynamic_; }
    void set_dynamic_indices(std::vector<std::size_t> idx) { dynamic_ = std::move(idx); }

    Value operator()(const Claim& x) const {
        const Claim target = sign_ == 1.0 ? x : x.scaled(sign_);
        Value v;
        if (is_lattice()) {
            const auto sol = op_.lattice(target);
            v.y0 = sol.y0();
            for (std::size_t idx : dynamic_) {
                const auto s = conditional_slice(sol, idx);
                v.slices.emplace_back(s.begin(), s.end());
            }
        } else {
            const auto sol = op_.lsmc(target);
            v.y0 = sol.y0;
            v.std_error = sol.std_error;
        }
        return v;
    }

    /// Node values of X at the terminal level; used to decide X <= Y pointwise.
    std::vector<double> terminal_nodes(const Claim& x) const {
        const TimeGrid& g = grid();
        const double h = std::sqrt(g.dt());
        std::vector<double> out(g.steps() + 1);
        for (std::size_t j = 0; j <= g.steps(); ++j)
            out[j] = x.terminal_value((2.0 * static_cast<double>(j) - static_cast<double>(g.steps())) * h);
        return out;
    }

private:
    GExpectation op_;
    double sign_;
    std::vector<std::size_t> dynamic_;
};

namespace detail {

inline OperatorCheck make_check(Property p, const OperatorProbe& probe) {
    OperatorCheck c;
    c.static_report.property = p;
    c.static_report.level = Level::static_operator;
    if (probe.is_lattice() && !probe.dynamic_indices().empty()) {
        c.dynamic_report = PropertyReport{};
        c.dynamic_report->property = p;
        c.dynamic_report->level = Level::dynamic_operator;
    }
    return c;
}

/// For LSMC a negative tolerance means 3 standard errors of the widest instance.
inline void finish_check(OperatorCheck& c, double tol, double worst_se) {
    const double t = tol < 0.0 ? 3.0 * worst_se : tol;
    c.static_report.finish(t);
    if (c.dynamic_report) c.dynamic_report->finish(tol < 0.0 ? 1e-9 : tol);
}

inline std::string time_tag(const OperatorProbe& probe, std::size_t k) {
    return ", t=" + GeneratorSpec::number(probe.grid().time(probe.dynamic_indices()[k]));
}

} // namespace detail

/// |v(X + c) - v(X) - sign c| statically and nodewise.
inline OperatorCheck check_translation_invariance(const OperatorProbe& probe, const std::vector<Claim>& claims,
                                                  const std::vector<double>& constants, double tol) {
    if (claims.empty() || constants.empty())
        throw PreconditionError("check_translation_invariance: claims and constants must be nonempty");
    auto c = detail::make_check(Property::translation_invariance, probe);
    double worst_se = 0.0;
    for (const auto& x : claims) {
        const auto base = detail::attributed("xi=" + x.label(), [&] { return probe(x); });
        for (double k : constants) {
            const std::string inst = "xi=" + x.label() + ", c=" + GeneratorSpec::number(k);
            const auto moved = detail::attributed(inst, [&] { return probe(x.shifted(k)); });
            const double shift = probe.sign() * k;
            c.static_report.add(inst, std::fabs(moved.y0 - base.y0 - shift));
            worst_se = std::max(worst_se, moved.std_error + base.std_error);
            if (c.dynamic_report)
                for (std::size_t i = 0; i < moved.slices.size(); ++i)
                    c.dynamic_report->add(inst + detail::time_tag(probe, i),
                                          detail::max_abs_diff(moved.slices[i], base.slices[i], shift));
        }
    }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/// Positive part of v(a X + (1 - a) Y) - a v(X) - (1 - a) v(Y) over unordered pairs X != Y.
inline OperatorCheck check_convexity(const OperatorProbe& probe, const std::vector<Claim>& claims,
                                     const std::vector<double>& alphas, double tol) {
    if (claims.size() < 2 || alphas.empty())
        throw PreconditionError("check_convexity: need at least two claims and one alpha");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw PreconditionError("check_convexity: alphas must lie in [0, 1]");
    auto c = detail::make_check(Property::convexity, probe);
    std::vector<OperatorProbe::Value> base;
    for (const auto& x : claims) base.push_back(detail::attributed("xi=" + x.label(), [&] { return probe(x); }));
    double worst_se = 0.0;
    for (std::size_t i = 0; i < claims.size(); ++i)
        for (std::size_t j = i + 1; j < claims.size(); ++j)
            for (double a : alphas) {
                const std::string inst = "xi=" + claims[i].label() + ", eta=" + claims[j].label() +
                                         ", alpha=" + GeneratorSpec::number(a);
                const auto mix = detail::attributed(inst, [&] {
                    return probe(Claim::combine(a, claims[i], 1.0 - a, claims[j]));
                });
                c.static_report.add(inst, std::max(0.0, mix.y0 - a * base[i].y0 - (1.0 - a) * base[j].y0));
                worst_se = std::max(worst_se, mix.std_error + base[i].std_error + base[j].std_error);
                if (c.dynamic_report)
                    for (std::size_t k = 0; k < mix.slices.size(); ++k) {
                        double m = 0.0;
                        for (std::size_t n = 0; n < mix.slices[k].size(); ++n)
                            m = std::max(m, mix.slices[k][n] - a * base[i].slices[k][n] -
                                                (1.0 - a) * base[j].slices[k][n]);
                        c.dynamic_report->add(inst + detail::time_tag(probe, k), m);
                    }
            }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/// Positive part of v(X + Y) - v(X) - v(Y) over pairs i <= j.
inline OperatorCheck check_subadditivity(const OperatorProbe& probe, const std::vector<Claim>& claims, double tol) {
    if (claims.empty()) throw PreconditionError("check_subadditivity: claims must be nonempty");
    auto c = detail::make_check(Property::subadditivity, probe);
    std::vector<OperatorProbe::Value> base;
    for (const auto& x : claims) base.push_back(detail::attributed("xi=" + x.label(), [&] { return probe(x); }));
    double worst_se = 0.0;
    for (std::size_t i = 0; i < claims.size(); ++i)
        for (std::size_t j = i; j < claims.size(); ++j) {
            const std::string inst = "xi=" + claims[i].label() + ", eta=" + claims[j].label();
            const auto sum = detail::attributed(inst, [&] { return probe(Claim::combine(1.0, claims[i], 1.0, claims[j])); });
            c.static_report.add(inst, std::max(0.0, sum.y0 - base[i].y0 - base[j].y0));
            worst_se = std::max(worst_se, sum.std_error + base[i].std_error + base[j].std_error);
            if (c.dynamic_report)
                for (std::size_t k = 0; k < sum.slices.size(); ++k) {
                    double m = 0.0;
                    for (std::size_t n = 0; n < sum.slices[k].size(); ++n)
                        m = std::max(m, sum.slices[k][n] - base[i].slices[k][n] - base[j].slices[k][n]);
                    c.dynamic_report->add(inst + detail::time_tag(probe, k), m);
                }
        }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/// |v(l X) - l v(X)| for l >= 0.
inline OperatorCheck check_positive_homogeneity(const OperatorProbe& probe, const std::vector<Claim>& claims,
                                                const std::vector<double>& lambdas, double tol) {
    if (claims.empty() || lambdas.empty())
        throw PreconditionError("check_positive_homogeneity: claims and lambdas must be nonempty");
    for (double l : lambdas)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw PreconditionError("check_positive_homogeneity: lambdas must be finite and >= 0");
    auto c = detail::make_check(Property::positive_homogeneity, probe);
    double worst_se = 0.0;
    for (const auto& x : claims) {
        const auto base = detail::attributed("xi=" + x.label(), [&] { return probe(x); });
        for (double l : lambdas) {
            const std::string inst = "xi=" + x.label() + ", lambda=" + GeneratorSpec::number(l);
            const auto sc = detail::attributed(inst, [&] { return probe(x.scaled(l)); });
            c.static_report.add(inst, std::fabs(sc.y0 - l * base.y0));
            worst_se = std::max(worst_se, sc.std_error + l * base.std_error);
            if (c.dynamic_report)
                for (std::size_t k = 0; k < sc.slices.size(); ++k) {
                    double m = 0.0;
                    for (std::size_t n = 0; n < sc.slices[k].size(); ++n)
                        m = std::max(m, std::fabs(sc.slices[k][n] - l * base.slices[k][n]));
                    c.dynamic_report->add(inst + detail::time_tag(probe, k), m);
                }
        }
    }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/**
 * For X <= Y at every terminal lattice node: sign * (v(X) - v(Y)) <= 0.
 * Pairs come from the battery and from X versus X + |c| for each constant.
 */
inline OperatorCheck check_monotonicity(const OperatorProbe& probe, const std::vector<Claim>& claims,
                                        const std::vector<double>& constants, double tol) {
    if (claims.empty()) throw PreconditionError("check_monotonicity: claims must be nonempty");
    auto c = detail::make_check(Property::monotonicity, probe);
    std::vector<Claim> pool = claims;
    for (const auto& x : claims)
        for (double k : constants)
            if (k != 0.0) pool.push_back(x.shifted(std::fabs(k)));
    std::vector<std::vector<double>> nodes;
    std::vector<OperatorProbe::Value> vals;
    for (const auto& x : pool) {
        nodes.push_back(probe.terminal_nodes(x));
        vals.push_back(detail::attributed("xi=" + x.label(), [&] { return probe(x); }));
    }
    double worst_se = 0.0;
    const double s = probe.sign();
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = 0; j < pool.size(); ++j) {
            if (i == j) continue;
            bool below = true;
            for (std::size_t n = 0; n < nodes[i].size() && below; ++n) below = nodes[i][n] <= nodes[j][n];
            if (!below) continue;
            const std::string inst = "X=" + pool[i].label() + " <= Y=" + pool[j].label();
            c.static_report.add(inst, std::max(0.0, s * (vals[i].y0 - vals[j].y0)));
            worst_se = std::max(worst_se, vals[i].std_error + vals[j].std_error);
            if (c.dynamic_report)
                for (std::size_t k = 0; k < vals[i].slices.size(); ++k) {
                    double m = 0.0;
                    for (std::size_t n = 0; n < vals[i].slices[k].size(); ++n)
                        m = std::max(m, s * (vals[i].slices[k][n] - vals[j].slices[k][n]));
                    c.dynamic_report->add(inst + detail::time_tag(probe, k), m);
                }
        }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/// |v(c) - sign c|.
inline OperatorCheck check_constant_preservation(const OperatorProbe& probe, const std::vector<double>& constants,
                                                 double tol) {
    if (constants.empty()) throw PreconditionError("check_constant_preservation: constants must be nonempty");
    auto c = detail::make_check(Property::constant_preservation, probe);
    double worst_se = 0.0;
    const std::size_t d = probe.generator().dimension();
    for (double k : constants) {
        const std::string inst = "c=" + GeneratorSpec::number(k);
        const auto v = detail::attributed(inst, [&] { return probe(Claim::constant(d, k)); });
        const double target = probe.sign() * k;
        c.static_report.add(inst, std::fabs(v.y0 - target));
        worst_se = std::max(worst_se, v.std_error);
        if (c.dynamic_report)
            for (std::size_t i = 0; i < v.slices.size(); ++i) {
                double m = 0.0;
                for (double n : v.slices[i]) m = std::max(m, std::fabs(n - target));
                c.dynamic_report->add(inst + detail::time_tag(probe, i), m);
            }
    }
    detail::finish_check(c, tol, worst_se);
    return c;
}

/// Generator-level reports, in order: y-independence, convexity in z, subadditivity in z, homogeneity in (y, z).
struct GeneratorSideReport {
    PropertyReport y_independence;
    PropertyReport convexity;
    PropertyReport subadditivity;
    PropertyReport homogeneity;
};

/**
 * Sampled generator properties. A fixed set of probe points along z_1 is
 * checked first, then `n` random samples from `box`.
 */
inline GeneratorSideReport check_generator_side(const GeneratorSpec& g, const SampleBox& box, std::size_t n,
                                                std::uint64_t seed, double tol) {
    if (n < 1) throw PreconditionError("check_generator_side: n must be >= 1");
    box.validate();
    const std::size_t d = g.dimension();
    GeneratorSideReport r;
    r.y_independence.property = Property::translation_invariance;
    r.convexity.property = Property::convexity;
    r.subadditivity.property = Property::subadditivity;
    r.homogeneity.property = Property::positive_homogeneity;
    for (auto* rep : {&r.y_independence, &r.convexity, &r.subadditivity, &r.homogeneity}) rep->level = Level::generator;

    std::vector<double> z1(d), z2(d), zm(d);
    auto eval = [&](double t, double y, const std::vector<double>& z) {
        try {
            return g.checked(t, y, z);
        } catch (const EvaluationError& e) {
            throw EvaluationError(std::string("generator-side check: ") + e.what());
        }
    };
    auto point = [](double t, double y, const std::vector<double>& z) { return GeneratorSpec::describe_point(t, y, z); };

    auto run = [&](double t, double y1, double y2, double a, double lam) {
        // y-independence
        r.y_independence.add(point(t, y1, z1) + " vs y=" + GeneratorSpec::number(y2),
                             std::fabs(eval(t, y1, z1) - eval(t, y2, z1)));
        // convexity in z at fixed y
        for (std::size_t k = 0; k < d; ++k) zm[k] = a * z1[k] + (1.0 - a) * z2[k];
        const double g1 = eval(t, y1, z1), g2 = eval(t, y1, z2);
        r.convexity.add(point(t, y1, z1) + ", z2=" + point(t, y1, z2) + ", alpha=" + GeneratorSpec::number(a),
                        std::max(0.0, eval(t, y1, zm) - a * g1 - (1.0 - a) * g2));
        // subadditivity in z at fixed y
        for (std::size_t k = 0; k < d; ++k) zm[k] = z1[k] + z2[k];
        r.subadditivity.add(point(t, y1, z1) + " + " + point(t, y1, z2),
                            std::max(0.0, eval(t, y1, zm) - g1 - g2));
        // homogeneity in (y, z)
        for (std::size_t k = 0; k < d; ++k) zm[k] = lam * z1[k];
        r.homogeneity.add(point(t, y1, z1) + ", lambda=" + GeneratorSpec::number(lam),
                          std::fabs(eval(t, lam * y1, zm) - lam * g1));
    };

    struct Probe {
        double y1, y2, za, zb, a, lam;
    };
    static constexpr Probe probes[] = {
        {0.0, 1.5707963267948966, 1.0, -1.0, 0.5, 2.0},
        {0.0, 1.0, 1.0, 1.0, 0.25, 0.5},
        {1.0, -1.0, 2.0, -2.0, 0.5, 3.0},
        {-1.0, 0.5, 0.5, 1.5, 0.75, 2.0},
        {0.0, 2.0, -1.0, 3.0, 0.5, 1.5},
        {1.0, 0.0, 0.0, 1.0, 0.5, 2.5},
    };
    const double t0 = box.t_lo;
    for (const auto& p : probes) {
        std::fill(z1.begin(), z1.end(), 0.0);
        std::fill(z2.begin(), z2.end(), 0.0);
        z1[0] = p.za;
        z2[0] = p.zb;
        run(t0, p.y1, p.y2, p.a, p.lam);
    }

    const random::CounterStream stream(seed, random::Domain::property_sampling);
    for (std::size_t s = 0; s < n; ++s) {
        const double t = stream.uniform(s, 0, 0, box.t_lo, box.t_hi);
        const double y1 = stream.uniform(s, 1, 0, box.y_lo, box.y_hi);
        const double y2 = stream.uniform(s, 2, 0, box.y_lo, box.y_hi);
        const double a = stream.uniform(s, 5, 0);
        const double lam = stream.uniform(s, 6, 0, 0.0, 4.0);
        for (std::size_t k = 0; k < d; ++k) {
            z1[k] = stream.uniform(s, 3, static_cast<std::uint32_t>(k), box.z_lo, box.z_hi);
            z2[k] = stream.uniform(s, 4, static_cast<std::uint32_t>(k), box.z_lo, box.z_hi);
        }
        run(t, y1, y2, a, lam);
    }
    for (auto* rep : {&r.y_independence, &r.convexity, &r.subadditivity, &r.homogeneity}) rep->finish(tol);
    return r;
}

struct TransformIdentityResult {
    double shift_lhs = 0.0;   ///< E_{g^c}[xi + c]
    double shift_rhs = 0.0;   ///< E_g[xi] + c
    double scale_lhs = 0.0;   ///< E_{g~^a}[a xi]
    double scale_rhs = 0.0;   ///< a E_g[xi]
    double shift_difference = 0.0;
    double scale_difference = 0.0;
    bool pass = false;
};

/// Lattice identities for g^c(t,y,z) = g(t,y-c,z) and g~^a(t,y,z) = a g(t,y/a,z/a).
inline TransformIdentityResult transform_identity_checks(const GeneratorSpec& g, double c, double alpha,
                                                         const Claim& xi, const TimeGrid& grid, double tol,
                                                         const LatticeOptions& opts = {}) {
    if (!(alpha > 0.0)) throw PreconditionError("transform_identity_checks: alpha must be > 0");
    TransformIdentityResult r;
    const double base = solve_lattice(g, xi, grid, opts).y0();
    r.shift_lhs = solve_lattice(g.shifted_in_y(c), xi.shifted(c), grid, opts).y0();
    r.shift_rhs = base + c;
    r.scale_lhs = solve_lattice(g.rescaled(alpha), xi.scaled(alpha), grid, opts).y0();
    r.scale_rhs = alpha * base;
    r.shift_difference = std::fabs(r.shift_lhs - r.shift_rhs);
    r.scale_difference = std::fabs(r.scale_lhs - r.scale_rhs);
    r.pass = r.shift_difference <= tol && r.scale_difference <= tol;
    return r;
}

/// Default battery of terminal claims for d = 1.
inline std::vector<std::string> default_claim_sources() {
    return {"x", "-x", "x*x", "abs(x)", "pos(x-0.5)", "min(x,1)"};
}

inline std::vector<Claim> claims_from_sources(const std::vector<std::string>& sources, std::size_t d = 1) {
    std::vector<Claim> out;
    for (const auto& s : sources) out.push_back(gdsl::parse_claim(s, d));
    return out;
}

struct PropertyConfig {
    std::vector<std::string> claims = default_claim_sources();
    std::vector<double> constants{-2.0, -0.5, 0.0, 1.0, 5.0};
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> lambdas{0.0, 0.5, 1.0, 2.5};
    double tol = 1e-9;            ///< operator checks (negative: 3 SE for LSMC)
    double generator_tol = 1e-9;
    std::size_t generator_samples = 10000;
    std::uint64_t seed = 42;
    std::optional<SampleBox> box;
    ExpectationOptions expectation;
};

/// Which generator property a theorem pairs with which operator property.
enum class Equivalence { translation_invariance, convexity, subadditivity, positive_homogeneity };

inline const char* to_string(Equivalence e) {
    switch (e) {
    case Equivalence::translation_invariance: return "translation_invariance";
    case Equivalence::convexity: return "convexity";
    case Equivalence::subadditivity: return "subadditivity";
    case Equivalence::positive_homogeneity: return "positive_homogeneity";
    }
    return "?";
}

enum class Consistency { consistent, inconsistent, inconclusive };

inline const char* to_string(Consistency c) {
    switch (c) {
    case Consistency::consistent: return "consistent";
    case Consistency::inconsistent: return "inconsistent";
    case Consistency::inconclusive: return "inconclusive";
    }
    return "?";
}

struct TheoremVerdict {
    Equivalence theorem = Equivalence::translation_invariance;
    PropertyReport generator_side;
    std::vector<PropertyReport> operator_side;
    Consistency status = Consistency::inconclusive;
    bool consistent = false;
    std::vector<std::string> notes;
};

/**
 * consistent: generator pass and every operator report passes, or the generator
 * fails by more than 10 tol and some operator report exceeds its tol, or the
 * generator fails only marginally. A generator failure without an operator
 * witness is inconclusive; a generator pass with an operator failure is inconsistent.
 */
inline Consistency judge(const PropertyReport& generator_side, const std::vector<PropertyReport>& operator_side) {
    bool all_pass = true;
    for (const auto& r : operator_side) all_pass = all_pass && r.pass;
    if (generator_side.pass) return all_pass ? Consistency::consistent : Consistency::inconsistent;
    if (generator_side.max_violation > 10.0 * generator_side.tol)
        return all_pass ? Consistency::inconclusive : Consistency::consistent;
    return Consistency::consistent;
}

inline TheoremVerdict theorem_verdict(Equivalence theorem, const GeneratorSpec& g, const TimeGrid& grid,
                                      const PropertyConfig& cfg = {}) {
    TheoremVerdict v;
    v.theorem = theorem;
    try {
        const auto claims = claims_from_sources(cfg.claims, g.dimension());
        const auto gen = check_generator_side(g, cfg.box.value_or(SampleBox::for_grid(grid)), cfg.generator_samples,
                                              cfg.seed, cfg.generator_tol);
        const OperatorProbe probe(g, grid, cfg.expectation);
        OperatorCheck op;
        switch (theorem) {
        case Equivalence::translation_invariance:
            v.generator_side = gen.y_independence;
            op = check_translation_invariance(probe, claims, cfg.constants, cfg.tol);
            break;
        case Equivalence::convexity:
            v.generator_side = gen.convexity;
            op = check_convexity(probe, claims, cfg.alphas, cfg.tol);
            break;
        case Equivalence::subadditivity:
            v.generator_side = gen.subadditivity;
            op = check_subadditivity(probe, claims, cfg.tol);
            break;
        case Equivalence::positive_homogeneity:
            v.generator_side = gen.homogeneity;
            op = check_positive_homogeneity(probe, claims, cfg.lambdas, cfg.tol);
            break;
        }
        v.operator_side.push_back(op.static_report);
        if (op.dynamic_report) v.operator_side.push_back(*op.dynamic_report);
        v.status = judge(v.generator_side, v.operator_side);
        if (v.status == Consistency::inconclusive)
            v.notes.push_back("generator-side property fails but no operator witness was found in the battery");
        if (v.status == Consistency::inconsistent)
            v.notes.push_back("generator-side property holds but an operator check failed");
    } catch (const Error& e) {
        v.status = Consistency::inconclusive;
        v.notes.push_back(e.what());
    }
    v.consistent = v.status == Consistency::consistent;
    return v;
}

} // namespace gexpect
