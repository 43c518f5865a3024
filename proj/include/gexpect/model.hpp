/**
 * @file model.hpp
 * @brief Domain types (time grid, generator, claim) and sampled checks of the Lipschitz bound and g(t, y, 0) = 0
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/random.hpp"

namespace gexpect {

/// Uniform partition of [0, T] into N steps.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw PreconditionError("time grid: horizon must be positive and finite");
        if (steps < 1) throw PreconditionError("time grid: at least one step is required");
        dt_ = horizon / static_cast<double>(steps);
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }

    /// t_i = i * dt, with t_N pinned to the horizon.
    double time(std::size_t i) const noexcept {
        return i == steps_ ? horizon_ : static_cast<double>(i) * dt_;
    }

    /// Index of the grid time closest to `t` (clamped to [0, N]).
    std::size_t index_of(double t) const noexcept {
        const double r = std::round(t / dt_);
        if (r <= 0.0) return 0;
        if (r >= static_cast<double>(steps_)) return steps_;
        return static_cast<std::size_t>(r);
    }

private:
    double horizon_;
    std::size_t steps_;
    double dt_;
};

/// Structural claims about a generator; verified by sampling, never trusted.
struct DeclaredFlags {
    std::optional<bool> independent_of_y;
    std::optional<bool> convex_in_z;
    std::optional<bool> subadditive_in_z;
    std::optional<bool> positively_homogeneous;
};

using DriverFn = std::function<double(double t, double y, std::span<const double> z)>;

/**
 * BSDE driver g(t, y, z) with z in R^d and a declared Lipschitz bound K.
 *
 * Immutable after construction; copies share the body.
 */
class GeneratorSpec {
public:
    GeneratorSpec(std::size_t dimension, DriverFn body, double lipschitz, std::string label = "g",
                  DeclaredFlags flags = {})
        : dimension_(dimension),
          body_(std::make_shared<const DriverFn>(std::move(body))),
          lipschitz_(lipschitz),
          label_(std::move(label)),
          flags_(flags) {
        if (dimension_ < 1) throw PreconditionError("generator: dimension must be >= 1");
        if (!(lipschitz_ >= 0.0) || !std::isfinite(lipschitz_))
            throw PreconditionError("generator: declared Lipschitz constant must be finite and >= 0");
        if (!*body_) throw PreconditionError("generator: empty body");
    }

    std::size_t dimension() const noexcept { return dimension_; }
    double lipschitz() const noexcept { return lipschitz_; }
    const std::string& label() const noexcept { return label_; }
    const DeclaredFlags& flags() const noexcept { return flags_; }

    double operator()(double t, double y, std::span<const double> z) const { return (*body_)(t, y, z); }
    double operator()(double t, double y, double z1) const {
        return (*body_)(t, y, std::span<const double>(&z1, 1));
    }

    /// Evaluates and throws EvaluationError naming the point if the value is not finite.
    double checked(double t, double y, std::span<const double> z) const {
        const double v = (*body_)(t, y, z);
        if (!std::isfinite(v)) throw EvaluationError(label_ + " is not finite at " + describe_point(t, y, z));
        return v;
    }
    double checked(double t, double y, double z1) const {
        return checked(t, y, std::span<const double>(&z1, 1));
    }

    /// g^c(t, y, z) = g(t, y - c, z).
    GeneratorSpec shifted_in_y(double c) const {
        auto body = body_;
        return GeneratorSpec(
            dimension_, [body, c](double t, double y, std::span<const double> z) { return (*body)(t, y - c, z); },
            lipschitz_, label_ + "^shift(" + number(c) + ")", flags_);
    }

    /// g~^a(t, y, z) = a * g(t, y / a, z / a), a > 0.
    GeneratorSpec rescaled(double a) const {
        if (!(a > 0.0)) throw PreconditionError("generator rescale: factor must be > 0");
        auto body = body_;
        const std::size_t d = dimension_;
        return GeneratorSpec(
            dimension_,
            [body, a, d](double t, double y, std::span<const double> z) {
                double buf[8];
                std::vector<double> heap;
                double* scaled = buf;
                if (d > 8) {
                    heap.resize(d);
                    scaled = heap.data();
                }
                for (std::size_t k = 0; k < d; ++k) scaled[k] = z[k] / a;
                return a * (*body)(t, y / a, std::span<const double>(scaled, d));
            },
            lipschitz_, label_ + "^scale(" + number(a) + ")", flags_);
    }

    static std::string describe_point(double t, double y, std::span<const double> z) {
        std::string s = "(t=" + number(t) + ", y=" + number(y) + ", z=[";
        for (std::size_t k = 0; k < z.size(); ++k) s += (k ? "," : "") + number(z[k]);
        return s + "])";
    }

    static std::string number(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

private:
    std::size_t dimension_;
    std::shared_ptr<const DriverFn> body_;
    double lipschitz_;
    std::string label_;
    DeclaredFlags flags_;
};

/// Grid-sampled Brownian path: points B_{t_0..t_N}, each a d-vector, row-major.
struct PathView {
    std::span<const double> points;
    std::size_t dimension;

    std::size_t steps() const noexcept { return points.size() / dimension - 1; }
    std::span<const double> at(std::size_t i) const noexcept { return points.subspan(i * dimension, dimension); }
    std::span<const double> terminal() const noexcept { return at(steps()); }
};

/// Extra regression state appended for path functionals.
enum class PathState { none, running_max, running_min, running_extrema };

using TerminalFn = std::function<double(std::span<const double> x)>;
using PathFn = std::function<double(const PathView&)>;

enum class ClaimKind { terminal_function, path_functional };

/**
 * Terminal payoff xi in L^2(F_T): either phi(B_T) or a functional of the sampled path.
 *
 * The Lipschitz bound is bookkeeping for square integrability; combinators
 * propagate it.
 */
class Claim {
public:
    static Claim terminal(std::size_t dimension, TerminalFn phi, double lipschitz, std::string label) {
        if (dimension < 1) throw PreconditionError("claim: dimension must be >= 1");
        Claim c;
        c.kind_ = ClaimKind::terminal_function;
        c.dimension_ = dimension;
        c.terminal_ = std::make_shared<const TerminalFn>(std::move(phi));
        c.lipschitz_ = lipschitz;
        c.label_ = std::move(label);
        return c;
    }

    static Claim path(std::size_t dimension, PathFn functional, double lipschitz, std::string label,
                      PathState state = PathState::none) {
        if (dimension < 1) throw PreconditionError("claim: dimension must be >= 1");
        Claim c;
        c.kind_ = ClaimKind::path_functional;
        c.dimension_ = dimension;
        c.path_ = std::make_shared<const PathFn>(std::move(functional));
        c.lipschitz_ = lipschitz;
        c.label_ = std::move(label);
        c.state_ = state;
        return c;
    }

    static Claim constant(std::size_t dimension, double value) {
        return terminal(dimension, [value](std::span<const double>) { return value; }, 0.0,
                        GeneratorSpec::number(value));
    }

    ClaimKind kind() const noexcept { return kind_; }
    std::size_t dimension() const noexcept { return dimension_; }
    double lipschitz() const noexcept { return lipschitz_; }
    const std::string& label() const noexcept { return label_; }
    PathState path_state() const noexcept { return state_; }

    /// phi(x); only for terminal-function claims.
    double terminal_value(std::span<const double> x) const {
        if (kind_ != ClaimKind::terminal_function)
            throw PreconditionError("claim '" + label_ + "' is a path functional, not a terminal function");
        return (*terminal_)(x);
    }
    double terminal_value(double x) const { return terminal_value(std::span<const double>(&x, 1)); }

    double path_value(const PathView& path) const {
        if (kind_ == ClaimKind::terminal_function) return (*terminal_)(path.terminal());
        return (*path_)(path);
    }

    /// a*xi + b*eta. Terminal if both operands are.
    static Claim combine(double a, const Claim& xi, double b, const Claim& eta, std::string label = {}) {
        if (xi.dimension_ != eta.dimension_) throw PreconditionError("claim combine: dimension mismatch");
        if (label.empty())
            label = GeneratorSpec::number(a) + "*(" + xi.label_ + ")+" + GeneratorSpec::number(b) + "*(" +
                    eta.label_ + ")";
        const double lip = std::fabs(a) * xi.lipschitz_ + std::fabs(b) * eta.lipschitz_;
        if (xi.kind_ == ClaimKind::terminal_function && eta.kind_ == ClaimKind::terminal_function) {
            auto f = xi.terminal_;
            auto h = eta.terminal_;
            return terminal(
                xi.dimension_, [f, h, a, b](std::span<const double> x) { return a * (*f)(x) + b * (*h)(x); }, lip,
                std::move(label));
        }
        return path(
            xi.dimension_, [xi, eta, a, b](const PathView& p) { return a * xi.path_value(p) + b * eta.path_value(p); },
            lip, std::move(label), merge(xi.state_, eta.state_));
    }

    Claim scaled(double a) const {
        return map(this, [a](double v) { return a * v; }, std::fabs(a) * lipschitz_,
                   GeneratorSpec::number(a) + "*(" + label_ + ")");
    }
    Claim shifted(double c) const {
        return map(this, [c](double v) { return v + c; }, lipschitz_,
                   "(" + label_ + ")+" + GeneratorSpec::number(c));
    }
    Claim negated() const {
        return map(this, [](double v) { return -v; }, lipschitz_, "-(" + label_ + ")");
    }

private:
    Claim() = default;

    template <class F>
    static Claim map(const Claim* self, F f, double lip, std::string label) {
        if (self->kind_ == ClaimKind::terminal_function) {
            auto phi = self->terminal_;
            return terminal(
                self->dimension_, [phi, f](std::span<const double> x) { return f((*phi)(x)); }, lip,
                std::move(label));
        }
        auto fn = self->path_;
        return path(
            self->dimension_, [fn, f](const PathView& p) { return f((*fn)(p)); }, lip, std::move(label),
            self->state_);
    }

    static PathState merge(PathState a, PathState b) {
        if (a == b || b == PathState::none) return a;
        if (a == PathState::none) return b;
        return PathState::running_extrema;
    }

    ClaimKind kind_ = ClaimKind::terminal_function;
    std::size_t dimension_ = 1;
    std::shared_ptr<const TerminalFn> terminal_;
    std::shared_ptr<const PathFn> path_;
    double lipschitz_ = 0.0;
    std::string label_;
    PathState state_ = PathState::none;
};

/// Sampling ranges for (t, y, z); z ranges apply to every coordinate.
struct SampleBox {
    double t_lo = 0.0, t_hi = 1.0;
    double y_lo = -10.0, y_hi = 10.0;
    double z_lo = -10.0, z_hi = 10.0;

    static SampleBox for_grid(const TimeGrid& grid) {
        SampleBox box;
        box.t_hi = grid.horizon();
        return box;
    }

    void validate() const {
        for (double v : {t_lo, t_hi, y_lo, y_hi, z_lo, z_hi})
            if (!std::isfinite(v)) throw PreconditionError("sample box: ranges must be finite");
        if (t_lo > t_hi || y_lo > y_hi || z_lo > z_hi) throw PreconditionError("sample box: inverted range");
    }
};

struct AssumptionReport {
    double lipschitz_max_quotient = 0.0;
    bool lipschitz_pass = true;
    double zero_z_max_abs = 0.0;
    bool zero_z_pass = true;
    std::size_t samples = 0;
    double tolerance = 0.0;
    std::string lipschitz_witness;
    std::string zero_z_witness;
};

inline constexpr std::size_t kDefaultAssumptionSamples = 100000;

/**
 * Falsification attempt for the Lipschitz bound with the declared K, and for g(t, y, 0) = 0.
 *
 * Draws n_samples point pairs from a counter-based stream keyed by `seed`;
 * pairs with zero distance are skipped.
 */
inline AssumptionReport validate_assumptions(const GeneratorSpec& g, const SampleBox& box, std::size_t n_samples,
                                             double tol, std::uint64_t seed) {
    if (n_samples < 1) throw PreconditionError("validate_assumptions: n_samples must be >= 1");
    if (!(tol > 0.0)) throw PreconditionError("validate_assumptions: tol must be > 0");
    box.validate();

    const std::size_t d = g.dimension();
    const random::CounterStream stream(seed, random::Domain::assumption_sampling);
    std::vector<double> z1(d), z2(d), zero(d, 0.0);

    AssumptionReport rep;
    rep.samples = n_samples;
    rep.tolerance = tol;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double t = stream.uniform(s, 0, 0, box.t_lo, box.t_hi);
        const double y1 = stream.uniform(s, 1, 0, box.y_lo, box.y_hi);
        const double y2 = stream.uniform(s, 2, 0, box.y_lo, box.y_hi);
        double dz2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            z1[k] = stream.uniform(s, 3, static_cast<std::uint32_t>(k), box.z_lo, box.z_hi);
            z2[k] = stream.uniform(s, 4, static_cast<std::uint32_t>(k), box.z_lo, box.z_hi);
            dz2 += (z1[k] - z2[k]) * (z1[k] - z2[k]);
        }
        const double g1 = g.checked(t, y1, z1);
        const double g2 = g.checked(t, y2, z2);
        const double dist = std::fabs(y1 - y2) + std::sqrt(dz2);
        if (dist > 0.0) {
            const double q = std::fabs(g1 - g2) / dist;
            if (q > rep.lipschitz_max_quotient) {
                rep.lipschitz_max_quotient = q;
                rep.lipschitz_witness = GeneratorSpec::describe_point(t, y1, z1) + " vs " +
                                 GeneratorSpec::describe_point(t, y2, z2);
            }
        }
        const double g0 = std::fabs(g.checked(t, y1, zero));
        if (g0 > rep.zero_z_max_abs) {
            rep.zero_z_max_abs = g0;
            rep.zero_z_witness = GeneratorSpec::describe_point(t, y1, zero);
        }
    }
    rep.lipschitz_pass = rep.lipschitz_max_quotient <= g.lipschitz() * (1.0 + tol);
    rep.zero_z_pass = rep.zero_z_max_abs <= tol;
    return rep;
}

} // namespace gexpect
