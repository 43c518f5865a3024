#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gexpect/gdsl.hpp"
#include "gexpect/model.hpp"

using namespace gexpect;

namespace {

GeneratorSpec abs_z(double k = 0.3) {
    return GeneratorSpec(1, [k](double, double, std::span<const double> z) { return k * std::fabs(z[0]); }, k, "k|z|");
}

GeneratorSpec sin_y() {
    return GeneratorSpec(
        1, [](double, double y, std::span<const double> z) { return std::sin(y) * std::min(std::fabs(z[0]), 1.0); },
        1.0, "sin(y)min(|z|,1)");
}

} // namespace

TEST(TimeGrid, StepAndEndpoints) {
    const TimeGrid g(1.0, 3);
    EXPECT_EQ(g.steps(), 3u);
    EXPECT_DOUBLE_EQ(g.dt(), 1.0 / 3.0);
    EXPECT_EQ(g.time(0), 0.0);
    EXPECT_EQ(g.time(3), 1.0);
    EXPECT_NEAR(g.dt() * 3.0, 1.0, std::numeric_limits<double>::epsilon());
}

TEST(TimeGrid, StrictlyIncreasing) {
    const TimeGrid g(0.7, 1000);
    for (std::size_t i = 0; i < g.steps(); ++i) ASSERT_LT(g.time(i), g.time(i + 1));
}

TEST(TimeGrid, IndexOf) {
    const TimeGrid g(1.0, 256);
    EXPECT_EQ(g.index_of(0.25), 64u);
    EXPECT_EQ(g.index_of(0.5), 128u);
    EXPECT_EQ(g.index_of(-1.0), 0u);
    EXPECT_EQ(g.index_of(2.0), 256u);
}

TEST(TimeGrid, RejectsBadInput) {
    EXPECT_THROW(TimeGrid(0.0, 10), PreconditionError);
    EXPECT_THROW(TimeGrid(-1.0, 10), PreconditionError);
    EXPECT_THROW(TimeGrid(1.0, 0), PreconditionError);
    EXPECT_THROW(TimeGrid(std::numeric_limits<double>::infinity(), 4), PreconditionError);
}

TEST(GeneratorSpec, RejectsBadLipschitz) {
    auto body = [](double, double, std::span<const double>) { return 0.0; };
    EXPECT_THROW(GeneratorSpec(1, body, -1.0, "g"), PreconditionError);
    EXPECT_THROW(GeneratorSpec(1, body, std::nan(""), "g"), PreconditionError);
    EXPECT_THROW(GeneratorSpec(0, body, 1.0, "g"), PreconditionError);
}

TEST(GeneratorSpec, CheckedNamesThePoint) {
    const GeneratorSpec g(1, [](double, double y, std::span<const double>) { return std::log(y); }, 1.0, "log");
    try {
        (void)g.checked(0.5, -1.0, 2.0);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("y=-1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("t=0.5"), std::string::npos) << msg;
    }
}

TEST(GeneratorSpec, Transforms) {
    const auto g = sin_y();
    const auto shifted = g.shifted_in_y(2.0);
    EXPECT_DOUBLE_EQ(shifted(0.0, 3.0, 0.5), g(0.0, 1.0, 0.5));
    const auto scaled = g.rescaled(3.0);
    EXPECT_DOUBLE_EQ(scaled(0.0, 3.0, 1.5), 3.0 * g(0.0, 1.0, 0.5));
    EXPECT_THROW((void)g.rescaled(0.0), PreconditionError);
}

TEST(Claim, CombinatorsEvaluatePointwise) {
    const auto x = Claim::terminal(1, [](std::span<const double> v) { return v[0]; }, 1.0, "x");
    const auto sq = Claim::terminal(1, [](std::span<const double> v) { return v[0] * v[0]; }, 0.0, "x*x");
    const auto mix = Claim::combine(0.25, x, 0.75, sq);
    EXPECT_DOUBLE_EQ(mix.terminal_value(2.0), 0.25 * 2.0 + 0.75 * 4.0);
    EXPECT_DOUBLE_EQ(x.shifted(1.5).terminal_value(2.0), 3.5);
    EXPECT_DOUBLE_EQ(x.scaled(-2.0).terminal_value(2.0), -4.0);
    EXPECT_DOUBLE_EQ(x.negated().terminal_value(2.0), -2.0);
    EXPECT_DOUBLE_EQ(Claim::constant(1, 7.0).terminal_value(-3.0), 7.0);
    EXPECT_DOUBLE_EQ(mix.lipschitz(), 0.25);
}

TEST(Claim, PathFunctional) {
    const auto running_max = Claim::path(
        1,
        [](const PathView& p) {
            double m = p.at(0)[0];
            for (std::size_t i = 1; i <= p.steps(); ++i) m = std::max(m, p.at(i)[0]);
            return m;
        },
        1.0, "max", PathState::running_max);
    const std::vector<double> pts{0.0, 0.3, -0.1, 0.2};
    EXPECT_DOUBLE_EQ(running_max.path_value(PathView{pts, 1}), 0.3);
    EXPECT_EQ(running_max.kind(), ClaimKind::path_functional);
}

TEST(ValidateAssumptions, AbsZ) {
    const auto r = validate_assumptions(abs_z(), SampleBox{}, 20000, 1e-9, 1);
    EXPECT_TRUE(r.lipschitz_pass);
    EXPECT_LE(r.lipschitz_max_quotient, 0.3 * (1.0 + 1e-9));
    EXPECT_EQ(r.zero_z_max_abs, 0.0);
    EXPECT_TRUE(r.zero_z_pass);
    EXPECT_EQ(r.samples, 20000u);
}

TEST(ValidateAssumptions, IdentityInYFailsZeroAtZeroZ) {
    const GeneratorSpec g(1, [](double, double y, std::span<const double>) { return y; }, 1.0, "y");
    const auto r = validate_assumptions(g, SampleBox{}, 1000, 1e-9, 1);
    EXPECT_TRUE(r.lipschitz_pass);
    EXPECT_FALSE(r.zero_z_pass);
    EXPECT_GT(r.zero_z_max_abs, 1.0);
    EXPECT_FALSE(r.zero_z_witness.empty());
}

TEST(ValidateAssumptions, SinGeneratorAgainstDenseGrid) {
    // Oracle: largest difference quotient between neighbouring points of a dense grid.
    const auto g = sin_y();
    const int n = 400;
    const double lo = -10.0, h = 20.0 / n;
    double dense = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double y = lo + a * h, z = lo + b * h;
            const double v = g(0.0, y, z);
            dense = std::max(dense, std::fabs(g(0.0, y + h, z) - v) / h);
            dense = std::max(dense, std::fabs(g(0.0, y, z + h) - v) / h);
            dense = std::max(dense, std::fabs(g(0.0, y + h, z + h) - v) / (2.0 * h));
        }
    EXPECT_LE(dense, 1.0);
    EXPECT_GT(dense, 0.99);

    const auto r = validate_assumptions(g, SampleBox{}, 100000, 1e-9, 42);
    EXPECT_TRUE(r.lipschitz_pass);
    EXPECT_TRUE(r.zero_z_pass);
    EXPECT_LE(r.lipschitz_max_quotient, 1.0 * (1.0 + 1e-9));
}

TEST(ValidateAssumptions, FalseLipschitzDetected) {
    const auto r = validate_assumptions(abs_z(0.3).rescaled(1.0), SampleBox{}, 1000, 1e-9, 3);
    EXPECT_TRUE(r.lipschitz_pass);
    const GeneratorSpec liar(1, [](double, double, std::span<const double> z) { return 2.0 * z[0]; }, 1.0, "2z");
    const auto bad = validate_assumptions(liar, SampleBox{}, 1000, 1e-9, 3);
    EXPECT_FALSE(bad.lipschitz_pass);
    // Sampled quotients approach the true constant 2 from below.
    EXPECT_GT(bad.lipschitz_max_quotient, 1.99);
    EXPECT_LE(bad.lipschitz_max_quotient, 2.0 + 1e-12);
}

TEST(ValidateAssumptions, Deterministic) {
    const auto g = sin_y();
    const auto a = validate_assumptions(g, SampleBox{}, 5000, 1e-9, 9);
    const auto b = validate_assumptions(g, SampleBox{}, 5000, 1e-9, 9);
    EXPECT_EQ(a.lipschitz_max_quotient, b.lipschitz_max_quotient);
    EXPECT_EQ(a.zero_z_max_abs, b.zero_z_max_abs);
    EXPECT_EQ(a.lipschitz_witness, b.lipschitz_witness);
}

TEST(ValidateAssumptions, AffineWithinBoundPassesForEverySeed) {
    // |0.6 y + 0.8 z| has coefficient norm 0.8 under the (|dy| + |dz|) metric.
    const GeneratorSpec g(1, [](double, double y, std::span<const double> z) { return 0.6 * y + 0.8 * z[0]; }, 0.8,
                          "affine");
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        EXPECT_TRUE(validate_assumptions(g, SampleBox{}, 2000, 1e-9, seed).lipschitz_pass) << seed;
}

TEST(ValidateAssumptions, ZFactorGivesExactZeroAtZeroZ) {
    for (const char* src : {"0.3*abs(z1)*sin(y)", "z1*cos(t)", "z1*z2/(1+z2*z2) - 0.5*z1", "y*z1 + min(z2, 1)*z2"}) {
        const auto g = gdsl::parse_generator(src, 2, 100.0);
        EXPECT_EQ(validate_assumptions(g, SampleBox{}, 3000, 1e-9, 5).zero_z_max_abs, 0.0) << src;
    }
}

TEST(ValidateAssumptions, Preconditions) {
    const auto g = abs_z();
    EXPECT_THROW((void)validate_assumptions(g, SampleBox{}, 0, 1e-9, 1), PreconditionError);
    EXPECT_THROW((void)validate_assumptions(g, SampleBox{}, 10, 0.0, 1), PreconditionError);
    SampleBox bad;
    bad.y_hi = std::numeric_limits<double>::infinity();
    EXPECT_THROW((void)validate_assumptions(g, bad, 10, 1e-9, 1), PreconditionError);
}

TEST(ValidateAssumptions, NonFiniteBodyIsEvaluationError) {
    const GeneratorSpec g(1, [](double, double y, std::span<const double>) { return 1.0 / (y - y); }, 1.0, "inf");
    EXPECT_THROW((void)validate_assumptions(g, SampleBox{}, 10, 1e-9, 1), EvaluationError);
}
