#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gexpect/gdsl.hpp"
#include "gexpect/random.hpp"
#include "gexpect/representation.hpp"

using namespace gexpect;

namespace {

GeneratorSpec gen(const char* src, double k) { return gdsl::parse_generator(src, 1, k); }

} // namespace

TEST(Recover, AbsZSlopesConstant) {
    const auto eps = default_eps_schedule(1.0);
    const auto r = recover_generator(gen("0.3*abs(z1)", 0.3), 0.0, 2.0, 0.0, eps);
    ASSERT_EQ(r.raw_slopes.size(), 5u);
    for (double s : r.raw_slopes) EXPECT_NEAR(s, 0.6, 1e-12);
    EXPECT_NEAR(r.extrapolated, 0.6, 1e-11);
    EXPECT_LE(r.residual, 1e-12);
}

TEST(Recover, ZeroDriver) {
    const auto eps = default_eps_schedule(1.0);
    const auto r = recover_generator(gen("0", 0.0), 1.5, -0.7, 0.0, eps);
    for (double s : r.raw_slopes) EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(Recover, TimeDependentSlope) {
    const auto eps = default_eps_schedule(1.0);
    const auto r = recover_generator(gen("0.3*(1+t)*abs(z1)", 0.6), 0.0, 1.0, 0.0, eps);
    for (std::size_t k = 0; k < eps.size(); ++k) EXPECT_NEAR(r.raw_slopes[k], 0.3 * (1.0 + eps[k] / 2.0), 1e-12);
    EXPECT_NEAR(r.extrapolated, 0.3, 1e-4);
}

TEST(Recover, InteriorTimeNodewise) {
    const auto eps = default_eps_schedule(1.0);
    const auto g = gen("0.3*(1+t)*abs(z1)", 0.6);
    for (double t : {0.25, 0.5}) {
        const auto r = recover_generator(g, 0.2, -1.5, t, eps);
        EXPECT_NEAR(r.extrapolated, 0.3 * (1.0 + t) * 1.5, 1e-9) << t;
        ASSERT_EQ(r.node_l1_gap.size(), eps.size());
        // Every node has slope 0.45 (1 + t + eps / 2), so the L1 gap to the limit is 0.225 eps.
        for (std::size_t k = 0; k < eps.size(); ++k) EXPECT_NEAR(r.node_l1_gap[k], 0.225 * eps[k], 1e-9);
    }
}

TEST(Recover, NonlinearDriverAgainstClosedForm) {
    const auto eps = default_eps_schedule(1.0);
    const auto g = gen("sqrt(1+z1*z1)-1", 1.0);
    for (double z : {-2.0, -0.3, 0.0, 1.0, 1.7}) {
        const auto r = recover_generator(g, 0.4, z, 0.0, eps);
        EXPECT_NEAR(r.extrapolated, std::sqrt(1 + z * z) - 1, 1e-3) << z;
    }
}

TEST(Recover, ScheduleValidation) {
    const auto g = gen("0.3*abs(z1)", 0.3);
    const std::vector<double> up{0.01, 0.02};
    EXPECT_THROW((void)recover_generator(g, 0.0, 1.0, 0.0, up), PreconditionError);
    const std::vector<double> neg{0.1, -0.01};
    EXPECT_THROW((void)recover_generator(g, 0.0, 1.0, 0.0, neg), PreconditionError);
    const std::vector<double> wide{0.5, 0.25};
    EXPECT_THROW((void)recover_generator(g, 0.0, 1.0, 0.75, wide), PreconditionError);
    EXPECT_THROW((void)recover_generator(g, 0.0, 1.0, 0.0, std::vector<double>{}), PreconditionError);
}

TEST(Recover, NonFiniteSlope) {
    const GeneratorSpec bad(1, [](double, double y, std::span<const double>) { return y > 100.0 ? 1e308 * 1e10 : 0.0; },
                            0.0, "overflow");
    EXPECT_THROW((void)recover_generator(bad, 1000.0, 0.0, 0.0, default_eps_schedule(1.0)), Error);
}

TEST(Recover, LsmcMethod) {
    RecoveryOptions o;
    o.method = Method::lsmc;
    o.paths = 4000;
    o.steps_per_eps = 8;
    const std::vector<double> eps{1.0 / 16, 1.0 / 32};
    const auto r = recover_generator(gen("0.3*abs(z1)", 0.3), 0.0, 1.0, 0.0, eps, o);
    EXPECT_NEAR(r.extrapolated, 0.3, 5e-2);
}

TEST(LocalAverage, Examples) {
    auto sq = [](double s) { return s * s; };
    const double exact1 = (std::pow(1.1, 3) - 1.0) / 3.0 / 0.1;
    EXPECT_NEAR(local_average(sq, 1.0, 0.1), exact1, 1e-14);
    EXPECT_NEAR(local_average(sq, 1.0, 0.1), 1.1033333333333333, 1e-12);
    EXPECT_NEAR(local_average(sq, 1.0, 0.01), 1.0100333333333333, 1e-12);
    EXPECT_EQ(local_average([](double) { return 4.25; }, 0.3, 0.7), 4.25);
    EXPECT_NEAR(local_average([](double s) { return s; }, 0.0, 1.0), 0.5, 1e-15);
    EXPECT_THROW((void)local_average([](double s) { return 1.0 / (s - 0.5); }, 0.0, 1.0), EvaluationError);
    EXPECT_THROW((void)local_average(sq, 0.0, 0.0), PreconditionError);
}

TEST(LimitEquivalence, DeterministicCatalog) {
    const auto eps = default_eps_schedule(1.0);
    for (const char* src : {"0", "0.3*abs(z1)", "0.3*(1+t)*abs(z1)", "sqrt(1+z1*z1)-1"}) {
        const auto r = limit_equivalence_check(gen(src, 1.0), 0.0, 1.3, 0.0, eps);
        EXPECT_LE(r.max_gap, 1e-10) << src;
        EXPECT_LE(r.limit_gap, 1e-6) << src;
    }
    // Curvature in t leaves a midpoint-rule gap of order dt^2.
    const auto curved = limit_equivalence_check(gen("0.5*cos(t)*abs(z1)", 0.5), 0.0, 1.3, 0.25, eps);
    EXPECT_LE(curved.max_gap, 1e-6);
    const auto abs = limit_equivalence_check(gen("0.3*abs(z1)", 0.3), 0.0, 2.0, 0.0, eps);
    for (std::size_t k = 0; k < eps.size(); ++k) {
        EXPECT_NEAR(abs.slopes[k], 0.6, 1e-12);
        EXPECT_NEAR(abs.averages[k], 0.6, 1e-15);
    }
}

TEST(Recover, CatalogAtRandomTargets) {
    const auto eps = default_eps_schedule(1.0);
    const random::CounterStream targets(42, random::Domain::test_targets);
    for (const char* src : {"0", "0.3*abs(z1)", "0-0.3*abs(z1)", "0.3*(1+t)*abs(z1)", "sqrt(1+z1*z1)-1",
                            "sin(y)*min(abs(z1),1)"}) {
        const auto g = gen(src, 1.0);
        for (double t : {0.0, 0.25, 0.5})
            for (std::size_t i = 0; i < 20; ++i) {
                const double y = targets.uniform(i, 0, 0, -2.0, 2.0);
                const double z = targets.uniform(i, 1, 0, -2.0, 2.0);
                const auto r = recover_generator(g, y, z, t, eps);
                EXPECT_NEAR(r.extrapolated, g.checked(t, y, std::span<const double>(&z, 1)), 1e-3)
                    << src << " t=" << t << " y=" << y << " z=" << z;
            }
    }
}
