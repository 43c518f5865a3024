#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gexpect/gdsl.hpp"
#include "gexpect/lattice.hpp"

using namespace gexpect;

namespace {

GeneratorSpec gen(const char* src, double k) { return gdsl::parse_generator(src, 1, k); }
Claim claim(const char* src) { return gdsl::parse_claim(src, 1); }

} // namespace

TEST(Lattice, AbsZOnIdentityIsExact) {
    for (std::size_t n : {1u, 7u, 64u, 256u, 1000u}) {
        const auto sol = solve_lattice(gen("0.3*abs(z1)", 0.3), claim("x"), TimeGrid(1.0, n));
        EXPECT_NEAR(sol.y0(), 0.3, 1e-13) << n;
        for (std::size_t i = 0; i < n; ++i)
            for (double z : sol.z(i)) ASSERT_NEAR(z, 1.0, 1e-12);
    }
}

TEST(Lattice, ZeroDriverSecondMoment) {
    for (std::size_t n : {1u, 10u, 256u}) {
        const auto sol = solve_lattice(gen("0", 0.0), claim("x*x"), TimeGrid(1.0, n));
        EXPECT_NEAR(sol.y0(), 1.0, 1e-12) << n;
    }
}

TEST(Lattice, ConstantDriverIntegrates) {
    const auto sol = solve_lattice(gen("0.7", 0.0), claim("0"), TimeGrid(2.0, 50));
    EXPECT_NEAR(sol.y0(), 1.4, 1e-13);
}

TEST(Lattice, TerminalLevelIsThePayoff) {
    const TimeGrid grid(1.0, 16);
    const auto phi = claim("pos(x-0.5)");
    const auto sol = solve_lattice(gen("sin(y)*min(abs(z1),1)", 1.0), phi, grid);
    const auto last = conditional_slice(sol, 16);
    ASSERT_EQ(last.size(), 17u);
    for (std::size_t j = 0; j <= 16; ++j)
        EXPECT_EQ(last[j], phi.terminal_value((2.0 * static_cast<double>(j) - 16.0) * 0.25));
    EXPECT_EQ(conditional_slice(sol, 0).size(), 1u);
    EXPECT_EQ(conditional_slice(sol, 0)[0], sol.y0());
    EXPECT_THROW((void)conditional_slice(sol, 17), PreconditionError);
}

TEST(Lattice, ZeroDriverIsMartingale) {
    const auto sol = solve_lattice(gen("0", 0.0), claim("x"), TimeGrid(1.0, 32));
    for (std::size_t i = 0; i <= 32; ++i) {
        const auto s = conditional_slice(sol, i);
        for (std::size_t j = 0; j <= i; ++j) ASSERT_NEAR(s[j], sol.state(i, j), 1e-14);
    }
}

TEST(Lattice, RefusesCoarseGridNamingN) {
    try {
        (void)solve_lattice(gen("5*abs(z1)", 5.0), claim("x"), TimeGrid(1.0, 4));
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("N = 10"), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW((void)solve_lattice(gen("5*abs(z1)", 5.0), claim("x"), TimeGrid(1.0, 10)));
}

TEST(Lattice, FixedPointNonConvergenceIsNumericError) {
    // Declared K understates the driver, so the implicit map does not contract.
    const GeneratorSpec liar(1, [](double, double y, std::span<const double>) { return 1e4 * std::sin(y); }, 0.1, "liar");
    EXPECT_THROW((void)solve_lattice(liar, claim("x + 1"), TimeGrid(1.0, 4)), NumericError);
}

TEST(Lattice, NonFiniteTerminalReported) {
    EXPECT_THROW((void)solve_lattice(gen("0", 0.0), claim("sqrt(x)"), TimeGrid(1.0, 4)), EvaluationError);
}

TEST(Lattice, ComparisonOnRandomPairs) {
    const auto g = gen("sin(y)*min(abs(z1),1)", 1.0);
    const TimeGrid grid(1.0, 64);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = u(rng), b = u(rng), c = std::fabs(u(rng));
        const auto lo = Claim::terminal(1, [=](std::span<const double> x) { return a * x[0] + b * std::sin(3 * x[0]); },
                                        0.0, "lo");
        const auto hi = Claim::terminal(
            1, [=](std::span<const double> x) { return a * x[0] + b * std::sin(3 * x[0]) + c * (1 + std::cos(x[0])); },
            0.0, "hi");
        const auto s1 = solve_lattice(g, hi, grid), s2 = solve_lattice(g, lo, grid);
        for (std::size_t i = 0; i <= 64; ++i) {
            const auto v1 = s1.values(i), v2 = s2.values(i);
            for (std::size_t j = 0; j <= i; ++j) ASSERT_GE(v1[j], v2[j]) << trial << " " << i << " " << j;
        }
    }
}

TEST(Lattice, ConstantPreservedAtEveryNode) {
    for (const char* src : {"0.3*abs(z1)", "sin(y)*min(abs(z1),1)", "sqrt(1+z1*z1)-1"}) {
        const auto sol = solve_lattice(gen(src, 1.0), claim("2.5"), TimeGrid(1.0, 40));
        for (std::size_t i = 0; i <= 40; ++i)
            for (double v : sol.values(i)) ASSERT_EQ(v, 2.5) << src;
    }
}

// |implicit - explicit| <= C dt on the catalog; C measured at N in {64, 256, 1024} (largest 0.191) and frozen at 0.25.
TEST(Lattice, SchemeAgreementIsFirstOrder) {
    constexpr double C = 0.25;
    LatticeOptions expl;
    expl.scheme = Scheme::explicit_step;
    for (const char* src : {"sin(y)*min(abs(z1),1)", "0.1*y+0.5*z1", "sqrt(1+z1*z1)-1", "0.3*abs(z1)"})
        for (const char* phi : {"x", "pos(x-0.5)", "min(x,1)"})
            for (std::size_t n : {64u, 256u, 1024u}) {
                const TimeGrid grid(1.0, n);
                const double a = solve_lattice(gen(src, 1.0), claim(phi), grid).y0();
                const double b = solve_lattice(gen(src, 1.0), claim(phi), grid, expl).y0();
                EXPECT_LE(std::fabs(a - b), C * grid.dt()) << src << " " << phi << " N=" << n;
            }
}

TEST(Lattice, SolveFromSliceReproducesRoot) {
    const auto g = gen("sin(y)*min(abs(z1),1)", 1.0);
    const TimeGrid grid(1.0, 128);
    const auto full = solve_lattice(g, claim("pos(x-0.5)"), grid);
    for (std::size_t i : {0u, 1u, 32u, 64u, 127u, 128u}) {
        const auto nested = solve_lattice_from(g, grid, i, conditional_slice(full, i));
        EXPECT_EQ(nested.y0(), full.y0()) << i;
    }
    const std::vector<double> wrong(3, 0.0);
    EXPECT_THROW((void)solve_lattice_from(g, grid, 5, wrong), PreconditionError);
}

TEST(Lattice, NodeWeightsAreBinomial) {
    const auto w = LatticeSolution::node_weights(4);
    const double want[] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(w[j], want[j]);
}

TEST(Lattice, RequiresOneDimension) {
    const auto g2 = gdsl::parse_generator("abs(z1)+abs(z2)", 2, 1.0);
    EXPECT_THROW((void)solve_lattice(g2, claim("x"), TimeGrid(1.0, 8)), PreconditionError);
}
