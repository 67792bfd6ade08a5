#include "hetbayes/gaussian_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hetbayes;

namespace {

// Brute-force trapezoid over a wide y grid; independent of both library routes.
struct BruteForce {
    double hellinger_sq, kl, var;
};

BruteForce brute_force(double m1, double v1, double m2, double v2) {
    const double s = std::sqrt(std::max(v1, v2));
    const double lo = std::min(m1, m2) - 30 * s;
    const double hi = std::max(m1, m2) + 30 * s;
    const int n = 400000;
    const double h = (hi - lo) / n;
    auto p = [](double y, double m, double v) { return std::exp(-(y - m) * (y - m) / (2 * v)) / std::sqrt(2 * std::numbers::pi * v); };
    double hel = 0, kl = 0, m2nd = 0;
    for (int i = 0; i <= n; ++i) {
        const double y = lo + i * h;
        const double w = (i == 0 || i == n) ? 0.5 * h : h;
        const double a = p(y, m1, v1), b = p(y, m2, v2);
        hel += w * std::pow(std::sqrt(a) - std::sqrt(b), 2);
        if (a > 0 && b > 0) {
            const double l = std::log(a / b);
            kl += w * a * l;
            m2nd += w * a * l * l;
        }
    }
    return {hel, kl, m2nd - kl * kl};
}

ConditionalNormal cn(double m, double v) { return ConditionalNormal::from_variance(m, v); }

}  // namespace

TEST(LogDensity, Examples) {
    EXPECT_NEAR(log_density(cn(0, 1), 0.0), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(log_density(cn(0, 1), 0.0), -0.9189385, 1e-7);
    EXPECT_NEAR(log_density(cn(3, 2.5), 3.0), -0.5 * std::log(2 * std::numbers::pi * 2.5), 1e-15);
    EXPECT_NEAR(log_density(cn(1, 4), 3.0), -0.5 * std::log(8 * std::numbers::pi) - 0.5, 1e-14);
}

TEST(LogDensity, NormalizesUnderQuadrature) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> em(-3, 3), ev(std::log(0.1), std::log(10.0));
    for (int i = 0; i < 20; ++i) {
        const ConditionalNormal p{em(gen), ev(gen)};
        EXPECT_NEAR(density_mass(p), 1.0, 1e-10);
    }
}

TEST(Hellinger, FrozenExamples) {
    // Values frozen from the brute-force oracle above.
    const BruteForce a = brute_force(0, 1, 2, 1);
    EXPECT_NEAR(a.hellinger_sq, 0.786939, 1e-6);
    EXPECT_NEAR(hellinger_sq(cn(0, 1), cn(2, 1)), 2 - 2 * std::exp(-0.5), 1e-15);
    EXPECT_NEAR(hellinger_sq(cn(0, 1), cn(2, 1)), 0.786939, 1e-6);

    const BruteForce b = brute_force(0, 1, 0, std::numbers::e);
    EXPECT_NEAR(b.hellinger_sq, 0.116579, 1e-6);
    EXPECT_NEAR(hellinger_sq(cn(0, 1), cn(0, std::numbers::e)), 0.116579, 1e-6);
    EXPECT_EQ(hellinger_sq(cn(0.3, 2), cn(0.3, 2)), 0.0);
}

TEST(KL, FrozenExamples) {
    EXPECT_EQ(kl_divergence(cn(1, 3), cn(1, 3)), 0.0);
    EXPECT_NEAR(kl_divergence(cn(0, 1), cn(1, 1)), 0.5, 1e-15);
    const BruteForce b = brute_force(0, 1, 0, std::numbers::e);
    EXPECT_NEAR(b.kl, 0.183940, 1e-6);
    EXPECT_NEAR(kl_divergence(cn(0, 1), cn(0, std::numbers::e)), 0.5 - 0.5 * (1 - std::exp(-1.0)), 1e-15);
}

TEST(VarianceDivergence, FrozenExamples) {
    EXPECT_EQ(variance_divergence(cn(1, 3), cn(1, 3)), 0.0);
    EXPECT_NEAR(variance_divergence(cn(1, 1), cn(0, 1)), 1.0, 1e-15);
    EXPECT_NEAR(variance_divergence_printed(cn(1, 1), cn(0, 1)), 1.0, 1e-15);
    EXPECT_NEAR(brute_force(0, 1, 0, 2).var, 0.125, 1e-6);
    EXPECT_NEAR(variance_divergence(cn(0, 1), cn(0, 2)), 0.125, 1e-15);
}

TEST(VarianceDivergence, PrintedFormDisagreesWithDefinitionWhenV1IsNotOne) {
    // V1 = 2, V2 = 1, mean gap 1: definitional value 2*(1/2)^2 + 2 = 2.5; printed form gives 0.5 + 4.
    const BruteForce bf = brute_force(1, 2, 0, 1);
    EXPECT_NEAR(bf.var, 2.5, 1e-5);
    EXPECT_NEAR(variance_divergence(cn(1, 2), cn(0, 1)), 2.5, 1e-14);
    EXPECT_NEAR(variance_divergence_printed(cn(1, 2), cn(0, 1)), 4.5, 1e-14);
}

TEST(Divergences, BoundsAndSymmetryOnRandomPairs) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> em(-5, 5), ef(-4, 4);
    for (int i = 0; i < 10000; ++i) {
        const ConditionalNormal a{em(gen), ef(gen)}, b{em(gen), ef(gen)};
        const double h = hellinger_sq(a, b);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, 2.0);
        EXPECT_EQ(h, hellinger_sq(b, a));
        EXPECT_GE(kl_divergence(a, b), 0.0);
        EXPECT_GE(variance_divergence(a, b), 0.0);
    }
}

TEST(Oracle, AgreesWithClosedForms) {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> em(-3, 3), ev(std::log(0.1), std::log(10.0));
    for (int i = 0; i < 100; ++i) {
        const ConditionalNormal a{em(gen), ev(gen)}, b{em(gen), ev(gen)};
        const OracleResult o = oracle_divergences(a, b);
        EXPECT_TRUE(o.agrees) << "gap " << o.max_relative_gap;
        EXPECT_LE(o.max_relative_gap, 1e-8);
    }
}

TEST(Oracle, Examples) {
    const OracleResult same = oracle_divergences(cn(0.5, 2), cn(0.5, 2));
    EXPECT_NEAR(same.hellinger_sq, 0.0, 1e-14);
    EXPECT_NEAR(same.kl, 0.0, 1e-14);
    EXPECT_NEAR(same.var_div, 0.0, 1e-14);
    EXPECT_NEAR(oracle_divergences(cn(0, 1), cn(2, 1)).hellinger_sq, 0.786939, 1e-6);
    EXPECT_NEAR(oracle_divergences(cn(0, 1), cn(1, 1)).kl, 0.5, 1e-12);
    EXPECT_THROW(oracle_divergences(cn(0, 1), cn(1, 1), {.hermite_nodes = 10}), std::invalid_argument);
}

TEST(Oracle, FlagsDisagreementWithPrintedVariance) {
    // The printed variance form fails the oracle whenever V1 != 1.
    const OracleResult o = oracle_divergences(cn(1, 2), cn(0, 1));
    EXPECT_NEAR(o.var_div, 2.5, 1e-10);
    EXPECT_GT(std::abs(variance_divergence_printed(cn(1, 2), cn(0, 1)) - o.var_div), 1.0);
}

TEST(AvgDivergences, IdenticalPairsGiveZero) {
    const FunctionPair t = FunctionPair::from_1d([](double x) { return std::sin(6 * x); }, [](double x) { return x - 0.5; });
    for (const DesignSpec& d : {DesignSpec::uniform(), DesignSpec::equispaced(17), DesignSpec::uniform(2)}) {
        const DivergenceReport r = avg_divergences(t, t, d);
        EXPECT_EQ(r.hellinger_sq, 0.0);
        EXPECT_EQ(r.kl, 0.0);
        EXPECT_EQ(r.var_div, 0.0);
    }
}

TEST(AvgDivergences, SingleAtomEqualsPointwise) {
    const FunctionPair a = FunctionPair::constant(0.0, 1.0);
    const FunctionPair b = FunctionPair::constant(2.0, 3.0);
    const DivergenceReport r = avg_divergences(a, b, DesignSpec::fixed_1d({0.5}), {.keep_pointwise = true});
    EXPECT_DOUBLE_EQ(r.hellinger_sq, hellinger_sq_point(a, b, 0.5));
    EXPECT_DOUBLE_EQ(r.kl, kl_point(a, b, 0.5));
    EXPECT_DOUBLE_EQ(r.var_div, var_point(a, b, 0.5));
    ASSERT_EQ(r.pointwise.size(), 1u);
}

TEST(AvgDivergences, ConstantMeanGapUniform) {
    const FunctionPair a = FunctionPair::from_1d([](double x) { return x + 1.0; }, [](double) { return 0.0; });
    const FunctionPair b = FunctionPair::from_1d([](double x) { return x; }, [](double) { return 0.0; });
    const DivergenceReport r = avg_divergences(a, b, DesignSpec::uniform());
    EXPECT_NEAR(r.kl, 0.5, 1e-14);
    EXPECT_NEAR(r.hellinger(), std::sqrt(2 - 2 * std::exp(-0.125)), 1e-14);
    EXPECT_TRUE(r.converged);
}

TEST(AvgDivergences, SplineAndGridRepresentations) {
    auto basis = make_basis(2, 4);
    const Eigen::VectorXd m = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
    const Eigen::VectorXd f = Eigen::VectorXd::Constant(5, 0.2);
    const FunctionPair s = FunctionPair::from_splines(CoefficientVector(basis, m), CoefficientVector(basis, f));
    const FunctionPair g = FunctionPair::from_grid({0.0, 0.25, 0.5, 0.75, 1.0}, m, f);
    EXPECT_EQ(s.representation(), Representation::spline);
    EXPECT_EQ(g.representation(), Representation::grid);
    // Piecewise-linear splines on the knots coincide with grid interpolation.
    EXPECT_LT(avg_divergences(s, g, DesignSpec::uniform()).hellinger_sq, 1e-20);
}

TEST(AvgDivergences, HellingerBoundFromLogVarianceAndMeanGaps) {
    // d_n^2 <= int [2 (f1 - f2)^2 + (eta1 - eta2)^2 / (2 (V1 + V2))] dQ
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-2, 2);
    const DesignSpec design = DesignSpec::equispaced(50);
    const QuadratureRule rule = design.averaging_rule();
    for (int trial = 0; trial < 1000; ++trial) {
        const double a0 = u(gen), a1 = u(gen), b0 = u(gen), b1 = u(gen), c0 = u(gen), c1 = u(gen), d0 = u(gen), d1 = u(gen);
        const FunctionPair p = FunctionPair::from_1d([=](double x) { return a0 + a1 * x; }, [=](double x) { return b0 * std::sin(b1 * x); });
        const FunctionPair q = FunctionPair::from_1d([=](double x) { return c0 + c1 * x * x; }, [=](double x) { return d0 * std::cos(d1 * x); });
        double rhs = 0.0;
        for (Eigen::Index i = 0; i < rule.size(); ++i) {
            const ConditionalNormal s = p.at(rule.nodes(i, 0)), t = q.at(rule.nodes(i, 0));
            const double df = s.log_variance - t.log_variance, de = s.mean - t.mean;
            rhs += rule.weights(i) * (2 * df * df + de * de / (2 * (s.variance() + t.variance())));
        }
        EXPECT_LE(avg_divergences(p, q, design).hellinger_sq, rhs + 1e-15);
    }
}
