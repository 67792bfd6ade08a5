#include "hetbayes/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hetbayes;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    for (int n : {1, 2, 5, 16, 64, 256}) {
        const Rule1D r = gauss_legendre(n);
        for (int deg = 0; deg <= 2 * n - 1 && deg <= 40; ++deg) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], deg);
            const double exact = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
            EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " deg=" << deg;
        }
    }
}

TEST(GaussHermite, MatchesGaussianMoments) {
    // int t^(2k) exp(-t^2) dt = Gamma(k + 1/2)
    for (int n : {20, 48, 64, 100}) {
        const Rule1D r = gauss_hermite(n);
        for (int k = 0; k <= 8; ++k) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * k);
            EXPECT_NEAR(s / std::tgamma(k + 0.5), 1.0, 1e-12) << "n=" << n << " k=" << k;
        }
        for (int i = 0; i + 1 < n; ++i) EXPECT_LT(r.nodes[i], r.nodes[i + 1]);
    }
}

TEST(GaussHermite, IntegratesNonPolynomial) {
    // int cos(t) exp(-t^2) dt = sqrt(pi) exp(-1/4)
    const Rule1D r = gauss_hermite(64);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::cos(r.nodes[i]);
    EXPECT_NEAR(s, std::sqrt(std::numbers::pi) * std::exp(-0.25), 1e-14);
}

TEST(CompositeRule, CoversBreakpoints) {
    const Rule1D r = composite_gauss_legendre({0.0, 0.25, 0.5, 1.0}, 4);
    EXPECT_EQ(r.nodes.size(), 12u);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * r.nodes[i] * r.nodes[i];
    EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);
}

TEST(Halton, StaysInUnitCube) {
    const auto pts = halton_points(1000, 3);
    EXPECT_GT(pts.minCoeff(), 0.0);
    EXPECT_LT(pts.maxCoeff(), 1.0);
    EXPECT_NEAR(pts.col(0).mean(), 0.5, 2e-3);
    EXPECT_THROW(halton_points(10, 0), std::invalid_argument);
}
