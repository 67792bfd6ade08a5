#include "hetbayes/priors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace hetbayes;

namespace {

double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    const boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(SplinePrior, NormalMomentsPooled) {
    auto basis = make_basis(3, 8);
    const SplinePriorConfig cfg{NormalCoefficients{}, FixedDimension{basis->dimension()}};
    Rng rng(1);
    const int draws = 100000;
    const int J = basis->dimension();
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const CoefficientVector b = sample_spline_prior(cfg, basis, rng);
        s += b.values().sum();
        s2 += b.values().squaredNorm();
    }
    const double total = static_cast<double>(draws) * J;
    const double mean = s / total;
    EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(total));
    EXPECT_NEAR(s2 / total - mean * mean, 1.0, 0.05);
}

TEST(SplinePrior, GeneralizedTailAtRhoTwo) {
    Rng rng(2);
    const CoefficientLaw law = GeneralizedCoefficients{2.0};
    int beyond = 0;
    const int draws = 200000;
    double s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double b = sample_coordinate(law, rng);
        s2 += b * b;
        beyond += std::abs(b) > 3.0;
    }
    EXPECT_LE(static_cast<double>(beyond) / draws, 2.0 * std::exp(-4.5));
    // rho = 2 is exactly the standard normal.
    EXPECT_NEAR(s2 / draws, 1.0, 0.02);
    EXPECT_NEAR(log_prior_coordinate(law, 0.7), log_prior_coordinate(NormalCoefficients{}, 0.7), 1e-14);
}

TEST(SplinePrior, GeneralizedTailHeavierExponent) {
    Rng rng(3);
    for (double rho : {1.5, 3.0}) {
        const CoefficientLaw law = GeneralizedCoefficients{rho};
        int beyond = 0;
        const int draws = 100000;
        const double M = 2.0;
        for (int i = 0; i < draws; ++i) beyond += std::abs(sample_coordinate(law, rng)) > M;
        EXPECT_LE(static_cast<double>(beyond) / draws, 2.0 * std::exp(-0.5 * std::pow(M, rho))) << rho;
    }
}

TEST(SplinePrior, Deterministic) {
    auto basis = make_basis(4, 5);
    const SplinePriorConfig cfg{NormalCoefficients{}, FixedDimension{8}};
    Rng a(42), b(42);
    EXPECT_EQ(sample_spline_prior(cfg, basis, a).values(), sample_spline_prior(cfg, basis, b).values());
    const SplinePriorConfig geo{GeneralizedCoefficients{1.5}, GeometricDimension{0.6}};
    Rng c(7), d(7);
    const CoefficientVector x = sample_spline_prior(geo, basis, c);
    const CoefficientVector y = sample_spline_prior(geo, basis, d);
    EXPECT_EQ(x.values(), y.values());
    EXPECT_EQ(x.basis().dimension(), static_cast<int>(x.size()));
}

TEST(SplinePrior, RejectsInconsistentConfig) {
    auto basis = make_basis(4, 5);
    Rng rng(1);
    EXPECT_THROW(sample_spline_prior({NormalCoefficients{}, FixedDimension{7}}, basis, rng), std::invalid_argument);
    EXPECT_THROW(sample_spline_prior({GeneralizedCoefficients{1.0}, FixedDimension{8}}, basis, rng), std::invalid_argument);
    EXPECT_THROW(sample_spline_prior({NormalCoefficients{}, GeometricDimension{1.0}}, basis, rng), std::invalid_argument);
}

TEST(SplinePrior, GeneralizedDensityNormalizes) {
    for (double rho : {1.2, 2.0, 3.5}) {
        double s = 0.0;
        const double h = 1e-3;
        for (double b = -20.0; b <= 20.0; b += h) s += h * std::exp(log_prior_coordinate(GeneralizedCoefficients{rho}, b));
        EXPECT_NEAR(s, 1.0, 1e-6) << rho;
    }
}

TEST(GeometricDimension, ChiSquareGoodnessOfFit) {
    for (double p : {0.3, 0.5, 0.9}) {
        Rng rng(derive_seed(11, {static_cast<std::uint64_t>(p * 10)}));
        const int draws = 100000;
        std::vector<int> counts;
        for (int i = 0; i < draws; ++i) {
            const int k = sample_jn_geometric(p, rng);
            ASSERT_GE(k, 1);
            if (static_cast<std::size_t>(k) > counts.size()) counts.resize(static_cast<std::size_t>(k), 0);
            ++counts[static_cast<std::size_t>(k - 1)];
        }
        // Bins k = 1..K with expected count >= 5, last bin the tail.
        std::vector<double> obs, expd;
        double tail = 1.0;
        int k = 1;
        for (;; ++k) {
            const double e = draws * geometric_pmf(p, k);
            if (draws * (tail - geometric_pmf(p, k)) < 5.0) break;
            obs.push_back(k <= static_cast<int>(counts.size()) ? counts[static_cast<std::size_t>(k - 1)] : 0);
            expd.push_back(e);
            tail -= geometric_pmf(p, k);
        }
        double rest = 0.0;
        for (std::size_t i = static_cast<std::size_t>(k - 1); i < counts.size(); ++i) rest += counts[i];
        obs.push_back(rest);
        expd.push_back(draws * tail);
        EXPECT_GT(chi_square_p_value(obs, expd), 1e-3) << "p=" << p;
    }
}

TEST(GeometricDimension, SmallPConcentratesOnOne) {
    Rng rng(5);
    int ones = 0;
    for (int i = 0; i < 10000; ++i) ones += sample_jn_geometric(1e-6, rng) == 1;
    EXPECT_GE(ones, 9990);
    int half = 0;
    for (int i = 0; i < 100000; ++i) half += sample_jn_geometric(0.5, rng) == 1;
    EXPECT_NEAR(half / 1e5, 0.5, 0.01);
    EXPECT_THROW(sample_jn_geometric(0.0, rng), std::invalid_argument);
}

TEST(GeometricDimension, SolveCouplingByBisection) {
    for (int k : {1, 2, 5, 10}) {
        for (double n : {100.0, 1000.0}) {
            const double eps = 0.2;
            if (k > 1 && (k - 1) * std::log((k - 1.0) / k) + std::log(1.0 / k) < -n * eps * eps) {
                const double p = solve_geometric_p(k, n, eps);
                EXPECT_NEAR(std::log(geometric_pmf(p, k)), -n * eps * eps, 1e-8);
            }
        }
    }
    EXPECT_NEAR(solve_geometric_p(1, 50, 0.1), 1.0 - std::exp(-0.5), 1e-15);
    EXPECT_THROW(solve_geometric_p(10, 1.0, 0.01), std::domain_error);
}

TEST(Schedule, HandEvaluatedExamples) {
    EXPECT_EQ(jn_schedule({.alpha = 1, .gamma = 1}, 1024), 5);
    EXPECT_EQ(jn_schedule({.alpha = 2, .gamma = 2}, 10000), 4);
    // The smoother component has the smaller exponent and therefore binds.
    EXPECT_EQ(jn_schedule({.alpha = 1, .gamma = 3}, 4096), 3);
    EXPECT_EQ(jn_schedule({.alpha = 1e6, .gamma = 1}, 4096), 1);
    EXPECT_EQ(jn_schedule({.alpha = 2, .gamma = 2}, 2), 1);
    EXPECT_THROW(jn_schedule({.alpha = 0.4, .gamma = 1}, 100), std::invalid_argument);
}

TEST(Schedule, MonotoneInN) {
    const RateSpec spec{.alpha = 1.5, .gamma = 0.7};
    int prev = 0;
    for (double n = 2; n < 1e6; n *= 1.3) {
        const int j = jn_schedule(spec, n);
        EXPECT_GE(j, prev);
        prev = j;
    }
}

TEST(Rates, SplineSpotValue) {
    const RateSpec spec{.alpha = 2, .gamma = 2, .kind = PriorKind::spline};
    EXPECT_NEAR(rate_theoretical(spec, 1000), 0.13671, 5e-5);
    EXPECT_NEAR(rate_theoretical(spec, 1000), std::pow(1000.0 / std::log(1000.0), -0.4), 1e-15);
    EXPECT_NEAR(std::pow(1000.0, -1.0 / 3.0), 0.1, 1e-12);
}

TEST(Rates, IntegratedBMMatchesMinimaxAtHalfIntegers) {
    for (int ke = 0; ke <= 3; ++ke) {
        for (int kf = 0; kf <= 3; ++kf) {
            const RateSpec spec{.alpha = ke + 0.5, .gamma = kf + 0.5, .kind = PriorKind::integrated_bm, .fold_eta = ke, .fold_f = kf};
            for (double n = 2; n <= 1e7; n *= 3.7) {
                EXPECT_NEAR(rate_theoretical(spec, n) / minimax_rate(spec.alpha, spec.gamma, n), 1.0, 1e-13);
            }
        }
    }
    // The default fold count reproduces the same identity.
    const RateSpec def{.alpha = 2.5, .gamma = 1.5, .kind = PriorKind::integrated_bm};
    EXPECT_EQ(def.eta_folds(), 2);
    EXPECT_NEAR(rate_theoretical(def, 500), minimax_rate(2.5, 1.5, 500), 1e-15);
}

TEST(Rates, RescaledSESymmetricWhenSmoothnessesMatch) {
    const RateSpec spec{.alpha = 1.3, .gamma = 1.3, .d = 1, .kind = PriorKind::rescaled_se};
    const double n = 5000;
    const double expect = std::pow(n, -1.3 / 3.6) * std::pow(std::log(n), 2 * 1.3 / 3.6);
    EXPECT_NEAR(rate_theoretical(spec, n), expect, 1e-15);
}

TEST(Rates, MonotoneDecreasingForEveryKind) {
    for (PriorKind kind : {PriorKind::spline, PriorKind::rescaled_se, PriorKind::integrated_bm}) {
        const RateSpec spec{.alpha = 2, .gamma = 1, .kind = kind};
        double prev = std::numeric_limits<double>::infinity();
        // The log factor of the rescaled-SE rate rises for tiny n; check from n = 100.
        for (double n = 100; n < 1e8; n *= 2) {
            const double r = rate_theoretical(spec, n);
            EXPECT_LT(r, prev) << to_string(kind) << " n=" << n;
            prev = r;
        }
    }
}

TEST(SEKernel, Values) {
    EXPECT_EQ(se_kernel(0.3, 0.3), 1.0);
    EXPECT_NEAR(se_kernel(0.0, 1.0), 0.367879, 1e-6);
    const double s[] = {0.1, 0.2}, t[] = {0.4, 0.6};
    EXPECT_NEAR(se_kernel(s, t), std::exp(-0.25), 1e-15);
    EXPECT_EQ(se_kernel(s, t), se_kernel(t, s));
}

TEST(SEKernel, PositiveSemidefiniteOnRandomPoints) {
    Rng rng(9);
    Eigen::MatrixXd pts(50, 1);
    for (int i = 0; i < 50; ++i) pts(i, 0) = rng.uniform();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(se_kernel_matrix(pts), Eigen::EigenvaluesOnly);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

TEST(RescaledSE, MarginalMoments) {
    GPPriorConfig cfg;
    cfg.grid = GPPriorConfig::uniform_grid(40);
    Rng rng(13);
    double s = 0, s2 = 0, cnt = 0, jitter = 0;
    for (int p = 0; p < 1000; ++p) {
        const GPPath path = sample_rescaled_se_path(cfg, rng);
        s += path.values.sum();
        s2 += path.values.squaredNorm();
        cnt += static_cast<double>(path.values.size());
        jitter = std::max(jitter, path.jitter);
        EXPECT_GT(path.scale, 0.0);
    }
    EXPECT_LT(std::abs(s / cnt), 0.05);
    EXPECT_LT(std::abs(s2 / cnt - (s / cnt) * (s / cnt) - 1.0 - jitter), 0.05);
}

TEST(RescaledSE, CorrelationGivenScale) {
    GPPriorConfig cfg;
    cfg.grid = GPPriorConfig::uniform_grid(2);
    Rng rng(17);
    for (double A : {1.0, 1.5}) {
        double sxy = 0, sxx = 0, syy = 0;
        const int paths = 4000;
        for (int p = 0; p < paths; ++p) {
            const GPPath path = sample_se_path_given_scale(cfg, A, rng);
            sxy += path.values(0) * path.values(1);
            sxx += path.values(0) * path.values(0);
            syy += path.values(1) * path.values(1);
        }
        EXPECT_NEAR(sxy / std::sqrt(sxx * syy), std::exp(-A * A), 0.05) << A;
    }
}

TEST(RescaledSE, DeterministicAndJitterEscalation) {
    GPPriorConfig cfg;
    cfg.grid = GPPriorConfig::uniform_grid(60);
    Rng a(4), b(4);
    const GPPath x = sample_rescaled_se_path(cfg, a);
    const GPPath y = sample_rescaled_se_path(cfg, b);
    EXPECT_EQ(x.scale, y.scale);
    EXPECT_EQ(x.values, y.values);
    // Repeated grid points make the kernel exactly singular, so zero jitter must escalate.
    cfg.grid = Eigen::VectorXd::Constant(5, 0.5);
    cfg.jitter = 0.0;
    Rng c(1);
    const GPPath z = sample_se_path_given_scale(cfg, 1.0, c);
    EXPECT_GE(z.jitter, 1e-10);
    EXPECT_LE(z.jitter, 1e-6);
    cfg.max_jitter = 0.0;
    EXPECT_THROW(sample_se_path_given_scale(cfg, 1.0, c), FactorizationError);
}

TEST(IntegratedBM, VarianceAndValueAtZero) {
    GPPriorConfig cfg;
    cfg.kind = GPKind::integrated_bm;
    cfg.folds = 0;
    cfg.grid = GPPriorConfig::uniform_grid(11);
    const Eigen::MatrixXd map = integrated_bm_map(cfg.grid.col(0), 0);
    // Exact covariance of the linear map: var at x is x + 1.
    for (int i = 0; i < 11; ++i) EXPECT_NEAR(map.row(i).squaredNorm(), cfg.grid(i, 0) + 1.0, 1e-14);
    Rng rng(21);
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(11);
    const int paths = 20000;
    for (int p = 0; p < paths; ++p) {
        const GPPath path = sample_integrated_bm(cfg, rng);
        s2 += path.values.cwiseProduct(path.values);
    }
    for (int i = 0; i < 11; ++i) EXPECT_NEAR(s2(i) / paths, cfg.grid(i, 0) + 1.0, 0.06);
    // x = 0 picks up Z_0 only.
    for (int k = 0; k <= 3; ++k) {
        const Eigen::MatrixXd mk = integrated_bm_map(cfg.grid.col(0), k);
        EXPECT_NEAR(mk.row(0).squaredNorm(), 1.0, 1e-15);
        EXPECT_EQ(mk(0, 10), 1.0);
    }
}

TEST(IntegratedBM, OnceIntegratedPathsAreSmooth) {
    // Max |second difference| / h shrinks like sqrt(h) for k = 1 but not for k = 0.
    auto roughness = [](int folds, int m) {
        GPPriorConfig cfg;
        cfg.kind = GPKind::integrated_bm;
        cfg.folds = folds;
        cfg.grid = GPPriorConfig::uniform_grid(m);
        Rng rng(5);
        const double h = 1.0 / (m - 1);
        double worst = 0.0;
        for (int p = 0; p < 50; ++p) {
            const Eigen::VectorXd v = sample_integrated_bm(cfg, rng).values;
            for (int i = 1; i + 1 < m; ++i) worst = std::max(worst, std::abs(v(i + 1) - 2 * v(i) + v(i - 1)) / h);
        }
        return worst;
    };
    EXPECT_LT(roughness(1, 513), roughness(1, 65));
    EXPECT_GT(roughness(0, 513), roughness(0, 65));
}

TEST(TailBound, Values) {
    EXPECT_NEAR(coefficient_tail_bound(10, 3.0), 0.1111, 1e-4);
    EXPECT_NEAR(coefficient_tail_bound(1, 0.1), 0.995, 1e-3);
    EXPECT_LT(coefficient_tail_bound(10, 40.0), 1e-300);
    EXPECT_NEAR(coefficient_tail_bound(10, 2.0, 3.0), 10 * std::exp(-4.0), 1e-15);
    EXPECT_THROW(coefficient_tail_bound(10, 0.0), std::invalid_argument);
}
