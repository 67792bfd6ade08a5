#pragma once

#include "hetbayes/design.hpp"
#include "hetbayes/quadrature.hpp"
#include "hetbayes/spline_basis.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetbayes {

/// N(mean, exp(log_variance)): the conditional law of y at one covariate value.
struct ConditionalNormal {
    double mean = 0.0;
    double log_variance = 0.0;

    static ConditionalNormal from_variance(double mean, double variance) {
        if (!(variance > 0.0)) throw std::invalid_argument("ConditionalNormal: variance must be positive");
        return {mean, std::log(variance)};
    }

    [[nodiscard]] double variance() const { return std::exp(log_variance); }
};

/// -1/2 log(2 pi V) - (y - eta)^2 / (2 V).
inline double log_density(const ConditionalNormal& p, double y) {
    const double r = y - p.mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi) + p.log_variance) - 0.5 * r * r * std::exp(-p.log_variance);
}

namespace detail {

// log cosh(x) without cancellation near zero or overflow for large |x|.
inline double log_cosh(double x) {
    const double a = std::abs(x);
    if (a > 20.0) return a - std::numbers::ln2 + std::log1p(std::exp(-2.0 * a));
    const double s = std::sinh(0.5 * a);
    return std::log1p(2.0 * s * s);
}

}  // namespace detail

/// Squared Hellinger distance int (sqrt p1 - sqrt p2)^2 dy, in [0, 2].
///
/// Closed form 2 - 2 exp(-(d^2) / (4 (V1 + V2))) sqrt(2 sqrt(V1 V2) / (V1 + V2)),
/// evaluated through the log affinity so that nearby pairs do not cancel.
inline double hellinger_sq(const ConditionalNormal& a, const ConditionalNormal& b) {
    const double d = a.mean - b.mean;
    const double vsum = a.variance() + b.variance();
    const double u = std::abs(a.log_variance - b.log_variance);
    // 2 sqrt(V1 V2) / (V1 + V2) = 1 / cosh(u / 2)
    const double log_affinity = -d * d / (4.0 * vsum) - 0.5 * detail::log_cosh(0.5 * u);
    return -2.0 * std::expm1(log_affinity);
}

/// Kullback-Leibler divergence K(p1, p2) = int p1 log(p1 / p2) dy.
inline double kl_divergence(const ConditionalNormal& a, const ConditionalNormal& b) {
    const double u = a.log_variance - b.log_variance;  // log(V1 / V2)
    const double d = a.mean - b.mean;
    return 0.5 * (std::expm1(u) - u) + 0.5 * d * d * std::exp(-b.log_variance);
}

/// Variance under p1 of log(p1 / p2): 2 (-1/2 + V1 / (2 V2))^2 + V1 (eta1 - eta2)^2 / V2^2.
inline double variance_divergence(const ConditionalNormal& a, const ConditionalNormal& b) {
    const double u = a.log_variance - b.log_variance;
    const double d = a.mean - b.mean;
    const double e = std::expm1(u);
    return 0.5 * e * e + std::exp(u - b.log_variance) * d * d;
}

/// The variance-divergence expression whose second term reads [V1 / V2 (eta1 - eta2)]^2.
///
/// Kept for comparison only: it differs from the definitional integral by a
/// factor V1 in the second term (the two agree when V1 = V2 = 1).
inline double variance_divergence_printed(const ConditionalNormal& a, const ConditionalNormal& b) {
    const double u = a.log_variance - b.log_variance;
    const double d = a.mean - b.mean;
    const double e = std::expm1(u);
    const double r = std::exp(u) * d;
    return 0.5 * e * e + r * r;
}

using Point = std::span<const double>;
using ScalarField = std::function<double(Point)>;

enum class Representation { analytic, spline, grid };

/// theta = (eta, f) with V = exp(f).
class FunctionPair {
public:
    FunctionPair(ScalarField mean, ScalarField log_variance, Representation rep = Representation::analytic)
        : mean_(std::move(mean)), log_variance_(std::move(log_variance)), rep_(rep) {
        if (!mean_ || !log_variance_) throw std::invalid_argument("FunctionPair: empty function handle");
    }

    static FunctionPair constant(double mean, double variance) {
        const double f = ConditionalNormal::from_variance(mean, variance).log_variance;
        return FunctionPair([mean](Point) { return mean; }, [f](Point) { return f; });
    }

    /// One-dimensional analytic pair from eta(x) and f(x) = log V(x).
    static FunctionPair from_1d(std::function<double(double)> mean, std::function<double(double)> log_variance) {
        return FunctionPair([m = std::move(mean)](Point x) { return m(x[0]); },
                            [f = std::move(log_variance)](Point x) { return f(x[0]); });
    }

    static FunctionPair from_splines(CoefficientVector mean, CoefficientVector log_variance) {
        return FunctionPair([m = std::move(mean)](Point x) { return m(x[0]); },
                            [f = std::move(log_variance)](Point x) { return f(x[0]); }, Representation::spline);
    }

    /// Piecewise-linear interpolation of grid samples on a sorted one-dimensional grid.
    static FunctionPair from_grid(std::vector<double> grid, Eigen::VectorXd mean_values, Eigen::VectorXd log_variance_values) {
        if (grid.size() < 2 || static_cast<Eigen::Index>(grid.size()) != mean_values.size() ||
            mean_values.size() != log_variance_values.size()) {
            throw std::invalid_argument("FunctionPair::from_grid: inconsistent grid sizes");
        }
        if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("FunctionPair::from_grid: grid must be sorted");
        auto g = std::make_shared<const std::vector<double>>(std::move(grid));
        auto interp = [g](const Eigen::VectorXd& v) {
            return [g, v](Point x) {
                const auto& xs = *g;
                const double t = std::clamp(x[0], xs.front(), xs.back());
                auto it = std::upper_bound(xs.begin(), xs.end(), t);
                std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
                const std::size_t lo = hi - 1;
                const double w = (t - xs[lo]) / (xs[hi] - xs[lo]);
                return (1.0 - w) * v(static_cast<Eigen::Index>(lo)) + w * v(static_cast<Eigen::Index>(hi));
            };
        };
        return FunctionPair(interp(mean_values), interp(log_variance_values), Representation::grid);
    }

    [[nodiscard]] double mean(Point x) const { return mean_(x); }
    [[nodiscard]] double log_variance(Point x) const { return log_variance_(x); }
    [[nodiscard]] double variance(Point x) const { return std::exp(log_variance_(x)); }
    [[nodiscard]] ConditionalNormal at(Point x) const { return {mean_(x), log_variance_(x)}; }
    [[nodiscard]] ConditionalNormal at(double x) const { return at(Point(&x, 1)); }
    [[nodiscard]] Representation representation() const { return rep_; }
    [[nodiscard]] const ScalarField& mean_field() const { return mean_; }
    [[nodiscard]] const ScalarField& log_variance_field() const { return log_variance_; }

private:
    ScalarField mean_;
    ScalarField log_variance_;
    Representation rep_;
};

inline double log_density(const FunctionPair& theta, Point x, double y) { return log_density(theta.at(x), y); }
inline double log_density(const FunctionPair& theta, double x, double y) { return log_density(theta.at(x), y); }

inline double hellinger_sq_point(const FunctionPair& a, const FunctionPair& b, Point x) { return hellinger_sq(a.at(x), b.at(x)); }
inline double hellinger_sq_point(const FunctionPair& a, const FunctionPair& b, double x) { return hellinger_sq(a.at(x), b.at(x)); }
inline double kl_point(const FunctionPair& a, const FunctionPair& b, Point x) { return kl_divergence(a.at(x), b.at(x)); }
inline double kl_point(const FunctionPair& a, const FunctionPair& b, double x) { return kl_divergence(a.at(x), b.at(x)); }
inline double var_point(const FunctionPair& a, const FunctionPair& b, Point x) { return variance_divergence(a.at(x), b.at(x)); }
inline double var_point(const FunctionPair& a, const FunctionPair& b, double x) { return variance_divergence(a.at(x), b.at(x)); }

struct DivergenceTerms {
    double hellinger_sq = 0.0;
    double kl = 0.0;
    double var_div = 0.0;
};

inline DivergenceTerms divergence_terms(const ConditionalNormal& a, const ConditionalNormal& b) {
    return {hellinger_sq(a, b), kl_divergence(a, b), variance_divergence(a, b)};
}

/// Q-averaged squared Hellinger distance, KL and variance divergence.
struct DivergenceReport {
    double hellinger_sq = 0.0;
    double kl = 0.0;
    double var_div = 0.0;
    /// False when refining the continuous-Q rule changed the averages beyond tolerance.
    bool converged = true;
    std::vector<DivergenceTerms> pointwise;

    /// d_n = sqrt(hellinger_sq).
    [[nodiscard]] double hellinger() const { return std::sqrt(hellinger_sq); }
};

/// Weighted averages of the three divergences from function values at rule nodes.
inline DivergenceReport average_divergences(const Eigen::Ref<const Eigen::VectorXd>& mean1, const Eigen::Ref<const Eigen::VectorXd>& logvar1,
                                            const Eigen::Ref<const Eigen::VectorXd>& mean2, const Eigen::Ref<const Eigen::VectorXd>& logvar2,
                                            const Eigen::Ref<const Eigen::VectorXd>& weights, bool keep_pointwise = false) {
    DivergenceReport r;
    if (keep_pointwise) r.pointwise.reserve(static_cast<std::size_t>(weights.size()));
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        const DivergenceTerms t = divergence_terms({mean1(i), logvar1(i)}, {mean2(i), logvar2(i)});
        r.hellinger_sq += weights(i) * t.hellinger_sq;
        r.kl += weights(i) * t.kl;
        r.var_div += weights(i) * t.var_div;
        if (keep_pointwise) r.pointwise.push_back(t);
    }
    // Rounding can leave tiny negatives for coincident parameters.
    r.hellinger_sq = std::clamp(r.hellinger_sq, 0.0, 2.0);
    r.kl = std::max(r.kl, 0.0);
    r.var_div = std::max(r.var_div, 0.0);
    return r;
}

/// d_n^2 only, from values at rule nodes.
inline double average_hellinger_sq(const Eigen::Ref<const Eigen::VectorXd>& mean1, const Eigen::Ref<const Eigen::VectorXd>& logvar1,
                                   const Eigen::Ref<const Eigen::VectorXd>& mean2, const Eigen::Ref<const Eigen::VectorXd>& logvar2,
                                   const Eigen::Ref<const Eigen::VectorXd>& weights) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) h += weights(i) * hellinger_sq({mean1(i), logvar1(i)}, {mean2(i), logvar2(i)});
    return std::clamp(h, 0.0, 2.0);
}

struct FieldValues {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_variance;
};

inline FieldValues evaluate(const FunctionPair& theta, const Eigen::MatrixXd& nodes) {
    FieldValues v{Eigen::VectorXd(nodes.rows()), Eigen::VectorXd(nodes.rows())};
    std::vector<double> x(static_cast<std::size_t>(nodes.cols()));
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
        for (Eigen::Index j = 0; j < nodes.cols(); ++j) x[static_cast<std::size_t>(j)] = nodes(i, j);
        v.mean(i) = theta.mean(x);
        v.log_variance(i) = theta.log_variance(x);
    }
    return v;
}

struct AveragingConfig {
    int nodes_1d = 256;
    std::size_t qmc_points = 1u << 14;
    bool keep_pointwise = false;
    double convergence_tolerance = 1e-9;
};

/// Averages over Q: exact for fixed designs, Gauss-Legendre (d = 1) or
/// quasi-Monte Carlo (d >= 2) for continuous Q.
inline DivergenceReport avg_divergences(const FunctionPair& a, const FunctionPair& b, const DesignSpec& design, AveragingConfig cfg = {}) {
    const QuadratureRule rule = design.averaging_rule(cfg.nodes_1d, cfg.qmc_points);
    const FieldValues va = evaluate(a, rule.nodes);
    const FieldValues vb = evaluate(b, rule.nodes);
    DivergenceReport r = average_divergences(va.mean, va.log_variance, vb.mean, vb.log_variance, rule.weights, cfg.keep_pointwise);
    if (!design.is_fixed() && design.dimension() == 1) {
        // Refinement check against a rule with half the nodes.
        const QuadratureRule coarse = design.averaging_rule(std::max(cfg.nodes_1d / 2, 2), cfg.qmc_points);
        const FieldValues ca = evaluate(a, coarse.nodes);
        const FieldValues cb = evaluate(b, coarse.nodes);
        const DivergenceReport rc = average_divergences(ca.mean, ca.log_variance, cb.mean, cb.log_variance, coarse.weights);
        auto close = [&](double x, double y) { return std::abs(x - y) <= cfg.convergence_tolerance * (1.0 + std::abs(x)); };
        r.converged = close(r.hellinger_sq, rc.hellinger_sq) && close(r.kl, rc.kl) && close(r.var_div, rc.var_div);
    }
    return r;
}

struct OracleConfig {
    int hermite_nodes = 64;
    double tolerance = 1e-8;
};

struct OracleResult {
    double hellinger_sq = 0.0;
    double kl = 0.0;
    double var_div = 0.0;
    /// Estimated absolute quadrature error per quantity.
    double hellinger_error = 0.0;
    double kl_error = 0.0;
    double var_error = 0.0;
    /// Largest relative disagreement with the closed forms.
    double max_relative_gap = 0.0;
    bool agrees = true;
};

namespace detail {

struct HermiteMoments {
    double kl = 0.0;
    double var = 0.0;
};

// E_1[L] and Var_1[L] for L = log p1 - log p2, with y = mean1 + sqrt(2 V1) t.
inline HermiteMoments hermite_moments(const ConditionalNormal& a, const ConditionalNormal& b, const Rule1D& gh) {
    const double scale = std::sqrt(2.0 * a.variance());
    const double norm = 1.0 / std::sqrt(std::numbers::pi);
    std::vector<double> ratio(gh.nodes.size());
    double k = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        const double y = a.mean + scale * gh.nodes[i];
        ratio[i] = log_density(a, y) - log_density(b, y);
        k += norm * gh.weights[i] * ratio[i];
    }
    double v = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        const double c = ratio[i] - k;
        v += norm * gh.weights[i] * c * c;
    }
    return {k, v};
}

inline double relative_gap(double numeric, double closed) {
    const double denom = std::max(std::abs(closed), 1e-300);
    if (closed == 0.0) return std::abs(numeric);
    return std::abs(numeric - closed) / denom;
}

}  // namespace detail

/// Squared Hellinger distance by adaptive Gauss-Kronrod over y of (sqrt p1 - sqrt p2)^2,
/// with breakpoints at multiples of both standard deviations.
inline std::pair<double, double> hellinger_sq_quadrature(const ConditionalNormal& a, const ConditionalNormal& b) {
    const double sa = std::sqrt(a.variance());
    const double sb = std::sqrt(b.variance());
    std::vector<double> breaks;
    for (double m : {-40.0, -16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0}) {
        breaks.push_back(a.mean + m * sa);
        breaks.push_back(b.mean + m * sb);
    }
    std::sort(breaks.begin(), breaks.end());
    auto integrand = [&](double y) {
        const double d = std::exp(0.5 * log_density(a, y)) - std::exp(0.5 * log_density(b, y));
        return d * d;
    };
    double total = 0.0;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        double e = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, breaks[i], breaks[i + 1], 10, 1e-12, &e);
        err += e;
    }
    return {total, err};
}

/// Independent numerical evaluation of the three divergences at one covariate value.
///
/// KL and Var integrate the log-likelihood ratio (built from log_density) by
/// Gauss-Hermite centred at theta1; the error estimate is the change against a
/// rule with 3/4 of the nodes. The Hellinger term integrates the definition
/// over y directly.
inline OracleResult oracle_divergences(const ConditionalNormal& a, const ConditionalNormal& b, OracleConfig cfg = {}) {
    if (cfg.hermite_nodes < 20) throw std::invalid_argument("oracle_divergences: quadrature order must be >= 20");
    const Rule1D gh = gauss_hermite(cfg.hermite_nodes);
    const Rule1D gh_coarse = gauss_hermite(std::max(20, 3 * cfg.hermite_nodes / 4));
    const detail::HermiteMoments fine = detail::hermite_moments(a, b, gh);
    const detail::HermiteMoments coarse = detail::hermite_moments(a, b, gh_coarse);
    const auto [h, herr] = hellinger_sq_quadrature(a, b);

    OracleResult r;
    r.hellinger_sq = h;
    r.kl = fine.kl;
    r.var_div = fine.var;
    r.hellinger_error = herr;
    r.kl_error = std::abs(fine.kl - coarse.kl);
    r.var_error = std::abs(fine.var - coarse.var);
    const DivergenceTerms closed = divergence_terms(a, b);
    r.max_relative_gap = std::max({detail::relative_gap(r.hellinger_sq, closed.hellinger_sq), detail::relative_gap(r.kl, closed.kl),
                                   detail::relative_gap(r.var_div, closed.var_div)});
    r.agrees = r.max_relative_gap <= cfg.tolerance;
    return r;
}

inline OracleResult oracle_divergences(const FunctionPair& a, const FunctionPair& b, Point x, OracleConfig cfg = {}) {
    return oracle_divergences(a.at(x), b.at(x), cfg);
}

inline OracleResult oracle_divergences(const FunctionPair& a, const FunctionPair& b, double x, OracleConfig cfg = {}) {
    return oracle_divergences(a.at(x), b.at(x), cfg);
}

/// int exp(log_density) dy by Gauss-Hermite centred at the law itself.
inline double density_mass(const ConditionalNormal& p, int nodes = 64) {
    const Rule1D gh = gauss_hermite(nodes);
    const double scale = std::sqrt(2.0 * p.variance());
    double s = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        const double t = gh.nodes[i];
        s += gh.weights[i] * std::exp(t * t + log_density(p, p.mean + scale * t)) * scale;
    }
    return s;
}

}  // namespace hetbayes
