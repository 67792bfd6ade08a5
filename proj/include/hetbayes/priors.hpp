#pragma once

#include "hetbayes/random.hpp"
#include "hetbayes/spline_basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace hetbayes {

// ---------------------------------------------------------------------------
// Spline coefficient priors

/// i.i.d. N(0, 1) coordinates.
struct NormalCoefficients {};

/// i.i.d. coordinates with density proportional to exp(-|b|^rho / 2).
struct GeneralizedCoefficients {
    double rho = 2.0;
};

using CoefficientLaw = std::variant<NormalCoefficients, GeneralizedCoefficients>;

struct FixedDimension {
    int J = 1;
};

/// Pr(J = k) = p^(k-1) (1 - p), k >= 1.
struct GeometricDimension {
    double p = 0.5;
};

using DimensionLaw = std::variant<FixedDimension, GeometricDimension>;

struct SplinePriorConfig {
    CoefficientLaw coefficients = NormalCoefficients{};
    DimensionLaw dimension = FixedDimension{};

    void validate() const {
        if (const auto* g = std::get_if<GeneralizedCoefficients>(&coefficients); g && !(g->rho > 1.0)) {
            throw std::invalid_argument("SplinePriorConfig: rho must exceed 1");
        }
        if (const auto* f = std::get_if<FixedDimension>(&dimension); f && f->J < 1) {
            throw std::invalid_argument("SplinePriorConfig: J must be >= 1");
        }
        if (const auto* g = std::get_if<GeometricDimension>(&dimension); g && !(g->p > 0.0 && g->p < 1.0)) {
            throw std::invalid_argument("SplinePriorConfig: geometric p must lie in (0,1)");
        }
    }
};

/// Tail exponent rho of a coefficient law (2 for the normal law).
inline double tail_exponent(const CoefficientLaw& law) {
    if (const auto* g = std::get_if<GeneralizedCoefficients>(&law)) return g->rho;
    return 2.0;
}

/// log of 2^(1 + 1/rho) Gamma(1 + 1/rho), the normalizer of exp(-|b|^rho / 2).
inline double generalized_log_normalizer(double rho) {
    return (1.0 + 1.0 / rho) * std::numbers::ln2 + std::lgamma(1.0 + 1.0 / rho);
}

inline double log_prior_coordinate(const CoefficientLaw& law, double b) {
    if (const auto* g = std::get_if<GeneralizedCoefficients>(&law)) {
        return -0.5 * std::pow(std::abs(b), g->rho) - generalized_log_normalizer(g->rho);
    }
    return -0.5 * b * b - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_prior(const CoefficientLaw& law, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (std::holds_alternative<NormalCoefficients>(law)) {
        return -0.5 * beta.squaredNorm() - 0.5 * static_cast<double>(beta.size()) * std::log(2.0 * std::numbers::pi);
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < beta.size(); ++i) s += log_prior_coordinate(law, beta(i));
    return s;
}

inline double sample_coordinate(const CoefficientLaw& law, Rng& rng) {
    if (const auto* g = std::get_if<GeneralizedCoefficients>(&law)) {
        // |b|^rho / 2 ~ Gamma(1/rho, 1), symmetric sign.
        const double magnitude = std::pow(2.0 * rng.gamma(1.0 / g->rho, 1.0), 1.0 / g->rho);
        return rng.uniform() < 0.5 ? -magnitude : magnitude;
    }
    return rng.normal();
}

inline Eigen::VectorXd sample_coefficients(const CoefficientLaw& law, int J, Rng& rng) {
    Eigen::VectorXd beta(J);
    for (int j = 0; j < J; ++j) beta(j) = sample_coordinate(law, rng);
    return beta;
}

inline double geometric_pmf(double p, int k) {
    if (k < 1) return 0.0;
    return std::pow(p, k - 1) * (1.0 - p);
}

/// Inversion: J = 1 + floor(log U / log p).
inline int sample_jn_geometric(double p, Rng& rng) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("sample_jn_geometric: p must lie in (0,1)");
    const double u = 1.0 - rng.uniform();  // (0, 1]
    const double k = std::floor(std::log(u) / std::log(p));
    if (!(k < static_cast<double>(std::numeric_limits<int>::max() - 1))) return std::numeric_limits<int>::max();
    return 1 + static_cast<int>(k);
}

/// Basis of dimension J for a drawn dimension, keeping the requested order when J allows.
inline std::shared_ptr<const SplineBasis> basis_for_dimension(int order, int J) {
    const int q = std::min(order, J);
    return make_basis(q, J - q + 1);
}

/// One draw from the spline prior. With a geometric dimension law J is drawn
/// first and a basis of that dimension (same order where possible) replaces
/// `basis`.
inline CoefficientVector sample_spline_prior(const SplinePriorConfig& config, std::shared_ptr<const SplineBasis> basis, Rng& rng) {
    config.validate();
    if (const auto* g = std::get_if<GeometricDimension>(&config.dimension)) {
        const int J = sample_jn_geometric(g->p, rng);
        basis = basis_for_dimension(basis->order(), J);
    } else if (std::get<FixedDimension>(config.dimension).J != basis->dimension()) {
        throw std::invalid_argument("sample_spline_prior: configured J does not match the basis");
    }
    Eigen::VectorXd beta = sample_coefficients(config.coefficients, basis->dimension(), rng);
    return CoefficientVector(std::move(basis), std::move(beta));
}

/// Small root p of p^(k-1) (1 - p) = exp(-n eps^2), found by bisection to 1e-12.
inline double solve_geometric_p(int k, double n, double eps, double tolerance = 1e-12) {
    if (k < 1 || !(n > 0.0) || !(eps > 0.0)) throw std::invalid_argument("solve_geometric_p: need k >= 1, n > 0, eps > 0");
    const double log_target = -n * eps * eps;
    if (k == 1) return -std::expm1(log_target);
    auto log_h = [k](double p) { return (k - 1) * std::log(p) + std::log1p(-p); };
    const double peak = static_cast<double>(k - 1) / k;
    if (log_h(peak) < log_target) throw std::domain_error("solve_geometric_p: exp(-n eps^2) exceeds the largest attainable mass");
    double lo = 0.0;
    double hi = peak;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= 0.0 || log_h(mid) < log_target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Rates and dimension schedules

enum class PriorKind { spline, rescaled_se, integrated_bm };

inline std::string to_string(PriorKind k) {
    switch (k) {
        case PriorKind::spline: return "spline";
        case PriorKind::rescaled_se: return "rescaled-se";
        case PriorKind::integrated_bm: return "integrated-bm";
    }
    return "unknown";
}

inline PriorKind prior_kind_from_string(const std::string& s) {
    if (s == "spline") return PriorKind::spline;
    if (s == "rescaled-se" || s == "rescaled_se" || s == "se") return PriorKind::rescaled_se;
    if (s == "integrated-bm" || s == "integrated_bm" || s == "ibm") return PriorKind::integrated_bm;
    throw std::invalid_argument("unknown prior kind '" + s + "'");
}

struct RateSpec {
    double alpha = 2.0;
    double gamma = 2.0;
    int d = 1;
    PriorKind kind = PriorKind::spline;
    /// Integration folds for the integrated-BM prior; default ceil(smoothness - 1/2).
    std::optional<int> fold_eta;
    std::optional<int> fold_f;

    void validate() const {
        if (!(alpha >= 0.5) || !(gamma >= 0.5)) throw std::invalid_argument("RateSpec: alpha and gamma must be >= 1/2");
        if (d < 1) throw std::invalid_argument("RateSpec: d must be >= 1");
        if ((fold_eta && *fold_eta < 0) || (fold_f && *fold_f < 0)) throw std::invalid_argument("RateSpec: fold counts must be >= 0");
    }

    [[nodiscard]] int eta_folds() const { return fold_eta.value_or(static_cast<int>(std::ceil(alpha - 0.5))); }
    [[nodiscard]] int f_folds() const { return fold_f.value_or(static_cast<int>(std::ceil(gamma - 0.5))); }
};

namespace detail {

inline double schedule_argument(const RateSpec& spec, double n) {
    spec.validate();
    if (!(n >= 2.0)) throw std::invalid_argument("rate schedule: n must be >= 2");
    const double a = std::pow(n / std::log(n), 1.0 / (1.0 + 2.0 * spec.alpha));
    const double b = std::pow(n, 1.0 / (2.0 + 2.0 * spec.gamma));
    return std::min(a, b);
}

}  // namespace detail

/// J_n = min{(n / log n)^(1/(1+2 alpha)), n^(1/(2+2 gamma))}, rounded half up, at least 1.
inline int jn_schedule(const RateSpec& spec, double n) {
    return std::max(1, static_cast<int>(std::floor(detail::schedule_argument(spec, n) + 0.5)));
}

/// Dimension cap k_n of the random-dimension sieve: the same expression, floored.
inline int sieve_dimension_cap(const RateSpec& spec, double n) {
    return std::max(1, static_cast<int>(std::floor(detail::schedule_argument(spec, n))));
}

inline double rate_theoretical(const RateSpec& spec, double n) {
    spec.validate();
    if (!(n >= 2.0)) throw std::invalid_argument("rate_theoretical: n must be >= 2");
    const double logn = std::log(n);
    switch (spec.kind) {
        case PriorKind::spline:
            return std::max(std::pow(n / logn, -spec.alpha / (1.0 + 2.0 * spec.alpha)), std::pow(n, -spec.gamma / (2.0 + 2.0 * spec.gamma)));
        case PriorKind::rescaled_se: {
            const double d = spec.d;
            auto term = [&](double k) { return std::pow(n, -k / (d + 2.0 * k)) * std::pow(logn, (d + 1.0) * k / (2.0 * k + d)); };
            return std::max(term(spec.alpha), term(spec.gamma));
        }
        case PriorKind::integrated_bm:
            return std::max(std::pow(n, -spec.alpha / (2.0 * spec.eta_folds() + 2.0)), std::pow(n, -spec.gamma / (2.0 * spec.f_folds() + 2.0)));
    }
    throw std::logic_error("rate_theoretical: unknown prior kind");
}

/// max{n^(-alpha/(1+2 alpha)), n^(-gamma/(1+2 gamma))}.
inline double minimax_rate(double alpha, double gamma, double n) {
    return std::max(std::pow(n, -alpha / (1.0 + 2.0 * alpha)), std::pow(n, -gamma / (1.0 + 2.0 * gamma)));
}

/// J exp(-M^rho / 2): bound on Pr(sup |sum beta_j B_j| > M) up to constants.
inline double coefficient_tail_bound(int J, double M, double rho = 2.0) {
    if (!(M > 0.0)) throw std::invalid_argument("coefficient_tail_bound: M must be positive");
    return J * std::exp(-0.5 * std::pow(M, rho));
}

// ---------------------------------------------------------------------------
// Gaussian process priors

inline double se_kernel(std::span<const double> s, std::span<const double> t) {
    if (s.size() != t.size()) throw std::invalid_argument("se_kernel: dimension mismatch");
    double d2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) d2 += (s[i] - t[i]) * (s[i] - t[i]);
    return std::exp(-d2);
}

inline double se_kernel(double s, double t) { return std::exp(-(s - t) * (s - t)); }

/// exp(-A^2 |x_i - x_j|^2) over the rows of `points`.
inline Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& points, double scale = 1.0) {
    const Eigen::Index m = points.rows();
    Eigen::MatrixXd k(m, m);
    const double a2 = scale * scale;
    for (Eigen::Index i = 0; i < m; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = k(j, i) = std::exp(-a2 * (points.row(i) - points.row(j)).squaredNorm());
        }
    }
    return k;
}

enum class GPKind { rescaled_se, integrated_bm };

struct GPPriorConfig {
    GPKind kind = GPKind::rescaled_se;
    /// A^d ~ Gamma(shape, rate).
    double gamma_shape = 1.0;
    double gamma_rate = 1.0;
    int d = 1;
    int folds = 0;
    Eigen::MatrixXd grid;
    double jitter = 1e-10;
    double max_jitter = 1e-6;

    /// m equispaced points 0, 1/(m-1), ..., 1.
    static Eigen::MatrixXd uniform_grid(int m) {
        if (m < 2) throw std::invalid_argument("uniform_grid: need at least two points");
        return Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
    }

    void validate() const {
        if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0)) throw std::invalid_argument("GPPriorConfig: gamma parameters must be positive");
        if (grid.rows() == 0) throw std::invalid_argument("GPPriorConfig: empty grid");
        if (grid.minCoeff() < 0.0 || grid.maxCoeff() > 1.0) throw std::invalid_argument("GPPriorConfig: grid outside [0,1]^d");
        if (!(jitter >= 0.0)) throw std::invalid_argument("GPPriorConfig: jitter must be >= 0");
        if (folds < 0) throw std::invalid_argument("GPPriorConfig: folds must be >= 0");
        if (kind == GPKind::rescaled_se && grid.cols() != d) throw std::invalid_argument("GPPriorConfig: grid columns must equal d");
    }
};

class FactorizationError : public std::runtime_error {
public:
    FactorizationError(const std::string& what, double final_jitter) : std::runtime_error(what), final_jitter_(final_jitter) {}
    [[nodiscard]] double final_jitter() const { return final_jitter_; }

private:
    double final_jitter_;
};

struct JitteredFactor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

/// Cholesky of K + jitter I, escalating jitter tenfold up to `max_jitter`.
inline JitteredFactor factor_with_jitter(const Eigen::MatrixXd& k, double jitter, double max_jitter) {
    const Eigen::Index m = k.rows();
    double j = jitter;
    for (;;) {
        Eigen::LLT<Eigen::MatrixXd> llt(k + j * Eigen::MatrixXd::Identity(m, m));
        if (llt.info() == Eigen::Success) return {llt.matrixL(), j};
        const double next = j > 0.0 ? 10.0 * j : 1e-10;
        if (next > max_jitter * (1.0 + 1e-9)) {
            throw FactorizationError("kernel matrix not positive definite with jitter up to " + std::to_string(j), j);
        }
        j = next;
    }
}

struct GPPath {
    Eigen::VectorXd values;
    /// Realized rescaling A (1 for integrated BM).
    double scale = 1.0;
    double jitter = 0.0;
};

/// Centered Gaussian vector on the grid with covariance exp(-A^2 |x_i - x_j|^2) + jitter I.
inline GPPath sample_se_path_given_scale(const GPPriorConfig& config, double scale, Rng& rng) {
    config.validate();
    const JitteredFactor f = factor_with_jitter(se_kernel_matrix(config.grid, scale), config.jitter, config.max_jitter);
    Eigen::VectorXd z(config.grid.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return {f.lower * z, scale, f.jitter};
}

/// Draws A with A^d ~ Gamma(a, b), then the rescaled path on the grid.
inline GPPath sample_rescaled_se_path(const GPPriorConfig& config, Rng& rng) {
    if (config.kind != GPKind::rescaled_se) throw std::invalid_argument("sample_rescaled_se_path: config is not rescaled-se");
    config.validate();
    const double g = rng.gamma(config.gamma_shape, config.gamma_rate);
    return sample_se_path_given_scale(config, std::pow(g, 1.0 / config.d), rng);
}

/// Linear map from (m - 1 Brownian increments, Z_0..Z_k) to the integrated-BM
/// path on a sorted grid starting at 0: k-fold cumulative trapezoid of W plus
/// sum_{i=0..k} Z_i x^i / i!.
inline Eigen::MatrixXd integrated_bm_map(const Eigen::VectorXd& grid, int folds) {
    const Eigen::Index m = grid.size();
    if (m < 2) throw std::invalid_argument("integrated_bm_map: need at least two grid points");
    if (grid(0) != 0.0) throw std::invalid_argument("integrated_bm_map: grid must start at 0");
    for (Eigen::Index i = 1; i < m; ++i) {
        if (!(grid(i) > grid(i - 1))) throw std::invalid_argument("integrated_bm_map: grid must be strictly increasing");
    }
    if (folds < 0) throw std::invalid_argument("integrated_bm_map: folds must be >= 0");

    Eigen::MatrixXd brownian = Eigen::MatrixXd::Zero(m, m - 1);
    for (Eigen::Index i = 1; i < m; ++i) {
        brownian.row(i) = brownian.row(i - 1);
        brownian(i, i - 1) = std::sqrt(grid(i) - grid(i - 1));
    }
    Eigen::MatrixXd trapezoid = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 1; i < m; ++i) {
        trapezoid.row(i) = trapezoid.row(i - 1);
        const double h = grid(i) - grid(i - 1);
        trapezoid(i, i - 1) += 0.5 * h;
        trapezoid(i, i) += 0.5 * h;
    }
    for (int r = 0; r < folds; ++r) brownian = (trapezoid * brownian).eval();

    Eigen::MatrixXd map(m, m - 1 + folds + 1);
    map.leftCols(m - 1) = brownian;
    for (int i = 0; i <= folds; ++i) {
        const double fact = std::tgamma(i + 1.0);
        for (Eigen::Index r = 0; r < m; ++r) map(r, m - 1 + i) = std::pow(grid(r), i) / fact;
    }
    return map;
}

inline GPPath sample_integrated_bm(const GPPriorConfig& config, Rng& rng) {
    if (config.kind != GPKind::integrated_bm) throw std::invalid_argument("sample_integrated_bm: config is not integrated-bm");
    config.validate();
    if (config.grid.cols() != 1) throw std::invalid_argument("sample_integrated_bm: one-dimensional grid required");
    const Eigen::MatrixXd map = integrated_bm_map(config.grid.col(0), config.folds);
    Eigen::VectorXd xi(map.cols());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    return {map * xi, 1.0, 0.0};
}

inline GPPath sample_gp_path(const GPPriorConfig& config, Rng& rng) {
    return config.kind == GPKind::rescaled_se ? sample_rescaled_se_path(config, rng) : sample_integrated_bm(config, rng);
}

}  // namespace hetbayes
