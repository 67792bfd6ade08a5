#pragma once

#include "hetbayes/design.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetbayes {

/// B-spline basis of order q (degree q-1) on [0,1] with K equal subintervals
/// and a clamped knot vector (q-fold knots at 0 and 1).
///
/// Subintervals are ((k-1)/K, k/K] with x = 0 assigned to the first one, so
/// order-1 functions are indicators of [0,1/K], (1/K,2/K], ...
class SplineBasis {
public:
    static constexpr int kMaxOrder = 20;

    SplineBasis(int order, int intervals) : order_(order), intervals_(intervals) {
        if (order < 1) throw std::invalid_argument("SplineBasis: order must be >= 1, got " + std::to_string(order));
        if (intervals < 1) throw std::invalid_argument("SplineBasis: interval count must be >= 1, got " + std::to_string(intervals));
        if (order > kMaxOrder) throw std::invalid_argument("SplineBasis: order above " + std::to_string(kMaxOrder) + " unsupported");
        knots_.reserve(static_cast<std::size_t>(dimension() + order_));
        for (int i = 0; i < order_; ++i) knots_.push_back(0.0);
        for (int k = 1; k < intervals_; ++k) knots_.push_back(static_cast<double>(k) / intervals_);
        for (int i = 0; i < order_; ++i) knots_.push_back(1.0);
    }

    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] int intervals() const { return intervals_; }
    /// J = q + K - 1.
    [[nodiscard]] int dimension() const { return order_ + intervals_ - 1; }
    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }

    /// Subinterval breakpoints 0, 1/K, ..., 1.
    [[nodiscard]] std::vector<double> breakpoints() const {
        std::vector<double> b(knots_.begin() + (order_ - 1), knots_.end() - (order_ - 1));
        return b;
    }

    /// Index k in [0, K) of the subinterval containing x.
    [[nodiscard]] int interval_index(double x) const {
        check_domain(x);
        const auto first = knots_.begin() + order_;
        const auto last = knots_.begin() + order_ + (intervals_ - 1);
        return static_cast<int>(std::lower_bound(first, last, x) - first);
    }

    /// Support [t_j, t_{j+q}] of basis function j.
    [[nodiscard]] std::pair<double, double> support(int j) const {
        if (j < 0 || j >= dimension()) throw std::out_of_range("SplineBasis: basis index out of range");
        return {knots_[j], knots_[j + order_]};
    }

    /// The q possibly-nonzero values at x, written to `out[0..q)`; returns the
    /// index of the first basis function they belong to.
    int eval_local(double x, double* out) const {
        const int k = interval_index(x);
        const int span = k + order_ - 1;
        std::array<double, kMaxOrder> left{};
        std::array<double, kMaxOrder> right{};
        out[0] = 1.0;
        for (int j = 1; j < order_; ++j) {
            left[j] = x - knots_[span + 1 - j];
            right[j] = knots_[span + j] - x;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        return k;
    }

    /// Dense vector of all J basis values at x.
    [[nodiscard]] Eigen::VectorXd eval(double x) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension());
        std::array<double, kMaxOrder> local{};
        const int first = eval_local(x, local.data());
        for (int r = 0; r < order_; ++r) v(first + r) = local[r];
        return v;
    }

    /// Row i holds B(xs[i]).
    [[nodiscard]] Eigen::MatrixXd design_matrix(const Eigen::Ref<const Eigen::VectorXd>& xs) const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(xs.size(), dimension());
        std::array<double, kMaxOrder> local{};
        for (Eigen::Index i = 0; i < xs.size(); ++i) {
            const int first = eval_local(xs(i), local.data());
            for (int r = 0; r < order_; ++r) m(i, first + r) = local[r];
        }
        return m;
    }

    friend bool operator==(const SplineBasis& a, const SplineBasis& b) {
        return a.order_ == b.order_ && a.intervals_ == b.intervals_;
    }

private:
    static void check_domain(double x) {
        if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("SplineBasis: x = " + std::to_string(x) + " outside [0,1]");
    }

    int order_;
    int intervals_;
    std::vector<double> knots_;
};

/// Spline coefficients beta indexing a particular basis.
class CoefficientVector {
public:
    CoefficientVector(std::shared_ptr<const SplineBasis> basis, Eigen::VectorXd beta)
        : basis_(std::move(basis)), beta_(std::move(beta)) {
        if (!basis_) throw std::invalid_argument("CoefficientVector: null basis");
        if (beta_.size() != basis_->dimension()) {
            throw std::invalid_argument("CoefficientVector: length " + std::to_string(beta_.size()) + " does not match J = " +
                                        std::to_string(basis_->dimension()));
        }
        if (!beta_.allFinite()) throw std::invalid_argument("CoefficientVector: non-finite coefficient");
    }

    [[nodiscard]] const SplineBasis& basis() const { return *basis_; }
    [[nodiscard]] const std::shared_ptr<const SplineBasis>& basis_ptr() const { return basis_; }
    [[nodiscard]] const Eigen::VectorXd& values() const { return beta_; }
    [[nodiscard]] Eigen::Index size() const { return beta_.size(); }

    /// g(x) = beta' B(x).
    [[nodiscard]] double operator()(double x) const {
        std::array<double, SplineBasis::kMaxOrder> local{};
        const int first = basis_->eval_local(x, local.data());
        double s = 0.0;
        for (int r = 0; r < basis_->order(); ++r) s += beta_(first + r) * local[r];
        return s;
    }

private:
    std::shared_ptr<const SplineBasis> basis_;
    Eigen::VectorXd beta_;
};

inline std::shared_ptr<const SplineBasis> make_basis(int order, int intervals) {
    return std::make_shared<const SplineBasis>(order, intervals);
}

/// Basis of order q with J functions (K = J - q + 1).
inline std::shared_ptr<const SplineBasis> make_basis_with_dimension(int order, int dimension) {
    if (dimension < order) {
        throw std::invalid_argument("make_basis_with_dimension: J = " + std::to_string(dimension) + " below order " +
                                    std::to_string(order));
    }
    return make_basis(order, dimension - order + 1);
}

inline double eval_spline(const SplineBasis& basis, const CoefficientVector& coeffs, double x) {
    if (!(coeffs.basis() == basis)) throw std::invalid_argument("eval_spline: coefficients index a different basis");
    return coeffs(x);
}

inline double eval_spline(const SplineBasis& basis, const Eigen::VectorXd& beta, double x) {
    if (beta.size() != basis.dimension()) throw std::invalid_argument("eval_spline: dimension mismatch");
    std::array<double, SplineBasis::kMaxOrder> local{};
    const int first = basis.eval_local(x, local.data());
    double s = 0.0;
    for (int r = 0; r < basis.order(); ++r) s += beta(first + r) * local[r];
    return s;
}

struct QuadratureConfig {
    /// Gauss-Legendre nodes per knot span for continuous Q; 0 selects 2q.
    int nodes_per_interval = 0;
};

/// Sigma_ij = int B_i B_j dQ.
struct GramMatrix {
    Eigen::MatrixXd sigma;
    DesignKind design_kind = DesignKind::uniform;
    int nodes_per_interval = 0;  // 0 for empirical measures
    /// All design points coincide; Sigma is rank one.
    bool degenerate = false;

    [[nodiscard]] Eigen::Index dimension() const { return sigma.rows(); }
};

namespace detail {

inline int resolve_nodes(const SplineBasis& basis, const QuadratureConfig& quad) {
    const int nodes = quad.nodes_per_interval == 0 ? 2 * basis.order() : quad.nodes_per_interval;
    if (nodes < 2 * basis.order()) {
        throw std::invalid_argument("gram_matrix: need >= 2q quadrature nodes per subinterval, got " + std::to_string(nodes));
    }
    return nodes;
}

inline QuadratureRule basis_rule(const SplineBasis& basis, const DesignSpec& design, int nodes) {
    if (design.dimension() != 1) throw std::invalid_argument("spline operations require a one-dimensional design");
    return design.integration_rule_1d(basis.breakpoints(), nodes);
}

}  // namespace detail

inline GramMatrix gram_matrix(const SplineBasis& basis, const DesignSpec& design, QuadratureConfig quad = {}) {
    GramMatrix g;
    g.design_kind = design.kind();
    g.nodes_per_interval = design.is_fixed() ? 0 : detail::resolve_nodes(basis, quad);
    const QuadratureRule rule = detail::basis_rule(basis, design, g.nodes_per_interval);
    const int J = basis.dimension();
    g.sigma = Eigen::MatrixXd::Zero(J, J);
    std::array<double, SplineBasis::kMaxOrder> local{};
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const int first = basis.eval_local(rule.nodes(i, 0), local.data());
        const double w = rule.weights(i);
        for (int a = 0; a < basis.order(); ++a) {
            for (int b = 0; b < basis.order(); ++b) g.sigma(first + a, first + b) += w * local[a] * local[b];
        }
    }
    // Exact symmetry regardless of accumulation order.
    g.sigma = 0.5 * (g.sigma + g.sigma.transpose()).eval();
    g.degenerate = design.degenerate();
    return g;
}

/// J * lambda_min(Sigma) and J * lambda_max(Sigma).
struct GramRegularity {
    double c_lower = 0.0;
    double c_upper = 0.0;
};

inline GramRegularity check_gram_regularity(const GramMatrix& gram) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.sigma, Eigen::EigenvaluesOnly);
    const double J = static_cast<double>(gram.dimension());
    return {J * std::max(0.0, eig.eigenvalues().minCoeff()), J * eig.eigenvalues().maxCoeff()};
}

struct ProjectionConfig {
    /// Nodes per knot span for the inner products; 0 selects max(2q, 16).
    int nodes_per_interval = 0;
    /// Points of the uniform grid on which the sup error is measured.
    int sup_grid_points = 10000;
};

struct Projection {
    CoefficientVector coeffs;
    double sup_error = 0.0;
    double l2_error = 0.0;
    /// Ridge added to Sigma before solving (0 when Sigma was well conditioned).
    double jitter = 0.0;
};

/// L2(Q) projection of `target` onto the spline space.
inline Projection project(std::shared_ptr<const SplineBasis> basis_ptr, const std::function<double(double)>& target,
                          const DesignSpec& design, ProjectionConfig cfg = {}) {
    const SplineBasis& basis = *basis_ptr;
    const int J = basis.dimension();
    const int nodes = cfg.nodes_per_interval == 0 ? std::max(2 * basis.order(), 16) : cfg.nodes_per_interval;
    if (!design.is_fixed() && nodes < 2 * basis.order()) throw std::invalid_argument("project: need >= 2q nodes per subinterval");
    const QuadratureRule rule = detail::basis_rule(basis, design, nodes);

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(J, J);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd target_at_nodes(rule.size());
    std::array<double, SplineBasis::kMaxOrder> local{};
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const double x = rule.nodes(i, 0);
        const double w = rule.weights(i);
        const double t = target(x);
        target_at_nodes(i) = t;
        const int first = basis.eval_local(x, local.data());
        for (int a = 0; a < basis.order(); ++a) {
            rhs(first + a) += w * local[a] * t;
            for (int b = 0; b < basis.order(); ++b) sigma(first + a, first + b) += w * local[a] * local[b];
        }
    }
    sigma = 0.5 * (sigma + sigma.transpose()).eval();

    double jitter = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
        jitter = 1e-12 * sigma.trace() / J;
        if (!(jitter > 0.0)) jitter = 1e-12;
        llt.compute(sigma + jitter * Eigen::MatrixXd::Identity(J, J));
        if (llt.info() != Eigen::Success) throw std::runtime_error("project: Gram matrix not factorizable after ridge");
    }
    Eigen::VectorXd beta = llt.solve(rhs);
    CoefficientVector coeffs(std::move(basis_ptr), std::move(beta));

    double l2 = 0.0;
    for (Eigen::Index i = 0; i < rule.size(); ++i) {
        const double e = coeffs(rule.nodes(i, 0)) - target_at_nodes(i);
        l2 += rule.weights(i) * e * e;
    }
    double sup = 0.0;
    const int m = std::max(cfg.sup_grid_points, 2);
    for (int i = 0; i < m; ++i) {
        const double x = static_cast<double>(i) / (m - 1);
        sup = std::max(sup, std::abs(coeffs(x) - target(x)));
    }
    return Projection{std::move(coeffs), sup, std::sqrt(l2), jitter};
}

}  // namespace hetbayes
