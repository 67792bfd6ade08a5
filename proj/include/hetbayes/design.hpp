#pragma once

#include "hetbayes/quadrature.hpp"
#include "hetbayes/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetbayes {

enum class DesignKind { fixed, uniform, density };

inline std::string to_string(DesignKind k) {
    switch (k) {
        case DesignKind::fixed: return "fixed";
        case DesignKind::uniform: return "uniform";
        case DesignKind::density: return "density";
    }
    return "unknown";
}

/// Covariate law Q: either the empirical measure of fixed design points or a
/// sampling distribution on [0,1]^d.
class DesignSpec {
public:
    /// Fixed design; rows of `points` are the design points.
    static DesignSpec fixed(Eigen::MatrixXd points) {
        if (points.rows() < 1 || points.cols() < 1) throw std::invalid_argument("DesignSpec: fixed design must be nonempty");
        if (!points.allFinite() || points.minCoeff() < 0.0 || points.maxCoeff() > 1.0) {
            throw std::invalid_argument("DesignSpec: fixed design points must lie in [0,1]^d");
        }
        DesignSpec s;
        s.kind_ = DesignKind::fixed;
        s.dim_ = static_cast<int>(points.cols());
        s.points_ = std::move(points);
        return s;
    }

    static DesignSpec fixed_1d(const std::vector<double>& xs) {
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 1);
        for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<Eigen::Index>(i), 0) = xs[i];
        return fixed(std::move(pts));
    }

    /// Equispaced fixed design x_i = (i - 1/2) / n.
    static DesignSpec equispaced(int n) {
        if (n < 1) throw std::invalid_argument("DesignSpec: equispaced design needs n >= 1");
        Eigen::MatrixXd pts(n, 1);
        for (int i = 0; i < n; ++i) pts(i, 0) = (i + 0.5) / n;
        return fixed(std::move(pts));
    }

    static DesignSpec uniform(int d = 1) {
        if (d < 1) throw std::invalid_argument("DesignSpec: dimension must be >= 1");
        DesignSpec s;
        s.kind_ = DesignKind::uniform;
        s.dim_ = d;
        return s;
    }

    /// Random one-dimensional design with density `pdf` on [0,1], bounded by `pdf_max`.
    static DesignSpec density_1d(std::function<double(double)> pdf, double pdf_max) {
        if (!pdf || !(pdf_max > 0.0)) throw std::invalid_argument("DesignSpec: density design needs a pdf and a positive bound");
        DesignSpec s;
        s.kind_ = DesignKind::density;
        s.dim_ = 1;
        s.pdf_ = std::move(pdf);
        s.pdf_max_ = pdf_max;
        // Normalizing constant on a fine composite rule.
        std::vector<double> breaks(65);
        for (int i = 0; i <= 64; ++i) breaks[i] = i / 64.0;
        const Rule1D r = composite_gauss_legendre(breaks, 16);
        double mass = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            const double p = s.pdf_(r.nodes[i]);
            if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("DesignSpec: density must be finite and nonnegative");
            mass += r.weights[i] * p;
        }
        if (!(mass > 0.0)) throw std::invalid_argument("DesignSpec: density has zero mass on [0,1]");
        s.pdf_mass_ = mass;
        return s;
    }

    [[nodiscard]] DesignKind kind() const { return kind_; }
    [[nodiscard]] int dimension() const { return dim_; }
    [[nodiscard]] bool is_fixed() const { return kind_ == DesignKind::fixed; }
    [[nodiscard]] const Eigen::MatrixXd& points() const { return points_; }

    [[nodiscard]] double density(double x) const {
        switch (kind_) {
            case DesignKind::uniform: return 1.0;
            case DesignKind::density: return pdf_(x) / pdf_mass_;
            default: throw std::logic_error("DesignSpec: fixed designs have no density");
        }
    }

    /// All design points identical (rank-one Gram matrices).
    [[nodiscard]] bool degenerate() const {
        if (kind_ != DesignKind::fixed) return false;
        for (Eigen::Index i = 1; i < points_.rows(); ++i) {
            if ((points_.row(i) - points_.row(0)).cwiseAbs().maxCoeff() > 0.0) return false;
        }
        return true;
    }

    /// Rule that averages over Q.
    ///
    /// Fixed: the design points with equal weights. Continuous, d = 1:
    /// `nodes_1d`-point Gauss-Legendre weighted by the density. Continuous,
    /// d >= 2: `qmc_points` Halton points with equal weights.
    [[nodiscard]] QuadratureRule averaging_rule(int nodes_1d = 256, std::size_t qmc_points = 1u << 14) const {
        QuadratureRule rule;
        if (kind_ == DesignKind::fixed) {
            rule.nodes = points_;
            rule.weights = Eigen::VectorXd::Constant(points_.rows(), 1.0 / static_cast<double>(points_.rows()));
            return rule;
        }
        if (dim_ == 1) return integration_rule_1d({0.0, 1.0}, nodes_1d);
        if (kind_ != DesignKind::uniform) throw std::logic_error("DesignSpec: multivariate densities unsupported");
        rule.nodes = halton_points(qmc_points, dim_);
        rule.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(qmc_points), 1.0 / static_cast<double>(qmc_points));
        return rule;
    }

    /// Composite rule on the given breakpoints for a one-dimensional continuous Q
    /// (weights include the density); for a fixed design, the design points.
    [[nodiscard]] QuadratureRule integration_rule_1d(const std::vector<double>& breaks, int nodes_per_piece) const {
        if (dim_ != 1) throw std::invalid_argument("DesignSpec: one-dimensional rule requested for d > 1");
        if (kind_ == DesignKind::fixed) return averaging_rule();
        const Rule1D r = composite_gauss_legendre(breaks, nodes_per_piece);
        QuadratureRule rule;
        rule.nodes.resize(static_cast<Eigen::Index>(r.nodes.size()), 1);
        rule.weights.resize(static_cast<Eigen::Index>(r.nodes.size()));
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            rule.nodes(k, 0) = r.nodes[i];
            rule.weights(k) = r.weights[i] * density(r.nodes[i]);
        }
        return rule;
    }

    /// Draw n covariates from Q (random designs only).
    [[nodiscard]] Eigen::MatrixXd sample(int n, Rng& rng) const {
        if (kind_ == DesignKind::fixed) throw std::logic_error("DesignSpec: cannot sample a fixed design");
        Eigen::MatrixXd x(n, dim_);
        for (int i = 0; i < n; ++i) {
            if (kind_ == DesignKind::uniform) {
                for (int j = 0; j < dim_; ++j) x(i, j) = rng.uniform();
            } else {
                // Rejection from the uniform envelope.
                for (;;) {
                    const double cand = rng.uniform();
                    if (rng.uniform() * pdf_max_ <= pdf_(cand)) {
                        x(i, 0) = cand;
                        break;
                    }
                }
            }
        }
        return x;
    }

private:
    DesignSpec() = default;

    DesignKind kind_ = DesignKind::uniform;
    int dim_ = 1;
    Eigen::MatrixXd points_;
    std::function<double(double)> pdf_;
    double pdf_max_ = 1.0;
    double pdf_mass_ = 1.0;
};

}  // namespace hetbayes
