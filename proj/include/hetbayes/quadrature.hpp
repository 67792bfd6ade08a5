#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hetbayes {

/// Nodes and weights of a one-dimensional rule.
struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Points (rows) with weights summing to one; the discrete stand-in for a covariate law.
struct QuadratureRule {
    Eigen::MatrixXd nodes;  // m x d
    Eigen::VectorXd weights;

    [[nodiscard]] Eigen::Index size() const { return weights.size(); }
    [[nodiscard]] Eigen::Index dimension() const { return nodes.cols(); }
};

// Gauss-Legendre on [-1, 1] by Newton iteration on P_n.
inline Rule1D gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: node count must be >= 1");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        // Re-evaluate the derivative at the converged node.
        double p0 = 1.0;
        double p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Gauss-Hermite for the weight exp(-t^2), nodes ascending.
///
/// Newton iteration on the orthonormal Hermite recurrence, seeded with the
/// usual asymptotic guesses for the largest roots.
inline Rule1D gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: node count must be >= 1");
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    Rule1D rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double step = p1 / pp;
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        // Stored temporarily in descending order at the front for the seeding scheme above.
        rule.nodes[i] = z;
        rule.weights[i] = 2.0 / (pp * pp);
    }
    std::vector<double> nodes(n);
    std::vector<double> weights(n);
    for (int i = 0; i < half; ++i) {
        nodes[n - 1 - i] = rule.nodes[i];
        nodes[i] = -rule.nodes[i];
        weights[n - 1 - i] = rule.weights[i];
        weights[i] = rule.weights[i];
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
    rule.nodes = std::move(nodes);
    rule.weights = std::move(weights);
    return rule;
}

/// Composite Gauss-Legendre over consecutive breakpoints; weights integrate Lebesgue measure.
inline Rule1D composite_gauss_legendre(const std::vector<double>& breaks, int nodes_per_piece) {
    if (breaks.size() < 2) throw std::invalid_argument("composite_gauss_legendre: need >= 2 breakpoints");
    const Rule1D base = gauss_legendre(nodes_per_piece);
    Rule1D rule;
    rule.nodes.reserve((breaks.size() - 1) * nodes_per_piece);
    rule.weights.reserve(rule.nodes.capacity());
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k];
        const double b = breaks[k + 1];
        if (!(b > a)) continue;
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int i = 0; i < nodes_per_piece; ++i) {
            rule.nodes.push_back(mid + half * base.nodes[i]);
            rule.weights.push_back(half * base.weights[i]);
        }
    }
    return rule;
}

inline double radical_inverse(std::size_t index, unsigned base) {
    double inv = 1.0 / base;
    double factor = inv;
    double value = 0.0;
    while (index > 0) {
        value += static_cast<double>(index % base) * factor;
        index /= base;
        factor *= inv;
    }
    return value;
}

/// First `count` Halton points in [0,1)^d, skipping the origin.
inline Eigen::MatrixXd halton_points(std::size_t count, int d) {
    static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    if (d < 1 || d > static_cast<int>(std::size(kPrimes))) {
        throw std::invalid_argument("halton_points: dimension must be in [1, 12]");
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(count), d);
    for (std::size_t i = 0; i < count; ++i) {
        for (int j = 0; j < d; ++j) pts(static_cast<Eigen::Index>(i), j) = radical_inverse(i + 1, kPrimes[j]);
    }
    return pts;
}

}  // namespace hetbayes
