#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetbayes {

/// Truncated Weierstrass-type series sum_{k=1..terms} 2^{-k alpha} cos(2^k pi x + phase_k).
///
/// Hoelder-alpha for non-integer alpha < 2 up to the truncation level.
inline std::function<double(double)> weierstrass(double alpha, int terms = 12, std::vector<double> phases = {}, double amplitude = 1.0) {
    if (!(alpha > 0.0)) throw std::invalid_argument("weierstrass: alpha must be positive");
    if (terms < 1) throw std::invalid_argument("weierstrass: need at least one term");
    phases.resize(static_cast<std::size_t>(terms), 0.0);
    return [=](double x) {
        double s = 0.0;
        for (int k = 1; k <= terms; ++k) {
            const double freq = std::ldexp(1.0, k);
            s += std::pow(freq, -alpha) * std::cos(freq * std::numbers::pi * x + phases[static_cast<std::size_t>(k - 1)]);
        }
        return amplitude * s;
    };
}

/// |x - c|: Lipschitz with a single kink, C^1 nowhere near c.
inline std::function<double(double)> kink(double center = std::numbers::inv_pi) {
    return [center](double x) { return std::abs(x - center); };
}

/// Canonical target of exact smoothness alpha on [0,1] for approximation checks:
/// the kink for alpha = 1, the Weierstrass series otherwise.
inline std::function<double(double)> holder_target(double alpha) {
    if (alpha == 1.0) return kink();
    return weierstrass(alpha);
}

inline std::string holder_target_name(double alpha) {
    return alpha == 1.0 ? "kink" : "weierstrass";
}

}  // namespace hetbayes
