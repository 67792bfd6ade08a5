#pragma once

#include "hetbayes/design.hpp"
#include "hetbayes/gaussian_model.hpp"
#include "hetbayes/priors.hpp"
#include "hetbayes/random.hpp"
#include "hetbayes/spline_basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetbayes {

/// Observations (x_i, y_i) with the design they came from.
class Dataset {
public:
    Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, DesignSpec design, std::optional<FunctionPair> truth = std::nullopt)
        : x_(std::move(x)), y_(std::move(y)), design_(std::move(design)), truth_(std::move(truth)) {
        if (x_.rows() < 1) throw std::invalid_argument("Dataset: need at least one observation");
        if (x_.rows() != y_.size()) throw std::invalid_argument("Dataset: x and y lengths differ");
        if (x_.cols() != design_.dimension()) throw std::invalid_argument("Dataset: x columns do not match the design dimension");
        if (x_.minCoeff() < 0.0 || x_.maxCoeff() > 1.0) throw std::invalid_argument("Dataset: covariates outside [0,1]^d");
        if (!y_.allFinite()) throw std::invalid_argument("Dataset: non-finite response");
    }

    [[nodiscard]] Eigen::Index size() const { return y_.size(); }
    [[nodiscard]] const Eigen::MatrixXd& x() const { return x_; }
    [[nodiscard]] Eigen::VectorXd x1() const { return x_.col(0); }
    [[nodiscard]] const Eigen::VectorXd& y() const { return y_; }
    [[nodiscard]] const DesignSpec& design() const { return design_; }
    [[nodiscard]] const std::optional<FunctionPair>& truth() const { return truth_; }

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    DesignSpec design_;
    std::optional<FunctionPair> truth_;
};

/// Linear parameterization g(x) = phi(x)^T theta of one function on [0,1].
///
/// Spline blocks use the B-spline values as features. Grid blocks carry values
/// g = factor * theta on a sorted grid and interpolate linearly between nodes;
/// with factor the Cholesky factor of a prior covariance and theta ~ N(0, I),
/// this is the whitened Gaussian-process parameterization.
class FeatureMap {
public:
    static FeatureMap spline(std::shared_ptr<const SplineBasis> basis) {
        if (!basis) throw std::invalid_argument("FeatureMap::spline: null basis");
        FeatureMap m;
        m.basis_ = std::move(basis);
        m.dimension_ = m.basis_->dimension();
        return m;
    }

    static FeatureMap grid(Eigen::VectorXd grid, Eigen::MatrixXd factor) {
        if (grid.size() < 2 || factor.rows() != grid.size()) throw std::invalid_argument("FeatureMap::grid: factor rows must match the grid");
        for (Eigen::Index i = 1; i < grid.size(); ++i) {
            if (!(grid(i) > grid(i - 1))) throw std::invalid_argument("FeatureMap::grid: grid must be strictly increasing");
        }
        FeatureMap m;
        m.dimension_ = static_cast<int>(factor.cols());
        m.grid_ = std::move(grid);
        m.factor_ = std::move(factor);
        return m;
    }

    [[nodiscard]] int dimension() const { return dimension_; }
    [[nodiscard]] bool is_spline() const { return basis_ != nullptr; }
    [[nodiscard]] const std::shared_ptr<const SplineBasis>& basis() const { return basis_; }
    [[nodiscard]] const Eigen::VectorXd& grid_points() const { return grid_; }
    [[nodiscard]] const Eigen::MatrixXd& factor() const { return factor_; }

    /// Row i holds phi(xs[i]).
    [[nodiscard]] Eigen::MatrixXd rows(const Eigen::Ref<const Eigen::VectorXd>& xs) const {
        if (basis_) return basis_->design_matrix(xs);
        return interpolation(xs) * factor_;
    }

    /// Grid values factor * theta (grid blocks only).
    [[nodiscard]] Eigen::VectorXd grid_values(const Eigen::VectorXd& theta) const {
        if (basis_) throw std::logic_error("FeatureMap: spline block has no grid values");
        return factor_ * theta;
    }

private:
    FeatureMap() = default;

    [[nodiscard]] Eigen::MatrixXd interpolation(const Eigen::Ref<const Eigen::VectorXd>& xs) const {
        const Eigen::Index m = grid_.size();
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(xs.size(), m);
        for (Eigen::Index i = 0; i < xs.size(); ++i) {
            const double t = std::clamp(xs(i), grid_(0), grid_(m - 1));
            const auto it = std::upper_bound(grid_.data(), grid_.data() + m, t);
            const Eigen::Index hi = std::min<Eigen::Index>(it - grid_.data(), m - 1);
            const Eigen::Index lo = hi - 1;
            const double a = (t - grid_(lo)) / (grid_(hi) - grid_(lo));
            w(i, lo) = 1.0 - a;
            w(i, hi) += a;
        }
        return w;
    }

    int dimension_ = 0;
    std::shared_ptr<const SplineBasis> basis_;
    Eigen::VectorXd grid_;
    Eigen::MatrixXd factor_;
};

/// Both blocks of theta = (eta, f) with their coefficient priors.
struct PosteriorModel {
    FeatureMap eta;
    FeatureMap f;
    CoefficientLaw eta_law = NormalCoefficients{};
    CoefficientLaw f_law = NormalCoefficients{};

    static PosteriorModel spline(std::shared_ptr<const SplineBasis> basis, const SplinePriorConfig& prior = {}) {
        if (std::holds_alternative<GeometricDimension>(prior.dimension)) {
            throw std::invalid_argument("PosteriorModel: posterior sampling conditions on a fixed dimension");
        }
        prior.validate();
        return {FeatureMap::spline(basis), FeatureMap::spline(basis), prior.coefficients, prior.coefficients};
    }

    static PosteriorModel gaussian_process(const Eigen::VectorXd& grid, Eigen::MatrixXd eta_factor, Eigen::MatrixXd f_factor) {
        return {FeatureMap::grid(grid, std::move(eta_factor)), FeatureMap::grid(grid, std::move(f_factor))};
    }

    /// theta as a FunctionPair in the natural representation of the blocks.
    [[nodiscard]] FunctionPair function_pair(const Eigen::VectorXd& eta_coeffs, const Eigen::VectorXd& f_coeffs) const {
        if (eta.is_spline() && f.is_spline()) {
            return FunctionPair::from_splines(CoefficientVector(eta.basis(), eta_coeffs), CoefficientVector(f.basis(), f_coeffs));
        }
        if (!eta.is_spline() && !f.is_spline() && eta.grid_points() == f.grid_points()) {
            const Eigen::VectorXd& g = eta.grid_points();
            return FunctionPair::from_grid(std::vector<double>(g.data(), g.data() + g.size()), eta.grid_values(eta_coeffs),
                                           f.grid_values(f_coeffs));
        }
        auto as_function = [](const FeatureMap& m, Eigen::VectorXd theta) {
            return [m, theta = std::move(theta)](double x) {
                const Eigen::VectorXd xs = Eigen::VectorXd::Constant(1, x);
                return (m.rows(xs) * theta)(0);
            };
        };
        return FunctionPair::from_1d(as_function(eta, eta_coeffs), as_function(f, f_coeffs));
    }
};

namespace detail {

inline double gaussian_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& log_var) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double r = y(i) - mean(i);
        s += log_var(i) + r * r * std::exp(-log_var(i));
    }
    return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) + s);
}

}  // namespace detail

/// sum_i log p_theta(y_i | x_i).
inline double log_likelihood(const PosteriorModel& model, const Eigen::VectorXd& eta_coeffs, const Eigen::VectorXd& f_coeffs,
                             const Dataset& data) {
    if (eta_coeffs.size() != model.eta.dimension() || f_coeffs.size() != model.f.dimension()) {
        throw std::invalid_argument("log_likelihood: coefficient dimension mismatch");
    }
    const Eigen::VectorXd xs = data.x1();
    return detail::gaussian_log_likelihood(data.y(), model.eta.rows(xs) * eta_coeffs, model.f.rows(xs) * f_coeffs);
}

/// Unnormalized log posterior: log likelihood plus the coefficient log priors of both blocks.
inline double log_posterior(const PosteriorModel& model, const Eigen::VectorXd& eta_coeffs, const Eigen::VectorXd& f_coeffs,
                            const Dataset& data) {
    return log_likelihood(model, eta_coeffs, f_coeffs, data) + log_prior(model.eta_law, eta_coeffs) + log_prior(model.f_law, f_coeffs);
}

inline double log_posterior(const CoefficientVector& eta_coeffs, const CoefficientVector& f_coeffs, const Dataset& data,
                            const SplinePriorConfig& prior, const std::shared_ptr<const SplineBasis>& basis) {
    if (!(eta_coeffs.basis() == *basis) || !(f_coeffs.basis() == *basis)) throw std::invalid_argument("log_posterior: coefficients index a different basis");
    return log_posterior(PosteriorModel::spline(basis, prior), eta_coeffs.values(), f_coeffs.values(), data);
}

struct SamplerConfig {
    /// Total iterations including burn-in; each iteration updates both blocks.
    int iterations = 20000;
    int burn_in = 5000;
    int thin = 5;
    double target_acceptance = 0.3;
    /// Initial random-walk scale; 0 selects 2.38 / sqrt(block dimension).
    double initial_scale = 0.0;
    /// Drop the likelihood and sample the prior.
    bool prior_only = false;
    std::optional<Eigen::VectorXd> init_eta;
    std::optional<Eigen::VectorXd> init_f;

    void validate() const {
        if (iterations < 1 || burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("SamplerConfig: need 0 <= burn_in < iterations");
        if (thin < 1) throw std::invalid_argument("SamplerConfig: thin must be >= 1");
        if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw std::invalid_argument("SamplerConfig: target acceptance in (0,1)");
        if (initial_scale < 0.0) throw std::invalid_argument("SamplerConfig: proposal scale must be positive");
    }
};

class McmcError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PosteriorDraw {
    Eigen::VectorXd eta_coeffs;
    Eigen::VectorXd f_coeffs;
    double log_posterior = 0.0;
    int iteration = 0;
};

struct BlockStats {
    /// Counts after burn-in, when the proposal is frozen.
    long proposed = 0;
    long accepted = 0;
    double final_scale = 0.0;

    [[nodiscard]] double acceptance() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
};

struct Chain {
    std::vector<PosteriorDraw> draws;
    BlockStats eta;
    BlockStats f;
    double initial_log_posterior = 0.0;

    [[nodiscard]] std::vector<double> log_posterior_trace() const {
        std::vector<double> t;
        t.reserve(draws.size());
        for (const PosteriorDraw& d : draws) t.push_back(d.log_posterior);
        return t;
    }
};

/// Pilot start: running-window mean of y and log running-window mean of squared
/// residuals, each fitted by least squares in the block features.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> pilot_initialization(const PosteriorModel& model, const Dataset& data) {
    const Eigen::Index n = data.size();
    const Eigen::VectorXd xs = data.x1();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return xs(a) < xs(b); });
    const Eigen::Index half = std::max<Eigen::Index>(1, std::min<Eigen::Index>(25, n / 20));

    auto window_mean = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Eigen::Index lo = std::max<Eigen::Index>(0, r - half);
            const Eigen::Index hi = std::min<Eigen::Index>(n - 1, r + half);
            double s = 0.0;
            for (Eigen::Index k = lo; k <= hi; ++k) s += v(order[static_cast<std::size_t>(k)]);
            out(order[static_cast<std::size_t>(r)]) = s / static_cast<double>(hi - lo + 1);
        }
        return out;
    };
    const Eigen::VectorXd mean = window_mean(data.y());
    const Eigen::VectorXd sq = (data.y() - mean).array().square().matrix();
    const Eigen::VectorXd logvar = (window_mean(sq).array() + 1e-8).log().matrix();

    auto fit = [&](const FeatureMap& m, const Eigen::VectorXd& target) {
        const Eigen::MatrixXd phi = m.rows(xs);
        Eigen::MatrixXd gram = phi.transpose() * phi;
        const double ridge = 1e-8 * std::max(gram.trace(), 1.0) / std::max(1, m.dimension());
        gram.diagonal().array() += ridge;
        return Eigen::VectorXd(gram.llt().solve(phi.transpose() * target));
    };
    return {fit(model.eta, mean), fit(model.f, logvar)};
}

namespace detail {

/// Lower Cholesky factor of the inverse of a precision matrix, as an upper-solve.
struct ProposalShape {
    Eigen::LLT<Eigen::MatrixXd> precision;

    /// x with covariance precision^{-1}.
    [[nodiscard]] Eigen::VectorXd draw(const Eigen::VectorXd& z) const {
        return precision.matrixU().solve(z);
    }
};

inline ProposalShape make_shape(Eigen::MatrixXd precision) {
    ProposalShape s{Eigen::LLT<Eigen::MatrixXd>(precision)};
    if (s.precision.info() != Eigen::Success) {
        precision.diagonal().array() += 1e-8 * precision.trace() / precision.rows();
        s.precision.compute(precision);
        if (s.precision.info() != Eigen::Success) throw McmcError("run_mcmc: proposal precision not positive definite");
    }
    return s;
}

}  // namespace detail

/// Blockwise adaptive random-walk Metropolis over (eta, f) coefficients.
///
/// Each block proposes theta + s * P^{-1/2} z with P a Fisher-type precision
/// recomputed at burn_in/4 and burn_in/2; log s follows a Robbins-Monro
/// recursion towards the target acceptance during burn-in and is frozen after.
inline Chain run_mcmc(const PosteriorModel& model, const Dataset& data, const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    const Eigen::VectorXd xs = data.x1();
    const Eigen::MatrixXd phi_eta = model.eta.rows(xs);
    const Eigen::MatrixXd phi_f = model.f.rows(xs);
    const Eigen::VectorXd& y = data.y();
    const int pe = model.eta.dimension();
    const int pf = model.f.dimension();

    Eigen::VectorXd th_e, th_f;
    if (cfg.init_eta && cfg.init_f) {
        th_e = *cfg.init_eta;
        th_f = *cfg.init_f;
    } else if (cfg.prior_only) {
        th_e = Eigen::VectorXd::Zero(pe);
        th_f = Eigen::VectorXd::Zero(pf);
    } else {
        std::tie(th_e, th_f) = pilot_initialization(model, data);
    }
    if (th_e.size() != pe || th_f.size() != pf) throw std::invalid_argument("run_mcmc: initial state has the wrong dimension");

    Eigen::VectorXd mu = phi_eta * th_e;
    Eigen::VectorXd lv = phi_f * th_f;
    auto loglik = [&](const Eigen::VectorXd& m, const Eigen::VectorXd& l) {
        return cfg.prior_only ? 0.0 : detail::gaussian_log_likelihood(y, m, l);
    };
    double ll = loglik(mu, lv);
    double lp_e = log_prior(model.eta_law, th_e);
    double lp_f = log_prior(model.f_law, th_f);
    Chain chain;
    chain.initial_log_posterior = ll + lp_e + lp_f;
    if (!std::isfinite(chain.initial_log_posterior)) {
        throw McmcError("run_mcmc: non-finite log posterior at initialization (" + std::to_string(chain.initial_log_posterior) + ")");
    }

    auto shapes = [&]() {
        Eigen::MatrixXd pe_mat = Eigen::MatrixXd::Identity(pe, pe);
        Eigen::MatrixXd pf_mat = Eigen::MatrixXd::Identity(pf, pf);
        if (!cfg.prior_only) {
            const Eigen::VectorXd w = (-lv.array()).exp().matrix();
            pe_mat += phi_eta.transpose() * w.asDiagonal() * phi_eta;
            pf_mat += 0.5 * phi_f.transpose() * phi_f;
        }
        return std::pair{detail::make_shape(std::move(pe_mat)), detail::make_shape(std::move(pf_mat))};
    };
    auto [shape_e, shape_f] = shapes();

    double log_se = std::log(cfg.initial_scale > 0.0 ? cfg.initial_scale : 2.38 / std::sqrt(pe));
    double log_sf = std::log(cfg.initial_scale > 0.0 ? cfg.initial_scale : 2.38 / std::sqrt(pf));
    const std::size_t kept = static_cast<std::size_t>((cfg.iterations - cfg.burn_in + cfg.thin - 1) / cfg.thin);
    chain.draws.reserve(kept);

    Eigen::VectorXd z_e(pe), z_f(pf);
    for (int t = 0; t < cfg.iterations; ++t) {
        const bool adapting = t < cfg.burn_in;
        if (adapting && t > 0 && (t == cfg.burn_in / 4 || t == cfg.burn_in / 2)) std::tie(shape_e, shape_f) = shapes();
        const double gain = 1.0 / std::pow(t + 1.0, 0.6);

        // eta block
        for (int i = 0; i < pe; ++i) z_e(i) = rng.normal();
        const Eigen::VectorXd step_e = std::exp(log_se) * shape_e.draw(z_e);
        const Eigen::VectorXd prop_e = th_e + step_e;
        const Eigen::VectorXd mu_new = mu + phi_eta * step_e;
        const double ll_e = loglik(mu_new, lv);
        const double lp_e_new = log_prior(model.eta_law, prop_e);
        const double a_e = std::min(0.0, ll_e + lp_e_new - ll - lp_e);
        const bool acc_e = std::log(rng.uniform()) < a_e;
        if (acc_e) {
            th_e = prop_e;
            mu = mu_new;
            ll = ll_e;
            lp_e = lp_e_new;
        }

        // f block
        for (int i = 0; i < pf; ++i) z_f(i) = rng.normal();
        const Eigen::VectorXd step_f = std::exp(log_sf) * shape_f.draw(z_f);
        const Eigen::VectorXd prop_f = th_f + step_f;
        const Eigen::VectorXd lv_new = lv + phi_f * step_f;
        const double ll_f = loglik(mu, lv_new);
        const double lp_f_new = log_prior(model.f_law, prop_f);
        const double a_f = std::min(0.0, ll_f + lp_f_new - ll - lp_f);
        const bool acc_f = std::log(rng.uniform()) < a_f;
        if (acc_f) {
            th_f = prop_f;
            lv = lv_new;
            ll = ll_f;
            lp_f = lp_f_new;
        }

        if (adapting) {
            log_se += gain * (std::exp(std::isfinite(a_e) ? a_e : -1e300) - cfg.target_acceptance);
            log_sf += gain * (std::exp(std::isfinite(a_f) ? a_f : -1e300) - cfg.target_acceptance);
            if (!(std::abs(log_se) < std::log(1e12)) || !(std::abs(log_sf) < std::log(1e12))) {
                throw McmcError("run_mcmc: proposal scale left [1e-12, 1e12] during adaptation at iteration " + std::to_string(t));
            }
        } else {
            ++chain.eta.proposed;
            ++chain.f.proposed;
            chain.eta.accepted += acc_e;
            chain.f.accepted += acc_f;
            if ((t - cfg.burn_in) % cfg.thin == 0) chain.draws.push_back({th_e, th_f, ll + lp_e + lp_f, t});
        }
    }
    chain.eta.final_scale = std::exp(log_se);
    chain.f.final_scale = std::exp(log_sf);
    return chain;
}

inline Chain run_mcmc(const Dataset& data, std::shared_ptr<const SplineBasis> basis, const SplinePriorConfig& prior, const SamplerConfig& cfg,
                      Rng& rng) {
    return run_mcmc(PosteriorModel::spline(std::move(basis), prior), data, cfg, rng);
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Effective sample size by Geyer's initial positive sequence: autocorrelation
/// pair sums are accumulated until the first non-positive pair. Empty for a
/// constant trace.
inline std::optional<double> effective_sample_size(std::span<const double> trace) {
    const std::size_t n = trace.size();
    if (n < 4) return std::nullopt;
    const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = trace[i] - mean;
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
        return s / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0)) return std::nullopt;
    double tau = -1.0;
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if (!(pair > 0.0)) break;
        tau += 2.0 * pair;
    }
    return std::min(static_cast<double>(n), static_cast<double>(n) / std::max(tau, 1e-12));
}

/// Split-chain potential scale reduction of a single trace.
inline double split_rhat(std::span<const double> trace) {
    const std::size_t half = trace.size() / 2;
    if (half < 2) throw std::invalid_argument("split_rhat: trace too short");
    const std::span<const double> a = trace.subspan(trace.size() - 2 * half, half);
    const std::span<const double> b = trace.subspan(trace.size() - half, half);
    auto moments = [](std::span<const double> s) {
        const double m = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
        double v = 0.0;
        for (double x : s) v += (x - m) * (x - m);
        return std::pair{m, v / static_cast<double>(s.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double nh = static_cast<double>(half);
    const double w = 0.5 * (va + vb);
    const double grand = 0.5 * (ma + mb);
    const double between = nh * ((ma - grand) * (ma - grand) + (mb - grand) * (mb - grand));
    if (!(w > 0.0)) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    const double var_plus = (nh - 1.0) / nh * w + between / nh;
    return std::sqrt(var_plus / w);
}

struct ChainDiagnostics {
    double acceptance_eta = 0.0;
    double acceptance_f = 0.0;
    /// ESS of the log-posterior trace; empty when the trace is constant.
    std::optional<double> ess_log_posterior;
    /// Smallest ESS over all coefficient traces (constant traces skipped).
    std::optional<double> min_coefficient_ess;
    double rhat = 1.0;
    std::size_t draws = 0;
};

inline std::vector<double> coefficient_trace(const Chain& chain, bool eta_block, Eigen::Index index) {
    std::vector<double> t;
    t.reserve(chain.draws.size());
    for (const PosteriorDraw& d : chain.draws) t.push_back(eta_block ? d.eta_coeffs(index) : d.f_coeffs(index));
    return t;
}

inline ChainDiagnostics diagnostics(const Chain& chain) {
    if (chain.draws.size() < 100) throw std::invalid_argument("diagnostics: need at least 100 retained draws");
    ChainDiagnostics d;
    d.draws = chain.draws.size();
    d.acceptance_eta = chain.eta.acceptance();
    d.acceptance_f = chain.f.acceptance();
    const std::vector<double> lp = chain.log_posterior_trace();
    d.ess_log_posterior = effective_sample_size(lp);
    d.rhat = split_rhat(lp);
    for (bool block : {true, false}) {
        const Eigen::Index p = block ? chain.draws.front().eta_coeffs.size() : chain.draws.front().f_coeffs.size();
        for (Eigen::Index j = 0; j < p; ++j) {
            const std::optional<double> e = effective_sample_size(coefficient_trace(chain, block, j));
            if (e && (!d.min_coefficient_ess || *e < *d.min_coefficient_ess)) d.min_coefficient_ess = e;
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Posterior distance summaries

/// Quantiles by linear interpolation between order statistics (levels in [0,1]).
inline std::vector<double> quantiles(std::vector<double> values, const std::vector<double>& levels) {
    if (values.empty()) throw std::invalid_argument("quantiles: empty sample");
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    out.reserve(levels.size());
    for (double p : levels) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantiles: level outside [0,1]");
        const double h = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        out.push_back(values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]));
    }
    return out;
}

struct ChainSummary {
    std::optional<ChainDiagnostics> diagnostics;
    std::vector<double> levels;
    std::vector<double> quantiles;
    std::vector<double> radii;
    /// Posterior fraction of draws with d_n > radius, per radius.
    std::vector<double> exceedance;
    /// d_n(theta_draw, truth) per retained draw.
    std::vector<double> distances;
};

/// d_n from every retained draw to `truth`, averaged over the design's rule.
inline std::vector<double> posterior_distances(const Chain& chain, const PosteriorModel& model, const FunctionPair& truth,
                                               const DesignSpec& design) {
    const QuadratureRule rule = design.averaging_rule();
    const Eigen::VectorXd nodes = rule.nodes.col(0);
    const Eigen::MatrixXd e_eta = model.eta.rows(nodes);
    const Eigen::MatrixXd e_f = model.f.rows(nodes);
    const FieldValues t = evaluate(truth, rule.nodes);
    std::vector<double> out;
    out.reserve(chain.draws.size());
    for (const PosteriorDraw& d : chain.draws) {
        const Eigen::VectorXd m = e_eta * d.eta_coeffs;
        const Eigen::VectorXd l = e_f * d.f_coeffs;
        out.push_back(std::sqrt(average_hellinger_sq(m, l, t.mean, t.log_variance, rule.weights)));
    }
    return out;
}

inline ChainSummary summarize_distances(std::vector<double> distances, const std::vector<double>& levels, const std::vector<double>& radii = {}) {
    ChainSummary s;
    s.levels = levels;
    s.quantiles = quantiles(distances, levels);
    s.radii = radii;
    for (double r : radii) {
        const auto over = std::count_if(distances.begin(), distances.end(), [r](double d) { return d > r; });
        s.exceedance.push_back(static_cast<double>(over) / static_cast<double>(distances.size()));
    }
    s.distances = std::move(distances);
    return s;
}

inline ChainSummary posterior_distance_summary(const Chain& chain, const PosteriorModel& model, const FunctionPair& truth,
                                               const DesignSpec& design, const std::vector<double>& levels = {0.5, 0.9},
                                               const std::vector<double>& radii = {}) {
    if (chain.draws.empty()) throw std::invalid_argument("posterior_distance_summary: empty chain");
    ChainSummary s = summarize_distances(posterior_distances(chain, model, truth, design), levels, radii);
    if (chain.draws.size() >= 100) s.diagnostics = diagnostics(chain);
    return s;
}

}  // namespace hetbayes
