#pragma once

#include "hetbayes/design.hpp"
#include "hetbayes/gaussian_model.hpp"
#include "hetbayes/holder_functions.hpp"
#include "hetbayes/posterior.hpp"
#include "hetbayes/priors.hpp"
#include "hetbayes/random.hpp"
#include "hetbayes/spline_basis.hpp"
#include "hetbayes/stats.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetbayes {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kMaxSampleSize = 3200;
inline constexpr int kMaxDimension = 32;
inline constexpr int kMaxGridPoints = 128;

// ---------------------------------------------------------------------------
// Truth construction and data

struct Truth {
    FunctionPair theta;
    nlohmann::json metadata;
};

namespace detail {

inline bool is_integer(double v) { return v == std::floor(v); }

}  // namespace detail

/// eta0 = sin(2 pi x) for integer alpha, otherwise the Weierstrass series of
/// exponent alpha; f0 = 0.5 cos(2 pi x) for integer gamma, otherwise half the
/// series of exponent gamma. f0 is shifted up where needed so that exp(f0) >= v_min
/// on a 10^4-point grid.
inline Truth make_truth(double alpha, double gamma, double v_min = 0.1, std::uint64_t seed = 0) {
    if (!(alpha > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("make_truth: smoothness must be positive");
    if (!(v_min > 0.0)) throw std::invalid_argument("make_truth: v_min must be positive");
    std::function<double(double)> eta0 = detail::is_integer(alpha) ? std::function<double(double)>([](double x) {
        return std::sin(2.0 * std::numbers::pi * x);
    })
                                                                    : weierstrass(alpha);
    std::function<double(double)> base_f = detail::is_integer(gamma) ? std::function<double(double)>([](double x) {
        return 0.5 * std::cos(2.0 * std::numbers::pi * x);
    })
                                                                     : weierstrass(gamma, 12, {}, 0.5);
    double fmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10000; ++i) fmin = std::min(fmin, base_f(i / 9999.0));
    const double shift = std::max(0.0, std::log(v_min) - fmin);
    std::function<double(double)> f0 = [base_f, shift](double x) { return base_f(x) + shift; };
    Truth t{FunctionPair::from_1d(eta0, f0), nlohmann::json::object()};
    t.metadata = {{"alpha", alpha},
                  {"gamma", gamma},
                  {"v_min", v_min},
                  {"seed", seed},
                  {"eta0", detail::is_integer(alpha) ? "sin(2 pi x)" : "weierstrass"},
                  {"f0", detail::is_integer(gamma) ? "0.5 cos(2 pi x)" : "0.5 weierstrass"},
                  {"f0_shift", shift},
                  {"series_terms", 12}};
    return t;
}

/// y_i = eta0(x_i) + V0(x_i)^{1/2} e_i. Fixed designs use their own points when
/// they have n rows and x_i = (i - 1/2) / n otherwise; random designs draw from Q.
inline Dataset gen_data(const FunctionPair& truth, int n, const DesignSpec& design, Rng& rng) {
    if (n < 1) throw std::invalid_argument("gen_data: n must be >= 1");
    DesignSpec used = design;
    Eigen::MatrixXd x;
    if (design.is_fixed()) {
        if (design.points().rows() != n) used = DesignSpec::equispaced(n);
        x = used.points();
    } else {
        x = design.sample(n, rng);
    }
    const FieldValues v = evaluate(truth, x);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = v.mean(i) + std::exp(0.5 * v.log_variance(i)) * rng.normal();
    return Dataset(std::move(x), std::move(y), std::move(used), truth);
}

// ---------------------------------------------------------------------------
// Configuration

/// Invalid configuration value; `field` is the dotted JSON path.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(field) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class DesignChoice { fixed, uniform };

inline std::string to_string(DesignChoice d) { return d == DesignChoice::fixed ? "fixed" : "uniform"; }

struct PriorSettings {
    PriorKind kind = PriorKind::spline;
    int order = 4;
    CoefficientLaw coefficients = NormalCoefficients{};
    /// J = round(j_scale * J_n) clamped to [order, 32].
    double j_scale = 3.0;
    int gp_grid = 32;
    double gamma_shape = 1.0;
    double gamma_rate = 1.0;
    double jitter = 1e-8;
};

struct ExperimentConfig {
    RateSpec rate;
    std::vector<int> n_grid;
    int replicates = 1;
    PriorSettings prior;
    SamplerConfig sampler;
    DesignChoice design = DesignChoice::fixed;
    std::uint64_t seed = 20240611;
    std::string output_dir = "out";
    double v_min = 0.1;
    std::vector<double> levels{0.5, 0.9};
    double rhat_threshold = 1.2;
    bool write_chains = false;
    unsigned threads = 0;

    void validate() const {
        try {
            rate.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("rate", e.what());
        }
        if (n_grid.size() < 3) throw ConfigError("n_grid", "need at least 3 sample sizes");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] < 2 || n_grid[i] > kMaxSampleSize) throw ConfigError("n_grid", "sample sizes must lie in [2, 3200]");
            if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid", "must be strictly increasing");
        }
        if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
        if (prior.order < 1 || prior.order > SplineBasis::kMaxOrder) throw ConfigError("prior.order", "must lie in [1, 20]");
        if (!(prior.j_scale > 0.0)) throw ConfigError("prior.j_scale", "must be positive");
        if (prior.gp_grid < 2 || prior.gp_grid > kMaxGridPoints) throw ConfigError("prior.gp_grid", "must lie in [2, 128]");
        if (!(prior.gamma_shape > 0.0) || !(prior.gamma_rate > 0.0)) throw ConfigError("prior.gamma", "shape and rate must be positive");
        if (const auto* g = std::get_if<GeneralizedCoefficients>(&prior.coefficients); g && !(g->rho > 0.0)) {
            throw ConfigError("prior.rho", "must be positive");
        }
        if (rate.d != 1) throw ConfigError("rate.d", "the experiment harness is one-dimensional");
        try {
            sampler.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("sampler", e.what());
        }
        if (!(v_min > 0.0)) throw ConfigError("truth.v_min", "must be positive");
        if (levels.empty()) throw ConfigError("levels", "need at least one quantile level");
        for (double l : levels) {
            if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("levels", "quantile levels must lie in [0,1]");
        }
        if (output_dir.empty()) throw ConfigError("output_dir", "must be nonempty");
    }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing required key");
    return j.at(key);
}

template <class T>
T read_as(const nlohmann::json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(path, "has the wrong type");
    }
}

template <class T>
void read_optional(const nlohmann::json& j, const std::string& key, const std::string& path, T& out) {
    if (j.is_object() && j.contains(key)) out = read_as<T>(j.at(key), path + "." + key);
}

}  // namespace detail

/// Parses a configuration document. Required keys: rate, n_grid, replicates,
/// prior, sampler, seeds, output_dir.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using detail::read_as;
    using detail::read_optional;
    using detail::require;
    if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
    ExperimentConfig c;

    const nlohmann::json& rate = require(j, "rate", "");
    c.rate.alpha = read_as<double>(require(rate, "alpha", "rate"), "rate.alpha");
    c.rate.gamma = read_as<double>(require(rate, "gamma", "rate"), "rate.gamma");
    read_optional(rate, "d", "rate", c.rate.d);
    if (rate.contains("fold_eta")) c.rate.fold_eta = read_as<int>(rate.at("fold_eta"), "rate.fold_eta");
    if (rate.contains("fold_f")) c.rate.fold_f = read_as<int>(rate.at("fold_f"), "rate.fold_f");

    c.n_grid = read_as<std::vector<int>>(require(j, "n_grid", ""), "n_grid");
    c.replicates = read_as<int>(require(j, "replicates", ""), "replicates");

    const nlohmann::json& prior = require(j, "prior", "");
    try {
        c.prior.kind = prior_kind_from_string(read_as<std::string>(require(prior, "kind", "prior"), "prior.kind"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("prior.kind", e.what());
    }
    c.rate.kind = c.prior.kind;
    read_optional(prior, "order", "prior", c.prior.order);
    read_optional(prior, "j_scale", "prior", c.prior.j_scale);
    read_optional(prior, "gp_grid", "prior", c.prior.gp_grid);
    read_optional(prior, "gamma_shape", "prior", c.prior.gamma_shape);
    read_optional(prior, "gamma_rate", "prior", c.prior.gamma_rate);
    read_optional(prior, "jitter", "prior", c.prior.jitter);
    std::string law = "normal";
    read_optional(prior, "coefficients", "prior", law);
    if (law == "normal") {
        c.prior.coefficients = NormalCoefficients{};
    } else if (law == "generalized") {
        double rho = 2.0;
        read_optional(prior, "rho", "prior", rho);
        c.prior.coefficients = GeneralizedCoefficients{rho};
    } else {
        throw ConfigError("prior.coefficients", "expected \"normal\" or \"generalized\"");
    }

    const nlohmann::json& s = require(j, "sampler", "");
    if (!s.is_object()) throw ConfigError("sampler", "must be an object");
    read_optional(s, "iterations", "sampler", c.sampler.iterations);
    read_optional(s, "burn_in", "sampler", c.sampler.burn_in);
    read_optional(s, "thin", "sampler", c.sampler.thin);
    read_optional(s, "target_acceptance", "sampler", c.sampler.target_acceptance);
    read_optional(s, "initial_scale", "sampler", c.sampler.initial_scale);
    read_optional(s, "prior_only", "sampler", c.sampler.prior_only);

    const nlohmann::json& seeds = require(j, "seeds", "");
    c.seed = read_as<std::uint64_t>(require(seeds, "base", "seeds"), "seeds.base");

    c.output_dir = read_as<std::string>(require(j, "output_dir", ""), "output_dir");

    if (j.contains("design")) {
        const auto d = read_as<std::string>(j.at("design"), "design");
        if (d == "fixed") c.design = DesignChoice::fixed;
        else if (d == "uniform") c.design = DesignChoice::uniform;
        else throw ConfigError("design", "expected \"fixed\" or \"uniform\"");
    }
    if (j.contains("truth")) read_optional(j.at("truth"), "v_min", "truth", c.v_min);
    read_optional(j, "levels", "", c.levels);
    read_optional(j, "rhat_threshold", "", c.rhat_threshold);
    read_optional(j, "write_chains", "", c.write_chains);
    read_optional(j, "threads", "", c.threads);
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json rate = {{"alpha", c.rate.alpha}, {"gamma", c.rate.gamma}, {"d", c.rate.d}};
    if (c.rate.fold_eta) rate["fold_eta"] = *c.rate.fold_eta;
    if (c.rate.fold_f) rate["fold_f"] = *c.rate.fold_f;
    nlohmann::json prior = {{"kind", to_string(c.prior.kind)}, {"order", c.prior.order},        {"j_scale", c.prior.j_scale},
                            {"gp_grid", c.prior.gp_grid},     {"gamma_shape", c.prior.gamma_shape}, {"gamma_rate", c.prior.gamma_rate},
                            {"jitter", c.prior.jitter}};
    if (const auto* g = std::get_if<GeneralizedCoefficients>(&c.prior.coefficients)) {
        prior["coefficients"] = "generalized";
        prior["rho"] = g->rho;
    } else {
        prior["coefficients"] = "normal";
    }
    return {{"rate", rate},
            {"n_grid", c.n_grid},
            {"replicates", c.replicates},
            {"prior", prior},
            {"sampler",
             {{"iterations", c.sampler.iterations},
              {"burn_in", c.sampler.burn_in},
              {"thin", c.sampler.thin},
              {"target_acceptance", c.sampler.target_acceptance},
              {"initial_scale", c.sampler.initial_scale},
              {"prior_only", c.sampler.prior_only}}},
            {"seeds", {{"base", c.seed}}},
            {"output_dir", c.output_dir},
            {"design", to_string(c.design)},
            {"truth", {{"v_min", c.v_min}}},
            {"levels", c.levels},
            {"rhat_threshold", c.rhat_threshold},
            {"write_chains", c.write_chains},
            {"threads", c.threads}};
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Single runs

/// Spline dimension used at sample size n.
inline int experiment_dimension(const ExperimentConfig& c, int n) {
    const int scaled = static_cast<int>(std::lround(c.prior.j_scale * jn_schedule(c.rate, n)));
    return std::clamp(scaled, std::min(c.prior.order, kMaxDimension), kMaxDimension);
}

/// Seed of cell (n, replicate); stream 1 drives the data, stream 2 the prior and sampler.
inline std::uint64_t cell_seed(std::uint64_t base, int n, int replicate, std::uint64_t stream) {
    return derive_seed(base, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replicate), stream});
}

inline Truth experiment_truth(const ExperimentConfig& c) { return make_truth(c.rate.alpha, c.rate.gamma, c.v_min, c.seed); }

inline DesignSpec experiment_design(const ExperimentConfig& c, int n) {
    return c.design == DesignChoice::fixed ? DesignSpec::equispaced(n) : DesignSpec::uniform();
}

/// Posterior model at sample size n: a spline basis of dimension J, or
/// whitened process priors on a grid (a fresh rescaling A per block).
inline PosteriorModel experiment_model(const ExperimentConfig& c, int n, Rng& rng, nlohmann::json& info) {
    if (c.prior.kind == PriorKind::spline) {
        const int J = experiment_dimension(c, n);
        info["J"] = J;
        info["order"] = std::min(c.prior.order, J);
        SplinePriorConfig p;
        p.coefficients = c.prior.coefficients;
        return PosteriorModel::spline(make_basis_with_dimension(std::min(c.prior.order, J), J), p);
    }
    const Eigen::VectorXd grid = GPPriorConfig::uniform_grid(c.prior.gp_grid);
    info["grid_points"] = c.prior.gp_grid;
    if (c.prior.kind == PriorKind::rescaled_se) {
        auto factor = [&](const char* name) {
            const double a = std::pow(rng.gamma(c.prior.gamma_shape, c.prior.gamma_rate), 1.0 / c.rate.d);
            const JitteredFactor f = factor_with_jitter(se_kernel_matrix(grid, a), c.prior.jitter, 1e-2);
            info[std::string("scale_") + name] = a;
            info[std::string("jitter_") + name] = f.jitter;
            return f.lower;
        };
        Eigen::MatrixXd le = factor("eta");
        Eigen::MatrixXd lf = factor("f");
        return PosteriorModel::gaussian_process(grid, std::move(le), std::move(lf));
    }
    info["folds_eta"] = c.rate.eta_folds();
    info["folds_f"] = c.rate.f_folds();
    return PosteriorModel::gaussian_process(grid, integrated_bm_map(grid, c.rate.eta_folds()), integrated_bm_map(grid, c.rate.f_folds()));
}

struct RunResult {
    int n = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    nlohmann::json model_info = nlohmann::json::object();
    ChainSummary summary;
    bool degraded = false;
    std::string failure;
    /// Kept only when requested.
    std::optional<Chain> chain;

    [[nodiscard]] double median_distance() const {
        const auto it = std::find(summary.levels.begin(), summary.levels.end(), 0.5);
        if (it != summary.levels.end()) return summary.quantiles[static_cast<std::size_t>(it - summary.levels.begin())];
        return quantiles(summary.distances, {0.5})[0];
    }
};

/// Data, prior and chain for one (n, replicate) cell.
inline RunResult run_cell(const ExperimentConfig& c, const Truth& truth, int n, int replicate, bool keep_chain = false) {
    RunResult r;
    r.n = n;
    r.replicate = replicate;
    r.seed = cell_seed(c.seed, n, replicate, 0);
    Rng data_rng(cell_seed(c.seed, n, replicate, 1));
    Rng chain_rng(cell_seed(c.seed, n, replicate, 2));
    const Dataset data = gen_data(truth.theta, n, experiment_design(c, n), data_rng);
    const PosteriorModel model = experiment_model(c, n, chain_rng, r.model_info);
    Chain chain = run_mcmc(model, data, c.sampler, chain_rng);
    // Distances are averaged over Q: the empirical design for fixed designs.
    r.summary = posterior_distance_summary(chain, model, truth.theta, data.design(), c.levels);
    r.degraded = r.summary.diagnostics && r.summary.diagnostics->rhat > c.rhat_threshold;
    if (keep_chain) r.chain = std::move(chain);
    return r;
}

// ---------------------------------------------------------------------------
// Contraction experiment

struct ContractionReport {
    ExperimentConfig config;
    nlohmann::json truth_metadata;
    std::vector<RunResult> runs;
    std::vector<int> n_used;
    /// Median over included replicates of the posterior median distance, per n.
    std::vector<double> median_distance;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
    double intercept = 0.0;
    /// Exponent of the dominating power of n in the rate.
    double theoretical_exponent = 0.0;
    /// Least-squares slope of log rate_theoretical over the n grid (log factors included).
    double theoretical_slope_on_grid = 0.0;
    int included = 0;
    int excluded = 0;
    int failed = 0;
    int nonincreasing_steps = 0;
};

inline double dominating_exponent(const RateSpec& s) {
    switch (s.kind) {
        case PriorKind::spline:
            return -std::min(s.alpha / (1.0 + 2.0 * s.alpha), s.gamma / (2.0 + 2.0 * s.gamma));
        case PriorKind::rescaled_se:
            return -std::min(s.alpha / (s.d + 2.0 * s.alpha), s.gamma / (s.d + 2.0 * s.gamma));
        case PriorKind::integrated_bm:
            return -std::min(s.alpha / (2.0 * s.eta_folds() + 2.0), s.gamma / (2.0 * s.f_folds() + 2.0));
    }
    throw std::logic_error("dominating_exponent: unknown prior kind");
}

/// Runs every (n, replicate) cell, in parallel with independent seed streams,
/// then fits log median distance against log n over the included runs.
inline ContractionReport contraction_experiment(const ExperimentConfig& c, bool keep_chains = false) {
    c.validate();
    ContractionReport rep;
    rep.config = c;
    const Truth truth = experiment_truth(c);
    rep.truth_metadata = truth.metadata;
    const std::size_t cells = c.n_grid.size() * static_cast<std::size_t>(c.replicates);
    rep.runs.resize(cells);
    parallel_for(
        cells,
        [&](std::size_t k) {
            const int n = c.n_grid[k / static_cast<std::size_t>(c.replicates)];
            const int rpl = static_cast<int>(k % static_cast<std::size_t>(c.replicates));
            try {
                rep.runs[k] = run_cell(c, truth, n, rpl, keep_chains);
            } catch (const McmcError& e) {
                rep.runs[k].n = n;
                rep.runs[k].replicate = rpl;
                rep.runs[k].seed = cell_seed(c.seed, n, rpl, 0);
                rep.runs[k].degraded = true;
                rep.runs[k].failure = e.what();
            }
        },
        c.threads);

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
        std::vector<double> meds;
        for (int r = 0; r < c.replicates; ++r) {
            const RunResult& run = rep.runs[i * static_cast<std::size_t>(c.replicates) + static_cast<std::size_t>(r)];
            if (!run.failure.empty()) ++rep.failed;
            if (run.degraded) {
                ++rep.excluded;
                continue;
            }
            ++rep.included;
            meds.push_back(run.median_distance());
        }
        if (meds.empty()) continue;
        const double m = quantiles(meds, {0.5})[0];
        rep.n_used.push_back(c.n_grid[i]);
        rep.median_distance.push_back(m);
        lx.push_back(std::log(static_cast<double>(c.n_grid[i])));
        ly.push_back(std::log(m));
    }
    for (std::size_t i = 1; i < rep.median_distance.size(); ++i) rep.nonincreasing_steps += rep.median_distance[i] <= rep.median_distance[i - 1];
    if (lx.size() >= 2) {
        const LinearFit fit = fit_line(lx, ly);
        rep.slope = fit.slope;
        rep.slope_se = fit.slope_se;
        rep.intercept = fit.intercept;
    }
    rep.theoretical_exponent = dominating_exponent(c.rate);
    std::vector<double> tx, ty;
    for (int n : c.n_grid) {
        tx.push_back(std::log(static_cast<double>(n)));
        ty.push_back(std::log(rate_theoretical(c.rate, n)));
    }
    rep.theoretical_slope_on_grid = fit_line(tx, ty).slope;
    return rep;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

/// Shortest round-trip decimal representation.
inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline void write_chain_csv(std::ostream& os, const Chain& chain) {
    os << "# hetbayes chain v" << kSchemaVersion << "\n";
    os << "iteration,block,coeff_index,value,log_post\n";
    for (const PosteriorDraw& d : chain.draws) {
        for (Eigen::Index j = 0; j < d.eta_coeffs.size(); ++j) {
            os << d.iteration << ",eta," << j << ',' << detail::fmt(d.eta_coeffs(j)) << ',' << detail::fmt(d.log_posterior) << '\n';
        }
        for (Eigen::Index j = 0; j < d.f_coeffs.size(); ++j) {
            os << d.iteration << ",f," << j << ',' << detail::fmt(d.f_coeffs(j)) << ',' << detail::fmt(d.log_posterior) << '\n';
        }
    }
}

inline void write_distance_header(std::ostream& os) {
    os << "# hetbayes distances v" << kSchemaVersion << "\n";
    os << "n,replicate,quantile,d_n\n";
}

inline void write_distance_rows(std::ostream& os, const RunResult& r) {
    for (std::size_t i = 0; i < r.summary.levels.size(); ++i) {
        os << r.n << ',' << r.replicate << ',' << detail::fmt(r.summary.levels[i]) << ',' << detail::fmt(r.summary.quantiles[i]) << '\n';
    }
}

inline void write_distance_csv(std::ostream& os, const std::vector<RunResult>& runs) {
    write_distance_header(os);
    for (const RunResult& r : runs) {
        if (r.failure.empty()) write_distance_rows(os, r);
    }
}

/// Covariates, responses and the truth at each covariate.
inline void write_data_csv(std::ostream& os, const Dataset& data, const FunctionPair& truth) {
    os << "# hetbayes data v" << kSchemaVersion << "\n";
    os << "i,x,y,eta0,f0\n";
    const FieldValues v = evaluate(truth, data.x());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        os << i << ',' << detail::fmt(data.x()(i, 0)) << ',' << detail::fmt(data.y()(i)) << ',' << detail::fmt(v.mean(i)) << ','
           << detail::fmt(v.log_variance(i)) << '\n';
    }
}

inline nlohmann::json diagnostics_to_json(const std::optional<ChainDiagnostics>& d) {
    if (!d) return nullptr;
    return {{"acceptance_eta", d->acceptance_eta},
            {"acceptance_f", d->acceptance_f},
            {"ess_log_posterior", d->ess_log_posterior ? nlohmann::json(*d->ess_log_posterior) : nlohmann::json(nullptr)},
            {"min_coefficient_ess", d->min_coefficient_ess ? nlohmann::json(*d->min_coefficient_ess) : nlohmann::json(nullptr)},
            {"rhat", detail::finite_or_null(d->rhat)},
            {"draws", d->draws}};
}

inline nlohmann::json run_to_json(const RunResult& r) {
    nlohmann::json j = {{"n", r.n}, {"replicate", r.replicate}, {"seed", r.seed}, {"model", r.model_info}, {"degraded", r.degraded}};
    if (!r.failure.empty()) {
        j["failure"] = r.failure;
        return j;
    }
    j["levels"] = r.summary.levels;
    j["quantiles"] = r.summary.quantiles;
    j["diagnostics"] = diagnostics_to_json(r.summary.diagnostics);
    return j;
}

inline nlohmann::json report_to_json(const ContractionReport& rep) {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunResult& r : rep.runs) runs.push_back(run_to_json(r));
    return {{"schema_version", kSchemaVersion},
            {"kind", "contraction_report"},
            {"config", config_to_json(rep.config)},
            {"truth", rep.truth_metadata},
            {"n", rep.n_used},
            {"median_distance", rep.median_distance},
            {"slope", detail::finite_or_null(rep.slope)},
            {"slope_se", detail::finite_or_null(rep.slope_se)},
            {"intercept", rep.intercept},
            {"theoretical_exponent", rep.theoretical_exponent},
            {"theoretical_slope_on_grid", rep.theoretical_slope_on_grid},
            {"slope_bracket", {-0.55, -0.15}},
            {"slope_bracket_note", "artifact policy for finite-n trend checks, not an asymptotic constant"},
            {"included_runs", rep.included},
            {"excluded_runs", rep.excluded},
            {"failed_runs", rep.failed},
            {"nonincreasing_steps", rep.nonincreasing_steps},
            {"runs", runs}};
}

}  // namespace hetbayes
