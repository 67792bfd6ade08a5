#pragma once

#include "hetbayes/theory_lab.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetbayes {

/// Pooled mean and variance of rescaled-SE paths over all grid points against 0 and 1 + jitter.
inline BoundCheckReport gp_moment_check(const GPPriorConfig& config, int paths, Rng& rng, double tolerance = 0.05) {
    double s = 0.0, s2 = 0.0, count = 0.0, jitter = 0.0;
    for (int p = 0; p < paths; ++p) {
        const GPPath path = sample_gp_path(config, rng);
        s += path.values.sum();
        s2 += path.values.squaredNorm();
        count += static_cast<double>(path.values.size());
        jitter = std::max(jitter, path.jitter);
    }
    const double mean = s / count;
    const double var = s2 / count - mean * mean;
    const double worst = std::max(std::abs(mean), std::abs(var - 1.0 - jitter));
    BoundCheckReport r = BoundCheckReport::make("gp_marginal_moments", worst, tolerance, 0.0);
    r.details = {{"mean", mean}, {"variance", var}, {"jitter", jitter}, {"paths", paths}, {"grid_points", config.grid.rows()}};
    return r;
}

struct SuiteOptions {
    std::uint64_t seed = 20240611;
    /// Scales Monte Carlo sizes down (never below each verifier's minimum).
    bool quick = false;
};

namespace suites {

inline std::vector<BoundCheckReport> lemma2(const SuiteOptions& o) {
    Rng rng(derive_seed(o.seed, {1}));
    auto basis = make_basis_with_dimension(4, 10);
    BoundCheckReport r = verify_lemma2(random_spline_pairs(o.quick ? 1000 : 10000, basis, 1.0, rng), 1.0, DesignSpec::uniform());
    return {r};
}

inline std::vector<BoundCheckReport> entropy(const SuiteOptions& o) {
    Rng rng(derive_seed(o.seed, {2}));
    const QuadratureRule rule = DesignSpec::uniform().averaging_rule(16);
    auto basis = make_basis(3, 4);
    const int members = o.quick ? 40 : 100;
    auto family = [&](double scale) {
        const Eigen::MatrixXd E = basis->design_matrix(rule.nodes.col(0));
        Eigen::MatrixXd v(members, rule.size());
        for (int i = 0; i < members; ++i) {
            Eigen::VectorXd b(basis->dimension());
            for (Eigen::Index j = 0; j < b.size(); ++j) b(j) = scale * (2.0 * rng.uniform() - 1.0);
            v.row(i) = (E * b).transpose();
        }
        return v;
    };
    const Eigen::MatrixXd eta = family(1.0);
    const Eigen::MatrixXd f = family(1.0);
    return {verify_hellinger_entropy_bound(eta, f, rule.weights, {0.03, 0.1, 0.3}, 1.0)};
}

inline std::vector<BoundCheckReport> covering(const SuiteOptions& o) {
    std::vector<BoundCheckReport> out;
    const std::vector<std::pair<int, double>> cases{{1, 0.1}, {2, 0.25}, {3, 0.5}, {4, 0.5}};
    for (const auto& [J, eps] : cases) {
        const CoveringResult c = covering_number(eps, 1.0, J, derive_seed(o.seed, {3, static_cast<std::uint64_t>(J)}));
        BoundCheckReport r = BoundCheckReport::make("covering_number", static_cast<double>(c.net_size), c.upper, 0.0);
        r.pass = r.pass && c.within_bounds();
        r.details = {{"J", J}, {"eps", eps}, {"R", 1.0}, {"lower", c.lower}, {"upper", c.upper}, {"samples", c.samples}};
        out.push_back(r);
    }
    return out;
}

inline BoundCheckReport concentration_at(int J, const SuiteOptions& o, int draws) {
    // Truth inside the spline space with sup |f0| = 0.5 and N = 1.
    auto basis = make_basis(2, J - 1);
    Eigen::VectorXd be(J), bf(J);
    for (int j = 0; j < J; ++j) {
        be(j) = 0.3 * std::cos(1.7 * j);
        bf(j) = j % 2 == 0 ? 0.5 : -0.5;
    }
    const FunctionPair truth = FunctionPair::from_splines(CoefficientVector(basis, be), CoefficientVector(basis, bf));
    Rng rng(derive_seed(o.seed, {4, static_cast<std::uint64_t>(J)}));
    ConcentrationConfig cfg;
    cfg.draws = draws;
    return concentration_slope(SplinePriorConfig{}, basis, truth, {0.1, 0.2, 0.3}, 1.0, rng, cfg);
}

inline std::vector<BoundCheckReport> concentration(const SuiteOptions& o) {
    const int draws = o.quick ? 20000 : 100000;
    return {concentration_at(2, o, draws), concentration_at(3, o, draws)};
}

inline std::vector<BoundCheckReport> tail(const SuiteOptions& o) {
    std::vector<BoundCheckReport> out;
    auto basis = make_basis_with_dimension(4, 10);
    for (double M : {2.5, 3.0, 3.5}) {
        Rng rng(derive_seed(o.seed, {5, static_cast<std::uint64_t>(M * 10)}));
        out.push_back(tail_probability_mc(SplinePriorConfig{}, basis, M, 100000, rng));
    }
    return out;
}

inline std::vector<BoundCheckReport> gp(const SuiteOptions& o) {
    GPPriorConfig cfg;
    cfg.grid = GPPriorConfig::uniform_grid(40);
    Rng rng(derive_seed(o.seed, {6}));
    std::vector<BoundCheckReport> out{gp_moment_check(cfg, 1000, rng)};
    GPPriorConfig sieve;
    sieve.grid = GPPriorConfig::uniform_grid(kMaxSmallBallGrid);
    out.push_back(verify_gp_sieve(sieve, [](double) { return 0.0; }, {1.0, 0.5, 0.25}, 10000, rng));
    return out;
}

inline std::vector<BoundCheckReport> approximation(const SuiteOptions&) {
    return {approximation_report(approximation_rate_check({0.6, 1.0, 1.3}, {8, 12, 16, 24, 32, 48, 64}, 4))};
}

}  // namespace suites

using SuiteFunction = std::function<std::vector<BoundCheckReport>(const SuiteOptions&)>;

/// Suite names in run order.
inline const std::vector<std::pair<std::string, SuiteFunction>>& suite_registry() {
    static const std::vector<std::pair<std::string, SuiteFunction>> registry{
        {"lemma2", suites::lemma2}, {"entropy", suites::entropy}, {"covering", suites::covering}, {"concentration", suites::concentration},
        {"tail", suites::tail},     {"gp", suites::gp},           {"approximation", suites::approximation}};
    return registry;
}

inline std::vector<std::string> suite_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : suite_registry()) names.push_back(name);
    names.emplace_back("all");
    return names;
}

/// Runs one suite by name ("all" runs every suite), tagging each report with its suite.
inline std::vector<BoundCheckReport> run_suite(const std::string& name, const SuiteOptions& o) {
    std::vector<BoundCheckReport> out;
    bool found = false;
    for (const auto& [suite, fn] : suite_registry()) {
        if (name != "all" && name != suite) continue;
        found = true;
        for (BoundCheckReport r : fn(o)) {
            r.details["suite"] = suite;
            out.push_back(std::move(r));
        }
    }
    if (!found) throw std::invalid_argument("unknown suite '" + name + "'");
    return out;
}

}  // namespace hetbayes
