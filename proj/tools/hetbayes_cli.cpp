#include "hetbayes/experiment.hpp"
#include "hetbayes/verify_suites.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hetbayes;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

/// Options shared by every subcommand.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Base seed (overrides the configuration)");
    sub->add_option("--output", c.output, "Output directory (overrides the configuration)");
}

nlohmann::json default_config_json() {
    return {{"rate", {{"alpha", 2.0}, {"gamma", 2.0}, {"d", 1}}},
            {"n_grid", {100, 200, 400, 800, 1600}},
            {"replicates", 5},
            {"prior", {{"kind", "spline"}, {"order", 4}, {"j_scale", 3.0}}},
            {"sampler", {{"iterations", 20000}, {"burn_in", 5000}, {"thin", 5}}},
            {"seeds", {{"base", 20240611}}},
            {"output_dir", "hetbayes_out"}};
}

ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? config_from_json(default_config_json()) : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.output.empty()) cfg.output_dir = c.output;
    cfg.validate();
    return cfg;
}

fs::path prepare_output(const std::string& dir) {
    const fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::optional<int> n;
    int replicate = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    const ExperimentConfig c = resolve_config(a.common);
    const int n = a.n.value_or(c.n_grid.front());
    if (n < 1 || n > kMaxSampleSize) throw ConfigError("--n", "must lie in [1, 3200]");
    const Truth truth = experiment_truth(c);
    Rng rng(cell_seed(c.seed, n, a.replicate, 1));
    const Dataset data = gen_data(truth.theta, n, experiment_design(c, n), rng);
    const fs::path dir = prepare_output(c.output_dir);
    std::ostringstream csv;
    write_data_csv(csv, data, truth.theta);
    const fs::path path = dir / ("data_n" + std::to_string(n) + "_r" + std::to_string(a.replicate) + ".csv");
    write_file(path, csv.str());
    std::cout << path.string() << "\n";
    return kExitOk;
}

struct FitArgs {
    Common common;
    std::optional<int> n;
    int replicate = 0;
};

int cmd_fit(const FitArgs& a) {
    const ExperimentConfig c = resolve_config(a.common);
    const int n = a.n.value_or(c.n_grid.front());
    if (n < 2 || n > kMaxSampleSize) throw ConfigError("--n", "must lie in [2, 3200]");
    const Truth truth = experiment_truth(c);
    const RunResult r = run_cell(c, truth, n, a.replicate, true);
    const fs::path dir = prepare_output(c.output_dir);
    std::ostringstream chain;
    write_chain_csv(chain, *r.chain);
    write_file(dir / "chain.csv", chain.str());
    std::ostringstream dist;
    write_distance_csv(dist, {r});
    write_file(dir / "distances.csv", dist.str());
    nlohmann::json summary = run_to_json(r);
    summary["schema_version"] = kSchemaVersion;
    summary["kind"] = "fit_summary";
    summary["truth"] = truth.metadata;
    summary["config"] = config_to_json(c);
    write_file(dir / "fit_summary.json", summary.dump(2) + "\n");
    std::cout << "n=" << n << " J/grid=" << r.model_info.dump() << " median d_n=" << r.median_distance()
              << (r.degraded ? " (degraded)" : "") << "\n";
    return kExitOk;
}

struct DivergenceArgs {
    Common common;
    std::optional<double> mean1, var1, mean2, var2;
};

ConditionalNormal read_normal(const nlohmann::json& j, const std::string& path) {
    try {
        return ConditionalNormal::from_variance(j.at("mean").get<double>(), j.at("variance").get<double>());
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(path, "expected {\"mean\": number, \"variance\": number}");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

/// Either a constant pair {"mean", "variance"} or spline coefficients
/// {"order", "mean_coeffs", "log_variance_coeffs"}.
FunctionPair read_pair(const nlohmann::json& j, const std::string& path) {
    if (j.contains("mean_coeffs")) {
        try {
            const auto be = j.at("mean_coeffs").get<std::vector<double>>();
            const auto bf = j.at("log_variance_coeffs").get<std::vector<double>>();
            const int order = j.value("order", 4);
            if (be.size() != bf.size()) throw ConfigError(path, "coefficient vectors differ in length");
            auto basis = make_basis_with_dimension(order, static_cast<int>(be.size()));
            return FunctionPair::from_splines(CoefficientVector(basis, Eigen::Map<const Eigen::VectorXd>(be.data(), static_cast<Eigen::Index>(be.size()))),
                                              CoefficientVector(basis, Eigen::Map<const Eigen::VectorXd>(bf.data(), static_cast<Eigen::Index>(bf.size()))));
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(path, "expected numeric arrays mean_coeffs and log_variance_coeffs");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
        }
    }
    const ConditionalNormal p = read_normal(j, path);
    return FunctionPair::constant(p.mean, p.variance());
}

int cmd_divergence(const DivergenceArgs& a) {
    nlohmann::json spec;
    if (!a.common.config.empty()) {
        std::ifstream in(a.common.config);
        try {
            spec = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
        }
        if (!spec.contains("divergence")) throw ConfigError("divergence", "missing required key");
        spec = spec.at("divergence");
    } else {
        spec = {{"first", {{"mean", 0.0}, {"variance", 1.0}}}, {"second", {{"mean", 0.5}, {"variance", 2.0}}}, {"design", "uniform"}};
    }
    if (!spec.contains("first") || !spec.contains("second")) throw ConfigError("divergence", "needs \"first\" and \"second\"");
    if (a.mean1) spec["first"]["mean"] = *a.mean1;
    if (a.var1) spec["first"]["variance"] = *a.var1;
    if (a.mean2) spec["second"]["mean"] = *a.mean2;
    if (a.var2) spec["second"]["variance"] = *a.var2;
    const FunctionPair first = read_pair(spec.at("first"), "divergence.first");
    const FunctionPair second = read_pair(spec.at("second"), "divergence.second");
    const std::string design_name = spec.value("design", "uniform");
    DesignSpec design = DesignSpec::uniform();
    if (design_name == "equispaced") design = DesignSpec::equispaced(spec.value("n", 100));
    else if (design_name != "uniform") throw ConfigError("divergence.design", "expected \"uniform\" or \"equispaced\"");

    const DivergenceReport r = avg_divergences(first, second, design);
    nlohmann::json out = {{"schema_version", kSchemaVersion},
                          {"kind", "divergence_report"},
                          {"design", design_name},
                          {"hellinger_sq", r.hellinger_sq},
                          {"d_n", r.hellinger()},
                          {"kl", r.kl},
                          {"var_div", r.var_div},
                          {"converged", r.converged}};
    if (spec.at("first").contains("mean") && spec.at("second").contains("mean")) {
        const OracleResult o = oracle_divergences(first, second, 0.5);
        out["oracle"] = {{"hellinger_sq", o.hellinger_sq}, {"kl", o.kl}, {"var_div", o.var_div}};
    }
    std::cout << out.dump(2) << "\n";
    if (!a.common.output.empty()) write_file(prepare_output(a.common.output) / "divergence.json", out.dump(2) + "\n");
    return kExitOk;
}

struct RatesArgs {
    Common common;
    std::optional<double> alpha, gamma;
    std::optional<int> d;
    std::vector<double> n;
    std::string prior = "all";
};

int cmd_rates(const RatesArgs& a) {
    RateSpec base;
    std::vector<double> ns;
    if (!a.common.config.empty()) {
        const ExperimentConfig c = load_config(a.common.config);
        base = c.rate;
        for (int n : c.n_grid) ns.push_back(n);
    }
    if (a.alpha) base.alpha = *a.alpha;
    if (a.gamma) base.gamma = *a.gamma;
    if (a.d) base.d = *a.d;
    if (!a.n.empty()) ns = a.n;
    if (ns.empty()) ns = {100, 200, 400, 800, 1600, 3200};
    for (double n : ns) {
        if (!(n >= 2.0)) throw ConfigError("--n", "sample sizes must be >= 2");
    }
    std::vector<PriorKind> kinds;
    if (a.prior == "all") {
        kinds = {PriorKind::spline, PriorKind::rescaled_se, PriorKind::integrated_bm};
    } else {
        try {
            kinds = {prior_kind_from_string(a.prior)};
        } catch (const std::invalid_argument& e) {
            throw ConfigError("--prior", e.what());
        }
    }
    try {
        base.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("rate", e.what());
    }
    std::ostringstream table;
    table << "# hetbayes rates v" << kSchemaVersion << "\n";
    table << "prior,alpha,gamma,d,n,eps_n,J_n,k_n,minimax\n";
    for (PriorKind k : kinds) {
        RateSpec s = base;
        s.kind = k;
        for (double n : ns) {
            table << to_string(k) << ',' << s.alpha << ',' << s.gamma << ',' << s.d << ',' << n << ',' << fixed(rate_theoretical(s, n), 5) << ','
                  << jn_schedule(s, n) << ',' << sieve_dimension_cap(s, n) << ',' << fixed(minimax_rate(s.alpha, s.gamma, n), 5) << '\n';
        }
    }
    std::cout << table.str();
    if (!a.common.output.empty()) write_file(prepare_output(a.common.output) / "rates.csv", table.str());
    return kExitOk;
}

struct VerifyArgs {
    Common common;
    std::string suite = "all";
    bool quick = false;
};

int cmd_verify(const VerifyArgs& a) {
    SuiteOptions o;
    if (!a.common.config.empty()) o.seed = load_config(a.common.config).seed;
    if (a.common.seed) o.seed = *a.common.seed;
    o.quick = a.quick;
    const std::vector<BoundCheckReport> reports = run_suite(a.suite, o);
    std::ostringstream lines;
    bool all = true;
    for (const BoundCheckReport& r : reports) {
        nlohmann::json j = r.to_json();
        j["schema_version"] = kSchemaVersion;
        lines << j.dump() << '\n';
        all = all && r.pass;
    }
    std::cout << lines.str();
    if (!a.common.output.empty()) write_file(prepare_output(a.common.output) / ("verify_" + a.suite + ".jsonl"), lines.str());
    return all ? kExitOk : kExitRuntime;
}

struct ContractArgs {
    Common common;
    std::optional<int> replicates;
    bool write_chains = false;
};

int cmd_contract(const ContractArgs& a) {
    ExperimentConfig c = resolve_config(a.common);
    if (a.replicates) c.replicates = *a.replicates;
    if (a.write_chains) c.write_chains = true;
    c.validate();
    const ContractionReport rep = contraction_experiment(c, c.write_chains);
    const fs::path dir = prepare_output(c.output_dir);
    std::ostringstream dist;
    write_distance_csv(dist, rep.runs);
    write_file(dir / "distances.csv", dist.str());
    write_file(dir / "report.json", report_to_json(rep).dump(2) + "\n");
    if (c.write_chains) {
        const fs::path chains = dir / "chains";
        fs::create_directories(chains);
        for (const RunResult& r : rep.runs) {
            if (!r.chain) continue;
            std::ostringstream csv;
            write_chain_csv(csv, *r.chain);
            write_file(chains / ("chain_n" + std::to_string(r.n) + "_r" + std::to_string(r.replicate) + ".csv"), csv.str());
        }
    }
    std::cout << "n,median_d_n\n";
    for (std::size_t i = 0; i < rep.n_used.size(); ++i) std::cout << rep.n_used[i] << ',' << rep.median_distance[i] << '\n';
    std::cout << "slope " << rep.slope << " (se " << rep.slope_se << "), theoretical exponent " << rep.theoretical_exponent
              << ", included " << rep.included << ", excluded " << rep.excluded << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heteroscedastic nonparametric regression: posterior contraction experiments and numerical checks", "hetbayes"};
    app.require_subcommand(1);
    app.fallthrough(false);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate truth and data, write a data CSV");
    add_common(simulate, sim.common);
    simulate->add_option("--n", sim.n, "Sample size (default: first n of the grid)");
    simulate->add_option("--replicate", sim.replicate, "Replicate index")->check(CLI::NonNegativeNumber);

    FitArgs fit;
    auto* fitc = app.add_subcommand("fit", "Run one MCMC fit, write chain CSV and summary JSON");
    add_common(fitc, fit.common);
    fitc->add_option("--n", fit.n, "Sample size (default: first n of the grid)");
    fitc->add_option("--replicate", fit.replicate, "Replicate index")->check(CLI::NonNegativeNumber);

    DivergenceArgs div;
    auto* divc = app.add_subcommand("divergence", "Averaged Hellinger, KL and variance divergences between two parameter pairs");
    add_common(divc, div.common);
    divc->add_option("--mean1", div.mean1, "Mean of the first constant pair");
    divc->add_option("--var1", div.var1, "Variance of the first constant pair");
    divc->add_option("--mean2", div.mean2, "Mean of the second constant pair");
    divc->add_option("--var2", div.var2, "Variance of the second constant pair");

    RatesArgs rates;
    auto* ratesc = app.add_subcommand("rates", "Rate tables over n for each prior kind");
    add_common(ratesc, rates.common);
    ratesc->add_option("--alpha", rates.alpha, "Smoothness of the mean");
    ratesc->add_option("--gamma", rates.gamma, "Smoothness of the log-variance");
    ratesc->add_option("--d", rates.d, "Covariate dimension");
    ratesc->add_option("--n", rates.n, "Sample sizes")->expected(1, -1);
    ratesc->add_option("--prior", rates.prior, "spline | rescaled-se | integrated-bm | all");

    VerifyArgs ver;
    auto* verc = app.add_subcommand("verify", "Run numerical bound checks, emit JSON lines");
    add_common(verc, ver.common);
    verc->add_option("--suite", ver.suite, "Suite to run")->check(CLI::IsMember(suite_names()));
    verc->add_flag("--quick", ver.quick, "Smaller Monte Carlo sizes");

    ContractArgs con;
    auto* conc = app.add_subcommand("contract", "Full contraction experiment over the n grid");
    add_common(conc, con.common);
    conc->add_option("--replicates", con.replicates, "Replicates per n (overrides the configuration)");
    conc->add_flag("--write-chains", con.write_chains, "Also write every chain CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitInvalid;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim);
        if (fitc->parsed()) return cmd_fit(fit);
        if (divc->parsed()) return cmd_divergence(div);
        if (ratesc->parsed()) return cmd_rates(rates);
        if (verc->parsed()) return cmd_verify(ver);
        if (conc->parsed()) return cmd_contract(con);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
    std::cerr << app.help();
    return kExitInvalid;
}
