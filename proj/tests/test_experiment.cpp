#include "hetbayes/experiment.hpp"
#include "hetbayes/theory_lab.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

using namespace hetbayes;

namespace {

nlohmann::json minimal_config() {
    return nlohmann::json::parse(R"({
        "rate": {"alpha": 2, "gamma": 2},
        "n_grid": [100, 200, 400],
        "replicates": 2,
        "prior": {"kind": "spline"},
        "sampler": {"iterations": 3000, "burn_in": 1000, "thin": 4},
        "seeds": {"base": 7},
        "output_dir": "out"
    })");
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(MakeTruth, IntegerSmoothnessUsesTrigonometricFunctions) {
    const Truth t = make_truth(2.0, 2.0, 0.1, 1);
    for (double x : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        EXPECT_NEAR(t.theta.at(x).mean, std::sin(2.0 * std::numbers::pi * x), 1e-15);
        EXPECT_NEAR(t.theta.at(x).log_variance, 0.5 * std::cos(2.0 * std::numbers::pi * x), 1e-15);
    }
    EXPECT_EQ(t.metadata["f0_shift"].get<double>(), 0.0);
}

TEST(MakeTruth, VarianceFloorHolds) {
    for (double v_min : {0.1, 1.0, 3.0}) {
        for (double gamma : {0.7, 2.0}) {
            const Truth t = make_truth(1.5, gamma, v_min, 2);
            double lowest = 1e300;
            for (int i = 0; i < 10000; ++i) lowest = std::min(lowest, t.theta.at(i / 9999.0).variance());
            EXPECT_GE(lowest, v_min * (1.0 - 1e-12));
        }
    }
    EXPECT_THROW(make_truth(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(make_truth(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(MakeTruth, RoughTruthHasMatchingApproximationSlope) {
    const Truth t = make_truth(0.6, 2.0, 0.1, 3);
    const auto eta0 = [&](double x) { return t.theta.at(x).mean; };
    const ApproximationSlope s = approximation_slope(eta0, 0.6, {8, 12, 16, 24, 32, 48, 64}, 4);
    EXPECT_TRUE(s.pass) << s.slope;
}

TEST(GenData, FixedDesignIsEquispaced) {
    const Truth t = make_truth(2.0, 2.0);
    Rng rng(4);
    const Dataset d = gen_data(t.theta, 10, DesignSpec::equispaced(3), rng);
    ASSERT_EQ(d.size(), 10);
    for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(d.x()(i, 0), (i + 0.5) / 10.0);
    EXPECT_TRUE(d.design().is_fixed());
    EXPECT_THROW(gen_data(t.theta, 0, DesignSpec::uniform(), rng), std::invalid_argument);
}

TEST(GenData, DeterministicUnderSeed) {
    const Truth t = make_truth(2.0, 2.0);
    Rng a(5), b(5);
    const Dataset da = gen_data(t.theta, 200, DesignSpec::uniform(), a);
    const Dataset db = gen_data(t.theta, 200, DesignSpec::uniform(), b);
    EXPECT_EQ(da.x(), db.x());
    EXPECT_EQ(da.y(), db.y());
}

TEST(GenData, StandardizedResidualsHaveUnitVariance) {
    const Truth t = make_truth(1.3, 0.8, 0.2, 6);
    for (const DesignSpec& design : {DesignSpec::uniform(), DesignSpec::equispaced(100000)}) {
        Rng rng(6);
        const Dataset d = gen_data(t.theta, 100000, design, rng);
        const FieldValues v = evaluate(t.theta, d.x());
        const Eigen::ArrayXd z = (d.y() - v.mean).array() / (0.5 * v.log_variance.array()).exp();
        const double mean = z.mean();
        const double var = (z - mean).square().sum() / static_cast<double>(z.size() - 1);
        EXPECT_NEAR(var, 1.0, 0.02);
        EXPECT_NEAR(mean, 0.0, 0.02);
    }
}

TEST(GenData, TinyVarianceReproducesMean) {
    const FunctionPair theta = FunctionPair::from_1d([](double x) { return x * x; }, [](double) { return std::log(1e-14); });
    Rng rng(7);
    const Dataset d = gen_data(theta, 50, DesignSpec::uniform(), rng);
    for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_NEAR(d.y()(i), d.x()(i, 0) * d.x()(i, 0), 1e-5);
}

TEST(Config, ParsesAndRoundTrips) {
    const ExperimentConfig c = config_from_json(minimal_config());
    EXPECT_EQ(c.n_grid, (std::vector<int>{100, 200, 400}));
    EXPECT_EQ(c.rate.kind, PriorKind::spline);
    EXPECT_EQ(c.sampler.iterations, 3000);
    EXPECT_EQ(c.seed, 7u);
    const ExperimentConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, FieldLevelErrors) {
    auto expect_field = [](nlohmann::json j, const std::string& field) {
        try {
            config_from_json(j);
            ADD_FAILURE() << "accepted config with bad " << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.field(), field) << e.what();
        }
    };
    for (const char* key : {"rate", "n_grid", "replicates", "prior", "sampler", "seeds", "output_dir"}) {
        nlohmann::json j = minimal_config();
        j.erase(key);
        expect_field(j, key);
    }
    nlohmann::json j = minimal_config();
    j["n_grid"] = {100, 100, 200};
    expect_field(j, "n_grid");
    j = minimal_config();
    j["n_grid"] = {100, 200};
    expect_field(j, "n_grid");
    j = minimal_config();
    j["n_grid"] = {100, 200, 5000};
    expect_field(j, "n_grid");
    j = minimal_config();
    j["replicates"] = "many";
    expect_field(j, "replicates");
    j = minimal_config();
    j["rate"]["alpha"] = 0.2;
    expect_field(j, "rate");
    j = minimal_config();
    j["prior"]["kind"] = "wavelet";
    expect_field(j, "prior.kind");
    j = minimal_config();
    j["sampler"]["burn_in"] = 5000;
    expect_field(j, "sampler");
    j = minimal_config();
    j["seeds"].erase("base");
    expect_field(j, "seeds.base");
    j = minimal_config();
    j["prior"]["gp_grid"] = 500;
    expect_field(j, "prior.gp_grid");
}

TEST(Experiment, DimensionFollowsScaledSchedule) {
    ExperimentConfig c = config_from_json(minimal_config());
    c.prior.j_scale = 3.0;
    EXPECT_EQ(experiment_dimension(c, 100), 6);
    EXPECT_EQ(experiment_dimension(c, 1600), 9);
    c.prior.j_scale = 100.0;
    EXPECT_EQ(experiment_dimension(c, 1600), kMaxDimension);
    c.prior.j_scale = 0.1;
    EXPECT_EQ(experiment_dimension(c, 1600), c.prior.order);
}

TEST(Experiment, ContractionIsDeterministicAndShrinks) {
    ExperimentConfig c = config_from_json(minimal_config());
    c.n_grid = {100, 400, 1600};
    const ContractionReport a = contraction_experiment(c);
    const ContractionReport b = contraction_experiment(c);
    EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
    ASSERT_EQ(a.median_distance.size(), 3u);
    EXPECT_LT(a.median_distance[2], a.median_distance[0]);
    EXPECT_LT(a.slope, 0.0);
    EXPECT_TRUE(std::isfinite(a.slope_se));
    EXPECT_EQ(a.included + a.excluded, 6);
    EXPECT_NEAR(a.theoretical_exponent, -1.0 / 3.0, 1e-15);
}

TEST(Experiment, EasyRegimeSplineTruth) {
    // Near-noiseless data from a truth inside a small spline space contract fast.
    ExperimentConfig c = config_from_json(minimal_config());
    c.prior.j_scale = 0.1;
    c.v_min = 1e-3;
    Truth t{FunctionPair::from_1d([](double x) { return 0.3 + 0.2 * x; }, [](double) { return std::log(1e-3); }), {}};
    std::vector<double> meds;
    for (int n : {100, 400, 1600}) meds.push_back(run_cell(c, t, n, 0).median_distance());
    EXPECT_LT(meds[2], meds[0]);
    EXPECT_LT(std::log(meds[2] / meds[0]) / std::log(16.0), -0.3);
}

TEST(Experiment, DegradedRunsAreCounted) {
    ExperimentConfig c = config_from_json(minimal_config());
    c.rhat_threshold = 0.0;
    const ContractionReport r = contraction_experiment(c);
    EXPECT_EQ(r.excluded, 6);
    EXPECT_EQ(r.included, 0);
    EXPECT_TRUE(std::isnan(r.slope));
    EXPECT_TRUE(report_to_json(r)["slope"].is_null());
}

TEST(Experiment, GaussianProcessPriorsRun) {
    for (const char* kind : {"rescaled-se", "integrated-bm"}) {
        nlohmann::json j = minimal_config();
        j["prior"] = {{"kind", kind}, {"gp_grid", 16}};
        const ExperimentConfig c = config_from_json(j);
        const Truth t = experiment_truth(c);
        const RunResult r = run_cell(c, t, 200, 0);
        EXPECT_TRUE(r.failure.empty());
        EXPECT_GT(r.median_distance(), 0.0);
        EXPECT_EQ(r.model_info["grid_points"].get<int>(), 16);
    }
}

TEST(Output, CsvHeadersAndRows) {
    ExperimentConfig c = config_from_json(minimal_config());
    const Truth t = experiment_truth(c);
    const RunResult r = run_cell(c, t, 100, 0, true);
    ASSERT_TRUE(r.chain.has_value());
    std::ostringstream chain, dist, data;
    write_chain_csv(chain, *r.chain);
    EXPECT_EQ(chain.str().rfind("# hetbayes chain v1\niteration,block,coeff_index,value,log_post\n", 0), 0u);
    const int J = r.model_info["J"].get<int>();
    EXPECT_EQ(count_lines(chain.str()), 2 + static_cast<int>(r.chain->draws.size()) * 2 * J);
    write_distance_csv(dist, {r});
    EXPECT_EQ(dist.str().rfind("# hetbayes distances v1\nn,replicate,quantile,d_n\n", 0), 0u);
    EXPECT_EQ(count_lines(dist.str()), 2 + 2);
    Rng rng(8);
    write_data_csv(data, gen_data(t.theta, 5, DesignSpec::equispaced(5), rng), t.theta);
    EXPECT_EQ(count_lines(data.str()), 7);
    const nlohmann::json run = run_to_json(r);
    EXPECT_EQ(run["quantiles"].size(), 2u);
}
