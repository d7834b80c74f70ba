// Tests for the experiment layer: truth-menu exactness, configuration
// hygiene, trace replay, summability dispatch, ensemble drift statistics,
// and the command-line contract (golden output, exit codes, determinism).
#include "bnc/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

using bnc::ExperimentConfig;
using bnc::Json;
using bnc::Verdict;

Json five_atom_prior() {
    return Json{{"kind", "discrete"},
                {"atoms", Json::array({Json{{"density", "uniform"}, {"weight", 0.5}},
                                       Json{{"density", "2x"}, {"weight", 0.125}},
                                       Json{{"density", "3x^2"}, {"weight", 0.125}},
                                       Json{{"density", "6x(1-x)"}, {"weight", 0.125}},
                                       Json{{"density", "two-step"}, {"weight", 0.125}}})}};
}

Json consistency_doc(std::int64_t n, std::uint64_t seed) {
    return Json{{"scenario", "consistency"}, {"truth", "uniform"},
                {"prior", five_atom_prior()}, {"n", n},
                {"epsilon", 0.3},             {"seed", seed}};
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    EXPECT_TRUE(in.good()) << path;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("bnclab-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

void expect_config_error(const Json& doc, const std::string& needle) {
    try {
        bnc::parse_config(doc);
        FAIL() << "expected a config error mentioning '" << needle << "'";
    } catch (const bnc::config_error& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
            << "message was: " << e.what();
    }
}

// --------------------------------------------------------------------------
// Truth menu
// --------------------------------------------------------------------------

TEST(TruthMenu, QuantilesInvertTheDistributions) {
    // Closed-form checkpoints of each quantile function.
    EXPECT_NEAR(bnc::make_truth("uniform").quantile(0.3), 0.3, 1e-15);
    EXPECT_NEAR(bnc::make_truth("2x").quantile(0.25), 0.5, 1e-15);
    EXPECT_NEAR(bnc::make_truth("3x^2").quantile(0.125), 0.5, 1e-15);
    const auto hump = bnc::make_truth("6x(1-x)");
    EXPECT_NEAR(hump.quantile(0.15625), 0.25, 1e-10);  // F(1/4) = 5/32
    EXPECT_NEAR(hump.quantile(0.5), 0.5, 1e-10);
    EXPECT_NEAR(hump.quantile(0.84375), 0.75, 1e-10);
    const auto steps = bnc::make_truth("two-step");
    EXPECT_NEAR(steps.quantile(0.375), 0.25, 1e-15);
    EXPECT_NEAR(steps.quantile(0.75), 0.5, 1e-15);
    EXPECT_NEAR(steps.quantile(0.875), 0.75, 1e-15);
}

TEST(TruthMenu, SquaredAntiderivativesAndSuprema) {
    const struct {
        const char* name;
        double integral_of_square;
        double sup;
    } cases[] = {{"uniform", 1.0, 1.0},
                 {"2x", 4.0 / 3.0, 2.0},
                 {"3x^2", 1.8, 3.0},
                 {"6x(1-x)", 1.2, 1.5},
                 {"two-step", 1.25, 1.5}};
    for (const auto& c : cases) {
        const auto truth = bnc::make_truth(c.name);
        EXPECT_NEAR(truth.squared_antiderivative(0.0), 0.0, 1e-15) << c.name;
        EXPECT_NEAR(truth.squared_antiderivative(1.0), c.integral_of_square, 1e-12)
            << c.name;
        EXPECT_DOUBLE_EQ(truth.sup, c.sup) << c.name;
    }
    EXPECT_THROW(bnc::make_truth("cauchy"), bnc::config_error);
}

TEST(TruthMenu, DivergencesFromUniformMatchClosedForms) {
    const auto uniform = bnc::make_truth("uniform").density;
    EXPECT_NEAR(bnc::hellinger_h(uniform, bnc::make_truth("2x").density),
                0.057190958417937088, 1e-8);
    // Root-scale distances decide complement membership at radius 0.3.
    EXPECT_NEAR(bnc::hellinger_big_h(uniform, bnc::make_truth("6x(1-x)").density),
                0.27599864991916312, 1e-7);
    EXPECT_NEAR(bnc::hellinger_big_h(uniform, bnc::make_truth("two-step").density),
                0.26105238444010309, 1e-9);
    EXPECT_NEAR(bnc::hellinger_big_h(uniform, bnc::make_truth("3x^2").density),
                0.51763809020504159, 1e-7);
}

TEST(TruthMenu, SamplerHitsTheConstructedMean) {
    const auto truth = bnc::make_truth("2x");
    auto rng = bnc::make_stream(777);
    const auto data = bnc::generate_data(truth, 100000, rng);
    double sum = 0.0;
    for (double x : data) {
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 1.0);
        sum += x;
    }
    // E[X] = 2/3; sd = sqrt(1/18); three standard errors over 1e5 draws.
    EXPECT_NEAR(sum / 1e5, 2.0 / 3.0, 0.0022360679774997903);
}

TEST(TruthMenu, GenerationIsDeterministicAndHandlesZero) {
    const auto truth = bnc::make_truth("6x(1-x)");
    auto rng_a = bnc::make_stream(99);
    auto rng_b = bnc::make_stream(99);
    const auto a = bnc::generate_data(truth, 50, rng_a);
    const auto b = bnc::generate_data(truth, 50, rng_b);
    EXPECT_EQ(a, b);
    auto rng_c = bnc::make_stream(100);
    EXPECT_NE(a, bnc::generate_data(truth, 50, rng_c));
    auto rng_d = bnc::make_stream(1);
    EXPECT_TRUE(bnc::generate_data(truth, 0, rng_d).empty());
}

// --------------------------------------------------------------------------
// Configuration
// --------------------------------------------------------------------------

TEST(Config, RoundTripIsIdentity) {
    Json doc = consistency_doc(300, 20240822);
    doc["transform"] = "log";
    doc["out_dir"] = "traces";
    doc["format"] = "json";
    const ExperimentConfig config = bnc::parse_config(doc);
    const ExperimentConfig again = bnc::parse_config(bnc::config_to_json(config));
    EXPECT_EQ(config, again);
    EXPECT_EQ(config.scenario, "consistency");
    EXPECT_EQ(config.n, 300);
    EXPECT_EQ(config.seed, 20240822u);
    EXPECT_EQ(config.transform, "log");
}

TEST(Config, RejectionsNameTheOffendingField) {
    expect_config_error(Json{{"seed", 1}, {"prior", Json::object()}}, "scenario");
    expect_config_error(Json{{"scenario", "divination"}, {"seed", 1},
                             {"prior", Json::object()}},
                        "divination");
    {
        Json doc = consistency_doc(10, 1);
        doc.erase("seed");
        expect_config_error(doc, "seed");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc.erase("prior");
        expect_config_error(doc, "prior");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc["bogus"] = 7;
        expect_config_error(doc, "bogus");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc["replicates"] = 0;
        expect_config_error(doc, "replicates");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc.erase("epsilon");
        expect_config_error(doc, "epsilon");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc["transform"] = "arctan";
        expect_config_error(doc, "arctan");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc["format"] = "parquet";
        expect_config_error(doc, "format");
    }
    {
        Json doc = consistency_doc(10, 1);
        doc["truth"] = "cauchy";
        expect_config_error(doc, "cauchy");
    }
}

TEST(Config, LoadReportsUnreadableAndMalformedFiles) {
    EXPECT_THROW(bnc::load_config("/nonexistent/c.json"), bnc::config_error);
    const std::string dir = fresh_dir("badcfg");
    const std::string path = dir + "/broken.json";
    bnc::write_text_file(path, "{not json");
    try {
        bnc::load_config(path);
        FAIL() << "expected a config error";
    } catch (const bnc::config_error& e) {
        EXPECT_NE(std::string(e.what()).find("not valid JSON"), std::string::npos);
    }
}

// --------------------------------------------------------------------------
// Consistency traces
// --------------------------------------------------------------------------

TEST(Consistency, ComplementSelectionUsesRootScaleRadius) {
    const auto result = bnc::run_consistency(bnc::parse_config(consistency_doc(5, 7)));
    // Radius 0.3 keeps only the atoms beyond root-scale distance 0.3: the
    // linear (0.338) and quadratic (0.518) atoms; the hump (0.276) and the
    // two-step (0.261) stay inside the neighborhood.
    EXPECT_EQ(result.set, (std::vector<std::size_t>{1, 2}));
}

TEST(Consistency, RestrictedMassCollapsesWithACleanTrend) {
    const auto config = bnc::parse_config(consistency_doc(300, 20240822));
    const auto result = bnc::run_consistency(config);
    ASSERT_EQ(result.rows.size(), 301u);
    EXPECT_EQ(result.rows.front().n, 0u);
    EXPECT_TRUE(std::isnan(result.rows.front().x));
    // The prior gives the restricted atoms mass 1/4.
    EXPECT_NEAR(result.rows.front().set_mass, 0.25, 1e-12);
    EXPECT_LT(result.rows.back().set_mass, 1e-8);
    EXPECT_LT(result.mass_trend.slope, -0.15);
    EXPECT_GT(result.mass_trend.r_squared, 0.9);
    // The averaged divergence of the predictive shrinks as data accumulate.
    EXPECT_LT(result.rows.back().cesaro_h, result.rows[10].cesaro_h);
    // The full accumulated ratio stays moderate: its 2N-th root approaches 1.
    const double root_gap =
        std::abs(std::exp(result.rows.back().log_I / (2.0 * 300.0)) - 1.0);
    EXPECT_LT(root_gap, 0.05);
}

TEST(Consistency, TraceSurvivesCsvRoundTripAndReplay) {
    const auto config = bnc::parse_config(consistency_doc(80, 5150));
    const auto result = bnc::run_consistency(config);
    const std::string csv = bnc::consistency_csv(result);
    EXPECT_EQ(csv.rfind("# bnclab-trace-1 scenario=consistency", 0), 0u);
    const auto rows = bnc::parse_consistency_csv(csv);
    ASSERT_EQ(rows.size(), result.rows.size());
    EXPECT_NO_THROW(bnc::verify_consistency_replay(config, rows));
    // Determinism: the same config yields byte-identical text.
    EXPECT_EQ(csv, bnc::consistency_csv(bnc::run_consistency(config)));
}

TEST(Consistency, TamperedColumnFailsReplay) {
    const auto config = bnc::parse_config(consistency_doc(40, 5150));
    auto rows = bnc::parse_consistency_csv(bnc::consistency_csv(bnc::run_consistency(config)));
    rows[20].set_mass *= 1.05;
    try {
        bnc::verify_consistency_replay(config, rows);
        FAIL() << "expected a replay mismatch";
    } catch (const bnc::numerical_error& e) {
        EXPECT_NE(std::string(e.what()).find("set_mass"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("row 20"), std::string::npos);
    }
}

TEST(Consistency, UnreachableRadiusGivesTheEmptySet) {
    // No pair of densities is farther than sqrt(2) in root scale.
    Json doc = consistency_doc(25, 11);
    doc["epsilon"] = 1.5;
    const auto result = bnc::run_consistency(bnc::parse_config(doc));
    EXPECT_TRUE(result.set.empty());
    for (const auto& row : result.rows) {
        EXPECT_EQ(row.set_mass, 0.0);
        EXPECT_TRUE(std::isinf(row.log_L) && row.log_L < 0.0);
        EXPECT_TRUE(std::isnan(row.martingale_m));
    }
    // Replay accepts the degenerate columns too.
    const auto rows = bnc::parse_consistency_csv(bnc::consistency_csv(result));
    EXPECT_NO_THROW(bnc::verify_consistency_replay(bnc::parse_config(doc), rows));
}

TEST(Consistency, TruthOnlyPriorHasNothingBeyondTheRadius) {
    Json doc = consistency_doc(15, 3);
    doc["prior"] = Json{{"kind", "discrete"},
                        {"atoms", Json::array({Json{{"density", "uniform"},
                                                    {"weight", 1.0}}})}};
    const auto result = bnc::run_consistency(bnc::parse_config(doc));
    EXPECT_TRUE(result.set.empty());
    for (const auto& row : result.rows) EXPECT_EQ(row.set_mass, 0.0);
    // A one-atom prior never moves: the predictive is the truth itself.
    EXPECT_NEAR(result.rows.back().dist_h, 0.0, 1e-12);
    EXPECT_NEAR(result.rows.back().log_I, 0.0, 1e-12);
}

// --------------------------------------------------------------------------
// Summability dispatch
// --------------------------------------------------------------------------

ExperimentConfig summability_config(Json prior) {
    return bnc::parse_config(Json{{"scenario", "summability"},
                                  {"prior", std::move(prior)},
                                  {"seed", 1}});
}

TEST(SummabilityScenario, QuadraticPowerLawDivergesByHarmonicComparison) {
    const Json rep = bnc::summability_report(
        summability_config(Json{{"kind", "discrete-power"}, {"exponent", 2.0}}));
    EXPECT_EQ(rep.at("schema_version"), "bnclab-report-1");
    EXPECT_EQ(rep.at("verdict"), "divergent");
    EXPECT_NE(rep.at("certificate").get<std::string>().find("harmonic"),
              std::string::npos);
}

TEST(SummabilityScenario, SplitCoverPowerScheduleIsSummableWithHugeBound) {
    const Json rep = bnc::summability_report(summability_config(
        Json{{"kind", "polya-power"}, {"exponent", 3.5}, {"levels", 25}}));
    EXPECT_EQ(rep.at("verdict"), "summable");
    EXPECT_NEAR(rep.at("rate").get<double>(), 0.125, 1e-12);
    const double log10_bound = rep.at("log10_total_bound").get<double>();
    EXPECT_GT(log10_bound, 6.7e8);
    EXPECT_LT(log10_bound, 7.1e8);
}

TEST(SummabilityScenario, FiniteWeightsGetTheExactTotal) {
    const Json rep = bnc::summability_report(summability_config(
        Json{{"kind", "discrete-finite"}, {"weights", Json::array({0.5, 0.3, 0.2})}}));
    EXPECT_EQ(rep.at("verdict"), "summable");
    EXPECT_NEAR(rep.at("total_bound").get<double>(), 1.7020429341916716, 1e-12);
}

TEST(SummabilityScenario, GeometricMixtureCountsDiverge) {
    const Json rep = bnc::summability_report(summability_config(
        Json{{"kind", "mixture-geometric"}, {"ratio", 0.5}, {"count_base", 10.0},
             {"delta", 0.1}}));
    EXPECT_EQ(rep.at("verdict"), "divergent");
    EXPECT_NE(rep.at("certificate").get<std::string>().find("7.0711"),
              std::string::npos);
}

TEST(SummabilityScenario, ProductCoverAutoSelectsTheEnvelopeOrder) {
    const Json rep = bnc::summability_report(summability_config(
        Json{{"kind", "gaussian-product"}, {"delta", 1.0},
             {"sd_scale", 1.0 / 2.612375348685488}, {"sd_exponent", 1.5},
             {"gamma_exponent", 1.25}, {"order", 0}, {"truncation", 40}}));
    EXPECT_EQ(rep.at("verdict"), "summable");
    EXPECT_EQ(rep.at("order").get<int>(), 3);
}

TEST(SummabilityScenario, UnknownFamilyIsRejected) {
    EXPECT_THROW(
        bnc::summability_report(summability_config(Json{{"kind", "astrology"}})),
        bnc::config_error);
}

// --------------------------------------------------------------------------
// Martingale ensembles
// --------------------------------------------------------------------------

Json martingale_doc(const std::string& set, const std::string& transform) {
    return Json{{"scenario", "martingale"},
                {"truth", "uniform"},
                {"prior", Json{{"kind", "discrete"},
                               {"atoms", Json::array(
                                             {Json{{"density", "uniform"}, {"weight", 0.5}},
                                              Json{{"density", "2x"}, {"weight", 0.5}}})}}},
                {"n", 200},
                {"replicates", 30},
                {"epsilon", 0.3},
                {"transform", transform},
                {"set", set},
                {"seed", 4242}};
}

TEST(MartingaleScenario, SingletonDriftMatchesThePairedDivergence) {
    const auto result = bnc::run_martingale(bnc::parse_config(martingale_doc("complement", "log")));
    EXPECT_EQ(result.set, (std::vector<std::size_t>{1}));
    ASSERT_EQ(result.slopes.size(), 30u);
    // For a one-atom restricted set the compensator is constant, so the
    // predicted drift is exactly minus the log-transform divergence.
    EXPECT_NEAR(result.predicted_slope, -0.3068528194400547, 1e-6);
    EXPECT_GT(result.slope_se, 0.0);
    EXPECT_LT(result.slope_se, 0.1);
    EXPECT_NEAR(result.slope_mean, -0.3068528194400547, 3.0 * result.slope_se);
    // Determinism of the concurrent ensemble: same config, same report.
    const auto again = bnc::run_martingale(bnc::parse_config(martingale_doc("complement", "log")));
    EXPECT_EQ(bnc::json_text(bnc::martingale_json(result)),
              bnc::json_text(bnc::martingale_json(again)));
}

TEST(MartingaleScenario, WholeSpaceRatioStaysFlat) {
    const auto result = bnc::run_martingale(bnc::parse_config(martingale_doc("whole", "sqrt")));
    EXPECT_EQ(result.set.size(), 2u);
    for (double mass : result.mean_set_mass) EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_LT(result.terminal_abs_log_i_over_n_mean, 0.05);
    EXPECT_EQ(result.variance_verdict, Verdict::summable);
    ASSERT_FALSE(result.variance_partial.empty());
    // Empirical n^{-2}-weighted variance stays inside the analytic budget.
    EXPECT_LT(result.variance_partial.back(), 1.6449340668482264);
}

TEST(MartingaleScenario, ReplicateFloorIsEnforced) {
    Json doc = martingale_doc("complement", "log");
    doc["replicates"] = 29;
    EXPECT_THROW(bnc::run_martingale(bnc::parse_config(doc)), bnc::config_error);
}

// --------------------------------------------------------------------------
// Chi-squared criterion scenario
// --------------------------------------------------------------------------

TEST(ChiSqScenario, TwoBinBoundIsExactAndMet) {
    const auto config = bnc::parse_config(Json{{"scenario", "chi-sq-criterion"},
                                               {"truth", "uniform"},
                                               {"prior", Json{{"kind", "histogram"},
                                                              {"bins", 2}}},
                                               {"n", 3},
                                               {"replicates", 2000},
                                               {"seed", 1234}});
    const Json rep = bnc::chi_sq_report(config);
    // One bin law at m = 2, n = 3: bound = sup * (m + n) / (1 + n) = 5/4.
    EXPECT_NEAR(rep.at("analytic_bound").get<double>(), 1.25, 1e-12);
    EXPECT_TRUE(rep.at("mean_condition_met").get<bool>());
    EXPECT_TRUE(rep.at("satisfied").get<bool>());
    EXPECT_GT(rep.at("empirical_mean").get<double>(), 1.0);
}

// --------------------------------------------------------------------------
// Command-line interface
// --------------------------------------------------------------------------

TEST(Cli, DivergenceGoldenValue) {
    testing::internal::CaptureStdout();
    const int code = bnc::run_cli({"divergence", "--f", "uniform", "--g", "2x",
                                   "--metric", "hellinger-h"});
    const std::string out = testing::internal::GetCapturedStdout();
    EXPECT_EQ(code, 0);
    EXPECT_EQ(out, "0.057191\n");
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(bnc::run_cli({"summability", "--config", "/nonexistent/cfg.json"}), 2);
    EXPECT_EQ(bnc::run_cli({"simulate", "--bogus"}), 2);
    EXPECT_EQ(bnc::run_cli({}), 2);
    EXPECT_EQ(bnc::run_cli({"divergence", "--f", "uniform", "--g", "2x",
                            "--metric", "total-variation"}),
              2);
}

TEST(Cli, ScenarioMustMatchTheSubcommand) {
    const std::string dir = fresh_dir("mismatch");
    const std::string path = dir + "/config.json";
    bnc::write_text_file(path, bnc::json_text(consistency_doc(10, 5)));
    EXPECT_EQ(bnc::run_cli({"martingale", "--config", path}), 2);
    EXPECT_EQ(bnc::run_cli({"summability", "--config", path}), 2);
}

TEST(Cli, SimulateWritesAReplayableTrace) {
    const std::string dir = fresh_dir("simulate");
    const std::string path = dir + "/config.json";
    Json doc = consistency_doc(60, 31337);
    doc["out_dir"] = dir + "/out";
    bnc::write_text_file(path, bnc::json_text(doc));
    testing::internal::CaptureStdout();
    const int code = bnc::run_cli({"simulate", "--config", path});
    const std::string out = testing::internal::GetCapturedStdout();
    ASSERT_EQ(code, 0);
    EXPECT_NE(out.find("wrote "), std::string::npos);
    const std::string trace_path = dir + "/out/consistency.csv";
    const auto rows = bnc::parse_consistency_csv(read_bytes(trace_path));
    EXPECT_EQ(rows.size(), 61u);
    EXPECT_NO_THROW(
        bnc::verify_consistency_replay(bnc::parse_config(doc), rows));
}

TEST(Cli, RerunsAreByteIdentical) {
    const std::string dir = fresh_dir("determinism");
    const std::string path = dir + "/config.json";
    Json doc = consistency_doc(60, 777);
    bnc::write_text_file(path, bnc::json_text(doc));
    testing::internal::CaptureStdout();
    ASSERT_EQ(bnc::run_cli({"simulate", "--config", path, "--out", dir + "/a"}), 0);
    ASSERT_EQ(bnc::run_cli({"simulate", "--config", path, "--out", dir + "/b"}), 0);
    testing::internal::GetCapturedStdout();
    EXPECT_EQ(read_bytes(dir + "/a/consistency.csv"),
              read_bytes(dir + "/b/consistency.csv"));

    const std::string sum_path = dir + "/summability.json";
    bnc::write_text_file(
        sum_path,
        bnc::json_text(Json{{"scenario", "summability"},
                            {"prior", Json{{"kind", "discrete-geometric"}, {"ratio", 0.25}}},
                            {"seed", 7}}));
    testing::internal::CaptureStdout();
    ASSERT_EQ(bnc::run_cli({"summability", "--config", sum_path, "--out", dir + "/sa"}), 0);
    ASSERT_EQ(bnc::run_cli({"summability", "--config", sum_path, "--out", dir + "/sb"}), 0);
    testing::internal::GetCapturedStdout();
    const std::string report = read_bytes(dir + "/sa/summability.json");
    EXPECT_EQ(report, read_bytes(dir + "/sb/summability.json"));
    EXPECT_NE(report.find("\"verdict\": \"summable\""), std::string::npos);
}

TEST(Cli, SeedOverrideChangesTheTrace) {
    const std::string dir = fresh_dir("seedflip");
    const std::string path = dir + "/config.json";
    bnc::write_text_file(path, bnc::json_text(consistency_doc(30, 1)));
    testing::internal::CaptureStdout();
    ASSERT_EQ(bnc::run_cli({"simulate", "--config", path, "--out", dir + "/a"}), 0);
    ASSERT_EQ(bnc::run_cli({"simulate", "--config", path, "--out", dir + "/b",
                            "--seed", "2"}),
              0);
    testing::internal::GetCapturedStdout();
    EXPECT_NE(read_bytes(dir + "/a/consistency.csv"),
              read_bytes(dir + "/b/consistency.csv"));
}

}  // namespace
