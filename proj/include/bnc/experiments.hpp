#pragma once
/**
 * @file experiments.hpp
 * @brief Scenario drivers, configuration, file formats, and the CLI.
 *
 * This is the orchestration layer on top of the numerical modules.  It owns
 *   - the truth-density menu: named analytic densities on [0,1] whose
 *     quantile functions, suprema, and squared antiderivatives are exact
 *     (one entry uses a tabulated monotone grid refined by bisection);
 *   - ExperimentConfig: a strict JSON-backed configuration with round-trip
 *     serialization and field-by-field validation;
 *   - run_consistency / summability_report / run_martingale / chi_sq_report:
 *     the four scenario drivers;
 *   - CSV and JSON writers with versioned schema headers, a CSV reader, and
 *     a replay verifier that recomputes every derived column of a trace from
 *     the stored observations;
 *   - run_cli: the `bnclab` command-line entry point (subcommands simulate,
 *     summability, martingale, divergence; exit codes 0 success, 2
 *     configuration error, 3 numerical failure).
 *
 * Determinism contract: a fixed (config, seed) pair produces byte-identical
 * output files.  Data streams are derived counter-style: single-trace
 * scenarios read from make_stream(seed); replicate r of an ensemble reads
 * from substream(seed, r).  Replicates may run concurrently, but results are
 * reduced in replicate order, so scheduling never changes any output.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bnc/core.hpp"
#include "bnc/covering.hpp"
#include "bnc/density.hpp"
#include "bnc/martingale.hpp"
#include "bnc/posterior.hpp"
#include "bnc/priors.hpp"
#include "bnc/quadrature.hpp"

namespace bnc {

using Json = nlohmann::json;

inline constexpr const char* kTraceSchemaVersion = "bnclab-trace-1";
inline constexpr const char* kEnsembleSchemaVersion = "bnclab-ensemble-1";
inline constexpr const char* kReportSchemaVersion = "bnclab-report-1";

// ---------------------------------------------------------------------------
// Truth-density menu
// ---------------------------------------------------------------------------

/**
 * A named data-generating density together with the exact pieces the
 * scenario drivers need: the quantile function (for inverse-CDF sampling),
 * the antiderivative of its square (for exact chi-squared integrals against
 * step densities), and its supremum.
 */
struct TruthSpec {
    std::string name;
    SupportedDensity density;
    std::function<double(double)> quantile;               ///< inverse CDF on [0,1]
    std::function<double(double)> squared_antiderivative; ///< of density^2, zero at 0
    double sup = 1.0;                                     ///< max density value
};

/** Names accepted by make_truth, in menu order. */
inline const std::vector<std::string>& truth_menu() {
    static const std::vector<std::string> names{"uniform", "2x", "3x^2", "6x(1-x)",
                                                "two-step"};
    return names;
}

namespace detail {

/** CDF of the symmetric quadratic hump 6x(1-x): x^2 (3 - 2x). */
inline double hump_cdf(double x) { return x * x * (3.0 - 2.0 * x); }

/**
 * Quantile of the hump density.  The cubic CDF has no convenient closed
 * inverse, so we bracket with a precomputed 10^4-knot monotone grid and
 * finish with bisection on the exact CDF; the result is deterministic and
 * accurate to ~1e-12.
 */
inline double hump_quantile(double u) {
    static const std::vector<double> grid = [] {
        std::vector<double> t(10001);
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = hump_cdf(static_cast<double>(i) / 10000.0);
        return t;
    }();
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), u);
    const std::size_t hi_idx = static_cast<std::size_t>(it - grid.begin());
    double lo = static_cast<double>(hi_idx - 1) / 10000.0;
    double hi = static_cast<double>(hi_idx) / 10000.0;
    for (int round = 0; round < 40; ++round) {
        const double mid = 0.5 * (lo + hi);
        (hump_cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/** Build a menu density by name; rejects anything off the menu. */
inline TruthSpec make_truth(const std::string& name) {
    const Interval unit{0.0, 1.0};
    if (name == "uniform") {
        return TruthSpec{name, SupportedDensity(unit, [](double) { return 1.0; }, name),
                         [](double u) { return u; }, [](double x) { return x; }, 1.0};
    }
    if (name == "2x") {
        return TruthSpec{name, SupportedDensity(unit, [](double x) { return 2.0 * x; }, name),
                         [](double u) { return std::sqrt(u); },
                         [](double x) { return 4.0 * x * x * x / 3.0; }, 2.0};
    }
    if (name == "3x^2") {
        return TruthSpec{name,
                         SupportedDensity(unit, [](double x) { return 3.0 * x * x; }, name),
                         [](double u) { return std::cbrt(u); },
                         [](double x) { return 1.8 * std::pow(x, 5); }, 3.0};
    }
    if (name == "6x(1-x)") {
        return TruthSpec{name,
                         SupportedDensity(unit, [](double x) { return 6.0 * x * (1.0 - x); },
                                          name),
                         [](double u) { return detail::hump_quantile(u); },
                         [](double x) {
                             const double x3 = x * x * x;
                             return 12.0 * x3 - 18.0 * x3 * x + 7.2 * x3 * x * x;
                         },
                         1.5};
    }
    if (name == "two-step") {
        const StepDensity step{{0.0, 0.5, 1.0}, {1.5, 0.5}};
        return TruthSpec{name, step.as_density(name),
                         [](double u) {
                             return u <= 0.75 ? u / 1.5 : 0.5 + 2.0 * (u - 0.75);
                         },
                         [](double x) {
                             return x <= 0.5 ? 2.25 * x : 1.125 + 0.25 * (x - 0.5);
                         },
                         1.5};
    }
    std::string choices;
    for (const auto& n : truth_menu()) choices += (choices.empty() ? "" : ", ") + n;
    throw config_error("unknown truth density '" + name + "'; choices are: " + choices);
}

/** Inverse-CDF sampler for a menu density. */
inline std::function<double(RngStream&)> truth_sampler(const TruthSpec& truth) {
    return [quantile = truth.quantile](RngStream& rng) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return quantile(unit(rng));
    };
}

/** n inverse-CDF draws from the given stream (n = 0 yields an empty vector). */
inline std::vector<double> generate_data(const TruthSpec& truth, std::size_t n,
                                         RngStream& rng) {
    std::vector<double> data(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& x : data) x = truth.quantile(unit(rng));
    return data;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/** Scenario names accepted in configs. */
inline const std::vector<std::string>& scenario_menu() {
    static const std::vector<std::string> names{"consistency", "predictive", "martingale",
                                                "summability", "chi-sq-criterion"};
    return names;
}

inline TransformKind parse_transform(const std::string& name) {
    if (name == "sqrt") return TransformKind::sqrt_minus_one;
    if (name == "log") return TransformKind::log_ratio;
    if (name == "inverse") return TransformKind::one_minus_inverse;
    throw config_error("unknown transform '" + name +
                       "'; choices are: sqrt, log, inverse");
}

/**
 * One experiment, fully specified.  `prior` stays a scenario-specific JSON
 * subobject; the scenario drivers validate it when they build the actual
 * prior.  Every field besides `scenario`, `seed`, and `prior` has a default.
 */
struct ExperimentConfig {
    std::string scenario;
    std::string truth = "uniform";
    Json prior = Json::object();
    std::int64_t n = 1;
    std::int64_t replicates = 1;
    double epsilon = 0.0;
    std::string transform = "sqrt";  ///< sqrt | log | inverse
    std::string set = "complement";  ///< martingale scenario: complement | whole
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string format = "csv";      ///< csv | json

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline void require_member(const Json& doc, const char* key) {
    if (!doc.contains(key))
        throw config_error(std::string("config field '") + key + "' is required");
}

inline std::string get_string(const Json& doc, const char* key) {
    if (!doc.at(key).is_string())
        throw config_error(std::string("config field '") + key + "' must be a string");
    return doc.at(key).get<std::string>();
}

inline std::int64_t get_positive_int(const Json& doc, const char* key) {
    if (!doc.at(key).is_number_integer())
        throw config_error(std::string("config field '") + key + "' must be an integer");
    const auto v = doc.at(key).get<std::int64_t>();
    if (v < 1)
        throw config_error(std::string("config field '") + key + "' must be at least 1");
    return v;
}

}  // namespace detail

/**
 * Strict parse: unknown top-level keys are rejected by name, required fields
 * are checked per scenario, and every enumerated field is validated against
 * its menu.  Throws config_error with the offending field in the message.
 */
inline ExperimentConfig parse_config(const Json& doc) {
    if (!doc.is_object()) throw config_error("config must be a JSON object");
    static const std::vector<std::string> known{
        "scenario", "truth", "prior",   "n",    "replicates", "epsilon",
        "transform", "set",  "seed",    "out_dir", "format"};
    for (const auto& item : doc.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw config_error("config field '" + item.key() + "' is not recognized");

    ExperimentConfig config;
    detail::require_member(doc, "scenario");
    config.scenario = detail::get_string(doc, "scenario");
    const auto& scenarios = scenario_menu();
    if (std::find(scenarios.begin(), scenarios.end(), config.scenario) == scenarios.end()) {
        std::string choices;
        for (const auto& s : scenarios) choices += (choices.empty() ? "" : ", ") + s;
        throw config_error("unknown scenario '" + config.scenario +
                           "'; choices are: " + choices);
    }

    detail::require_member(doc, "seed");
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer())
        throw config_error("config field 'seed' must be a nonnegative integer");
    {
        const auto raw = doc.at("seed").get<std::int64_t>();
        if (raw < 0 && !doc.at("seed").is_number_unsigned())
            throw config_error("config field 'seed' must be a nonnegative integer");
        config.seed = doc.at("seed").get<std::uint64_t>();
    }

    detail::require_member(doc, "prior");
    if (!doc.at("prior").is_object())
        throw config_error("config field 'prior' must be an object");
    config.prior = doc.at("prior");

    if (doc.contains("truth")) config.truth = detail::get_string(doc, "truth");
    make_truth(config.truth);  // validates the name

    if (doc.contains("n")) config.n = detail::get_positive_int(doc, "n");
    if (doc.contains("replicates"))
        config.replicates = detail::get_positive_int(doc, "replicates");

    if (doc.contains("epsilon")) {
        if (!doc.at("epsilon").is_number())
            throw config_error("config field 'epsilon' must be a number");
        config.epsilon = doc.at("epsilon").get<double>();
        if (!(config.epsilon >= 0.0) || !std::isfinite(config.epsilon))
            throw config_error("config field 'epsilon' must be finite and nonnegative");
    }

    if (doc.contains("transform")) config.transform = detail::get_string(doc, "transform");
    parse_transform(config.transform);  // validates

    if (doc.contains("set")) config.set = detail::get_string(doc, "set");
    if (config.set != "complement" && config.set != "whole")
        throw config_error("config field 'set' must be 'complement' or 'whole'");

    if (doc.contains("out_dir")) config.out_dir = detail::get_string(doc, "out_dir");
    if (doc.contains("format")) config.format = detail::get_string(doc, "format");
    if (config.format != "csv" && config.format != "json")
        throw config_error("config field 'format' must be 'csv' or 'json'");

    const bool needs_epsilon =
        config.scenario == "consistency" || config.scenario == "predictive" ||
        (config.scenario == "martingale" && config.set == "complement");
    if (needs_epsilon && !(config.epsilon > 0.0))
        throw config_error("config field 'epsilon' must be positive for scenario '" +
                           config.scenario + "'");
    return config;
}

/** Normalized serialization; parse_config(config_to_json(c)) == c. */
inline Json config_to_json(const ExperimentConfig& config) {
    return Json{{"scenario", config.scenario}, {"truth", config.truth},
                {"prior", config.prior},       {"n", config.n},
                {"replicates", config.replicates}, {"epsilon", config.epsilon},
                {"transform", config.transform},   {"set", config.set},
                {"seed", config.seed},             {"out_dir", config.out_dir},
                {"format", config.format}};
}

/**
 * Config echo embedded in output files: the experiment description only.
 * Routing fields (out_dir, format) are dropped so that where a file lands
 * never changes its bytes.
 */
inline Json config_echo(const ExperimentConfig& config) {
    Json echo = config_to_json(config);
    echo.erase("out_dir");
    echo.erase("format");
    return echo;
}

/** Read and parse a config file; unreadable or invalid JSON is a config error. */
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot read config file '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const std::exception& e) {
        throw config_error("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

// ---------------------------------------------------------------------------
// Prior construction from config subobjects
// ---------------------------------------------------------------------------

namespace detail {

inline std::string prior_kind(const Json& prior) {
    if (!prior.is_object() || !prior.contains("kind") || !prior.at("kind").is_string())
        throw config_error("prior spec needs a string field 'kind'");
    return prior.at("kind").get<std::string>();
}

inline double prior_number(const Json& prior, const char* key) {
    if (!prior.contains(key) || !prior.at(key).is_number())
        throw config_error(std::string("prior field '") + key + "' must be a number");
    return prior.at(key).get<double>();
}

inline int prior_int(const Json& prior, const char* key) {
    if (!prior.contains(key) || !prior.at(key).is_number_integer())
        throw config_error(std::string("prior field '") + key + "' must be an integer");
    return prior.at(key).get<int>();
}

inline int prior_int_or(const Json& prior, const char* key, int fallback) {
    return prior.contains(key) ? prior_int(prior, key) : fallback;
}

}  // namespace detail

/** Discrete prior over menu densities: {"kind":"discrete","atoms":[{density,weight}]}. */
inline DiscretePrior discrete_prior_from_config(const Json& prior) {
    if (detail::prior_kind(prior) != "discrete")
        throw config_error("this scenario needs a prior of kind 'discrete'");
    if (!prior.contains("atoms") || !prior.at("atoms").is_array() ||
        prior.at("atoms").empty())
        throw config_error("prior field 'atoms' must be a nonempty array");
    std::vector<SupportedDensity> atoms;
    std::vector<double> weights;
    for (const auto& entry : prior.at("atoms")) {
        if (!entry.is_object() || !entry.contains("density") ||
            !entry.at("density").is_string())
            throw config_error("each prior atom needs a string field 'density'");
        atoms.push_back(make_truth(entry.at("density").get<std::string>()).density);
        weights.push_back(detail::prior_number(entry, "weight"));
        if (!(weights.back() > 0.0))
            throw config_error("prior atom weights must be positive");
    }
    return DiscretePrior::normalized(std::move(atoms), std::move(weights));
}

/** Histogram prior: kinds histogram | histogram-geometric | histogram-power. */
inline RandomHistogramPrior histogram_prior_from_config(const Json& prior) {
    const std::string kind = detail::prior_kind(prior);
    if (kind == "histogram")
        return RandomHistogramPrior::fixed_bins(detail::prior_int(prior, "bins"));
    if (kind == "histogram-geometric")
        return RandomHistogramPrior::geometric(detail::prior_number(prior, "ratio"),
                                               detail::prior_int(prior, "max_bins"));
    if (kind == "histogram-power")
        return RandomHistogramPrior::power_law(detail::prior_number(prior, "exponent"),
                                               detail::prior_int(prior, "max_bins"));
    throw config_error("prior kind '" + kind +
                       "' is not a histogram family (histogram, histogram-geometric, "
                       "histogram-power)");
}

// ---------------------------------------------------------------------------
// Consistency traces
// ---------------------------------------------------------------------------

/**
 * One row of a posterior trace.  `x` is the observation absorbed entering
 * the row (NaN on the starting row), so the whole file is replayable.  When
 * the restricted set is empty, log_L is -infinity, set_mass is exactly 0,
 * and the compensated-sum column is NaN.
 */
struct ConsistencyRow {
    std::size_t n = 0;
    double x = std::numeric_limits<double>::quiet_NaN();
    double log_L = 0.0;     ///< log restricted accumulated ratio
    double log_I = 0.0;     ///< log full accumulated ratio
    double set_mass = 0.0;  ///< posterior mass of the restricted set
    double dist_h = 0.0;    ///< h(truth, full predictive), in [0,1]
    double dist_big_h = 0.0;  ///< H = sqrt(2 h)
    double dist_kl = 0.0;
    double cesaro_h = 0.0;   ///< mean of dist_h over states 0..n-1 (0 at n=0)
    double cesaro_kl = 0.0;
    double martingale_m = 0.0;  ///< compensated sum for the restricted set
};

struct ConsistencyResult {
    ExperimentConfig config;
    std::vector<std::size_t> set;  ///< complement atom indices
    std::vector<double> data;
    std::vector<ConsistencyRow> rows;  ///< size n + 1
    /// OLS fit of log set-mass against n over the back stretch
    /// n >= max(1, horizon/6); all-zero when fewer than two usable points.
    LineFit mass_trend;
};

/**
 * Single-trace consistency/predictive run: atoms at Hellinger distance
 * (root-scale, H) greater than epsilon from the truth form the restricted
 * set, and the trace tracks its posterior mass alongside full-predictive
 * divergences, their running means, and the compensated sum.
 */
inline ConsistencyResult run_consistency(const ExperimentConfig& config) {
    ConsistencyResult result;
    result.config = config;
    const TruthSpec truth = make_truth(config.truth);
    const DiscretePrior prior = discrete_prior_from_config(config.prior);
    const AtomSet set = hellinger_complement(prior, truth.density, config.epsilon);
    result.set = set.indices;

    auto rng = make_stream(config.seed);
    result.data = generate_data(truth, static_cast<std::size_t>(config.n), rng);

    std::vector<TraceRow> restricted;
    if (!set.indices.empty()) {
        const MartingaleInputs inputs{prior,
                                      truth.density,
                                      set.indices,
                                      parse_transform(config.transform),
                                      QuadratureRule{},
                                      truth_sampler(truth)};
        restricted = build_trace(inputs, result.data);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    auto post = DiscretePosterior::from_prior(prior);
    double cum_log_truth = 0.0;
    double sum_h = 0.0, sum_kl = 0.0;
    result.rows.reserve(static_cast<std::size_t>(config.n) + 1);

    const auto push_row = [&](std::size_t n, double x) {
        ConsistencyRow row;
        row.n = n;
        row.x = x;
        row.log_I = post.log_marginal() - cum_log_truth;
        const SupportedDensity predictive = post.predictive();
        row.dist_h = hellinger_h(truth.density, predictive);
        row.dist_big_h = std::sqrt(2.0 * row.dist_h);
        row.dist_kl = kl_divergence(truth.density, predictive);
        row.cesaro_h = n == 0 ? 0.0 : sum_h / static_cast<double>(n);
        row.cesaro_kl = n == 0 ? 0.0 : sum_kl / static_cast<double>(n);
        if (restricted.empty()) {
            row.log_L = neg_inf;
            row.set_mass = 0.0;
            row.martingale_m = nan;
        } else {
            row.log_L = restricted[n].log_L;
            row.set_mass = restricted[n].posterior_set_mass;
            row.martingale_m = restricted[n].martingale_M;
        }
        sum_h += row.dist_h;
        sum_kl += row.dist_kl;
        result.rows.push_back(row);
    };

    push_row(0, nan);
    for (std::size_t i = 0; i < result.data.size(); ++i) {
        const double x = result.data[i];
        const double fx = truth.density(x);
        if (!(fx > 0.0))
            throw numerical_error("run_consistency: observation outside truth support");
        post.observe(x);
        cum_log_truth += std::log(fx);
        push_row(i + 1, x);
    }

    const std::size_t horizon = result.data.size();
    const std::size_t back_start = std::max<std::size_t>(1, horizon / 6);
    std::vector<double> xs, ys;
    for (std::size_t n = back_start; n <= horizon; ++n) {
        const double mass = result.rows[n].set_mass;
        if (mass > 0.0) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(mass));
        }
    }
    if (xs.size() >= 2) result.mass_trend = fit_line(xs, ys);
    return result;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

/** Shortest exact decimal for doubles; NaN and infinities spelled out. */
inline std::string format_g17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kConsistencyColumns =
    "n,x,log_restricted_ratio,log_marginal_ratio,set_mass,hellinger_h,hellinger_big,"
    "kl,cesaro_h,cesaro_kl,martingale";

/** Versioned CSV with a schema comment, a header row, and %.17g payloads. */
inline std::string consistency_csv(const ConsistencyResult& result) {
    const auto& c = result.config;
    std::string out = "# ";
    out += kTraceSchemaVersion;
    out += " scenario=" + c.scenario + " truth=" + c.truth +
           " epsilon=" + format_g17(c.epsilon) + " transform=" + c.transform +
           " seed=" + std::to_string(c.seed) + " n=" + std::to_string(c.n) + "\n";
    out += kConsistencyColumns;
    out += "\n";
    for (const auto& row : result.rows) {
        out += std::to_string(row.n);
        const double cols[] = {row.x,        row.log_L,    row.log_I,     row.set_mass,
                               row.dist_h,   row.dist_big_h, row.dist_kl, row.cesaro_h,
                               row.cesaro_kl, row.martingale_m};
        for (double v : cols) {
            out += ',';
            out += format_g17(v);
        }
        out += '\n';
    }
    return out;
}

/** JSON mirror of the trace (non-finite values serialize as null). */
inline Json consistency_json(const ConsistencyResult& result) {
    Json rows = Json::array();
    for (const auto& row : result.rows)
        rows.push_back(Json{{"n", row.n}, {"x", row.x}, {"log_restricted_ratio", row.log_L},
                            {"log_marginal_ratio", row.log_I}, {"set_mass", row.set_mass},
                            {"hellinger_h", row.dist_h}, {"hellinger_big", row.dist_big_h},
                            {"kl", row.dist_kl}, {"cesaro_h", row.cesaro_h},
                            {"cesaro_kl", row.cesaro_kl}, {"martingale", row.martingale_m}});
    return Json{{"schema_version", kTraceSchemaVersion},
                {"config", config_echo(result.config)},
                {"restricted_set", result.set},
                {"mass_trend", Json{{"slope", result.mass_trend.slope},
                                    {"intercept", result.mass_trend.intercept},
                                    {"r_squared", result.mass_trend.r_squared}}},
                {"rows", rows}};
}

/** Parse a consistency CSV produced by consistency_csv. */
inline std::vector<ConsistencyRow> parse_consistency_csv(const std::string& text) {
    std::vector<ConsistencyRow> rows;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {  // column-name row
            if (line != kConsistencyColumns)
                throw config_error("trace file has an unexpected column header");
            saw_header = true;
            continue;
        }
        std::vector<double> fields;
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? comma : comma - start);
            fields.push_back(std::strtod(cell.c_str(), nullptr));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 11)
            throw config_error("trace row has " + std::to_string(fields.size()) +
                               " fields, expected 11");
        ConsistencyRow row;
        row.n = static_cast<std::size_t>(fields[0]);
        row.x = fields[1];
        row.log_L = fields[2];
        row.log_I = fields[3];
        row.set_mass = fields[4];
        row.dist_h = fields[5];
        row.dist_big_h = fields[6];
        row.dist_kl = fields[7];
        row.cesaro_h = fields[8];
        row.cesaro_kl = fields[9];
        row.martingale_m = fields[10];
        rows.push_back(row);
    }
    if (!saw_header) throw config_error("trace file has no column header");
    return rows;
}

namespace detail {

inline bool replay_close(double got, double want, double tol) {
    if (std::isnan(want)) return std::isnan(got);
    if (std::isinf(want)) return got == want;
    return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

}  // namespace detail

/**
 * Replay verification: rebuilds the full trace from the config plus the
 * observation column of the loaded rows and checks every derived column,
 * so each row is certified re-derivable from its predecessor and the data
 * point.  Throws numerical_error naming the first mismatching row/column.
 */
inline void verify_consistency_replay(const ExperimentConfig& config,
                                      const std::vector<ConsistencyRow>& rows,
                                      double tol = 1e-9) {
    if (rows.empty()) throw config_error("verify_consistency_replay: no rows");
    std::vector<double> stored;
    for (std::size_t i = 1; i < rows.size(); ++i) stored.push_back(rows[i].x);
    const TruthSpec truth = make_truth(config.truth);
    const DiscretePrior prior = discrete_prior_from_config(config.prior);
    const AtomSet set = hellinger_complement(prior, truth.density, config.epsilon);
    std::vector<TraceRow> restricted;
    if (!set.indices.empty()) {
        const MartingaleInputs inputs{prior,
                                      truth.density,
                                      set.indices,
                                      parse_transform(config.transform),
                                      QuadratureRule{},
                                      truth_sampler(truth)};
        restricted = build_trace(inputs, stored);
    }
    auto post = DiscretePosterior::from_prior(prior);
    double cum_log_truth = 0.0, sum_h = 0.0, sum_kl = 0.0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (n > 0) {
            const double x = rows[n].x;
            const double fx = truth.density(x);
            if (!(fx > 0.0))
                throw numerical_error("replay: stored observation outside truth support");
            post.observe(x);
            cum_log_truth += std::log(fx);
        }
        const SupportedDensity predictive = post.predictive();
        const double dist_h = hellinger_h(truth.density, predictive);
        const double dist_kl = kl_divergence(truth.density, predictive);
        const double cesaro_h = n == 0 ? 0.0 : sum_h / static_cast<double>(n);
        const double cesaro_kl = n == 0 ? 0.0 : sum_kl / static_cast<double>(n);
        sum_h += dist_h;
        sum_kl += dist_kl;
        struct Check {
            const char* column;
            double got, want;
        };
        const double log_I = post.log_marginal() - cum_log_truth;
        const bool empty = set.indices.empty();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const Check checks[] = {
            {"log_restricted_ratio", rows[n].log_L,
             empty ? -std::numeric_limits<double>::infinity() : restricted[n].log_L},
            {"log_marginal_ratio", rows[n].log_I, log_I},
            {"set_mass", rows[n].set_mass,
             empty ? 0.0 : restricted[n].posterior_set_mass},
            {"hellinger_h", rows[n].dist_h, dist_h},
            {"hellinger_big", rows[n].dist_big_h, std::sqrt(2.0 * dist_h)},
            {"kl", rows[n].dist_kl, dist_kl},
            {"cesaro_h", rows[n].cesaro_h, cesaro_h},
            {"cesaro_kl", rows[n].cesaro_kl, cesaro_kl},
            {"martingale", rows[n].martingale_m,
             empty ? nan : restricted[n].martingale_M},
        };
        for (const auto& check : checks)
            if (!detail::replay_close(check.got, check.want, tol))
                throw numerical_error("replay mismatch in column '" +
                                      std::string(check.column) + "' at row " +
                                      std::to_string(n) + ": file has " +
                                      format_g17(check.got) + ", replay gives " +
                                      format_g17(check.want));
    }
}

// ---------------------------------------------------------------------------
// Summability reports
// ---------------------------------------------------------------------------

namespace detail {

inline void fill_report(Json& rep, const SummabilityReport& sr) {
    rep["verdict"] = to_string(sr.verdict);
    rep["partial_sum"] = sr.partial_sum;
    rep["certificate"] = sr.certificate;
    if (sr.tail_bound) rep["tail_bound"] = *sr.tail_bound;
    if (sr.verdict == Verdict::summable) rep["total_bound"] = sr.value;
}

inline void fill_report(Json& rep, const CoverReport& cr) {
    rep["verdict"] = to_string(cr.verdict);
    rep["partial_sum"] = cr.partial_sum;
    rep["certificate"] = cr.certificate;
    rep["cells_evaluated"] = cr.cells_evaluated;
    if (cr.tail_bound) rep["tail_bound"] = *cr.tail_bound;
    if (cr.total_bound) rep["total_bound"] = *cr.total_bound;
    if (cr.log10_total_bound) rep["log10_total_bound"] = *cr.log10_total_bound;
    if (!std::isnan(cr.psi)) rep["psi"] = cr.psi;
    if (cr.order_m > 0) rep["order"] = cr.order_m;
}

}  // namespace detail

/**
 * Evaluate the root-mass series named by the prior spec and report the
 * verdict with its certificate.  Prior kinds: discrete-finite,
 * discrete-geometric, discrete-power, polya-power (optional explicit
 * "rate"), polya-geometric, gaussian-product, mixture-gaussian,
 * mixture-geometric.
 */
inline Json summability_report(const ExperimentConfig& config) {
    const std::string kind = detail::prior_kind(config.prior);
    const Json& p = config.prior;
    Json rep{{"schema_version", kReportSchemaVersion},
             {"scenario", "summability"},
             {"prior", p},
             {"seed", config.seed}};
    if (kind == "discrete-finite") {
        if (!p.contains("weights") || !p.at("weights").is_array() || p.at("weights").empty())
            throw config_error("prior field 'weights' must be a nonempty array");
        std::vector<double> w;
        for (const auto& v : p.at("weights")) {
            if (!v.is_number()) throw config_error("prior weights must be numbers");
            w.push_back(v.get<double>());
        }
        detail::fill_report(rep, sqrt_mass_sum(WeightSequence::finite(std::move(w))));
    } else if (kind == "discrete-geometric") {
        detail::fill_report(
            rep, sqrt_mass_sum(WeightSequence::geometric(detail::prior_number(p, "ratio"))));
    } else if (kind == "discrete-power") {
        detail::fill_report(rep, sqrt_mass_sum(WeightSequence::power_law(
                                     detail::prior_number(p, "exponent"))));
    } else if (kind == "polya-power") {
        const double exponent = detail::prior_number(p, "exponent");
        const int levels = detail::prior_int(p, "levels");
        const PolyaThetaCover cover =
            p.contains("rate")
                ? PolyaThetaCover::power_params_with_rate(
                      exponent, detail::prior_number(p, "rate"), levels)
                : PolyaThetaCover::power_params(exponent, levels);
        detail::fill_report(rep, polya_cover_sum(cover));
        rep["rate"] = cover.delta_rate();
    } else if (kind == "polya-geometric") {
        const PolyaThetaCover cover = PolyaThetaCover::geometric_params(
            detail::prior_number(p, "base"), detail::prior_int(p, "levels"));
        detail::fill_report(rep, polya_cover_sum(cover));
    } else if (kind == "gaussian-product") {
        const PowerSchedule sds{detail::prior_number(p, "sd_scale"),
                                detail::prior_number(p, "sd_exponent")};
        const GaussianCoordCover cover = GaussianCoordCover::make(
            detail::prior_number(p, "delta"), sds,
            detail::prior_number(p, "gamma_exponent"), detail::prior_int_or(p, "order", 0),
            detail::prior_int_or(p, "truncation", 40));
        detail::fill_report(rep, expfam_cover_sum(cover));
    } else if (kind == "mixture-gaussian" || kind == "mixture-geometric") {
        MixtureTailCover cover =
            kind == "mixture-gaussian"
                ? MixtureTailCover::gaussian_weights(detail::prior_number(p, "count_base"),
                                                     detail::prior_number(p, "delta"))
                : MixtureTailCover::geometric_weights(detail::prior_number(p, "ratio"),
                                                      detail::prior_number(p, "count_base"),
                                                      detail::prior_number(p, "delta"));
        if (p.contains("cap"))
            cover.set_count_cap(static_cast<std::size_t>(detail::prior_int(p, "cap")));
        detail::fill_report(rep, mixture_tail_sum(cover));
    } else {
        throw config_error(
            "prior kind '" + kind +
            "' is not a summability family (discrete-finite, discrete-geometric, "
            "discrete-power, polya-power, polya-geometric, gaussian-product, "
            "mixture-gaussian, mixture-geometric)");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Martingale ensembles
// ---------------------------------------------------------------------------

/** Ensemble summary over replicated compensated-sum traces. */
struct MartingaleEnsembleResult {
    ExperimentConfig config;
    std::vector<std::size_t> set;
    std::size_t horizon = 0;
    std::size_t replicates = 0;
    std::vector<double> slopes;      ///< per-replicate OLS slope of log_L on the back half
    double slope_mean = 0.0;
    double slope_se = 0.0;
    double predicted_slope = 0.0;    ///< minus the mean terminal compensator
    double terminal_m_over_n_mean = 0.0;
    double terminal_m_over_n_se = 0.0;
    double terminal_abs_log_i_over_n_mean = 0.0;
    std::vector<double> mean_log_L;        ///< per step, averaged over replicates
    std::vector<double> mean_log_I;
    std::vector<double> mean_set_mass;
    std::vector<double> cesaro_h_mean;     ///< entry n-1: running mean at step n
    std::vector<double> cesaro_kl_mean;
    std::vector<double> variance_partial;  ///< entry n-1: sum_{j<=n} Var_j / j^2
    Verdict variance_verdict = Verdict::inconclusive;
    double variance_series_bound = std::numeric_limits<double>::quiet_NaN();
    std::string variance_certificate;
};

/**
 * Replicated martingale diagnostics: builds `replicates` independent traces
 * (replicate r reads substream(seed, r)), concurrently but reduced in
 * replicate order, and summarizes the fitted drift of the restricted log
 * ratio, the terminal compensated sum, the n^{-2}-weighted variance series,
 * and Cesaro sequences.  Needs at least 30 replicates so the ensemble
 * variances mean something.
 */
inline MartingaleEnsembleResult run_martingale(const ExperimentConfig& config) {
    if (config.replicates < 30)
        throw config_error(
            "martingale scenario needs at least 30 replicates for variance estimation");
    MartingaleEnsembleResult result;
    result.config = config;
    const TruthSpec truth = make_truth(config.truth);
    const DiscretePrior prior = discrete_prior_from_config(config.prior);
    if (config.set == "whole") {
        for (std::size_t i = 0; i < prior.size(); ++i) result.set.push_back(i);
    } else {
        result.set = hellinger_complement(prior, truth.density, config.epsilon).indices;
        if (result.set.empty())
            throw config_error("epsilon " + format_g17(config.epsilon) +
                               " leaves the restricted set empty; no atom is that far "
                               "from the truth");
    }

    const MartingaleInputs inputs{prior,
                                  truth.density,
                                  result.set,
                                  parse_transform(config.transform),
                                  QuadratureRule{},
                                  truth_sampler(truth)};

    const std::size_t horizon = static_cast<std::size_t>(config.n);
    const std::size_t replicates = static_cast<std::size_t>(config.replicates);
    result.horizon = horizon;
    result.replicates = replicates;

    std::fprintf(stderr, "martingale: running %zu replicates of horizon %zu\n",
                 replicates, horizon);
    std::vector<std::vector<TraceRow>> traces(replicates);
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                       std::min<std::size_t>(replicates, 8)));
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t r = w; r < replicates; r += workers) {
                auto rng = substream(config.seed, r);
                const std::vector<double> data = generate_data(truth, horizon, rng);
                traces[r] = build_trace(inputs, data);
            }
        }));
    for (auto& f : futures) f.get();
    std::fprintf(stderr, "martingale: replicates complete\n");

    // Reduce in replicate order.
    const std::size_t fit_start = std::max<std::size_t>(1, horizon / 2);
    std::vector<double> m_over_n, abs_log_i_over_n, terminal_comp;
    result.mean_log_L.assign(horizon + 1, 0.0);
    result.mean_log_I.assign(horizon + 1, 0.0);
    result.mean_set_mass.assign(horizon + 1, 0.0);
    result.cesaro_h_mean.assign(horizon, 0.0);
    result.cesaro_kl_mean.assign(horizon, 0.0);
    std::vector<std::vector<double>> comp_terms(horizon, std::vector<double>());
    for (auto& v : comp_terms) v.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        const auto& trace = traces[r];
        std::vector<double> xs, ys;
        for (std::size_t n = fit_start; n <= horizon; ++n) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(trace[n].log_L);
        }
        result.slopes.push_back(fit_line(xs, ys).slope);
        const double n_d = static_cast<double>(horizon);
        m_over_n.push_back(trace[horizon].martingale_M / n_d);
        abs_log_i_over_n.push_back(std::abs(trace[horizon].log_I) / n_d);
        terminal_comp.push_back(trace[horizon].compensator);
        const CesaroReport cesaro = cesaro_diagnostics(trace);
        for (std::size_t n = 1; n <= horizon; ++n) {
            result.mean_log_L[n] += trace[n].log_L;
            result.mean_log_I[n] += trace[n].log_I;
            result.mean_set_mass[n] += trace[n].posterior_set_mass;
            result.cesaro_h_mean[n - 1] += cesaro.prefix_mean_h[n - 1];
            result.cesaro_kl_mean[n - 1] += cesaro.prefix_mean_kl[n - 1];
            comp_terms[n - 1].push_back(trace[n].t_increment + trace[n].compensator);
        }
        result.mean_set_mass[0] += trace[0].posterior_set_mass;
        result.mean_log_L[0] += trace[0].log_L;
    }
    const double r_d = static_cast<double>(replicates);
    for (auto& v : result.mean_log_L) v /= r_d;
    for (auto& v : result.mean_log_I) v /= r_d;
    for (auto& v : result.mean_set_mass) v /= r_d;
    for (auto& v : result.cesaro_h_mean) v /= r_d;
    for (auto& v : result.cesaro_kl_mean) v /= r_d;

    const MeanVar slope_mv = mean_and_variance(result.slopes);
    result.slope_mean = slope_mv.mean;
    result.slope_se = slope_mv.std_error();
    const MeanVar m_mv = mean_and_variance(m_over_n);
    result.terminal_m_over_n_mean = m_mv.mean;
    result.terminal_m_over_n_se = m_mv.std_error();
    result.terminal_abs_log_i_over_n_mean = mean_and_variance(abs_log_i_over_n).mean;
    result.predicted_slope = -mean_and_variance(terminal_comp).mean;

    result.variance_partial.assign(horizon, 0.0);
    double running = 0.0;
    for (std::size_t n = 1; n <= horizon; ++n) {
        const MeanVar step = mean_and_variance(comp_terms[n - 1]);
        running += step.variance / (static_cast<double>(n) * static_cast<double>(n));
        result.variance_partial[n - 1] = running;
    }
    if (inputs.kind == TransformKind::sqrt_minus_one) {
        result.variance_verdict = Verdict::summable;
        result.variance_series_bound = 1.6449340668482264;  // pi^2 / 6
        result.variance_certificate =
            "sqrt transform: each compensated term has conditional variance at most 1, "
            "so the n^{-2}-weighted variance series is bounded by pi^2/6";
    } else {
        result.variance_verdict = Verdict::inconclusive;
        result.variance_certificate =
            "no analytic variance bound for this transform without a ratio bound; "
            "ensemble partial sums are reported for inspection";
    }
    return result;
}

/** JSON report for a martingale ensemble. */
inline Json martingale_json(const MartingaleEnsembleResult& result) {
    return Json{
        {"schema_version", kReportSchemaVersion},
        {"scenario", "martingale"},
        {"config", config_echo(result.config)},
        {"restricted_set", result.set},
        {"horizon", result.horizon},
        {"replicates", result.replicates},
        {"slope", Json{{"mean", result.slope_mean},
                       {"se", result.slope_se},
                       {"predicted", result.predicted_slope},
                       {"per_replicate", result.slopes}}},
        {"terminal", Json{{"m_over_n_mean", result.terminal_m_over_n_mean},
                          {"m_over_n_se", result.terminal_m_over_n_se},
                          {"abs_log_i_over_n_mean", result.terminal_abs_log_i_over_n_mean}}},
        {"variance", Json{{"verdict", to_string(result.variance_verdict)},
                          {"series_bound", result.variance_series_bound},
                          {"certificate", result.variance_certificate},
                          {"partial_sums", result.variance_partial}}},
        {"cesaro", Json{{"h", result.cesaro_h_mean}, {"kl", result.cesaro_kl_mean}}}};
}

/** Per-step ensemble means as a versioned CSV. */
inline std::string martingale_csv(const MartingaleEnsembleResult& result) {
    const auto& c = result.config;
    std::string out = "# ";
    out += kEnsembleSchemaVersion;
    out += " scenario=martingale truth=" + c.truth + " transform=" + c.transform +
           " set=" + c.set + " seed=" + std::to_string(c.seed) +
           " n=" + std::to_string(c.n) + " replicates=" + std::to_string(c.replicates) +
           "\n";
    out += "n,mean_log_restricted_ratio,mean_log_marginal_ratio,mean_set_mass,cesaro_h,"
           "cesaro_kl,variance_partial\n";
    for (std::size_t n = 0; n <= result.horizon; ++n) {
        out += std::to_string(n);
        out += ',' + format_g17(result.mean_log_L[n]);
        out += ',' + format_g17(result.mean_log_I[n]);
        out += ',' + format_g17(result.mean_set_mass[n]);
        out += ',' + format_g17(n == 0 ? 0.0 : result.cesaro_h_mean[n - 1]);
        out += ',' + format_g17(n == 0 ? 0.0 : result.cesaro_kl_mean[n - 1]);
        out += ',' + format_g17(n == 0 ? 0.0 : result.variance_partial[n - 1]);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chi-squared criterion scenario
// ---------------------------------------------------------------------------

/** Monte Carlo check of the predictive chi-squared bound for histogram priors. */
inline Json chi_sq_report(const ExperimentConfig& config) {
    const TruthSpec truth = make_truth(config.truth);
    const RandomHistogramPrior prior = histogram_prior_from_config(config.prior);
    const ChiSqCriterionReport rep = chi_sq_criterion(
        prior, truth_sampler(truth), truth.squared_antiderivative, truth.sup,
        static_cast<std::size_t>(config.n), static_cast<std::size_t>(config.replicates),
        config.seed);
    return Json{{"schema_version", kReportSchemaVersion},
                {"scenario", "chi-sq-criterion"},
                {"config", config_echo(config)},
                {"empirical_mean", rep.empirical_mean},
                {"std_error", rep.std_error},
                {"analytic_bound", rep.analytic_bound},
                {"mean_condition_met", rep.mean_condition_met},
                {"satisfied", rep.satisfied}};
}

// ---------------------------------------------------------------------------
// Output files and the CLI
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write output file '" + path + "'");
    out << text;
    if (!out) throw config_error("failed while writing output file '" + path + "'");
}

inline std::string json_text(const Json& doc) { return doc.dump(2) + "\n"; }

namespace detail {

inline std::string output_path(const ExperimentConfig& config, const char* extension) {
    std::filesystem::create_directories(config.out_dir);
    return (std::filesystem::path(config.out_dir) / (config.scenario + extension)).string();
}

}  // namespace detail

/**
 * Run the scenario named by the config and write its outputs under
 * config.out_dir (file name = scenario + extension).  Returns the list of
 * files written, in writing order.
 */
inline std::vector<std::string> run_scenario_files(const ExperimentConfig& config) {
    std::vector<std::string> written;
    if (config.scenario == "consistency" || config.scenario == "predictive") {
        const ConsistencyResult result = run_consistency(config);
        if (config.format == "csv") {
            const std::string path = detail::output_path(config, ".csv");
            write_text_file(path, consistency_csv(result));
            written.push_back(path);
        } else {
            const std::string path = detail::output_path(config, ".json");
            write_text_file(path, json_text(consistency_json(result)));
            written.push_back(path);
        }
    } else if (config.scenario == "summability") {
        const std::string path = detail::output_path(config, ".json");
        write_text_file(path, json_text(summability_report(config)));
        written.push_back(path);
    } else if (config.scenario == "martingale") {
        const MartingaleEnsembleResult result = run_martingale(config);
        const std::string report_path = detail::output_path(config, ".json");
        write_text_file(report_path, json_text(martingale_json(result)));
        written.push_back(report_path);
        if (config.format == "csv") {
            const std::string csv_path = detail::output_path(config, ".csv");
            write_text_file(csv_path, martingale_csv(result));
            written.push_back(csv_path);
        }
    } else if (config.scenario == "chi-sq-criterion") {
        const std::string path = detail::output_path(config, ".json");
        write_text_file(path, json_text(chi_sq_report(config)));
        written.push_back(path);
    } else {
        throw config_error("unknown scenario '" + config.scenario + "'");
    }
    return written;
}

/** Divergence between two menu densities under a named metric. */
inline double named_divergence(const std::string& f_name, const std::string& g_name,
                               const std::string& metric) {
    const TruthSpec f = make_truth(f_name);
    const TruthSpec g = make_truth(g_name);
    if (metric == "hellinger-h") return hellinger_h(f.density, g.density);
    if (metric == "hellinger") return hellinger_big_h(f.density, g.density);
    if (metric == "kl") return kl_divergence(f.density, g.density);
    if (metric == "chi2") return chi_squared(f.density, g.density);
    throw config_error("unknown metric '" + metric +
                       "'; choices are: hellinger-h, hellinger, kl, chi2");
}

inline const char* kScenarioForSubcommand(const std::string& sub) {
    if (sub == "summability") return "summability";
    if (sub == "martingale") return "martingale";
    return nullptr;  // simulate accepts several scenarios
}

}  // namespace bnc

#include <CLI11.hpp>

namespace bnc {

/**
 * Command-line driver.  `args` are the program arguments without argv[0].
 * Subcommands: simulate, summability, martingale (each takes --config plus
 * optional --seed/--out/--format overrides) and divergence (--f, --g,
 * --metric; prints the value with six decimals).  Exit codes: 0 success,
 * 2 configuration/usage error, 3 numerical failure.
 */
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"numerical laboratory for posterior-consistency diagnostics"};
    app.name("bnclab");
    app.require_subcommand(1);

    std::string config_path, out_override, format_override;
    std::optional<std::uint64_t> seed_override;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "path to a JSON experiment config")
            ->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_override, "override the config output directory");
        sub->add_option("--format", format_override, "override the output format")
            ->check(CLI::IsMember({"csv", "json"}));
    };
    CLI::App* simulate = app.add_subcommand(
        "simulate", "run a posterior trace or criterion scenario and write its outputs");
    add_common(simulate);
    CLI::App* summability = app.add_subcommand(
        "summability", "evaluate a root-mass covering series and write the verdict report");
    add_common(summability);
    CLI::App* martingale = app.add_subcommand(
        "martingale", "run replicated compensated-sum diagnostics and write the report");
    add_common(martingale);

    CLI::App* divergence =
        app.add_subcommand("divergence", "print a divergence between two menu densities");
    std::string f_name, g_name, metric;
    divergence->add_option("--f", f_name, "first density (the reference)")->required();
    divergence->add_option("--g", g_name, "second density")->required();
    divergence->add_option("--metric", metric, "hellinger-h | hellinger | kl | chi2")
        ->required();

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (divergence->parsed()) {
            std::printf("%.6f\n", named_divergence(f_name, g_name, metric));
            return 0;
        }
        ExperimentConfig config = load_config(config_path);
        if (seed_override) config.seed = *seed_override;
        if (!out_override.empty()) config.out_dir = out_override;
        if (!format_override.empty()) config.format = format_override;

        const std::string sub = app.get_subcommands().front()->get_name();
        if (const char* expect = kScenarioForSubcommand(sub)) {
            if (config.scenario != expect)
                throw config_error("config scenario '" + config.scenario +
                                   "' does not match subcommand '" + sub + "'");
        } else if (config.scenario != "consistency" && config.scenario != "predictive" &&
                   config.scenario != "chi-sq-criterion") {
            throw config_error("config scenario '" + config.scenario +
                               "' belongs to the '" + config.scenario +
                               "' subcommand, not 'simulate'");
        }
        for (const auto& path : run_scenario_files(config))
            std::printf("wrote %s\n", path.c_str());
        return 0;
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}

}  // namespace bnc
