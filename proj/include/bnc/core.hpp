#pragma once

/**
 * @file core.hpp
 * @brief Shared vocabulary for the library: intervals, verdicts, error types,
 *        reproducible RNG streams, and small numeric helpers.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bnc {

/** Closed interval [lo, hi] on the real line. */
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

inline const Interval unit_interval{0.0, 1.0};

/** Outcome of a summability / boundedness check. */
enum class Verdict { summable, divergent, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::summable: return "summable";
        case Verdict::divergent: return "divergent";
        default: return "inconclusive";
    }
}

/** Raised when a numerical procedure cannot certify its result. */
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Raised for malformed configuration or invalid arguments at the tool level. */
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Sentinel for divergent integrals; never NaN. */
inline constexpr double infinite_divergence = std::numeric_limits<double>::infinity();

/** Values beyond this are reported as infinite_divergence. */
inline constexpr double divergence_clamp = 1e12;

// ---------------------------------------------------------------------------
// Reproducible random streams.
//
// Replicate r of an experiment draws from substream(master_seed, r), a
// counter-based derivation: the r-th substream seed is splitmix64 evaluated at
// state master_seed + (r+1)*GAMMA.  Substreams therefore do not depend on how
// many replicates run or in which order, which keeps per-replicate output
// stable when the replicate count changes.
// ---------------------------------------------------------------------------

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

using RngStream = std::mt19937_64;

inline RngStream make_stream(std::uint64_t seed) {
    return RngStream(detail::splitmix64(seed));
}

/** Independent stream for replicate `index` derived from `master_seed`. */
inline RngStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(detail::splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL));
}

// ---------------------------------------------------------------------------
// Small numeric helpers.
// ---------------------------------------------------------------------------

/** log(sum(exp(v))) with max-shift; -inf entries are allowed and ignored. */
inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;  // all -inf (or +inf present: propagate)
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

struct MeanVar {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance (0 when count < 2)

    double std_error() const {
        return count > 1 ? std::sqrt(variance / static_cast<double>(count)) : 0.0;
    }
};

/** Two-pass sample mean and unbiased variance. */
inline MeanVar mean_and_variance(std::span<const double> v) {
    MeanVar out;
    out.count = v.size();
    if (v.empty()) return out;
    double s = 0.0;
    for (double x : v) s += x;
    out.mean = s / static_cast<double>(v.size());
    if (v.size() > 1) {
        double q = 0.0;
        for (double x : v) q += (x - out.mean) * (x - out.mean);
        out.variance = q / static_cast<double>(v.size() - 1);
    }
    return out;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/** Ordinary least squares y ~ intercept + slope * x. */
inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_line: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) { sx += xs[i]; sy += ys[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_line: degenerate x values");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace bnc
