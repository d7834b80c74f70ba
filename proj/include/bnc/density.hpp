#pragma once

/**
 * @file density.hpp
 * @brief Probability densities on an interval and divergence functionals.
 *
 * SupportedDensity is an immutable value type: a support interval plus a
 * positive evaluator, and optionally a list of interior breakpoints where the
 * evaluator is allowed to jump (step densities and their mixtures).  The
 * checked constructor verifies normalization by quadrature; the `unchecked`
 * tag constructor is for densities whose normalization is algebraic (step
 * densities, convex mixtures of already checked densities).
 *
 * Divergences between densities f0 (reference/truth) and f (candidate):
 *
 *   hellinger_h(f, g)     = 1 − ∫ √(f·g)           ∈ [0, 1]
 *   hellinger_big_h(f, g) = √(2·h)                  = {∫(√f−√g)²}^{1/2}
 *   kl_divergence(f0, f)  = ∫ f0 · log(f0/f)        ∈ [0, +∞]
 *   chi_squared(f0, f)    = ∫ f0²/f − 1             ∈ [0, +∞]
 *
 * Quadrature runs piecewise over the partition induced by both densities'
 * breakpoints, so jumps never degrade accuracy.  KL and χ² can genuinely
 * diverge: a zero of f against f0-mass reports +∞ immediately, and softer
 * blow-ups (e.g. ∫ 1/(2x)) are caught per piece by an escalating panel
 * refinement — when estimates keep drifting while the largest node value
 * keeps growing, the piece is classified +∞.  Finite results beyond the 1e12
 * clamp are also reported as +∞.  The sentinel is always +inf, never NaN.
 *
 * Step densities (piecewise constant on a finite edge grid) additionally get
 * exact divergence overloads via the merged refinement of the two grids.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bnc/core.hpp"
#include "bnc/quadrature.hpp"

namespace bnc {

inline constexpr double normalization_tolerance = 1e-6;

class SupportedDensity {
  public:
    struct unchecked_t {
        explicit unchecked_t() = default;
    };
    static constexpr unchecked_t unchecked{};

    /** Checked: verifies ∫ pdf = 1 over the support by quadrature. */
    SupportedDensity(Interval support, std::function<double(double)> pdf, std::string label = {},
                     const QuadratureRule& rule = QuadratureRule{},
                     double norm_tol = normalization_tolerance,
                     std::vector<double> interior_breakpoints = {})
        : support_(support),
          pdf_(std::move(pdf)),
          label_(std::move(label)),
          breakpoints_(std::move(interior_breakpoints)) {
        normalize_breakpoints();
        double mass = 0.0;
        double lo = support_.lo;
        for (double cut : breakpoints_) {
            mass += integrate([this](double x) { return (*this)(x); }, Interval{lo, cut}, rule);
            lo = cut;
        }
        mass += integrate([this](double x) { return (*this)(x); }, Interval{lo, support_.hi}, rule);
        if (std::abs(mass - 1.0) > norm_tol) {
            throw numerical_error("density '" + label_ + "' fails normalization: integral = " +
                                  std::to_string(mass));
        }
    }

    /** Unchecked: caller guarantees normalization (algebraic constructions). */
    SupportedDensity(unchecked_t, Interval support, std::function<double(double)> pdf,
                     std::string label = {}, std::vector<double> interior_breakpoints = {})
        : support_(support),
          pdf_(std::move(pdf)),
          label_(std::move(label)),
          breakpoints_(std::move(interior_breakpoints)) {
        normalize_breakpoints();
    }

    /** Evaluate; 0 outside the support, 0 at or below the positivity floor. */
    double operator()(double x) const {
        if (!support_.contains(x)) return 0.0;
        const double v = pdf_(x);
        return v > positivity_floor_ ? v : 0.0;
    }

    const Interval& support() const { return support_; }
    const std::string& label() const { return label_; }
    double positivity_floor() const { return positivity_floor_; }
    void set_positivity_floor(double floor) { positivity_floor_ = floor; }

    /** Interior points where the evaluator may jump; sorted, strictly inside. */
    const std::vector<double>& interior_breakpoints() const { return breakpoints_; }

  private:
    void normalize_breakpoints() {
        std::sort(breakpoints_.begin(), breakpoints_.end());
        breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()),
                           breakpoints_.end());
        std::erase_if(breakpoints_,
                      [this](double b) { return b <= support_.lo || b >= support_.hi; });
    }

    Interval support_;
    std::function<double(double)> pdf_;
    std::string label_;
    std::vector<double> breakpoints_;
    double positivity_floor_ = 0.0;
};

/** Piecewise-constant density on a finite increasing edge grid. */
struct StepDensity {
    std::vector<double> edges;    ///< size B+1, strictly increasing
    std::vector<double> heights;  ///< size B, nonnegative

    bool valid() const {
        if (edges.size() != heights.size() + 1 || heights.empty()) return false;
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            if (!(edges[i] < edges[i + 1])) return false;
        for (double h : heights)
            if (h < 0.0 || !std::isfinite(h)) return false;
        return true;
    }

    double mass() const {
        double m = 0.0;
        for (std::size_t i = 0; i < heights.size(); ++i)
            m += heights[i] * (edges[i + 1] - edges[i]);
        return m;
    }

    Interval support() const { return {edges.front(), edges.back()}; }

    double operator()(double x) const {
        if (x < edges.front() || x > edges.back()) return 0.0;
        // Right-open cells except the last, which is closed.
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::size_t idx = static_cast<std::size_t>(std::distance(edges.begin(), it));
        if (idx == 0) return heights.front();
        if (idx >= edges.size()) return heights.back();
        return heights[idx - 1];
    }

    /** Wrap as a SupportedDensity carrying the edges as breakpoints. */
    SupportedDensity as_density(std::string label = {}) const {
        if (!valid()) throw std::invalid_argument("StepDensity: invalid edges/heights");
        if (std::abs(mass() - 1.0) > 1e-9)
            throw numerical_error("StepDensity '" + label + "' has mass " + std::to_string(mass()));
        auto self = std::make_shared<StepDensity>(*this);
        std::vector<double> cuts(edges.begin() + 1, edges.end() - 1);
        return SupportedDensity(SupportedDensity::unchecked, self->support(),
                                [self](double x) { return (*self)(x); }, std::move(label),
                                std::move(cuts));
    }
};

namespace detail {

/** Elementary interval of the merged refinement of two step grids. */
struct MergedCell {
    double lo, hi, a, b;
};

inline std::vector<MergedCell> merge_step_grids(const StepDensity& a, const StepDensity& b) {
    if (!a.valid() || !b.valid())
        throw std::invalid_argument("step divergence: invalid step density");
    std::vector<double> cuts;
    cuts.reserve(a.edges.size() + b.edges.size());
    cuts.insert(cuts.end(), a.edges.begin(), a.edges.end());
    cuts.insert(cuts.end(), b.edges.begin(), b.edges.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<MergedCell> cells;
    cells.reserve(cuts.size());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        const double mid = 0.5 * (lo + hi);
        cells.push_back({lo, hi, a(mid), b(mid)});
    }
    return cells;
}

/** Smoothness pieces for a pair of densities: hull cut at every breakpoint. */
inline std::vector<Interval> divergence_pieces(const SupportedDensity& a,
                                               const SupportedDensity& b) {
    const Interval hull{std::min(a.support().lo, b.support().lo),
                        std::max(a.support().hi, b.support().hi)};
    std::vector<double> cuts;
    auto add_cut = [&](double c) {
        if (c > hull.lo && c < hull.hi) cuts.push_back(c);
    };
    for (double c : a.interior_breakpoints()) add_cut(c);
    for (double c : b.interior_breakpoints()) add_cut(c);
    // A narrower support's edge is a jump of that density inside the hull.
    add_cut(a.support().lo);
    add_cut(a.support().hi);
    add_cut(b.support().lo);
    add_cut(b.support().hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Interval> pieces;
    pieces.reserve(cuts.size() + 1);
    double lo = hull.lo;
    for (double c : cuts) {
        if (c - lo > 1e-13) {
            pieces.push_back({lo, c});
            lo = c;
        }
    }
    pieces.push_back({lo, hull.hi});
    return pieces;
}

inline int panels_for_piece(const QuadratureRule& rule, double piece_width, double hull_width) {
    const double share = piece_width / hull_width;
    const int panels = static_cast<int>(
        std::llround(static_cast<double>(std::max(rule.panels, 8)) * share));
    return std::clamp(panels, 8, std::max(rule.panels, 8));
}

/** Piecewise quadrature for bounded integrands (no divergence logic). */
template <class F>
double piecewise_integrate(F&& f, const std::vector<Interval>& pieces,
                           const QuadratureRule& rule) {
    double hull_width = 0.0;
    for (const auto& p : pieces) hull_width += p.width();
    double total = 0.0;
    for (const auto& p : pieces) {
        QuadratureRule local = rule;
        local.panels = panels_for_piece(rule, p.width(), hull_width);
        total += integrate(f, p, local);
    }
    return total;
}

struct RatioIntegralResult {
    double value = 0.0;
    bool infinite = false;
};

/**
 * Piecewise integral of a ratio-type integrand that may diverge.  The
 * integrand reports a hard zero-denominator through the shared flag; softer
 * blow-ups are detected per piece by refusing to stabilize under panel
 * doubling while the peak node value keeps growing.
 */
template <class MakeIntegrand>
RatioIntegralResult piecewise_ratio_integral(MakeIntegrand&& make_integrand,
                                             const std::vector<Interval>& pieces,
                                             const QuadratureRule& rule) {
    bool diverged = false;
    auto integrand = make_integrand(diverged);
    double hull_width = 0.0;
    for (const auto& p : pieces) hull_width += p.width();
    const double per_piece_tol =
        std::max(rule.abs_tol / static_cast<double>(pieces.size()), 1e-14);
    double total = 0.0;
    for (const auto& p : pieces) {
        constexpr int kDoublings = 3;
        int panels = panels_for_piece(rule, p.width(), hull_width);
        PanelSweep prev{};
        bool have_prev = false;
        bool converged = false;
        bool peaks_growing = true;
        for (int level = 0; level <= kDoublings; ++level, panels *= 2) {
            PanelSweep sweep = sweep_panels(integrand, p, rule.scheme, panels);
            if (diverged) return {0.0, true};
            if (!sweep.finite) return {0.0, true};  // ±inf node: non-integrable point
            if (have_prev) {
                if (std::abs(sweep.value - prev.value) <= per_piece_tol) {
                    total += sweep.value;
                    converged = true;
                    break;
                }
                if (sweep.max_abs_integrand < 1.2 * prev.max_abs_integrand)
                    peaks_growing = false;
            }
            prev = sweep;
            have_prev = true;
        }
        if (!converged) {
            if (peaks_growing) return {0.0, true};  // classic endpoint/interior blow-up
            throw numerical_error(
                "ratio integral failed to converge without a divergence signature");
        }
        if (total > divergence_clamp) return {0.0, true};
    }
    return {total, false};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Divergences: quadrature paths
// ---------------------------------------------------------------------------

/** Hellinger divergence h(f, g) = 1 − ∫ √(f·g), clamped into [0, 1]. */
inline double hellinger_h(const SupportedDensity& f, const SupportedDensity& g,
                          const QuadratureRule& rule = QuadratureRule{}) {
    const double affinity = detail::piecewise_integrate(
        [&](double x) { return std::sqrt(f(x) * g(x)); }, detail::divergence_pieces(f, g), rule);
    return std::clamp(1.0 - affinity, 0.0, 1.0);
}

/** Hellinger metric H(f, g) = √(2·h(f, g)) = {∫ (√f − √g)²}^{1/2}. */
inline double hellinger_big_h(const SupportedDensity& f, const SupportedDensity& g,
                              const QuadratureRule& rule = QuadratureRule{}) {
    return std::sqrt(2.0 * hellinger_h(f, g, rule));
}

/** Kullback–Leibler divergence D(f0, f) = ∫ f0 log(f0/f); +∞ when f vanishes on f0 mass. */
inline double kl_divergence(const SupportedDensity& f0, const SupportedDensity& f,
                            const QuadratureRule& rule = QuadratureRule{}) {
    auto result = detail::piecewise_ratio_integral(
        [&](bool& diverged) {
            return [&f0, &f, &diverged](double x) {
                const double p = f0(x);
                if (p <= 0.0) return 0.0;  // 0·log(0/q) = 0
                const double q = f(x);
                if (q <= 0.0) {
                    diverged = true;
                    return 0.0;
                }
                return p * std::log(p / q);
            };
        },
        detail::divergence_pieces(f0, f), rule);
    if (result.infinite) return infinite_divergence;
    if (result.value > divergence_clamp) return infinite_divergence;
    if (result.value < 0.0) {
        if (result.value < -normalization_tolerance)
            throw numerical_error("kl_divergence: materially negative value; inputs are not "
                                  "normalized densities");
        return 0.0;
    }
    return result.value;
}

/** Chi-squared divergence χ²(f0, f) = ∫ f0²/f − 1; +∞ when the ratio is non-integrable. */
inline double chi_squared(const SupportedDensity& f0, const SupportedDensity& f,
                          const QuadratureRule& rule = QuadratureRule{}) {
    auto result = detail::piecewise_ratio_integral(
        [&](bool& diverged) {
            return [&f0, &f, &diverged](double x) {
                const double p = f0(x);
                if (p <= 0.0) return 0.0;
                const double q = f(x);
                if (q <= 0.0) {
                    diverged = true;
                    return 0.0;
                }
                return p * p / q;
            };
        },
        detail::divergence_pieces(f0, f), rule);
    if (result.infinite) return infinite_divergence;
    const double value = result.value - 1.0;
    if (value > divergence_clamp) return infinite_divergence;
    return std::max(value, 0.0);
}

// ---------------------------------------------------------------------------
// Divergences: exact step-density paths
// ---------------------------------------------------------------------------

inline double hellinger_h(const StepDensity& f, const StepDensity& g) {
    double affinity = 0.0;
    for (const auto& c : detail::merge_step_grids(f, g))
        affinity += (c.hi - c.lo) * std::sqrt(c.a * c.b);
    return std::clamp(1.0 - affinity, 0.0, 1.0);
}

inline double hellinger_big_h(const StepDensity& f, const StepDensity& g) {
    return std::sqrt(2.0 * hellinger_h(f, g));
}

inline double kl_divergence(const StepDensity& f0, const StepDensity& f) {
    double d = 0.0;
    for (const auto& c : detail::merge_step_grids(f0, f)) {
        if (c.a <= 0.0) continue;
        if (c.b <= 0.0) return infinite_divergence;
        d += (c.hi - c.lo) * c.a * std::log(c.a / c.b);
    }
    if (d > divergence_clamp) return infinite_divergence;
    return std::max(d, 0.0);
}

inline double chi_squared(const StepDensity& f0, const StepDensity& f) {
    double v = 0.0;
    for (const auto& c : detail::merge_step_grids(f0, f)) {
        if (c.a <= 0.0) continue;
        if (c.b <= 0.0) return infinite_divergence;
        v += (c.hi - c.lo) * c.a * c.a / c.b;
    }
    const double value = v - 1.0;
    if (value > divergence_clamp) return infinite_divergence;
    return std::max(value, 0.0);
}

}  // namespace bnc
