#pragma once

/**
 * @file quadrature.hpp
 * @brief Composite Gauss–Legendre panel quadrature on finite intervals.
 *
 * Two panelizations are offered:
 *
 *  - plain_panels: uniform panels straight across the interval.
 *  - clustered_panels (default): the cosine substitution
 *        x = lo + width · (1 − cos πt)/2,  t ∈ [0,1],
 *    i.e. uniform panels in t.  The Jacobian (π/2)·sin πt vanishes at both
 *    endpoints, which tames the endpoint behavior of √-type and log-type
 *    density integrands (e.g. √x becomes sin(πt/2), analytic), so density
 *    work converges far beyond the nominal panel order.
 *
 * Integrands must be finite at every node; a NaN or ±inf node raises
 * numerical_error naming the offending node.  Integrable-looking blow-ups are
 * the business of the divergence routines, which probe node growth themselves.
 */

#include <array>
#include <cmath>
#include <concepts>
#include <sstream>
#include <string>

#include "bnc/core.hpp"

namespace bnc {

enum class QuadScheme { plain_panels, clustered_panels };

struct QuadratureRule {
    QuadScheme scheme = QuadScheme::clustered_panels;
    int panels = 512;      ///< composite panels across the interval
    double abs_tol = 1e-8; ///< target absolute accuracy for convergence checks
};

namespace detail {

// 5-point Gauss–Legendre abscissae/weights on [-1, 1].
inline constexpr std::array<double, 5> gl5_nodes = {
    -0.9061798459386639928, -0.5384693101056830910, 0.0,
    0.5384693101056830910, 0.9061798459386639928};
inline constexpr std::array<double, 5> gl5_weights = {
    0.2369268850561890875, 0.4786286704993664831, 0.5688888888888888889,
    0.4786286704993664831, 0.2369268850561890875};

/** One full pass over the interval at a given panel count. */
struct PanelSweep {
    double value = 0.0;
    double max_abs_integrand = 0.0;
    bool finite = true;
    double offending_node = 0.0;
};

template <std::invocable<double> F>
PanelSweep sweep_panels(F&& f, Interval support, QuadScheme scheme, int panels) {
    PanelSweep out;
    const double width = support.width();
    const double h = 1.0 / static_cast<double>(panels);
    for (int p = 0; p < panels; ++p) {
        const double t_mid = (static_cast<double>(p) + 0.5) * h;
        for (std::size_t i = 0; i < gl5_nodes.size(); ++i) {
            const double t = t_mid + 0.5 * h * gl5_nodes[i];
            double x, jacobian;
            if (scheme == QuadScheme::clustered_panels) {
                x = support.lo + width * 0.5 * (1.0 - std::cos(M_PI * t));
                jacobian = width * 0.5 * M_PI * std::sin(M_PI * t);
            } else {
                x = support.lo + width * t;
                jacobian = width;
            }
            const double v = f(x);
            if (!std::isfinite(v)) {
                out.finite = false;
                out.offending_node = x;
                return out;
            }
            const double av = std::abs(v);
            if (av > out.max_abs_integrand) out.max_abs_integrand = av;
            out.value += 0.5 * h * gl5_weights[i] * v * jacobian;
        }
    }
    return out;
}

}  // namespace detail

/**
 * Integrate f over the support with the given rule.
 *
 * @throws numerical_error if the integrand is non-finite at any node.
 */
template <std::invocable<double> F>
double integrate(F&& f, Interval support, const QuadratureRule& rule = QuadratureRule{}) {
    if (!(support.hi > support.lo))
        throw std::invalid_argument("integrate: empty support interval");
    if (rule.panels < 1) throw std::invalid_argument("integrate: panel count must be positive");
    auto sweep = detail::sweep_panels(f, support, rule.scheme, rule.panels);
    if (!sweep.finite) {
        std::ostringstream msg;
        msg << "integrate: non-finite integrand value at quadrature node x = "
            << sweep.offending_node;
        throw numerical_error(msg.str());
    }
    return sweep.value;
}

}  // namespace bnc
