#pragma once

/**
 * @file posterior.hpp
 * @brief Posterior updating and predictive densities for the prior families.
 *
 * All weight arithmetic runs in log space through log_sum_exp, so long
 * observation runs cannot underflow.  Every posterior exposes its marginal
 * data likelihood; the ratio of consecutive marginals equals the predictive
 * density evaluated at the new observation, which is the recursion the
 * martingale diagnostics are built on.
 *
 *   - DiscretePosterior: exact posterior over finitely many candidate
 *     densities; predictive, set-restricted predictive, and set masses.
 *   - hellinger_complement: atoms whose Hellinger metric distance from a
 *     reference density exceeds a radius — the alternative set whose
 *     posterior mass should vanish along a consistent run.
 *   - polya_predictive / polya_log_marginal: exact split-tree predictive
 *     (product of per-node posterior branch means) and its data marginal.
 *   - HistogramPosterior: conjugate updating of the random-histogram prior;
 *     per-bin-count predictives, bin-count posterior, mixed predictive, and
 *     an incrementally maintained marginal.
 *   - ExpFamilyImportanceSampler: self-normalized importance sampling for
 *     the cosine exponential family, with an effective-sample-size guard.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bnc/core.hpp"
#include "bnc/density.hpp"
#include "bnc/priors.hpp"

namespace bnc {

// ---------------------------------------------------------------------------
// Mixture densities
// ---------------------------------------------------------------------------

/**
 * Convex mixture of densities.  The support is the hull of the component
 * supports; component support edges and breakpoints become breakpoints of
 * the mixture so piecewise quadrature stays exact.
 */
inline SupportedDensity mixture_density(std::vector<SupportedDensity> components,
                                        std::vector<double> weights, std::string label) {
    if (components.empty() || components.size() != weights.size())
        throw std::invalid_argument("mixture_density: components/weights mismatch");
    Interval hull = components.front().support();
    for (const auto& c : components) {
        hull.lo = std::min(hull.lo, c.support().lo);
        hull.hi = std::max(hull.hi, c.support().hi);
    }
    std::vector<double> cuts;
    for (const auto& c : components) {
        cuts.insert(cuts.end(), c.interior_breakpoints().begin(),
                    c.interior_breakpoints().end());
        cuts.push_back(c.support().lo);
        cuts.push_back(c.support().hi);
    }
    auto shared = std::make_shared<std::pair<std::vector<SupportedDensity>, std::vector<double>>>(
        std::move(components), std::move(weights));
    return SupportedDensity(
        SupportedDensity::unchecked, hull,
        [shared](double x) {
            double v = 0.0;
            for (std::size_t i = 0; i < shared->first.size(); ++i)
                v += shared->second[i] * shared->first[i](x);
            return v;
        },
        std::move(label), std::move(cuts));
}

// ---------------------------------------------------------------------------
// Discrete posterior
// ---------------------------------------------------------------------------

class DiscretePosterior {
  public:
    static DiscretePosterior from_prior(DiscretePrior prior) {
        DiscretePosterior post(std::move(prior));
        return post;
    }

    /** Absorb one observation by evaluating every atom at x. */
    void observe(double x) {
        std::vector<double> ll(prior_.size());
        for (std::size_t i = 0; i < prior_.size(); ++i) {
            const double v = prior_.atoms()[i](x);
            ll[i] = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
        }
        observe_with_log_likelihoods(ll);
    }

    /** Absorb one observation given per-atom log-likelihood values. */
    void observe_with_log_likelihoods(const std::vector<double>& log_likelihoods) {
        if (log_likelihoods.size() != prior_.size())
            throw std::invalid_argument("DiscretePosterior: log-likelihood size mismatch");
        std::vector<double> candidate(prior_.size());
        for (std::size_t i = 0; i < prior_.size(); ++i)
            candidate[i] = cum_log_lik_[i] + log_likelihoods[i];
        bool possible = false;
        for (std::size_t i = 0; i < prior_.size(); ++i)
            if (std::isfinite(log_prior_[i] + candidate[i])) possible = true;
        if (!possible)
            throw numerical_error(
                "DiscretePosterior: observation has zero likelihood under every atom");
        cum_log_lik_ = std::move(candidate);
        ++observations_;
    }

    /** Normalized posterior weights. */
    std::vector<double> weights() const {
        const auto scores = atom_scores();
        const double lse = log_sum_exp(scores);
        std::vector<double> w(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) w[i] = std::exp(scores[i] - lse);
        return w;
    }

    /** Log marginal likelihood of the data seen so far (0 at the start). */
    double log_marginal() const { return log_sum_exp(atom_scores()); }

    /** Log of the unnormalized mass sum_{i in set} pi_i * likelihood_i. */
    double restricted_log_marginal(const std::vector<std::size_t>& atom_set) const {
        if (atom_set.empty())
            throw std::invalid_argument("restricted_log_marginal: empty atom set");
        const auto scores = atom_scores();
        std::vector<double> subset;
        subset.reserve(atom_set.size());
        for (std::size_t i : atom_set) subset.push_back(scores.at(i));
        return log_sum_exp(subset);
    }

    /** Posterior probability of the atom set. */
    double posterior_mass(const std::vector<std::size_t>& atom_set) const {
        if (atom_set.empty()) return 0.0;
        return std::exp(restricted_log_marginal(atom_set) - log_marginal());
    }

    /** Posterior predictive density: the weight-mixed atoms. */
    SupportedDensity predictive(std::string label = "predictive") const {
        return mixture_density(prior_.atoms(), weights(), std::move(label));
    }

    /** Predictive of the posterior restricted (renormalized) to an atom set. */
    SupportedDensity restricted_predictive(const std::vector<std::size_t>& atom_set,
                                           std::string label = "restricted-predictive") const {
        if (atom_set.empty())
            throw std::invalid_argument("restricted_predictive: empty atom set");
        const auto scores = atom_scores();
        std::vector<double> subset;
        std::vector<SupportedDensity> components;
        subset.reserve(atom_set.size());
        for (std::size_t i : atom_set) {
            subset.push_back(scores.at(i));
            components.push_back(prior_.atoms()[i]);
        }
        const double lse = log_sum_exp(subset);
        if (!std::isfinite(lse))
            throw numerical_error("restricted_predictive: atom set has zero posterior mass");
        std::vector<double> w(subset.size());
        for (std::size_t i = 0; i < subset.size(); ++i) w[i] = std::exp(subset[i] - lse);
        return mixture_density(std::move(components), std::move(w), std::move(label));
    }

    const DiscretePrior& prior() const { return prior_; }
    std::size_t observation_count() const { return observations_; }

  private:
    explicit DiscretePosterior(DiscretePrior prior)
        : prior_(std::move(prior)),
          cum_log_lik_(prior_.size(), 0.0),
          log_prior_(prior_.size()) {
        for (std::size_t i = 0; i < prior_.size(); ++i) {
            const double w = prior_.weights()[i];
            log_prior_[i] = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
        }
    }

    std::vector<double> atom_scores() const {
        std::vector<double> scores(prior_.size());
        for (std::size_t i = 0; i < prior_.size(); ++i)
            scores[i] = log_prior_[i] + cum_log_lik_[i];
        return scores;
    }

    DiscretePrior prior_;
    std::vector<double> cum_log_lik_;
    std::vector<double> log_prior_;
    std::size_t observations_ = 0;
};

// ---------------------------------------------------------------------------
// Hellinger-complement atom sets
// ---------------------------------------------------------------------------

/** Indices of prior atoms lying strictly outside a Hellinger-metric ball. */
struct AtomSet {
    std::vector<std::size_t> indices;
    double epsilon = 0.0;
};

inline AtomSet hellinger_complement(const DiscretePrior& prior, const SupportedDensity& f0,
                                    double epsilon,
                                    const QuadratureRule& rule = QuadratureRule{}) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("hellinger_complement: negative radius");
    AtomSet set;
    set.epsilon = epsilon;
    for (std::size_t i = 0; i < prior.size(); ++i)
        if (hellinger_big_h(prior.atoms()[i], f0, rule) > epsilon) set.indices.push_back(i);
    return set;
}

// ---------------------------------------------------------------------------
// Split-tree predictive and marginal
// ---------------------------------------------------------------------------

/**
 * Exact predictive density of a split tree: branch variables are posterior
 * independent, so cell masses are products of per-node posterior means
 * (a_k + left count) / (2 a_k + both counts).
 */
inline StepDensity polya_predictive(const PolyaTreeParams& tree) {
    std::vector<double> mass{1.0};
    for (int k = 1; k <= tree.depth(); ++k) {
        const auto& counts = tree.branch_counts()[static_cast<std::size_t>(k - 1)];
        const double a = tree.level_params()[static_cast<std::size_t>(k - 1)];
        std::vector<double> next(std::size_t{1} << k);
        for (std::size_t j = 0; j < mass.size(); ++j) {
            const double left = counts[2 * j];
            const double right = counts[2 * j + 1];
            const double mean_left = (a + left) / (2.0 * a + left + right);
            next[2 * j] = mass[j] * mean_left;
            next[2 * j + 1] = mass[j] * (1.0 - mean_left);
        }
        mass = std::move(next);
    }
    const std::size_t bins = mass.size();
    StepDensity density;
    density.edges.resize(bins + 1);
    density.heights.resize(bins);
    const double scale = static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b)
        density.edges[b] = static_cast<double>(b) / scale;
    for (std::size_t b = 0; b < bins; ++b) density.heights[b] = mass[b] * scale;
    return density;
}

/** Log marginal likelihood of a data sequence under the split tree. */
inline double polya_log_marginal(PolyaTreeParams tree, const std::vector<double>& data) {
    double logm = 0.0;
    for (double x : data) {
        const double value = polya_predictive(tree)(x);
        if (!(value > 0.0))
            throw numerical_error("polya_log_marginal: zero predictive value at observation");
        logm += std::log(value);
        tree = polya_observe(std::move(tree), x);
    }
    return logm;
}

// ---------------------------------------------------------------------------
// Histogram posterior
// ---------------------------------------------------------------------------

/**
 * Conjugate posterior for the random-histogram prior.  For each retained bin
 * count m the flat Dirichlet yields the predictive height
 * m (1 + n_km) / (m + n) on bin k, and the data marginal satisfies
 * p_m(x_{1:n+1}) = p_m(x_{1:n}) * predictive_m(x_{n+1}), which is exactly how
 * the per-m marginals are maintained here.
 */
class HistogramPosterior {
  public:
    explicit HistogramPosterior(RandomHistogramPrior prior) : prior_(std::move(prior)) {
        const std::size_t max_bins = prior_.bin_law.probabilities.size();
        counts_.resize(max_bins);
        for (std::size_t m = 1; m <= max_bins; ++m) counts_[m - 1].assign(m, 0.0);
        log_pm_.assign(max_bins, 0.0);
    }

    void observe(double x) {
        if (!(x >= 0.0 && x <= 1.0))
            throw std::invalid_argument("HistogramPosterior: observation outside [0, 1]");
        const auto n = static_cast<double>(observations_);
        for (std::size_t m = 1; m <= counts_.size(); ++m) {
            const std::size_t k = bin_index(x, m);
            const double mm = static_cast<double>(m);
            log_pm_[m - 1] += std::log(mm * (1.0 + counts_[m - 1][k]) / (mm + n));
            counts_[m - 1][k] += 1.0;
        }
        ++observations_;
    }

    /** Log of sum_m P(bins = m) * p_m(data). */
    double log_marginal() const { return log_sum_exp(bin_scores()); }

    /** Posterior law over the retained bin counts. */
    std::vector<double> bin_count_posterior() const {
        const auto scores = bin_scores();
        const double lse = log_sum_exp(scores);
        std::vector<double> pi(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) pi[i] = std::exp(scores[i] - lse);
        return pi;
    }

    /** Predictive conditional on the number of bins. */
    StepDensity predictive_given_bins(int bins) const {
        if (bins < 1 || static_cast<std::size_t>(bins) > counts_.size())
            throw std::invalid_argument("predictive_given_bins: bin count outside the law");
        const auto m = static_cast<std::size_t>(bins);
        const double mm = static_cast<double>(m);
        const auto n = static_cast<double>(observations_);
        StepDensity density;
        density.edges.resize(m + 1);
        density.heights.resize(m);
        for (std::size_t b = 0; b <= m; ++b) density.edges[b] = static_cast<double>(b) / mm;
        for (std::size_t k = 0; k < m; ++k)
            density.heights[k] = mm * (1.0 + counts_[m - 1][k]) / (mm + n);
        return density;
    }

    /** Posterior predictive: bin-count mixture of the per-m predictives. */
    StepDensity predictive() const {
        const auto pi = bin_count_posterior();
        std::vector<double> edges;
        for (std::size_t m = 1; m <= counts_.size(); ++m) {
            if (!(pi[m - 1] > 0.0)) continue;
            for (std::size_t b = 0; b <= m; ++b)
                edges.push_back(static_cast<double>(b) / static_cast<double>(m));
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        if (edges.size() < 2) throw numerical_error("HistogramPosterior: empty predictive grid");
        std::vector<StepDensity> parts;
        std::vector<double> part_weights;
        for (std::size_t m = 1; m <= counts_.size(); ++m) {
            if (!(pi[m - 1] > 0.0)) continue;
            parts.push_back(predictive_given_bins(static_cast<int>(m)));
            part_weights.push_back(pi[m - 1]);
        }
        StepDensity density;
        density.edges = edges;
        density.heights.assign(edges.size() - 1, 0.0);
        for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
            const double mid = 0.5 * (edges[c] + edges[c + 1]);
            double v = 0.0;
            for (std::size_t p = 0; p < parts.size(); ++p)
                v += part_weights[p] * parts[p](mid);
            density.heights[c] = v;
        }
        return density;
    }

    const RandomHistogramPrior& prior() const { return prior_; }
    std::size_t observation_count() const { return observations_; }

  private:
    std::size_t bin_index(double x, std::size_t m) const {
        auto k = static_cast<std::size_t>(x * static_cast<double>(m));
        return k >= m ? m - 1 : k;
    }

    std::vector<double> bin_scores() const {
        std::vector<double> scores(counts_.size());
        for (std::size_t m = 1; m <= counts_.size(); ++m) {
            const double pm = prior_.bin_law.probabilities[m - 1];
            scores[m - 1] = (pm > 0.0 ? std::log(pm) : -std::numeric_limits<double>::infinity()) +
                            log_pm_[m - 1];
        }
        return scores;
    }

    RandomHistogramPrior prior_;
    std::vector<std::vector<double>> counts_;  ///< counts_[m-1][k]: data in bin k of the m-grid
    std::vector<double> log_pm_;               ///< log p_m(data)
    std::size_t observations_ = 0;
};

// ---------------------------------------------------------------------------
// Exponential-family importance sampler
// ---------------------------------------------------------------------------

/**
 * Self-normalized importance sampling with the prior as proposal: weights
 * are data likelihoods.  ess() = 1 / sum of squared normalized weights; runs
 * below 10 effective draws are flagged degenerate.
 */
class ExpFamilyImportanceSampler {
  public:
    ExpFamilyImportanceSampler(const ExpFamilySpec& spec, const std::vector<double>& data,
                               std::size_t draws, RngStream& rng) {
        if (draws == 0)
            throw std::invalid_argument("ExpFamilyImportanceSampler: need draws >= 1");
        draws_.reserve(draws);
        std::vector<double> logw(draws, 0.0);
        for (std::size_t s = 0; s < draws; ++s) {
            draws_.push_back(sample_density(spec, rng));
            for (double x : data) {
                const double v = draws_.back()(x);
                if (!(v > 0.0))
                    throw numerical_error("ExpFamilyImportanceSampler: zero likelihood draw");
                logw[s] += std::log(v);
            }
        }
        const double lse = log_sum_exp(logw);
        normalized_weights_.resize(draws);
        double sum_sq = 0.0;
        for (std::size_t s = 0; s < draws; ++s) {
            normalized_weights_[s] = std::exp(logw[s] - lse);
            sum_sq += normalized_weights_[s] * normalized_weights_[s];
        }
        ess_ = 1.0 / sum_sq;
    }

    double ess() const { return ess_; }
    bool degenerate() const { return ess_ < 10.0; }
    const std::vector<double>& normalized_weights() const { return normalized_weights_; }
    const std::vector<ExpFamilyDensity>& draws() const { return draws_; }

    /** Weighted posterior mean of a functional of the density. */
    double posterior_mean(const std::function<double(const ExpFamilyDensity&)>& fn) const {
        double mean = 0.0;
        for (std::size_t s = 0; s < draws_.size(); ++s)
            mean += normalized_weights_[s] * fn(draws_[s]);
        return mean;
    }

    /** Posterior predictive: the weight-mixed sampled densities. */
    SupportedDensity predictive(std::string label = "expfam-predictive") const {
        std::vector<SupportedDensity> components;
        components.reserve(draws_.size());
        for (const auto& d : draws_) components.push_back(d.density());
        return mixture_density(std::move(components), normalized_weights_, std::move(label));
    }

  private:
    std::vector<ExpFamilyDensity> draws_;
    std::vector<double> normalized_weights_;
    double ess_ = 0.0;
};

}  // namespace bnc
