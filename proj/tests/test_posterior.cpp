// Unit tests for posterior updating: discrete mixture posteriors and their
// predictives, Hellinger-complement atom sets, split-tree predictives and
// marginals, histogram-posterior conjugacy, and the exponential-family
// importance sampler.
//
// Frozen oracles (menu densities on [0, 1], flat two-atom prior on
// {uniform, 2x}, one observation x = 0.8):
//   likelihoods (1, 1.6) -> posterior weights (5/13, 8/13), marginal 1.3
//   predictive value at 0.25 afterwards: 5/13 + (8/13)(0.5) = 9/13
//   restricted marginal on {2x}: 0.8; mass 8/13
// Split tree, depth 1, a = 1, one observation in the left half:
//   predictive heights (4/3, 2/3); depth 2 gives (8/9, 16/9, 2/3, 2/3)
//   depth-1 marginal of {0.3, 0.6}: 4 E[theta(1-theta)] = 2/3
// Histogram, m = 2, data {0.1, 0.2, 0.6} (counts 2, 1):
//   per-bin predictive heights (1.2, 0.8)
//   m-marginals p_1 = 1, p_2 = 2/3; flat law over {1, 2} -> (0.6, 0.4)
//   mixture predictive heights (1.08, 0.92)

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bnc/density.hpp"
#include "bnc/posterior.hpp"
#include "bnc/priors.hpp"

namespace {

using bnc::DiscretePosterior;
using bnc::DiscretePrior;
using bnc::ExpFamilySpec;
using bnc::HistogramPosterior;
using bnc::PolyaTreeParams;
using bnc::RandomHistogramPrior;
using bnc::StepDensity;
using bnc::SupportedDensity;

SupportedDensity uniform_density() {
    return SupportedDensity(bnc::unit_interval, [](double) { return 1.0; }, "uniform");
}

SupportedDensity linear_density() {
    return SupportedDensity(bnc::unit_interval, [](double x) { return 2.0 * x; }, "2x");
}

DiscretePrior two_atom_prior() {
    std::vector<SupportedDensity> atoms;
    atoms.push_back(uniform_density());
    atoms.push_back(linear_density());
    return DiscretePrior(atoms, {0.5, 0.5});
}

std::vector<SupportedDensity> density_menu() {
    std::vector<SupportedDensity> menu;
    menu.push_back(uniform_density());
    menu.push_back(linear_density());
    menu.push_back(SupportedDensity(bnc::unit_interval,
                                    [](double x) { return 3.0 * x * x; }, "3x^2"));
    menu.push_back(SupportedDensity(bnc::unit_interval,
                                    [](double x) { return 2.0 - 2.0 * x; }, "2-2x"));
    menu.push_back(SupportedDensity(bnc::unit_interval,
                                    [](double x) { return 6.0 * x * (1.0 - x); }, "6x(1-x)"));
    menu.push_back(SupportedDensity(bnc::unit_interval,
                                    [](double x) { return x + 0.5; }, "x+1/2"));
    return menu;
}

// ---------------------------------------------------------------------------
// Discrete posterior
// ---------------------------------------------------------------------------

TEST(DiscretePosterior, FromPriorMatchesPriorWeights) {
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    EXPECT_NEAR(post.weights()[0], 0.5, 1e-15);
    EXPECT_NEAR(post.weights()[1], 0.5, 1e-15);
    EXPECT_NEAR(post.log_marginal(), 0.0, 1e-15);
    EXPECT_EQ(post.observation_count(), 0u);
}

TEST(DiscretePosterior, SingleUpdateClosedForm) {
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    post.observe(0.8);
    EXPECT_NEAR(post.weights()[0], 5.0 / 13.0, 1e-14);
    EXPECT_NEAR(post.weights()[1], 8.0 / 13.0, 1e-14);
    EXPECT_NEAR(post.log_marginal(), std::log(1.3), 1e-14);
}

TEST(DiscretePosterior, SequentialUpdatesMatchBatchFormula) {
    const std::vector<double> data = {0.7, 0.3, 0.9, 0.5, 0.62};
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    for (double x : data) post.observe(x);
    // Batch: w_i propto pi_i * prod f_i(x_j).
    double lu = std::log(0.5);
    double ll = std::log(0.5);
    for (double x : data) {
        lu += std::log(1.0);
        ll += std::log(2.0 * x);
    }
    const double lse = std::log(std::exp(lu) + std::exp(ll));
    EXPECT_NEAR(post.weights()[0], std::exp(lu - lse), 1e-12);
    EXPECT_NEAR(post.weights()[1], std::exp(ll - lse), 1e-12);
    EXPECT_NEAR(post.log_marginal(), lse, 1e-12);
    EXPECT_EQ(post.observation_count(), data.size());
}

TEST(DiscretePosterior, LikelihoodRescalingLeavesWeightsInvariant) {
    auto a = DiscretePosterior::from_prior(two_atom_prior());
    auto b = DiscretePosterior::from_prior(two_atom_prior());
    const std::vector<double> ll = {-0.3, -1.7};
    const double shift = 2.5;
    std::vector<double> shifted = ll;
    for (double& v : shifted) v += shift;
    a.observe_with_log_likelihoods(ll);
    b.observe_with_log_likelihoods(shifted);
    EXPECT_NEAR(a.weights()[0], b.weights()[0], 1e-14);
    EXPECT_NEAR(a.weights()[1], b.weights()[1], 1e-14);
    EXPECT_NEAR(b.log_marginal() - a.log_marginal(), shift, 1e-12);
}

TEST(DiscretePosterior, PredictiveMixesAtoms) {
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    EXPECT_NEAR(post.predictive()(0.25), 0.5 * 1.0 + 0.5 * 0.5, 1e-14);
    post.observe(0.8);
    EXPECT_NEAR(post.predictive()(0.25), 9.0 / 13.0, 1e-14);
    const double mass =
        bnc::integrate([f = post.predictive()](double x) { return f(x); }, bnc::unit_interval,
                       bnc::QuadratureRule{});
    EXPECT_NEAR(mass, 1.0, 1e-10);
}

TEST(DiscretePosterior, RestrictedPredictiveRenormalizes) {
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    post.observe(0.8);
    EXPECT_NEAR(post.posterior_mass({1}), 8.0 / 13.0, 1e-14);
    auto restricted = post.restricted_predictive({1});
    for (double x : {0.1, 0.4, 0.75}) EXPECT_NEAR(restricted(x), 2.0 * x, 1e-13);
    // Restricting to everything recovers the full predictive.
    auto full = post.restricted_predictive({0, 1});
    EXPECT_NEAR(full(0.25), post.predictive()(0.25), 1e-14);
}

TEST(DiscretePosterior, MarginalRatioIsPredictiveValue) {
    const std::vector<double> data = {0.7, 0.3, 0.9, 0.5};
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    for (double x : data) {
        const double before = post.log_marginal();
        const double predicted = post.predictive()(x);
        post.observe(x);
        EXPECT_NEAR(std::exp(post.log_marginal() - before), predicted, 1e-12);
    }
}

TEST(DiscretePosterior, RestrictedMarginalRatioIsRestrictedPredictive) {
    const std::vector<std::size_t> set = {1};
    const std::vector<double> data = {0.7, 0.3, 0.9};
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    for (double x : data) {
        const double before = post.restricted_log_marginal(set);
        const double predicted = post.restricted_predictive(set)(x);
        post.observe(x);
        EXPECT_NEAR(std::exp(post.restricted_log_marginal(set) - before), predicted, 1e-12);
    }
}

TEST(DiscretePosterior, MassDecomposition) {
    auto post = DiscretePosterior::from_prior(two_atom_prior());
    post.observe(0.8);
    EXPECT_NEAR(post.restricted_log_marginal({1}), std::log(0.8), 1e-13);
    EXPECT_NEAR(post.log_marginal() + std::log(post.posterior_mass({1})),
                post.restricted_log_marginal({1}), 1e-12);
}

TEST(DiscretePosterior, ImpossibleObservationThrows) {
    std::vector<SupportedDensity> atoms;
    atoms.push_back(SupportedDensity(bnc::Interval{0.0, 0.5},
                                     [](double) { return 2.0; }, "left-uniform"));
    atoms.push_back(SupportedDensity(bnc::Interval{0.0, 0.5},
                                     [](double x) { return 8.0 * x; }, "left-ramp"));
    auto post = DiscretePosterior::from_prior(DiscretePrior(atoms, {0.5, 0.5}));
    EXPECT_THROW(post.observe(0.9), bnc::numerical_error);
}

// ---------------------------------------------------------------------------
// Hellinger-complement atom sets
// ---------------------------------------------------------------------------

TEST(HellingerComplement, MenuEpsilonSelection) {
    // Metric distances to uniform: 2x and 2-2x sit near 0.338, 3x^2 near
    // 0.518, 6x(1-x) near 0.276, x+1/2 near 0.148.  Radius 0.3 keeps
    // exactly {2x, 3x^2, 2-2x}.
    DiscretePrior prior = DiscretePrior::normalized(density_menu(),
                                                    {1, 1, 1, 1, 1, 1});
    auto set = bnc::hellinger_complement(prior, uniform_density(), 0.3);
    EXPECT_EQ(set.indices, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_NEAR(set.epsilon, 0.3, 1e-15);
}

TEST(HellingerComplement, ExtremeRadii) {
    DiscretePrior prior = DiscretePrior::normalized(density_menu(),
                                                    {1, 1, 1, 1, 1, 1});
    EXPECT_TRUE(bnc::hellinger_complement(prior, uniform_density(), 2.0).indices.empty());
    // A tiny radius (above quadrature noise, below every real distance)
    // keeps everything except uniform itself.
    auto all = bnc::hellinger_complement(prior, uniform_density(), 1e-6);
    EXPECT_EQ(all.indices, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

// ---------------------------------------------------------------------------
// Split-tree predictive and marginal
// ---------------------------------------------------------------------------

TEST(PolyaPredictive, NoDataIsUniform) {
    auto tree = PolyaTreeParams::with_uniform_params(3, 1.0);
    StepDensity pred = bnc::polya_predictive(tree);
    ASSERT_EQ(pred.heights.size(), 8u);
    for (double h : pred.heights) EXPECT_NEAR(h, 1.0, 1e-15);
    EXPECT_NEAR(pred.mass(), 1.0, 1e-14);
}

TEST(PolyaPredictive, SingleObservationDepthOne) {
    auto tree = bnc::polya_observe(PolyaTreeParams::with_uniform_params(1, 1.0), 0.3);
    StepDensity pred = bnc::polya_predictive(tree);
    EXPECT_NEAR(pred.heights[0], 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(pred.heights[1], 2.0 / 3.0, 1e-15);
}

TEST(PolyaPredictive, SingleObservationDepthTwo) {
    auto tree = bnc::polya_observe(PolyaTreeParams::with_uniform_params(2, 1.0), 0.3);
    StepDensity pred = bnc::polya_predictive(tree);
    ASSERT_EQ(pred.heights.size(), 4u);
    EXPECT_NEAR(pred.heights[0], 8.0 / 9.0, 1e-14);
    EXPECT_NEAR(pred.heights[1], 16.0 / 9.0, 1e-14);
    EXPECT_NEAR(pred.heights[2], 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(pred.heights[3], 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(pred.mass(), 1.0, 1e-14);
}

TEST(PolyaPredictive, MatchesSampledMean) {
    // depth 2, a_k = k, observations 0.3 and 0.7: exact predictive heights
    // (0.8, 1.2, 1.2, 0.8); Monte Carlo bin means must agree within 3 se.
    auto tree = PolyaTreeParams::with_schedule(2, [](int k) { return static_cast<double>(k); });
    tree = bnc::polya_observe(tree, 0.3);
    tree = bnc::polya_observe(tree, 0.7);
    StepDensity pred = bnc::polya_predictive(tree);
    const std::vector<double> oracle = {0.8, 1.2, 1.2, 0.8};
    for (std::size_t b = 0; b < 4; ++b) EXPECT_NEAR(pred.heights[b], oracle[b], 1e-14);
    auto rng = bnc::make_stream(61);
    std::vector<std::vector<double>> samples(4);
    for (int i = 0; i < 4000; ++i) {
        StepDensity d = bnc::sample_density(tree, rng);
        for (std::size_t b = 0; b < 4; ++b) samples[b].push_back(d.heights[b]);
    }
    for (std::size_t b = 0; b < 4; ++b) {
        auto mv = bnc::mean_and_variance(samples[b]);
        EXPECT_NEAR(mv.mean, oracle[b], 3.0 * mv.std_error()) << "bin " << b;
    }
}

TEST(PolyaPredictive, MarginalMatchesBetaMoments) {
    // Depth 1, a = 1, data {0.3, 0.6}: marginal is E[2 theta * 2 (1 - theta)]
    // = 4/6 under theta ~ Uniform(0, 1).
    auto tree = PolyaTreeParams::with_uniform_params(1, 1.0);
    const double logm = bnc::polya_log_marginal(tree, {0.3, 0.6});
    EXPECT_NEAR(std::exp(logm), 2.0 / 3.0, 1e-14);
}

// ---------------------------------------------------------------------------
// Histogram posterior
// ---------------------------------------------------------------------------

TEST(HistogramPosterior, PredictiveGivenBinsClosedForm) {
    HistogramPosterior post(RandomHistogramPrior::fixed_bins(2));
    for (double x : {0.1, 0.2, 0.6}) post.observe(x);
    StepDensity pred = post.predictive_given_bins(2);
    EXPECT_NEAR(pred.heights[0], 1.2, 1e-14);
    EXPECT_NEAR(pred.heights[1], 0.8, 1e-14);
}

TEST(HistogramPosterior, PriorPredictiveIsUniform) {
    HistogramPosterior post(RandomHistogramPrior::geometric(0.5, 8));
    StepDensity pred = post.predictive();
    for (double h : pred.heights) EXPECT_NEAR(h, 1.0, 1e-12);
    EXPECT_NEAR(pred.mass(), 1.0, 1e-12);
}

TEST(HistogramPosterior, BinCountPosteriorClosedForm) {
    HistogramPosterior post(RandomHistogramPrior::with_law({0.5, 0.5}));
    for (double x : {0.1, 0.2, 0.6}) post.observe(x);
    auto pi = post.bin_count_posterior();
    ASSERT_EQ(pi.size(), 2u);
    EXPECT_NEAR(pi[0], 0.6, 1e-12);
    EXPECT_NEAR(pi[1], 0.4, 1e-12);
}

TEST(HistogramPosterior, MixturePredictiveClosedForm) {
    HistogramPosterior post(RandomHistogramPrior::with_law({0.5, 0.5}));
    for (double x : {0.1, 0.2, 0.6}) post.observe(x);
    StepDensity pred = post.predictive();
    ASSERT_EQ(pred.heights.size(), 2u);
    EXPECT_NEAR(pred.heights[0], 1.08, 1e-12);
    EXPECT_NEAR(pred.heights[1], 0.92, 1e-12);
    EXPECT_NEAR(pred.mass(), 1.0, 1e-13);
}

TEST(HistogramPosterior, IncrementalMarginalMatchesDirectFormula) {
    // Direct:  p_m = m^n (m-1)! / (n+m-1)! * prod_k n_km!
    const int m = 3;
    const std::vector<double> data = {0.1, 0.15, 0.4, 0.45, 0.8, 0.2};
    HistogramPosterior post(RandomHistogramPrior::fixed_bins(m));
    for (double x : data) post.observe(x);
    std::vector<int> counts(m, 0);
    for (double x : data) {
        auto k = static_cast<std::size_t>(x * m);
        if (k >= static_cast<std::size_t>(m)) k = m - 1;
        ++counts[k];
    }
    const auto n = static_cast<double>(data.size());
    double direct = n * std::log(static_cast<double>(m)) + std::lgamma(m) -
                    std::lgamma(n + m);
    for (int c : counts) direct += std::lgamma(c + 1.0);
    EXPECT_NEAR(post.log_marginal(), direct, 1e-12);
}

TEST(HistogramPosterior, MarginalRatioIsPredictiveValue) {
    HistogramPosterior post(RandomHistogramPrior::geometric(0.5, 8));
    for (double x : {0.13, 0.57, 0.91, 0.33}) {
        const double before = post.log_marginal();
        const double predicted = post.predictive()(x);
        post.observe(x);
        EXPECT_NEAR(std::exp(post.log_marginal() - before), predicted, 1e-12);
    }
}

TEST(HistogramPosterior, PredictiveMassExactlyOne) {
    HistogramPosterior post(RandomHistogramPrior::geometric(0.4, 16));
    for (double x : {0.05, 0.6, 0.61, 0.62, 0.99}) post.observe(x);
    EXPECT_NEAR(post.predictive().mass(), 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Exponential-family importance sampler
// ---------------------------------------------------------------------------

TEST(ExpFamilySampler, NoDataGivesFullEss) {
    auto spec = ExpFamilySpec::with_power_sds(4, 1.5, 0.6);
    auto rng = bnc::make_stream(67);
    bnc::ExpFamilyImportanceSampler sampler(spec, {}, 200, rng);
    EXPECT_NEAR(sampler.ess(), 200.0, 1e-9);
    EXPECT_FALSE(sampler.degenerate());
}

TEST(ExpFamilySampler, WeightsMatchManualComputation) {
    auto spec = ExpFamilySpec::with_power_sds(3, 1.5, 0.5);
    const std::vector<double> data = {0.3, 0.8};
    auto rng = bnc::make_stream(71);
    bnc::ExpFamilyImportanceSampler sampler(spec, data, 50, rng);
    const auto& draws = sampler.draws();
    ASSERT_EQ(draws.size(), 50u);
    std::vector<double> logw(draws.size(), 0.0);
    for (std::size_t s = 0; s < draws.size(); ++s)
        for (double x : data) logw[s] += std::log(draws[s](x));
    const double lse = bnc::log_sum_exp(logw);
    for (std::size_t s = 0; s < draws.size(); ++s)
        EXPECT_NEAR(sampler.normalized_weights()[s], std::exp(logw[s] - lse), 1e-12);
    EXPECT_LT(sampler.ess(), 50.0);
}

TEST(ExpFamilySampler, FewDrawsFlagDegenerate) {
    auto spec = ExpFamilySpec::with_power_sds(2, 1.5, 0.5);
    auto rng = bnc::make_stream(73);
    bnc::ExpFamilyImportanceSampler sampler(spec, {0.5}, 5, rng);
    EXPECT_TRUE(sampler.degenerate());
}

TEST(ExpFamilySampler, ConstantFunctionalHasExactMean) {
    auto spec = ExpFamilySpec::with_power_sds(3, 1.5, 0.5);
    auto rng = bnc::make_stream(79);
    bnc::ExpFamilyImportanceSampler sampler(spec, {0.2, 0.9}, 40, rng);
    const double mean = sampler.posterior_mean([](const bnc::ExpFamilyDensity&) { return 3.5; });
    EXPECT_NEAR(mean, 3.5, 1e-12);
}

TEST(ExpFamilySampler, PredictiveIsNormalized) {
    auto spec = ExpFamilySpec::with_power_sds(4, 1.5, 0.6);
    auto rng = bnc::make_stream(83);
    bnc::ExpFamilyImportanceSampler sampler(spec, {0.1, 0.2, 0.8}, 100, rng);
    const double mass = bnc::integrate([f = sampler.predictive()](double x) { return f(x); },
                                       bnc::unit_interval, spec.rule);
    EXPECT_NEAR(mass, 1.0, 2e-6);
}

}  // namespace
