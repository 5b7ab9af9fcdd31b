#include <gtest/gtest.h>

#include <limits>

#include "dg_risklab/erm.hpp"
#include "dg_risklab/experiment.hpp"
#include "dg_risklab/generators.hpp"
#include "oracle.hpp"

using namespace dg_risklab;

namespace {

double best_tabular_risk(const std::vector<WeightedPoint>& pts, const Support& s, Mode mode) {
  const std::size_t cells = mode == Mode::kPool ? s.nx() : s.nx() * s.nm();
  double best = std::numeric_limits<double>::infinity();
  oracle::for_each_function(cells, s.ny(), [&](const std::vector<std::size_t>& g) {
    best = std::min(best, empirical_risk(pts, [&](std::size_t x, std::size_t m) {
                      return g[mode == Mode::kPool ? x : x * s.nm() + m];
                    }));
  });
  return best;
}

// Every rule "class c on x >= t, other class below", t ranging over support values and +inf.
double best_single_threshold_risk(const std::vector<WeightedPoint>& pts, const Support& s,
                                  std::optional<std::size_t> only_m = std::nullopt) {
  std::vector<double> ts = s.x_values;
  ts.push_back(std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (double t : ts)
    for (ClassIndex right : {0u, 1u}) {
      double err = 0.0;
      for (const auto& p : pts) {
        if (only_m && p.m != *only_m) continue;
        const ClassIndex pred = s.x_values[p.x] >= t ? right : 1 - right;
        if (pred != p.y) err += p.w;
      }
      best = std::min(best, err);
    }
  return best;
}

TrainingSet random_small_training_set(std::uint64_t seed, std::size_t K) {
  Rng rng(seed);
  const Sizes sz{rng.between(1, 4), K, rng.between(1, 2), rng.between(1, 3)};
  const auto f = make_random(sz, seed);
  return sample_training_set(f, rng.between(1, 4), SampleSizeRule::uniform(1, 3), seed);
}

}  // namespace

TEST(Sampling, PD1CellFrequencyMatchesFactors) {
  const auto ts = sample_training_set(make_pd1(), 10000, SampleSizeRule::constant(1), 123);
  std::size_t hits = 0;
  for (const auto& d : ts.domains)
    if (d.m == 0 && d.samples[0] == std::pair<std::size_t, ClassIndex>{0, 0}) ++hits;
  // 0.5 * 1 * 0.9 from the factors; the joint table agrees.
  EXPECT_TRUE(oracle::within_binomial(static_cast<double>(hits) / 10000.0, 0.45, 10000)) << hits;
}

TEST(Sampling, DeterministicGivenSeed) {
  const auto f = make_random({4, 3, 3, 3}, 2);
  const auto a = sample_training_set(f, 50, SampleSizeRule::uniform(2, 9), 77);
  const auto b = sample_training_set(f, 50, SampleSizeRule::uniform(2, 9), 77);
  ASSERT_EQ(a.domains.size(), b.domains.size());
  for (std::size_t i = 0; i < a.domains.size(); ++i) {
    EXPECT_EQ(a.domains[i].m, b.domains[i].m);
    EXPECT_EQ(a.domains[i].samples, b.domains[i].samples);
  }
  EXPECT_EQ(a.hidden_domains, b.hidden_domains);
  EXPECT_EQ(a.source_id, fingerprint(f));
}

TEST(Sampling, SampleSizeRuleIsRespected) {
  const auto ts = sample_training_set(make_random({3, 2, 2, 2}, 1), 200, SampleSizeRule::uniform(3, 6), 4);
  std::set<std::size_t> seen;
  for (const auto& d : ts.domains) {
    ASSERT_GE(d.samples.size(), 3u);
    ASSERT_LE(d.samples.size(), 6u);
    seen.insert(d.samples.size());
  }
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_THROW(sample_training_set(make_pd1(), 0, SampleSizeRule::constant(1), 0), UsageError);
  EXPECT_THROW(sample_training_set(make_pd1(), 5, SampleSizeRule::uniform(4, 2), 0), UsageError);
}

TEST(Sampling, SingleDomainGivesOneMetadataValue) {
  Support s{{0.0, 1.0}, 2, {"a", "b", "c"}, {"only"}};
  const FactoredDistribution f(s, {1.0}, {{0.0, 1.0, 0.0}}, {{0.25, 0.25, 0.25, 0.25}});
  const auto ts = sample_training_set(f, 30, SampleSizeRule::constant(4), 5);
  for (const auto& d : ts.domains) EXPECT_EQ(d.m, 1u);
}

TEST(Sampling, DomainWeightsSumToOne) {
  const auto ts = sample_training_set(make_random({3, 2, 2, 2}, 1), 40, SampleSizeRule::uniform(1, 9), 4);
  double total = 0.0;
  for (const auto& p : ts.weighted()) total += p.w;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Tabular, PD1PoolPicksSmallestLabelAndHasHalfRisk) {
  const auto f = make_pd1();
  const auto j = build_joint(f);
  const auto pool = fit_tabular(population_points(j), f.support(), Mode::kPool);
  EXPECT_EQ(pool.predict(0, 0), 0u);
  EXPECT_EQ(pool.predict(0, 1), 0u);
  EXPECT_NEAR(population_risk(j, pool), 0.5, 1e-12);
  const auto dg = fit_tabular(population_points(j), f.support(), Mode::kDg);
  EXPECT_NEAR(population_risk(j, dg), 0.1, 1e-12);
}

TEST(Tabular, SingleSampleGivesConstantClassifier) {
  Support s{{0.0, 1.0, 2.0}, 3, {"a", "b"}, {"d"}};
  const std::vector<WeightedPoint> one{{1, 1, 2, 1.0}};
  for (auto mode : {Mode::kPool, Mode::kDg}) {
    const auto c = fit_tabular(one, s, mode);
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(c.predict(x, m), 2u);
  }
}

TEST(Tabular, DomainWeightingBeatsRawCounts) {
  // Three domains, weight 1/3 each. Raw counts favour class 1 (5 vs 3), but per-domain
  // weighting gives class 0 two thirds of the mass.
  TrainingSet ts;
  ts.support = Support{{0.0}, 2, {"m"}, {"d"}};
  ts.domains = {{0, {{0, 0}}}, {0, {{0, 1}, {0, 1}, {0, 1}, {0, 1}, {0, 1}}}, {0, {{0, 0}, {0, 0}}}};
  const auto c = fit_tabular(ts, Mode::kPool);
  EXPECT_EQ(c.predict(0, 0), 0u);
  std::size_t raw[2] = {0, 0};
  for (const auto& d : ts.domains)
    for (const auto& s : d.samples) ++raw[s.second];
  EXPECT_GT(raw[1], raw[0]);
}

TEST(Tabular, UnseenCellFallsBackToGlobalMajority) {
  Support s{{0.0, 1.0}, 3, {"a", "b"}, {"d"}};
  const std::vector<WeightedPoint> pts{{0, 0, 2, 0.6}, {0, 0, 1, 0.4}};
  const auto c = fit_tabular(pts, s, Mode::kDg);
  EXPECT_EQ(c.predict(1, 1), 2u);
  EXPECT_EQ(c.predict(0, 0), 2u);
  EXPECT_THROW(fit_tabular(std::vector<WeightedPoint>{}, s, Mode::kPool), UsageError);
}

TEST(Threshold, TwoPointsSeparate) {
  Support s{{0.0, 1.0}, 2, {"m"}, {"d"}};
  const std::vector<WeightedPoint> pts{{0, 0, 0, 0.5}, {1, 0, 1, 0.5}};
  const auto c = fit_threshold(pts, s, Mode::kPool);
  EXPECT_GT(c.pooled.threshold, 0.0);
  EXPECT_LT(c.pooled.threshold, 1.0);
  EXPECT_TRUE(c.pooled.positive);
  EXPECT_EQ(empirical_risk(pts, c), 0.0);
}

TEST(Threshold, RightLimitLabelAtThreshold) {
  const ThresholdRule r{1.0, true};
  EXPECT_EQ(r.predict(1.0), 1u);
  EXPECT_EQ(r.predict(0.999), 0u);
  const ThresholdRule neg{1.0, false};
  EXPECT_EQ(neg.predict(1.0), 0u);
}

TEST(Threshold, RequiresBinaryLabels) {
  Support s{{0.0, 1.0}, 3, {"m"}, {"d"}};
  EXPECT_THROW(fit_threshold(std::vector<WeightedPoint>{{0, 0, 0, 1.0}}, s, Mode::kPool), UsageError);
}

TEST(Threshold, UnseenMetadataUsesPooledRule) {
  Support s{{0.0, 1.0, 2.0}, 2, {"a", "b"}, {"d"}};
  const std::vector<WeightedPoint> pts{{0, 0, 1, 0.5}, {2, 0, 0, 0.5}};
  const auto c = fit_threshold(pts, s, Mode::kDg);
  ASSERT_FALSE(c.per_m[1].has_value());
  EXPECT_EQ(c.predict(0, 1), c.pooled.predict(0.0));
  EXPECT_EQ(c.predict(0, 1), 1u);
}

TEST(Threshold, Example1SampleRecoversBothThresholds) {
  const auto ex = make_example1({0.7, 200});
  const auto ts = sample_training_set(ex.dist, 1000, SampleSizeRule::constant(10), 31);
  const auto dg = fit_threshold(ts, Mode::kDg);
  ASSERT_TRUE(dg.per_m[0] && dg.per_m[1]);
  EXPECT_NEAR(dg.per_m[0]->threshold, 1.0, 0.05);
  EXPECT_NEAR(dg.per_m[1]->threshold, 5.0, 0.05);
  EXPECT_EQ(empirical_risk(ts.weighted(), dg), 0.0);
  const auto j = build_joint(ex.dist);
  EXPECT_LE(population_risk(j, dg), 0.005);
  const auto pool = fit_threshold(ts, Mode::kPool);
  EXPECT_NEAR(population_risk(j, pool), 0.15, 0.01);
}

// Exhaustive minimality and nesting on small random training sets.

TEST(ErmProperties, TabularFitsAreEmpiricalMinimizers) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const auto ts = random_small_training_set(seed, 1 + seed % 2 + 1);
    const auto pts = ts.weighted();
    for (auto mode : {Mode::kPool, Mode::kDg}) {
      const double got = empirical_risk(pts, fit_tabular(pts, ts.support, mode));
      ASSERT_NEAR(got, best_tabular_risk(pts, ts.support, mode), 1e-12) << "seed " << seed;
    }
  }
}

TEST(ErmProperties, ThresholdFitsAreEmpiricalMinimizers) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto ts = random_small_training_set(seed, 2);
    const auto pts = ts.weighted();
    const auto pool = fit_threshold(pts, ts.support, Mode::kPool);
    ASSERT_NEAR(empirical_risk(pts, pool), best_single_threshold_risk(pts, ts.support), 1e-12) << seed;
    // DG: independent per-m optimum, summed; normalization is 1 since weights sum to 1.
    double dg_best = 0.0;
    for (std::size_t m = 0; m < ts.support.nm(); ++m) dg_best += best_single_threshold_risk(pts, ts.support, m);
    const auto dg = fit_threshold(pts, ts.support, Mode::kDg);
    ASSERT_NEAR(empirical_risk(pts, dg), dg_best, 1e-12) << seed;
  }
}

TEST(ErmProperties, DomainInformedFitNeverHasLargerEmpiricalRisk) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto ts = random_small_training_set(seed, 2);
    const auto pts = ts.weighted();
    const auto& s = ts.support;
    ASSERT_LE(empirical_risk(pts, fit_tabular(pts, s, Mode::kDg)),
              empirical_risk(pts, fit_tabular(pts, s, Mode::kPool)) + 1e-12);
    ASSERT_LE(empirical_risk(pts, fit_threshold(pts, s, Mode::kDg)),
              empirical_risk(pts, fit_threshold(pts, s, Mode::kPool)) + 1e-12);
    for (std::size_t k : {1u, 2u, 3u}) {
      ASSERT_LE(empirical_risk(pts, fit_histogram(pts, s, k, Mode::kDg)),
                empirical_risk(pts, fit_histogram(pts, s, k, Mode::kPool)) + 1e-12);
      ASSERT_LE(empirical_risk(pts, fit_binned_threshold(pts, s, k, Mode::kDg)),
                empirical_risk(pts, fit_binned_threshold(pts, s, k, Mode::kPool)) + 1e-12);
    }
  }
}

TEST(ErmProperties, PopulationFitsReachBayesRisks) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = make_random_any_size(seed);
    const auto j = build_joint(f);
    const auto r = risks(j, solve_bayes(j));
    const auto pts = population_points(j);
    ASSERT_NEAR(population_risk(j, fit_tabular(pts, f.support(), Mode::kPool)), r.r_pool, 1e-12);
    ASSERT_NEAR(population_risk(j, fit_tabular(pts, f.support(), Mode::kDg)), r.r_dg, 1e-12);
  }
}

TEST(PopulationRisk, MatchesMonteCarloWithinThreeSigma) {
  const auto f = make_random({6, 3, 3, 4}, 314);
  const auto j = build_joint(f);
  const auto ts = sample_training_set(f, 20, SampleSizeRule::constant(5), 1);
  const auto c = fit_tabular(ts, Mode::kDg);
  const double exact = population_risk(j, c);
  const auto& s = f.support();
  Rng rng(2718);
  const std::size_t n = 100000;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cell = rng.categorical(j.values());
    // Unpack ((x * K + y) * nm + m) * nd + d.
    std::size_t rest = cell / s.nd();
    const std::size_t m = rest % s.nm();
    rest /= s.nm();
    const ClassIndex y = rest % s.ny();
    const std::size_t x = rest / s.ny();
    if (c.predict(x, m) != y) ++errors;
  }
  EXPECT_TRUE(oracle::within_binomial(static_cast<double>(errors) / n, exact, n)) << exact;
}

// Capacity sweeps.

TEST(Sweep, Example1BinnedThresholdGapVanishes) {
  const auto j = build_joint(make_example1({0.7, 200}).dist);
  const auto rows = capacity_sweep(j, {1, 2, 4, 8, 16, 32, 64}, Family::kBinnedThreshold);
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& r : rows) EXPECT_TRUE(r.hierarchy_holds()) << r.k;
  EXPECT_GT(rows.front().gap(), 0.1);
  EXPECT_NEAR(rows.front().r_dg, 0.0, 1e-12);
  EXPECT_LE(rows.back().gap(), 0.02);
}

TEST(Sweep, Example1HistogramSingleBinHasNoGap) {
  // One bin over [0, 6]: both modes predict a constant per metadata value, and labels are
  // split evenly inside each metadata value, so both sit at 1/2 minus the grid excess.
  const auto j = build_joint(make_example1({0.7, 200}).dist);
  const auto rows = capacity_sweep(j, {1, 2, 4, 64}, Family::kHistogram);
  EXPECT_NEAR(rows[0].gap(), 0.0, 1e-12);
  for (const auto& r : rows) EXPECT_TRUE(r.hierarchy_holds());
  EXPECT_LE(rows.back().r_pool, 0.02);
}

TEST(Sweep, CovariateShiftPoolRiskDecreasesToBayes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = make_covariate_shift({6, 2, 2, 3}, seed);
    const auto j = build_joint(f);
    const auto r = risks(j, solve_bayes(j));
    const auto rows = capacity_sweep(j, {1, 2, 4, 8, 16}, Family::kHistogram);
    for (std::size_t i = 1; i < rows.size(); ++i) ASSERT_LE(rows[i].r_pool, rows[i - 1].r_pool + 1e-12);
    ASSERT_NEAR(rows.back().r_pool, r.r_pool, 1e-12);
  }
}

TEST(Sweep, RejectsBadCapacityLists) {
  const auto j = build_joint(make_pd1());
  EXPECT_THROW(capacity_sweep(j, {}, Family::kHistogram), UsageError);
  EXPECT_THROW(capacity_sweep(j, {2, 2}, Family::kHistogram), UsageError);
  EXPECT_THROW(capacity_sweep(j, {0, 1}, Family::kHistogram), UsageError);
}

TEST(Sweep, SampledModeStillNests) {
  SweepConfig c;
  c.generator.name = "example1";
  c.generator.grid_n = 50;
  c.sampled = true;
  c.domains = 300;
  c.samples_per_domain = SampleSizeRule::constant(10);
  c.seed = 3;
  const auto rows = run_sweep(c, c.generator.build());
  EXPECT_EQ(rows.size(), 7u);
  EXPECT_GT(rows.front().gap(), 0.0);
}

// Experiments.

TEST(Experiment, PD1TabularConsistency) {
  ExperimentConfig c;
  c.generator.name = "pd1";
  c.domains = 400;
  c.samples_per_domain = SampleSizeRule::constant(25);
  c.trials = 20;
  c.seed = 7;
  const auto r = run_experiment(c);
  EXPECT_NEAR(r.bayes_r_dg, 0.1, 1e-12);
  EXPECT_NEAR(r.bayes_r_pool, 0.5, 1e-12);
  EXPECT_LE(r.dg().mean - r.bayes_r_dg, 0.02);
  EXPECT_GE(r.pool().mean, r.bayes_r_pool - 0.02);
  EXPECT_EQ(r.trials.size(), 20u);
}

TEST(Experiment, CovariateShiftPoolAndDgAgree) {
  ExperimentConfig c;
  c.generator.name = "covariate_shift";
  c.generator.sizes = {4, 2, 3, 3};
  c.generator.seed = 11;
  c.domains = 2000;
  c.samples_per_domain = SampleSizeRule::constant(50);
  c.trials = 5;
  const auto r = run_experiment(c);
  EXPECT_LE(std::abs(r.pool().mean - r.dg().mean), 0.02);
}

TEST(Experiment, ResultsDoNotDependOnWorkerCount) {
  ExperimentConfig c;
  c.generator.name = "random";
  c.generator.sizes = {5, 3, 3, 4};
  c.domains = 60;
  c.samples_per_domain = SampleSizeRule::uniform(2, 8);
  c.trials = 9;
  c.seed = 42;
  EXPECT_EQ(experiment_csv(run_experiment(c, 1)), experiment_csv(run_experiment(c, 4)));
}

TEST(Experiment, ZeroTrialsIsAValidationError) {
  ExperimentConfig c;
  c.trials = 0;
  EXPECT_THROW(run_experiment(c), UsageError);
  EXPECT_THROW(parse_experiment_config("[generator]\nname = pd1\n[experiment]\ntrials = 0\n"), ParseError);
}

TEST(Experiment, ThresholdFamilyNeedsBinaryLabels) {
  ExperimentConfig c;
  c.generator.name = "random";
  c.generator.sizes = {3, 3, 2, 2};
  c.family = ErmFamily::kThreshold;
  EXPECT_THROW(run_experiment(c), UsageError);
}

TEST(Experiment, SummaryStatistics) {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stderr_, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(summarize({0.3}).stderr_, 0.0);
}
