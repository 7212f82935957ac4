#include <gtest/gtest.h>

#include <algorithm>
#include <memory>

#include "aep/environment.hpp"
#include "aep/error.hpp"
#include "aep/evaluation.hpp"
#include "aep/policies.hpp"
#include "aep/random.hpp"
#include "metric_oracle.hpp"

using namespace aep;
namespace ts = aep::test_support;

namespace {

std::vector<double> ramp() {
  std::vector<double> xs;
  for (int i = 1; i <= 200; ++i) xs.push_back((i * i) % 997 + 100);
  return xs;
}

std::vector<Utterance> corpus(std::size_t n, std::uint64_t seed = 31) {
  GeneratorConfig g;
  g.n_utterances = n;
  g.seed = seed;
  return generate(g);
}

}  // namespace

TEST(LatencyStats, MatchNumpyReference) {
  const std::vector<double> small = {120, 340, 95,  800, 410, 365, 2200, 515, 330, 298,
                                     450, 610, 1200, 275, 390, 505, 720,  333, 401, 980};
  EXPECT_NEAR(tm95(small), 480.89473684210526, 1e-9);
  EXPECT_THROW(dtm95_99(small), InsufficientSampleError);

  std::vector<double> ties(10, 300.0);
  ties.insert(ties.end(), {900, 900, 900, 1500});
  EXPECT_NEAR(tm95(ties), 438.46153846153845, 1e-9);

  const auto r = ramp();
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_NEAR(percentile_sorted(sorted, 0.95), 1048.35, 1e-9);
  EXPECT_NEAR(percentile_sorted(sorted, 0.99), 1078.06, 1e-9);
  EXPECT_NEAR(tm95(r), 546.21052631578948, 1e-9);
  EXPECT_NEAR(dtm95_99(r), 1067.5, 1e-9);
}

TEST(LatencyStats, SingletonAndConstantSamples) {
  const std::vector<double> one = {420.0};
  EXPECT_DOUBLE_EQ(tm95(one), 420.0);
  EXPECT_DOUBLE_EQ(dtm95_99(one), 420.0);
  const std::vector<double> flat(50, 7.0);
  EXPECT_DOUBLE_EQ(tm95(flat), 7.0);
  EXPECT_DOUBLE_EQ(dtm95_99(flat), 7.0);
  EXPECT_THROW(tm95(std::vector<double>{}), ValidationError);
}

TEST(LatencyStats, AgreeWithBruteForceAndArePermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(2000);
    std::vector<double> xs(n);
    for (double& x : xs) x = std::round(350.0 * std::exp(0.6 * rng.normal()));
    EXPECT_LE(ts::rel_diff(tm95(xs), ts::brute_tm95(xs)), 1e-9);
    const auto band = ts::brute_dtm95_99(xs);
    if (band) {
      EXPECT_LE(ts::rel_diff(dtm95_99(xs), *band), 1e-9);
      EXPECT_GE(dtm95_99(xs), tm95(xs));
    } else {
      EXPECT_THROW(dtm95_99(xs), InsufficientSampleError);
    }
    auto shuffled = xs;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    EXPECT_EQ(tm95(shuffled), tm95(xs));
  }
}

TEST(EarlyEpRate, IsAPercent) {
  const std::vector<EndpointOutcome> o = {{100, true}, {200, false}, {300, false}, {400, false}};
  EXPECT_DOUBLE_EQ(early_ep_rate(o), 25.0);
  EXPECT_THROW(early_ep_rate(std::vector<EndpointOutcome>{}), ValidationError);
}

TEST(ClassifierMetrics, NotApplicableCases) {
  const std::vector<Class> labels = {Class::class0, Class::class1, Class::class0, Class::class1};
  const std::vector<Action> none(4, Action::standard);
  auto m = classifier_metrics(none, labels);
  EXPECT_DOUBLE_EQ(m.accuracy, 50.0);
  EXPECT_FALSE(m.precision);
  EXPECT_DOUBLE_EQ(*m.recall, 0.0);
  EXPECT_FALSE(m.f1);

  const std::vector<Class> no_pos(4, Class::class0);
  m = classifier_metrics(std::vector<Action>(4, Action::relaxed), no_pos);
  EXPECT_DOUBLE_EQ(*m.precision, 0.0);
  EXPECT_FALSE(m.recall);
  EXPECT_FALSE(m.f1);

  const std::vector<Action> wrong = {Action::relaxed, Action::standard, Action::relaxed, Action::standard};
  m = classifier_metrics(wrong, labels);
  EXPECT_DOUBLE_EQ(*m.precision, 0.0);
  EXPECT_DOUBLE_EQ(*m.recall, 0.0);
  EXPECT_DOUBLE_EQ(*m.f1, 0.0);

  const std::vector<Action> mixed = {Action::relaxed, Action::relaxed, Action::standard, Action::standard};
  m = classifier_metrics(mixed, labels);
  EXPECT_DOUBLE_EQ(*m.precision, 50.0);
  EXPECT_DOUBLE_EQ(*m.recall, 50.0);
  EXPECT_DOUBLE_EQ(*m.f1, 50.0);
  EXPECT_THROW(classifier_metrics(mixed, std::vector<Class>(3)), ValidationError);
}

TEST(Summaries, BaselineColumns) {
  const auto c = corpus(3000);
  const auto standard = evaluate_policy(StaticPolicy(StaticKind::standard_only), c, ObservationSpec{});
  const auto relaxed = evaluate_policy(StaticPolicy(StaticKind::relaxed_only), c, ObservationSpec{}, {}, &standard);
  const auto oracle = evaluate_policy(OraclePolicy(), c, ObservationSpec{}, {}, &standard);

  std::size_t positives = 0, dual = 0;
  for (const auto& u : c) {
    positives += u.label == Class::class1;
    dual += u.outcome_relaxed.cutoff;
  }
  const double base_rate = 100.0 * positives / c.size();
  EXPECT_DOUBLE_EQ(standard.early_ep_rate, base_rate);
  EXPECT_FALSE(standard.precision);
  EXPECT_DOUBLE_EQ(*standard.recall, 0.0);
  EXPECT_DOUBLE_EQ(standard.relaxed_fraction, 0.0);

  EXPECT_DOUBLE_EQ(*relaxed.recall, 100.0);
  EXPECT_NEAR(*relaxed.precision, base_rate, 1e-9);
  EXPECT_DOUBLE_EQ(relaxed.relaxed_fraction, 100.0);
  EXPECT_GT(relaxed.relative->tm95_change, 0.0);

  EXPECT_DOUBLE_EQ(oracle.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(*oracle.precision, 100.0);
  EXPECT_DOUBLE_EQ(*oracle.recall, 100.0);
  EXPECT_DOUBLE_EQ(oracle.early_ep_rate, 100.0 * dual / c.size());

  const auto self = relative_to(standard, standard);
  EXPECT_DOUBLE_EQ(*self.early_ep_rate_change, 0.0);
  EXPECT_DOUBLE_EQ(self.tm95_change, 0.0);
}

TEST(Summaries, ExcludingCutoffLatencies) {
  const auto c = corpus(2000);
  EvaluationOptions opts;
  opts.include_cutoff_latencies = false;
  const std::vector<Action> actions(c.size(), Action::standard);
  std::vector<double> kept;
  for (const auto& u : c) {
    if (!u.outcome_standard.cutoff) kept.push_back(u.outcome_standard.latency_ms);
  }
  EXPECT_DOUBLE_EQ(summarize("standard_only", c, actions, opts).tm95, tm95(kept));
}

TEST(Sweeps, ThresholdsAreNested) {
  const auto c = corpus(4000);
  const auto x = observed_features(c, ObservationSpec{});
  std::vector<Class> y;
  for (const auto& u : c) y.push_back(u.label);
  SupervisedConfig cfg;
  cfg.network.hidden = {16};
  cfg.epochs = 3;
  cfg.seed = 1;
  const auto clf = supervised_train(x, y, cfg);
  const std::vector<double> taus = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0 + 1e-9};
  const auto curve = sweep_threshold(clf, taus, c, ObservationSpec{});
  EXPECT_EQ(curve.knob_name, "tau");
  ASSERT_EQ(curve.points.size(), taus.size());
  EXPECT_DOUBLE_EQ(curve.points.front().report.relaxed_fraction, 100.0);
  EXPECT_DOUBLE_EQ(curve.points.back().report.relaxed_fraction, 0.0);
  for (std::size_t i = 1; i < taus.size(); ++i) {
    EXPECT_LE(curve.points[i].report.relaxed_fraction, curve.points[i - 1].report.relaxed_fraction);
    EXPECT_GE(curve.points[i].report.early_ep_rate, curve.points[i - 1].report.early_ep_rate);
  }
  // Agrees with evaluating the threshold policy directly.
  const auto shared = std::make_shared<SupervisedClassifier>(clf);
  const auto direct = evaluate_policy(ThresholdPolicy(shared, 0.5), c, ObservationSpec{});
  EXPECT_DOUBLE_EQ(direct.early_ep_rate, curve.points[2].report.early_ep_rate);
  EXPECT_DOUBLE_EQ(direct.tm95, curve.points[2].report.tm95);
}

TEST(Sweeps, KnobsMustBeMonotone) {
  const auto c = corpus(100);
  const PolicyFactory make = [](double) { return std::make_unique<StaticPolicy>(StaticKind::standard_only); };
  const std::vector<double> bad = {0.5, 0.2, 0.7};
  EXPECT_THROW(sweep_tradeoff("k", bad, make, c, ObservationSpec{}), ValidationError);
  const std::vector<double> one = {0.5};
  EXPECT_THROW(sweep_tradeoff("k", one, make, c, ObservationSpec{}), ValidationError);
}

TEST(Serialization, CsvAndJson) {
  const auto c = corpus(1000);
  const auto standard = evaluate_policy(StaticPolicy(StaticKind::standard_only), c, ObservationSpec{});
  const auto relaxed = evaluate_policy(StaticPolicy(StaticKind::relaxed_only), c, ObservationSpec{}, {}, &standard);
  const std::vector<MetricsReport> rows = {standard, relaxed};
  const std::string csv = to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header());
  EXPECT_EQ(csv_header(),
            "policy,knob,n,early_ep_rate,tm95,dtm95_99,accuracy,precision,recall,f1,relaxed_fraction,"
            "early_ep_rate_change,tm95_change,dtm95_99_change");
  EXPECT_NE(to_csv_row(standard).find(",NA,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  const auto back = report_from_json(to_json(relaxed));
  EXPECT_EQ(to_json(back), to_json(relaxed));
  EXPECT_EQ(back.precision, relaxed.precision);
  EXPECT_EQ(back.relative->tm95_change, relaxed.relative->tm95_change);
  EXPECT_EQ(format_number(1.0 / 3.0, 6), "0.333333");
  EXPECT_EQ(format_number(-0.0, 2), "0.00");
}

TEST(LatencyStats, IntegerRanksKeepTiesInsideTheTrim) {
  // n = 21 puts P95 exactly on the 20th order statistic.
  std::vector<double> xs(21);
  for (int i = 0; i < 21; ++i) xs[i] = i < 19 ? 100.0 : 500.0;
  std::vector<double> sorted = xs;
  EXPECT_EQ(percentile_sorted(sorted, 0.95), 500.0);
  EXPECT_DOUBLE_EQ(tm95(xs), (19 * 100.0 + 2 * 500.0) / 21.0);
  for (std::size_t n = 2; n < 3000; ++n) {
    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) ramp[i] = static_cast<double>(i / 3);
    EXPECT_NEAR(percentile_sorted(ramp, 0.95), ts::brute_percentile(ramp, 95), 1e-9) << n;
    EXPECT_NEAR(percentile_sorted(ramp, 0.99), ts::brute_percentile(ramp, 99), 1e-9) << n;
    EXPECT_EQ(tm95(ramp), ts::brute_tm95(ramp)) << n;
  }
}
