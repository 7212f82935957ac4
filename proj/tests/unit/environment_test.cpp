#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "aep/environment.hpp"
#include "aep/error.hpp"

using namespace aep;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

GeneratorConfig small_config(std::size_t n = 20000, std::uint64_t seed = 5) {
  GeneratorConfig c;
  c.n_utterances = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CutoffIntercept, HitsTargetMarginalRate) {
  // Midpoint-rule integral of sigmoid(a s + b) against the standard normal density.
  for (double a : {1.0, 6.0}) {
    for (double target : {0.025, 0.2}) {
      const double b = solve_cutoff_intercept(a, target);
      double sum = 0.0;
      const double h = 1e-3;
      for (double s = -12.0 + h / 2; s < 12.0; s += h) {
        sum += h * std::exp(-0.5 * s * s) / std::sqrt(2 * M_PI) / (1.0 + std::exp(-(a * s + b)));
      }
      EXPECT_NEAR(sum, target, 1e-7) << "a=" << a << " target=" << target;
    }
  }
}

TEST(Generator, DefaultCalibration) {
  const auto corpus = generate(GeneratorConfig{});
  ASSERT_EQ(corpus.size(), 100000u);
  std::size_t standard = 0, dual = 0;
  for (const auto& u : corpus) {
    standard += u.outcome_standard.cutoff;
    dual += u.outcome_relaxed.cutoff;
  }
  EXPECT_NEAR(standard / 1e5, 0.025, 0.003);
  EXPECT_LE(dual / 1e5, 0.0005);
}

TEST(Generator, OutcomeInvariants) {
  const auto corpus = generate(small_config());
  double extra = 0.0;
  for (const auto& u : corpus) {
    EXPECT_GE(u.outcome_relaxed.latency_ms, u.outcome_standard.latency_ms + 300);
    if (u.outcome_relaxed.cutoff) EXPECT_TRUE(u.outcome_standard.cutoff);
    EXPECT_EQ(u.label, derive_label(u.outcome_standard));
    EXPECT_EQ(u.label == Class::class1, u.outcome_standard.cutoff);
    EXPECT_GT(u.outcome_standard.latency_ms, 0);
    extra += u.outcome_relaxed.latency_ms - u.outcome_standard.latency_ms;
  }
  EXPECT_NEAR(extra / static_cast<double>(corpus.size()), 600.0, 15.0);
}

TEST(Generator, MakeIsPureAndMatchesStream) {
  const auto cfg = small_config(50);
  const UtteranceGenerator gen(cfg);
  UtteranceStream stream(cfg);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto u = stream.next();
    ASSERT_TRUE(u.has_value());
    const auto again = gen.make(i);
    EXPECT_EQ(u->features, again.features);
    EXPECT_EQ(u->outcome_standard, again.outcome_standard);
    EXPECT_EQ(u->outcome_relaxed, again.outcome_relaxed);
    EXPECT_EQ(u->id, i);
  }
  EXPECT_FALSE(stream.next().has_value());
  EXPECT_EQ(stream.remaining(), 0u);
}

TEST(Generator, SeedsChangeTheCorpus) {
  const auto a = generate(small_config(10, 1));
  const auto b = generate(small_config(10, 2));
  EXPECT_NE(a[0].features, b[0].features);
}

TEST(Generator, FeatureInformativenessMatchesConfiguredWeights) {
  const auto corpus = generate(small_config(40000));
  std::vector<double> s, audio, pitch;
  for (const auto& u : corpus) {
    s.push_back(*u.latent_slowness);
    audio.push_back(u.features.audio[0]);
    pitch.push_back(u.features.pitch[0]);
  }
  EXPECT_NEAR(correlation(s, audio), 0.65, 0.02);
  EXPECT_NEAR(correlation(s, pitch), 0.1, 0.02);
}

TEST(Generator, EncodingLayout) {
  const auto u = generate(small_config(3))[1];
  const auto x = u.features.encode();
  ASSERT_EQ(x.size(), 46u);
  EXPECT_DOUBLE_EQ(x[0], u.features.audio[0]);
  EXPECT_DOUBLE_EQ(x[32], u.features.pause_duration_ms / 1000.0);
  EXPECT_DOUBLE_EQ(x[33], u.features.wakeword_duration_ms / 1000.0);
  EXPECT_DOUBLE_EQ(std::accumulate(x.begin() + 38, x.end(), 0.0), 1.0);
  ASSERT_TRUE(u.features.intent_index().has_value());
  EXPECT_DOUBLE_EQ(x[38 + *u.features.intent_index()], 1.0);
  std::vector<double> wrong(45);
  EXPECT_THROW(u.features.encode_into(wrong), ShapeError);
}

TEST(Generator, IntentDomainsRoughlyBalanced) {
  const auto corpus = generate(small_config(16000));
  std::vector<int> counts(8, 0);
  for (const auto& u : corpus) ++counts[*u.features.intent_index()];
  for (int c : counts) EXPECT_NEAR(c / 16000.0, 0.125, 0.015);
}

TEST(Generator, ValidationRejectsBadConfigs) {
  GeneratorConfig c;
  c.target_dual_cutoff_rate = 0.05;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.informativeness_of(FeatureGroup::audio) = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.target_standard_cutoff_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.target_dual_cutoff_rate = 0.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(Generator, ZeroDualRateNeverDoubleCuts) {
  auto c = small_config(20000);
  c.target_dual_cutoff_rate = 0.0;
  for (const auto& u : generate(c)) EXPECT_FALSE(u.outcome_relaxed.cutoff);
}

TEST(Decode, ReturnsTheChosenOutcome) {
  const auto u = generate(small_config(1))[0];
  EXPECT_EQ(decode(u, Action::standard), u.outcome_standard);
  EXPECT_EQ(decode(u, Action::relaxed), u.outcome_relaxed);
}

TEST(FeatureGroups, ParseAndSets) {
  for (FeatureGroup g : kAllFeatureGroups) EXPECT_EQ(parse_feature_group(to_string(g)), g);
  EXPECT_THROW(parse_feature_group("volume"), ValidationError);
  auto set = FeatureGroupSet::only(FeatureGroup::pitch);
  EXPECT_TRUE(set.contains(FeatureGroup::pitch));
  EXPECT_FALSE(set.contains(FeatureGroup::audio));
  set.erase(FeatureGroup::pitch);
  EXPECT_TRUE(set.empty());
  EXPECT_TRUE(FeatureGroupSet::all().is_all());
  EXPECT_TRUE(is_time_dependent(FeatureGroup::audio));
  EXPECT_FALSE(is_time_dependent(FeatureGroup::intent_domain));
}

TEST(Observation, FullVisibilityIsIdentity) {
  const auto u = generate(small_config(5))[2];
  const ObservationSpec spec;
  EXPECT_TRUE(spec.is_identity());
  EXPECT_EQ(observe(u, spec), u.features);
}

TEST(Observation, VisibilityCorrelation) {
  EXPECT_DOUBLE_EQ(visibility_correlation(100.0), 1.0);
  EXPECT_DOUBLE_EQ(visibility_correlation(25.0), 0.5);
  EXPECT_THROW(visibility_correlation(0.0), ValidationError);
}

TEST(Observation, PartialVisibilityDegradesOnlyTimeDependentGroups) {
  const auto corpus = generate(small_config(20000));
  ObservationSpec spec;
  spec.visible_fraction = 25.0;
  std::vector<double> s, audio;
  for (const auto& u : corpus) {
    const auto o = observe(u, spec);
    EXPECT_EQ(o.pitch, u.features.pitch);
    EXPECT_EQ(o.pause_duration_ms, u.features.pause_duration_ms);
    EXPECT_EQ(o.intent_domain, u.features.intent_domain);
    s.push_back(*u.latent_slowness);
    audio.push_back(o.audio[0]);
  }
  EXPECT_NEAR(correlation(s, audio), 0.5 * 0.65, 0.025);
}

TEST(Observation, ReentrantAndSeeded) {
  const auto u = generate(small_config(3))[0];
  ObservationSpec spec;
  spec.visible_fraction = 40.0;
  EXPECT_EQ(observe(u, spec), observe(u, spec));
  auto other = spec;
  other.noise_seed = 99;
  EXPECT_NE(observe(u, spec).audio, observe(u, other).audio);
}

TEST(Observation, DisabledGroupsAreZeroed) {
  const auto u = generate(small_config(3))[0];
  ObservationSpec spec;
  spec.enabled_groups = FeatureGroupSet::only(FeatureGroup::pause_duration);
  const auto o = observe(u, spec);
  EXPECT_EQ(o.pause_duration_ms, u.features.pause_duration_ms);
  EXPECT_EQ(o.wakeword_duration_ms, 0.0);
  for (double v : o.audio) EXPECT_EQ(v, 0.0);
  for (double v : o.intent_domain) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(o.dims(), u.features.dims());
}

TEST(Observation, FirstSegmentFractionsAreClampedAndCentred) {
  const auto corpus = generate(small_config(10000));
  ObservationSpec spec;
  spec.mode = ObservationMode::first_segment;
  double sum = 0.0;
  for (const auto& u : corpus) {
    const double x = visible_fraction_for(u, spec);
    EXPECT_GE(x, 5.0);
    EXPECT_LE(x, 100.0);
    sum += x;
  }
  EXPECT_NEAR(sum / 10000.0, 30.0, 0.5);
}

TEST(Observation, ValidateRejectsBadFractions) {
  ObservationSpec spec;
  spec.visible_fraction = 0.0;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec.visible_fraction = 101.0;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Reward, LatencyAndCutoffTerms) {
  const RewardSpec spec;
  EXPECT_DOUBLE_EQ(reward({350, false}, spec), -0.35);
  EXPECT_DOUBLE_EQ(reward({350, true}, spec), -10.35);
  EXPECT_THROW((RewardSpec{0.0, 0.0}.validate()), ValidationError);
  EXPECT_THROW((RewardSpec{-1.0, 1.0}.validate()), ValidationError);
}
