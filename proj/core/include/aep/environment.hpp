#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aep/types.hpp"

namespace aep {

struct EndpointOutcome {
  std::int32_t latency_ms = 0;
  bool cutoff = false;

  friend bool operator==(const EndpointOutcome&, const EndpointOutcome&) = default;
};

/// Class1 iff the standard configuration cut the utterance off.
Class derive_label(const EndpointOutcome& standard_outcome) noexcept;

enum class FeatureGroup { audio, hypothesis, pause_duration, wakeword_duration, pitch, intent_domain };

inline constexpr std::size_t kFeatureGroupCount = 6;
inline constexpr std::array<FeatureGroup, kFeatureGroupCount> kAllFeatureGroups = {
    FeatureGroup::audio,          FeatureGroup::hypothesis, FeatureGroup::pause_duration,
    FeatureGroup::wakeword_duration, FeatureGroup::pitch,   FeatureGroup::intent_domain};

std::string_view to_string(FeatureGroup g);
/// Throws ValidationError for unknown names.
FeatureGroup parse_feature_group(std::string_view name);

/// True for groups that accumulate over the utterance and are degraded when
/// only part of it has been heard.
constexpr bool is_time_dependent(FeatureGroup g) noexcept {
  return g == FeatureGroup::audio || g == FeatureGroup::hypothesis;
}

class FeatureGroupSet {
 public:
  constexpr FeatureGroupSet() = default;

  static constexpr FeatureGroupSet all() {
    FeatureGroupSet s;
    s.bits_ = (1u << kFeatureGroupCount) - 1;
    return s;
  }
  static constexpr FeatureGroupSet only(FeatureGroup g) {
    FeatureGroupSet s;
    s.insert(g);
    return s;
  }

  constexpr void insert(FeatureGroup g) { bits_ |= bit(g); }
  constexpr void erase(FeatureGroup g) { bits_ &= ~bit(g); }
  constexpr bool contains(FeatureGroup g) const { return (bits_ & bit(g)) != 0; }
  constexpr bool is_all() const { return bits_ == all().bits_; }
  constexpr bool empty() const { return bits_ == 0; }

  friend constexpr bool operator==(FeatureGroupSet, FeatureGroupSet) = default;

 private:
  static constexpr unsigned bit(FeatureGroup g) { return 1u << static_cast<unsigned>(g); }
  unsigned bits_ = 0;
};

struct FeatureDims {
  std::size_t audio = 16;
  std::size_t hypothesis = 16;
  std::size_t pitch = 4;
  std::size_t intent_domains = 8;

  /// audio + hypothesis + 2 durations + pitch + one-hot intent.
  std::size_t encoded() const noexcept { return audio + hypothesis + 2 + pitch + intent_domains; }

  friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

/// Per-utterance features, one field per input group. A masked group is
/// exactly zero (an all-zero one-hot for the intent domain).
struct FeatureVector {
  std::vector<double> audio;
  std::vector<double> hypothesis;
  double pause_duration_ms = 0.0;
  double wakeword_duration_ms = 0.0;
  std::vector<double> pitch;
  std::vector<double> intent_domain;  // one-hot

  FeatureDims dims() const noexcept {
    return {audio.size(), hypothesis.size(), pitch.size(), intent_domain.size()};
  }

  /// Network input: audio, hypothesis, pause (s), wakeword (s), pitch, intent.
  std::vector<double> encode() const;
  void encode_into(std::span<double> out) const;

  void zero_group(FeatureGroup g);
  /// Index of the hot intent domain, or nullopt when the group is masked.
  std::optional<std::size_t> intent_index() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Utterance {
  std::uint64_t id = 0;
  /// Unobservable; absent for utterances loaded from logs.
  std::optional<double> latent_slowness;
  FeatureVector features;
  EndpointOutcome outcome_standard;
  EndpointOutcome outcome_relaxed;
  Class label = Class::class0;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t n_utterances = 100000;
  double target_standard_cutoff_rate = 0.025;
  double target_dual_cutoff_rate = 0.0002;
  /// Slope of the cutoff logit in the latent slowness.
  double cutoff_steepness = 6.0;

  double latency_median_ms = 350.0;
  double latency_log_sigma = 0.5;
  /// Relaxed latency = standard latency + shift + Exponential(mean - shift).
  double relaxed_penalty_shift_ms = 300.0;
  double relaxed_penalty_mean_ms = 600.0;

  double pause_median_ms = 400.0;
  double pause_log_scale = 0.4;
  double wakeword_median_ms = 600.0;
  double wakeword_log_scale = 0.2;

  FeatureDims dims;
  /// Indexed by FeatureGroup; 1.0 makes the group a deterministic function
  /// of the latent slowness, 0.0 makes it pure noise.
  std::array<double, kFeatureGroupCount> informativeness = {0.65, 0.65, 0.4, 0.05, 0.1, 0.5};

  double& informativeness_of(FeatureGroup g) { return informativeness[static_cast<std::size_t>(g)]; }
  double informativeness_of(FeatureGroup g) const {
    return informativeness[static_cast<std::size_t>(g)];
  }

  /// Throws ConfigError when the configuration is infeasible.
  void validate() const;
};

/// Intercept b such that E[sigmoid(steepness * s + b)] = target_rate for
/// s ~ N(0, 1).
double solve_cutoff_intercept(double steepness, double target_rate);

/// Produces utterances as a pure function of (config, index); safe to shard.
class UtteranceGenerator {
 public:
  explicit UtteranceGenerator(GeneratorConfig config);

  const GeneratorConfig& config() const noexcept { return config_; }
  double cutoff_intercept() const noexcept { return intercept_; }
  Utterance make(std::uint64_t index) const;

 private:
  GeneratorConfig config_;
  double intercept_ = 0.0;
  double dual_given_standard_ = 0.0;
  std::vector<double> intent_thresholds_;
};

/// Sequential view over a generated corpus.
class UtteranceStream {
 public:
  explicit UtteranceStream(GeneratorConfig config) : generator_(std::move(config)) {}

  std::optional<Utterance> next();
  std::size_t remaining() const noexcept { return generator_.config().n_utterances - position_; }

 private:
  UtteranceGenerator generator_;
  std::size_t position_ = 0;
};

std::vector<Utterance> generate(const GeneratorConfig& config);

/// Realized outcome of the chosen configuration; a pure lookup.
const EndpointOutcome& decode(const Utterance& utterance, Action chosen) noexcept;

enum class ObservationMode { fraction_known, first_segment };

struct ObservationSpec {
  /// X: percent of the utterance heard before deciding, in (0, 100].
  double visible_fraction = 100.0;
  FeatureGroupSet enabled_groups = FeatureGroupSet::all();
  ObservationMode mode = ObservationMode::fraction_known;
  /// first_segment: X ~ clamp(N(segment_mean, segment_spread^2), 5, 100) per utterance.
  double segment_mean = 30.0;
  double segment_spread = 10.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
  bool is_identity() const noexcept {
    return mode == ObservationMode::fraction_known && visible_fraction == 100.0 &&
           enabled_groups.is_all();
  }
};

/// Correlation between a fully heard time-dependent feature and what is
/// visible after X percent: sqrt(X / 100).
double visibility_correlation(double visible_fraction);

/// Visible fraction used for this utterance under `spec`.
double visible_fraction_for(const Utterance& utterance, const ObservationSpec& spec);

/// Features as seen by a policy. Reentrant: the degradation noise is derived
/// from (spec.noise_seed, utterance.id).
FeatureVector observe(const Utterance& utterance, const ObservationSpec& spec);

struct RewardSpec {
  double alpha_latency = 0.001;  // reward per ms
  double beta_cutoff = 10.0;     // reward per cutoff

  void validate() const;
  friend bool operator==(const RewardSpec&, const RewardSpec&) = default;
};

/// -(alpha * latency_ms + beta * [cutoff]); higher is better.
double reward(const EndpointOutcome& outcome, const RewardSpec& spec);

}  // namespace aep
