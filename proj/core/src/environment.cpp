#include "aep/environment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aep/error.hpp"
#include "aep/random.hpp"

namespace aep {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double standard_normal_quantile(double q) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (standard_normal_cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// E[sigmoid(a s + b)], s ~ N(0,1), composite Simpson on [-12, 12].
double expected_cutoff_rate(double steepness, double intercept) {
  constexpr int kIntervals = 4800;
  constexpr double kLo = -12.0;
  constexpr double kHi = 12.0;
  const double h = (kHi - kLo) / kIntervals;
  const double norm = 1.0 / std::sqrt(2.0 * M_PI);
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double s = kLo + h * i;
    const double f = sigmoid(steepness * s + intercept) * norm * std::exp(-0.5 * s * s);
    const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  return acc * h / 3.0;
}

// informativeness-weighted mix of the slowness signal and unit noise
double mix(double weight, double slowness, Rng& rng) {
  const double noise = rng.normal();
  return weight * slowness + std::sqrt(std::max(0.0, 1.0 - weight * weight)) * noise;
}

constexpr std::uint64_t kObservationStream = 0x6f62736572766531ULL;

}  // namespace

std::string_view to_string(Action a) { return a == Action::relaxed ? "relaxed" : "standard"; }
std::string_view to_string(Class c) { return c == Class::class1 ? "class1" : "class0"; }

Class derive_label(const EndpointOutcome& standard_outcome) noexcept {
  return standard_outcome.cutoff ? Class::class1 : Class::class0;
}

std::string_view to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::audio: return "audio";
    case FeatureGroup::hypothesis: return "hypothesis";
    case FeatureGroup::pause_duration: return "pause_duration";
    case FeatureGroup::wakeword_duration: return "wakeword_duration";
    case FeatureGroup::pitch: return "pitch";
    case FeatureGroup::intent_domain: return "intent_domain";
  }
  return "unknown";
}

FeatureGroup parse_feature_group(std::string_view name) {
  for (FeatureGroup g : kAllFeatureGroups) {
    if (to_string(g) == name) return g;
  }
  throw ValidationError("unknown feature group '" + std::string(name) + "'");
}

std::vector<double> FeatureVector::encode() const {
  std::vector<double> out(dims().encoded());
  encode_into(out);
  return out;
}

void FeatureVector::encode_into(std::span<double> out) const {
  if (out.size() != dims().encoded()) throw ShapeError("encode_into: output span has wrong length");
  auto it = out.begin();
  it = std::copy(audio.begin(), audio.end(), it);
  it = std::copy(hypothesis.begin(), hypothesis.end(), it);
  *it++ = pause_duration_ms / 1000.0;
  *it++ = wakeword_duration_ms / 1000.0;
  it = std::copy(pitch.begin(), pitch.end(), it);
  std::copy(intent_domain.begin(), intent_domain.end(), it);
}

void FeatureVector::zero_group(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::audio: std::fill(audio.begin(), audio.end(), 0.0); break;
    case FeatureGroup::hypothesis: std::fill(hypothesis.begin(), hypothesis.end(), 0.0); break;
    case FeatureGroup::pause_duration: pause_duration_ms = 0.0; break;
    case FeatureGroup::wakeword_duration: wakeword_duration_ms = 0.0; break;
    case FeatureGroup::pitch: std::fill(pitch.begin(), pitch.end(), 0.0); break;
    case FeatureGroup::intent_domain:
      std::fill(intent_domain.begin(), intent_domain.end(), 0.0);
      break;
  }
}

std::optional<std::size_t> FeatureVector::intent_index() const {
  for (std::size_t i = 0; i < intent_domain.size(); ++i) {
    if (intent_domain[i] == 1.0) return i;
  }
  return std::nullopt;
}

void GeneratorConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(target_standard_cutoff_rate)) {
    throw ConfigError("target_standard_cutoff_rate must lie in (0,1)");
  }
  if (!(target_dual_cutoff_rate >= 0.0 && target_dual_cutoff_rate < 1.0)) {
    throw ConfigError("target_dual_cutoff_rate must lie in [0,1)");
  }
  if (target_dual_cutoff_rate > target_standard_cutoff_rate) {
    throw ConfigError("infeasible rates: dual cutoff rate exceeds standard cutoff rate");
  }
  if (!(cutoff_steepness > 0.0) || !std::isfinite(cutoff_steepness)) {
    throw ConfigError("cutoff_steepness must be positive");
  }
  if (!(latency_median_ms > 0.0) || !(latency_log_sigma >= 0.0)) {
    throw ConfigError("latency distribution parameters must be positive");
  }
  if (!(relaxed_penalty_shift_ms >= 0.0) || !(relaxed_penalty_mean_ms >= relaxed_penalty_shift_ms)) {
    throw ConfigError("relaxed penalty needs 0 <= shift <= mean");
  }
  if (!(pause_median_ms > 0.0) || !(wakeword_median_ms > 0.0) || !(pause_log_scale >= 0.0) ||
      !(wakeword_log_scale >= 0.0)) {
    throw ConfigError("duration feature parameters must be positive");
  }
  if (dims.intent_domains < 1) throw ConfigError("need at least one intent domain");
  for (double w : informativeness) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("feature informativeness must lie in [0,1]");
  }
}

double solve_cutoff_intercept(double steepness, double target_rate) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    throw ConfigError("cutoff rate target must lie in (0,1)");
  }
  double lo = -200.0;
  double hi = 200.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (expected_cutoff_rate(steepness, mid) < target_rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

UtteranceGenerator::UtteranceGenerator(GeneratorConfig config) : config_(std::move(config)) {
  config_.validate();
  intercept_ = solve_cutoff_intercept(config_.cutoff_steepness, config_.target_standard_cutoff_rate);
  dual_given_standard_ = config_.target_dual_cutoff_rate / config_.target_standard_cutoff_rate;
  const auto k = config_.dims.intent_domains;
  for (std::size_t i = 1; i < k; ++i) {
    intent_thresholds_.push_back(standard_normal_quantile(static_cast<double>(i) / static_cast<double>(k)));
  }
}

Utterance UtteranceGenerator::make(std::uint64_t index) const {
  const GeneratorConfig& c = config_;
  Rng rng(mix_seed(c.seed, index));
  Utterance u;
  u.id = index;
  const double slowness = rng.normal();
  u.latent_slowness = slowness;

  // Draw order is fixed; every branch consumes the same randomness.
  const bool cut_standard = rng.uniform() < sigmoid(c.cutoff_steepness * slowness + intercept_);
  const bool cut_both = rng.uniform() < dual_given_standard_;
  const double base = c.latency_median_ms * std::exp(c.latency_log_sigma * rng.normal());
  const double penalty =
      c.relaxed_penalty_shift_ms + rng.exponential(c.relaxed_penalty_mean_ms - c.relaxed_penalty_shift_ms);

  u.outcome_standard.latency_ms = static_cast<std::int32_t>(std::lround(base));
  u.outcome_standard.cutoff = cut_standard;
  u.outcome_relaxed.latency_ms =
      u.outcome_standard.latency_ms + static_cast<std::int32_t>(std::lround(penalty));
  u.outcome_relaxed.cutoff = cut_standard && cut_both;
  u.label = derive_label(u.outcome_standard);

  FeatureVector& f = u.features;
  auto fill = [&](std::vector<double>& group, std::size_t n, FeatureGroup g) {
    group.resize(n);
    for (double& v : group) v = mix(c.informativeness_of(g), slowness, rng);
  };
  fill(f.audio, c.dims.audio, FeatureGroup::audio);
  fill(f.hypothesis, c.dims.hypothesis, FeatureGroup::hypothesis);
  f.pause_duration_ms =
      c.pause_median_ms *
      std::exp(c.pause_log_scale * mix(c.informativeness_of(FeatureGroup::pause_duration), slowness, rng));
  f.wakeword_duration_ms =
      c.wakeword_median_ms *
      std::exp(c.wakeword_log_scale *
               mix(c.informativeness_of(FeatureGroup::wakeword_duration), slowness, rng));
  fill(f.pitch, c.dims.pitch, FeatureGroup::pitch);

  const double intent_score = mix(c.informativeness_of(FeatureGroup::intent_domain), slowness, rng);
  const auto domain = static_cast<std::size_t>(
      std::upper_bound(intent_thresholds_.begin(), intent_thresholds_.end(), intent_score) -
      intent_thresholds_.begin());
  f.intent_domain.assign(c.dims.intent_domains, 0.0);
  f.intent_domain[domain] = 1.0;
  return u;
}

std::optional<Utterance> UtteranceStream::next() {
  if (position_ >= generator_.config().n_utterances) return std::nullopt;
  return generator_.make(position_++);
}

std::vector<Utterance> generate(const GeneratorConfig& config) {
  UtteranceGenerator generator(config);
  std::vector<Utterance> out;
  out.reserve(config.n_utterances);
  for (std::size_t i = 0; i < config.n_utterances; ++i) out.push_back(generator.make(i));
  return out;
}

const EndpointOutcome& decode(const Utterance& utterance, Action chosen) noexcept {
  return chosen == Action::relaxed ? utterance.outcome_relaxed : utterance.outcome_standard;
}

void ObservationSpec::validate() const {
  if (!(visible_fraction > 0.0 && visible_fraction <= 100.0)) {
    throw ValidationError("visible fraction must lie in (0,100]");
  }
  if (mode == ObservationMode::first_segment) {
    if (!(segment_mean > 0.0 && segment_mean <= 100.0) || !(segment_spread >= 0.0)) {
      throw ValidationError("first-segment fraction parameters out of range");
    }
  }
}

double visibility_correlation(double visible_fraction) {
  if (!(visible_fraction > 0.0 && visible_fraction <= 100.0)) {
    throw ValidationError("visible fraction must lie in (0,100]");
  }
  return std::sqrt(visible_fraction / 100.0);
}

double visible_fraction_for(const Utterance& utterance, const ObservationSpec& spec) {
  if (spec.mode == ObservationMode::fraction_known) return spec.visible_fraction;
  Rng rng(mix_seed(spec.noise_seed, kObservationStream, utterance.id));
  const double x = spec.segment_mean + spec.segment_spread * rng.normal();
  return std::clamp(x, 5.0, 100.0);
}

FeatureVector observe(const Utterance& utterance, const ObservationSpec& spec) {
  spec.validate();
  FeatureVector f = utterance.features;
  const double x = visible_fraction_for(utterance, spec);
  if (x < 100.0) {
    const double rho = visibility_correlation(x);
    const double noise_scale = std::sqrt(1.0 - rho * rho);
    Rng rng(mix_seed(spec.noise_seed, kObservationStream + 1, utterance.id));
    for (double& v : f.audio) v = rho * v + noise_scale * rng.normal();
    for (double& v : f.hypothesis) v = rho * v + noise_scale * rng.normal();
  }
  for (FeatureGroup g : kAllFeatureGroups) {
    if (!spec.enabled_groups.contains(g)) f.zero_group(g);
  }
  return f;
}

void RewardSpec::validate() const {
  if (!std::isfinite(alpha_latency) || !std::isfinite(beta_cutoff)) {
    throw ValidationError("reward weights must be finite");
  }
  if (alpha_latency < 0.0 || beta_cutoff < 0.0) throw ValidationError("reward weights must be >= 0");
  if (alpha_latency == 0.0 && beta_cutoff == 0.0) {
    throw ValidationError("reward weights must not both be zero");
  }
}

double reward(const EndpointOutcome& outcome, const RewardSpec& spec) {
  return -(spec.alpha_latency * static_cast<double>(outcome.latency_ms) +
           spec.beta_cutoff * (outcome.cutoff ? 1.0 : 0.0));
}

}  // namespace aep
