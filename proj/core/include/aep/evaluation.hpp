#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aep/environment.hpp"
#include "aep/policies.hpp"
#include "aep/types.hpp"

namespace aep {

/// Percentile by linear interpolation between order statistics ("type 7"):
/// h = (n - 1) q, value = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
/// `sorted` must be ascending and nonempty; q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

/// Mean of the values at or below the 95th percentile.
double tm95(std::span<const double> latencies);

/// Mean of the values v with P95 <= v <= P99. Throws InsufficientSampleError
/// when no value falls in the band.
double dtm95_99(std::span<const double> latencies);

/// 100 * (#cutoff) / n.
double early_ep_rate(std::span<const EndpointOutcome> outcomes);

/// Classifier metrics in percent; the positive class is Relaxed / Class1.
/// Precision is nullopt when nothing is predicted positive, recall when no
/// label is positive, F1 when either is missing (0 when both are 0).
struct ClassifierMetrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

ClassifierMetrics classifier_metrics(std::span<const Action> predictions, std::span<const Class> labels);

/// Percent changes against the Standard Only baseline.
struct RelativeDeltas {
  std::optional<double> early_ep_rate_change;  // nullopt when the baseline rate is 0
  double tm95_change = 0.0;
  std::optional<double> dtm95_99_change;
};

struct MetricsReport {
  std::string policy;
  std::size_t n = 0;
  double early_ep_rate = 0.0;  // percent
  double tm95 = 0.0;           // ms
  std::optional<double> dtm95_99;  // ms; nullopt when the band is empty
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  double relaxed_fraction = 0.0;  // percent of utterances sent to Relaxed
  std::optional<RelativeDeltas> relative;
};

struct EvaluationOptions {
  /// Latency statistics over every utterance (true) or only those that were
  /// not cut off (false).
  bool include_cutoff_latencies = true;
};

RelativeDeltas relative_to(const MetricsReport& report, const MetricsReport& baseline);

/// Aggregates metrics for already decided actions.
MetricsReport summarize(std::string policy_name, std::span<const Utterance> corpus,
                        std::span<const Action> actions, const EvaluationOptions& options = {});

/// Runs the policy on observe()-filtered features of every utterance,
/// decodes the chosen configuration, and aggregates. When `baseline` is
/// given the relative deltas are filled in.
MetricsReport evaluate_policy(const Policy& policy, std::span<const Utterance> corpus,
                              const ObservationSpec& observation, const EvaluationOptions& options = {},
                              const MetricsReport* baseline = nullptr);

struct TradeoffPoint {
  double knob = 0.0;
  MetricsReport report;
};

struct TradeoffCurve {
  std::string knob_name;
  std::vector<TradeoffPoint> points;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(double knob)>;

/// One evaluation per knob value. Knob values must be strictly monotone and
/// at least two.
TradeoffCurve sweep_tradeoff(std::string knob_name, std::span<const double> knobs,
                             const PolicyFactory& make_policy, std::span<const Utterance> corpus,
                             const ObservationSpec& observation, const EvaluationOptions& options = {},
                             const MetricsReport* baseline = nullptr);

/// Threshold sweep for a trained classifier; probabilities are computed once.
TradeoffCurve sweep_threshold(const SupervisedClassifier& classifier, std::span<const double> taus,
                              std::span<const Utterance> corpus, const ObservationSpec& observation,
                              const EvaluationOptions& options = {},
                              const MetricsReport* baseline = nullptr);

/// Encoded observe() output for every utterance (rows follow the corpus).
Matrix observed_features(std::span<const Utterance> corpus, const ObservationSpec& observation);

// CSV columns, in order:
//   policy,knob,n,early_ep_rate,tm95,dtm95_99,accuracy,precision,recall,f1,
//   relaxed_fraction,early_ep_rate_change,tm95_change,dtm95_99_change
// Missing values are written as NA; the knob column is empty for single reports.
std::string csv_header();
std::string to_csv_row(const MetricsReport& report, std::optional<double> knob = std::nullopt);
std::string to_csv(std::span<const MetricsReport> reports);
std::string to_csv(const TradeoffCurve& curve);

std::string to_json(const MetricsReport& report);
std::string to_json(const TradeoffCurve& curve);
MetricsReport report_from_json(std::string_view text);
TradeoffCurve curve_from_json(std::string_view text);

/// Fixed-precision number formatting used by all text outputs.
std::string format_number(double v, int decimals = 4);

}  // namespace aep
