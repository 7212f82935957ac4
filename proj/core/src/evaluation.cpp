#include "aep/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "aep/error.hpp"
#include "json_detail.hpp"

namespace aep {
namespace {

std::vector<double> sorted_copy(std::span<const double> values) {
  if (values.empty()) throw ValidationError("latency statistics need a nonempty sample");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("latency statistics need finite values");
  }
  std::sort(v.begin(), v.end());
  return v;
}

std::optional<double> percent_change(double value, double base) {
  if (base == 0.0) return std::nullopt;
  return 100.0 * (value - base) / base;
}

std::string na_or(const std::optional<double>& v) { return v ? format_number(*v, 6) : "NA"; }

}  // namespace

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile level must lie in [0,1]");
  double h = q * static_cast<double>(sorted.size() - 1);
  // Levels such as 0.95 are not exact in binary; a rank within rounding error
  // of an integer is that order statistic, so ties there stay inside the trim.
  if (const double nearest = std::round(h); std::abs(h - nearest) <= 1e-9 * std::max(1.0, h)) h = nearest;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double tm95(std::span<const double> latencies) {
  const auto v = sorted_copy(latencies);
  const double p95 = percentile_sorted(v, 0.95);
  double sum = 0.0;
  std::size_t count = 0;
  for (double x : v) {
    if (x > p95) break;
    sum += x;
    ++count;
  }
  return sum / static_cast<double>(count);
}

double dtm95_99(std::span<const double> latencies) {
  const auto v = sorted_copy(latencies);
  const double p95 = percentile_sorted(v, 0.95);
  const double p99 = percentile_sorted(v, 0.99);
  double sum = 0.0;
  std::size_t count = 0;
  for (double x : v) {
    if (x > p99) break;
    if (x >= p95) {
      sum += x;
      ++count;
    }
  }
  if (count == 0) {
    throw InsufficientSampleError("dtm95_99: no value lies in the [P95, P99] band (n=" +
                                  std::to_string(v.size()) + ")");
  }
  return sum / static_cast<double>(count);
}

double early_ep_rate(std::span<const EndpointOutcome> outcomes) {
  if (outcomes.empty()) throw ValidationError("early_ep_rate of an empty sample");
  const auto cut = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.cutoff; });
  return 100.0 * static_cast<double>(cut) / static_cast<double>(outcomes.size());
}

ClassifierMetrics classifier_metrics(std::span<const Action> predictions, std::span<const Class> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("classifier_metrics: predictions and labels differ in length");
  }
  if (predictions.empty()) throw ValidationError("classifier_metrics: empty input");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == Action::relaxed;
    const bool pos = labels[i] == Class::class1;
    if (pred && pos) ++tp;
    else if (pred && !pos) ++fp;
    else if (!pred && pos) ++fn;
    else ++tn;
  }
  ClassifierMetrics m;
  m.accuracy = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(predictions.size());
  if (tp + fp > 0) m.precision = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall) {
    const double s = *m.precision + *m.recall;
    m.f1 = s == 0.0 ? 0.0 : 2.0 * *m.precision * *m.recall / s;
  }
  return m;
}

RelativeDeltas relative_to(const MetricsReport& report, const MetricsReport& baseline) {
  RelativeDeltas d;
  d.early_ep_rate_change = percent_change(report.early_ep_rate, baseline.early_ep_rate);
  d.tm95_change = percent_change(report.tm95, baseline.tm95).value_or(0.0);
  if (report.dtm95_99 && baseline.dtm95_99) {
    d.dtm95_99_change = percent_change(*report.dtm95_99, *baseline.dtm95_99);
  }
  return d;
}

MetricsReport summarize(std::string policy_name, std::span<const Utterance> corpus,
                        std::span<const Action> actions, const EvaluationOptions& options) {
  if (corpus.size() != actions.size()) throw ValidationError("summarize: one action per utterance required");
  if (corpus.empty()) throw ValidationError("summarize: empty corpus");
  std::vector<EndpointOutcome> outcomes;
  std::vector<double> latencies;
  std::vector<Class> labels;
  outcomes.reserve(corpus.size());
  latencies.reserve(corpus.size());
  labels.reserve(corpus.size());
  std::size_t relaxed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const EndpointOutcome& o = decode(corpus[i], actions[i]);
    outcomes.push_back(o);
    labels.push_back(corpus[i].label);
    if (options.include_cutoff_latencies || !o.cutoff) latencies.push_back(o.latency_ms);
    if (actions[i] == Action::relaxed) ++relaxed;
  }
  MetricsReport r;
  r.policy = std::move(policy_name);
  r.n = corpus.size();
  r.early_ep_rate = early_ep_rate(outcomes);
  r.tm95 = tm95(latencies);
  try {
    r.dtm95_99 = dtm95_99(latencies);
  } catch (const InsufficientSampleError&) {
    r.dtm95_99.reset();
  }
  const auto cm = classifier_metrics(actions, labels);
  r.accuracy = cm.accuracy;
  r.precision = cm.precision;
  r.recall = cm.recall;
  r.f1 = cm.f1;
  r.relaxed_fraction = 100.0 * static_cast<double>(relaxed) / static_cast<double>(corpus.size());
  return r;
}

MetricsReport evaluate_policy(const Policy& policy, std::span<const Utterance> corpus,
                              const ObservationSpec& observation, const EvaluationOptions& options,
                              const MetricsReport* baseline) {
  observation.validate();
  std::vector<Action> actions;
  actions.reserve(corpus.size());
  for (const Utterance& u : corpus) {
    const auto observed = observe(u, observation).encode();
    actions.push_back(policy.decide(u, observed));
  }
  MetricsReport r = summarize(policy.name(), corpus, actions, options);
  if (baseline != nullptr) r.relative = relative_to(r, *baseline);
  return r;
}

namespace {

void check_knobs(std::span<const double> knobs) {
  if (knobs.size() < 2) throw ValidationError("a trade-off sweep needs at least two knob values");
  const bool increasing = knobs[1] > knobs[0];
  for (std::size_t i = 1; i < knobs.size(); ++i) {
    const bool ok = increasing ? knobs[i] > knobs[i - 1] : knobs[i] < knobs[i - 1];
    if (!ok) throw ValidationError("knob values must be strictly monotone");
  }
}

}  // namespace

TradeoffCurve sweep_tradeoff(std::string knob_name, std::span<const double> knobs,
                             const PolicyFactory& make_policy, std::span<const Utterance> corpus,
                             const ObservationSpec& observation, const EvaluationOptions& options,
                             const MetricsReport* baseline) {
  check_knobs(knobs);
  TradeoffCurve curve;
  curve.knob_name = std::move(knob_name);
  for (double k : knobs) {
    const auto policy = make_policy(k);
    curve.points.push_back({k, evaluate_policy(*policy, corpus, observation, options, baseline)});
  }
  return curve;
}

Matrix observed_features(std::span<const Utterance> corpus, const ObservationSpec& observation) {
  observation.validate();
  if (corpus.empty()) return {};
  const std::size_t d = corpus.front().features.dims().encoded();
  Matrix x(corpus.size(), d);
  for (std::size_t i = 0; i < corpus.size(); ++i) observe(corpus[i], observation).encode_into(x.row(i));
  return x;
}

TradeoffCurve sweep_threshold(const SupervisedClassifier& classifier, std::span<const double> taus,
                              std::span<const Utterance> corpus, const ObservationSpec& observation,
                              const EvaluationOptions& options, const MetricsReport* baseline) {
  check_knobs(taus);
  const auto probs = classifier.probabilities(observed_features(corpus, observation));
  TradeoffCurve curve;
  curve.knob_name = "tau";
  std::vector<Action> actions(corpus.size());
  for (double tau : taus) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      actions[i] = probs[i] >= tau ? Action::relaxed : Action::standard;
    }
    MetricsReport r = summarize("supervised", corpus, actions, options);
    if (baseline != nullptr) r.relative = relative_to(r, *baseline);
    curve.points.push_back({tau, std::move(r)});
  }
  return curve;
}

std::string format_number(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string csv_header() {
  return "policy,knob,n,early_ep_rate,tm95,dtm95_99,accuracy,precision,recall,f1,relaxed_fraction,"
         "early_ep_rate_change,tm95_change,dtm95_99_change";
}

std::string to_csv_row(const MetricsReport& r, std::optional<double> knob) {
  std::ostringstream out;
  out << r.policy << ',' << (knob ? format_number(*knob, 6) : "") << ',' << r.n << ','
      << format_number(r.early_ep_rate, 6) << ',' << format_number(r.tm95, 6) << ',' << na_or(r.dtm95_99)
      << ',' << format_number(r.accuracy, 6) << ',' << na_or(r.precision) << ',' << na_or(r.recall) << ','
      << na_or(r.f1) << ',' << format_number(r.relaxed_fraction, 6) << ',';
  if (r.relative) {
    out << na_or(r.relative->early_ep_rate_change) << ',' << format_number(r.relative->tm95_change, 6)
        << ',' << na_or(r.relative->dtm95_99_change);
  } else {
    out << "NA,NA,NA";
  }
  return out.str();
}

std::string to_csv(std::span<const MetricsReport> reports) {
  std::string out = csv_header() + "\n";
  for (const auto& r : reports) out += to_csv_row(r) + "\n";
  return out;
}

std::string to_csv(const TradeoffCurve& curve) {
  std::string out = csv_header() + "\n";
  for (const auto& p : curve.points) out += to_csv_row(p.report, p.knob) + "\n";
  return out;
}

namespace detail {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  json j = {
      {"policy", r.policy},
      {"n", r.n},
      {"early_ep_rate", r.early_ep_rate},
      {"tm95", r.tm95},
      {"dtm95_99", opt(r.dtm95_99)},
      {"accuracy", r.accuracy},
      {"precision", opt(r.precision)},
      {"recall", opt(r.recall)},
      {"f1", opt(r.f1)},
      {"relaxed_fraction", r.relaxed_fraction},
  };
  if (r.relative) {
    j["relative"] = {
        {"early_ep_rate_change", opt(r.relative->early_ep_rate_change)},
        {"tm95_change", r.relative->tm95_change},
        {"dtm95_99_change", opt(r.relative->dtm95_99_change)},
    };
  } else {
    j["relative"] = nullptr;
  }
  return j;
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.policy = j.at("policy").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.early_ep_rate = j.at("early_ep_rate").get<double>();
    r.tm95 = j.at("tm95").get<double>();
    r.dtm95_99 = opt_from(j, "dtm95_99");
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = opt_from(j, "precision");
    r.recall = opt_from(j, "recall");
    r.f1 = opt_from(j, "f1");
    r.relaxed_fraction = j.at("relaxed_fraction").get<double>();
    if (j.contains("relative") && !j.at("relative").is_null()) {
      const json& jr = j.at("relative");
      RelativeDeltas d;
      d.early_ep_rate_change = opt_from(jr, "early_ep_rate_change");
      d.tm95_change = jr.at("tm95_change").get<double>();
      d.dtm95_99_change = opt_from(jr, "dtm95_99_change");
      r.relative = d;
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed metrics report: ") + e.what());
  }
}

json curve_to_json(const TradeoffCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({{"knob", p.knob}, {"report", report_to_json(p.report)}});
  return {{"knob_name", curve.knob_name}, {"points", std::move(points)}};
}

TradeoffCurve curve_from_json(const json& j) {
  try {
    TradeoffCurve c;
    c.knob_name = j.at("knob_name").get<std::string>();
    for (const auto& p : j.at("points")) c.points.push_back({p.at("knob").get<double>(), report_from_json(p.at("report"))});
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed trade-off curve: ") + e.what());
  }
}

}  // namespace detail

std::string to_json(const MetricsReport& report) { return detail::report_to_json(report).dump(2); }
std::string to_json(const TradeoffCurve& curve) { return detail::curve_to_json(curve).dump(2); }

MetricsReport report_from_json(std::string_view text) {
  try {
    return detail::report_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report is not valid JSON: ") + e.what());
  }
}

TradeoffCurve curve_from_json(std::string_view text) {
  try {
    return detail::curve_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trade-off curve is not valid JSON: ") + e.what());
  }
}

}  // namespace aep
