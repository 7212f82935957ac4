// Acceptance suite: one PASS/FAIL line per criterion.
//
//   aep_acceptance            run every criterion
//   aep_acceptance 3 8        run selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aep/environment.hpp"
#include "aep/error.hpp"
#include "aep/evaluation.hpp"
#include "aep/experiment.hpp"
#include "aep/ingestion.hpp"
#include "aep/policies.hpp"
#include "gradcheck.hpp"
#include "metric_oracle.hpp"
#include "records.hpp"
#include "test_util.hpp"

using namespace aep;
namespace ex = aep::experiment;
namespace ts = aep::test_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double reduction(const MetricsReport& r) { return -r.relative->early_ep_rate_change.value_or(0.0); }

// 1. Analytic gradients against central differences on random small networks.
Outcome gradient_suite() {
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 50; ++i) {
    const auto params = ts::random_network(rng, 3, 64);
    const auto r = ts::check_gradients(params, rng, 1e-5);
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }
  return {worst <= 1e-4, fmt("50 networks, %zu parameters, max relative error %.3g (limit 1e-4)", checked, worst)};
}

// 2. Latency statistics against brute-force implementations.
Outcome metric_oracles() {
  Rng rng(77);
  double worst = 0.0;
  std::size_t empty_bands = 0;
  bool ordered = true;
  bool agree_on_empty = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(10000);
    std::vector<double> xs(n);
    std::vector<EndpointOutcome> outcomes(n);
    const bool integral = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = 350.0 * std::exp(0.6 * rng.normal());
      xs[i] = integral ? std::round(v) : v;
      outcomes[i] = {static_cast<std::int32_t>(xs[i]), rng.bernoulli(0.025)};
    }
    worst = std::max(worst, ts::rel_diff(tm95(xs), ts::brute_tm95(xs)));
    worst = std::max(worst, ts::rel_diff(early_ep_rate(outcomes), ts::brute_early_ep_rate(outcomes)));
    const auto band = ts::brute_dtm95_99(xs);
    if (band) {
      const double d = dtm95_99(xs);
      worst = std::max(worst, ts::rel_diff(d, *band));
      ordered = ordered && d >= tm95(xs);
    } else {
      ++empty_bands;
      try {
        dtm95_99(xs);
        agree_on_empty = false;
      } catch (const InsufficientSampleError&) {
      }
    }
  }
  return {worst <= 1e-9 && ordered && agree_on_empty,
          fmt("1000 samples, max relative difference %.3g (limit 1e-9), dtm95_99 >= tm95 %s, "
              "%zu empty bands both rejected %s",
              worst, ordered ? "everywhere" : "VIOLATED", empty_bands, agree_on_empty ? "yes" : "NO")};
}

// 3. Default generator calibration.
Outcome calibration() {
  GeneratorConfig g;
  g.n_utterances = 100000;
  UtteranceStream stream(g);
  std::size_t n = 0, standard = 0, dual = 0;
  while (auto u = stream.next()) {
    ++n;
    standard += u->outcome_standard.cutoff;
    dual += u->outcome_relaxed.cutoff;
  }
  const double sr = 100.0 * standard / n;
  const double dr = 100.0 * dual / n;
  return {std::abs(sr - 2.5) <= 0.3 && dr <= 0.05,
          fmt("n=%zu standard cutoff %.3f%% (2.5 +/- 0.3), dual cutoff %.3f%% (<= 0.05)", n, sr, dr)};
}

// 4. Structural reproduction of the baseline columns on a generated test split.
Outcome baseline_table() {
  const auto base = ex::preset("standard_only");
  const auto corpus = ex::prepare_corpus(base);
  auto run = [&](const char* name) { return ex::execute_run(ex::preset(name), corpus).report; };
  const auto standard = run("standard_only");
  const auto relaxed = run("relaxed_only");
  const auto oracle = run("oracle");

  std::size_t positives = 0, dual = 0;
  for (const auto& u : corpus.test) {
    positives += u.label == Class::class1;
    dual += u.outcome_relaxed.cutoff;
  }
  const double base_rate = 100.0 * positives / corpus.test.size();
  const double dual_rate = 100.0 * dual / corpus.test.size();

  const bool standard_ok = !standard.precision && (!standard.recall || *standard.recall == 0.0);
  const bool relaxed_ok = relaxed.recall && *relaxed.recall == 100.0 && relaxed.precision &&
                          std::abs(*relaxed.precision - base_rate) <= 0.01;
  const bool oracle_ok = oracle.accuracy == 100.0 && oracle.precision == 100.0 && oracle.recall == 100.0 &&
                         std::abs(oracle.early_ep_rate - dual_rate) <= 1e-12;
  return {standard_ok && relaxed_ok && oracle_ok,
          fmt("test n=%zu; standard precision %s recall %s; relaxed recall %.2f precision %.4f vs base %.4f; "
              "oracle acc/prec/rec %.1f/%.1f/%.1f early-EP %.4f vs dual %.4f",
              corpus.test.size(), standard.precision ? "set" : "NA",
              standard.recall ? format_number(*standard.recall, 2).c_str() : "NA", relaxed.recall.value_or(-1),
              relaxed.precision.value_or(-1), base_rate, oracle.accuracy, oracle.precision.value_or(-1),
              oracle.recall.value_or(-1), oracle.early_ep_rate, dual_rate)};
}

// Best early-EP reduction among curve points within a TM95 budget.
const TradeoffPoint* best_within(const TradeoffCurve& curve, double tm95_budget) {
  const TradeoffPoint* best = nullptr;
  for (const auto& p : curve.points) {
    if (!p.report.relative || p.report.relative->tm95_change > tm95_budget) continue;
    if (best == nullptr || reduction(p.report) > reduction(best->report)) best = &p;
  }
  return best;
}

// 5. Full features, full visibility, supervised classifier.
Outcome supervised_idealized() {
  const auto r = ex::execute_run(ex::preset("idealized_full"));
  const auto* best = best_within(r.curves.at(0), 10.0);
  if (best == nullptr) return {false, "no tau keeps TM95 within +10%"};
  return {reduction(best->report) >= 80.0,
          fmt("train n=%zu; best within +10%% TM95: tau=%.4f early-EP reduction %.2f%% (>= 80) at TM95 %+.2f%%",
              r.corpus.stats(Split::train).records, best->knob, reduction(best->report),
              best->report.relative->tm95_change)};
}

// 6. F1 grows with the visible fraction; X=20 still helps without latency cost.
Outcome information_monotonicity() {
  int ordered = 0;
  int x20_ok = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::map<int, double> f1;
    const TradeoffPoint* x20_best = nullptr;
    ex::RunResult x20;
    for (int x : {20, 60, 100}) {
      auto c = ex::preset("information_x" + std::to_string(x));
      c.seeds.corpus = seed;
      c.seeds.agent = 100 + seed;
      auto r = ex::execute_run(c);
      f1[x] = r.report.f1.value_or(0.0);
      if (x == 20) x20 = std::move(r);
    }
    x20_best = best_within(x20.curves.at(0), 1.0);
    const bool mono = f1[20] <= f1[60] && f1[60] <= f1[100];
    const bool helps = x20_best != nullptr && reduction(x20_best->report) >= 5.0;
    ordered += mono;
    x20_ok += helps;
    detail << fmt("seed %llu: F1 %.2f/%.2f/%.2f%s, X=20 best reduction %.2f%% at TM95 %+.2f%%; ",
                  static_cast<unsigned long long>(seed), f1[20], f1[60], f1[100], mono ? "" : " (out of order)",
                  x20_best ? reduction(x20_best->report) : 0.0,
                  x20_best ? x20_best->report.relative->tm95_change : 0.0);
  }
  detail << fmt("order held on %d/3 seeds (majority needed), X=20 criterion on %d/3 seeds", ordered, x20_ok);
  return {ordered >= 2 && x20_ok == 3, detail.str()};
}

// 7. Concrete-dropout bandit on first-segment observations.
Outcome bandit_first_segment() {
  const auto c = ex::preset("first_segment_bandit");
  const auto r = ex::execute_run(c);
  std::ostringstream detail;
  detail << fmt("%zu online steps; ", c.n_online_steps);
  bool ok = false;
  for (const auto& p : r.curves.at(0).points) {
    const double red = reduction(p.report);
    const double lat = p.report.relative->tm95_change;
    const bool hit = red >= 20.0 && lat <= 5.0;
    ok = ok || hit;
    detail << fmt("beta/alpha=%.0f: reduction %.2f%% TM95 %+.2f%%%s; ", p.knob, red, lat, hit ? " *" : "");
  }
  detail << "need >= 20% reduction at <= +5% TM95";
  return {ok, detail.str()};
}

// 8. The online path never reads labels, latent state or unchosen outcomes.
Outcome online_purity() {
  GeneratorConfig g;
  g.n_utterances = 20000;
  g.seed = 8;
  const auto clean = generate(g);
  ObservationSpec obs;
  obs.mode = ObservationMode::first_segment;
  BanditConfig cfg;
  cfg.seed = 5;
  constexpr std::size_t kSteps = 30000;

  auto trajectory = [&](const std::vector<Utterance>& corpus, nn::NetworkParameters* final_net) {
    BanditAgent agent(cfg, clean.front().features.dims().encoded());
    const CounterfactualFeed feed(corpus, obs);
    auto stats = run_online(agent, feed, kSteps, RewardSpec{}, 99, true);
    if (final_net) *final_net = agent.network();
    return stats;
  };
  nn::NetworkParameters clean_net;
  const auto reference = trajectory(clean, &clean_net);

  // Which (utterance, action) pairs the reference run actually realized.
  std::vector<std::array<bool, 2>> realized(clean.size(), {false, false});
  for (std::size_t t = 0; t < kSteps; ++t) {
    const std::size_t i = reference.visits[t];
    realized[i][index(reference.actions[t])] = true;
    if (reward(decode(clean[i], reference.actions[t]), RewardSpec{}) != reference.rewards[t]) {
      return {false, "recorded reward does not match the visited outcome"};
    }
  }
  std::vector<Utterance> poisoned = clean;
  std::size_t poisoned_outcomes = 0;
  for (std::size_t i = 0; i < poisoned.size(); ++i) {
    auto& u = poisoned[i];
    u.label = u.label == Class::class1 ? Class::class0 : Class::class1;
    u.latent_slowness = -u.latent_slowness.value_or(0.0) + 3.0;
    for (Action a : {Action::standard, Action::relaxed}) {
      if (realized[i][index(a)]) continue;
      auto& o = a == Action::standard ? u.outcome_standard : u.outcome_relaxed;
      o.cutoff = !o.cutoff;
      o.latency_ms = 5000 - o.latency_ms;
      ++poisoned_outcomes;
    }
  }
  nn::NetworkParameters poisoned_net;
  const auto replayed = trajectory(poisoned, &poisoned_net);
  const bool identical = replayed.actions == reference.actions && replayed.visits == reference.visits && replayed.rewards == reference.rewards &&
                         replayed.trace.size() == reference.trace.size() &&
                         poisoned_net.layers.size() == clean_net.layers.size() &&
                         std::equal(clean_net.layers.begin(), clean_net.layers.end(), poisoned_net.layers.begin(),
                                    [](const auto& a, const auto& b) { return a.weights == b.weights && a.bias == b.bias; }) &&
                         poisoned_net.dropout_logits == clean_net.dropout_logits;

  // Sensitivity check: corrupting one outcome the agent did see must change the run.
  auto tampered = clean;
  std::size_t first = 0;
  while (!realized[first][0] && !realized[first][1]) ++first;
  const Action seen = realized[first][0] ? Action::standard : Action::relaxed;
  (seen == Action::standard ? tampered[first].outcome_standard : tampered[first].outcome_relaxed).latency_ms += 1;
  const auto sensitive = trajectory(tampered, nullptr);
  const bool detects = sensitive.rewards != reference.rewards;

  return {identical && detects,
          fmt("%zu steps; labels and latent slowness flipped on all %zu utterances, %zu unchosen outcomes "
              "poisoned; trajectory and final weights %s; tampering a realized outcome %s",
              kSteps, poisoned.size(), poisoned_outcomes, identical ? "bit-identical" : "DIFFER",
              detects ? "is detected" : "is NOT detected")};
}

// 9. Reproducible runs and a lossless corpus format.
Outcome reproducibility() {
  ts::TempDir dir("acceptance_repro");
  std::ostringstream detail;
  bool same = true;
  for (const char* name : {"standard_only", "oracle", "idealized_full", "first_segment_bandit"}) {
    auto c = ex::preset(name);
    c.generator.n_utterances = 20000;
    c.n_online_steps = 20000;
    for (const char* run : {"a", "b"}) {
      c.output_dir = dir / (std::string(name) + "_" + run);
      ex::cmd_run(c);
    }
    for (const char* file : {"metrics.json", "metrics.csv", "trace.csv", "corpus_manifest.json", "config.json"}) {
      const auto a = ts::slurp(dir / (std::string(name) + "_a") / file);
      const auto b = ts::slurp(dir / (std::string(name) + "_b") / file);
      // config.json records output_dir, which differs by construction.
      if (std::string(file) == "config.json") continue;
      if (a != b || a.empty()) {
        same = false;
        detail << name << "/" << file << " differs; ";
      }
    }
  }
  detail << (same ? "4 presets run twice: metrics, trace and manifest files identical; " : "");

  const FeatureDims dims;
  Rng rng(4242);
  std::vector<LogRecord> records;
  {
    CorpusWriter writer(dir / "corpus", dims, 1, {0.8, 0.1, 0.1});
    for (std::uint64_t i = 0; i < 1000; ++i) {
      records.push_back(ts::random_record(rng, i, dims));
      writer.append(records.back());
    }
    writer.finish();
  }
  const CorpusReader reader(dir / "corpus");
  std::vector<LogRecord> back;
  for (Split s : kAllSplits) {
    auto part = reader.load_records(s);
    back.insert(back.end(), part.begin(), part.end());
  }
  std::sort(back.begin(), back.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::size_t mismatched = back.size() == records.size() ? 0 : records.size();
  for (std::size_t i = 0; i < std::min(back.size(), records.size()); ++i) {
    auto expected = records[i];
    auto got = back[i];
    expected.label.reset();
    got.label.reset();
    if (!(expected == got) || (records[i].label && records[i].label != back[i].label)) ++mismatched;
  }
  detail << fmt("corpus round trip of 1000 randomized records: %zu mismatches", mismatched);
  return {same && mismatched == 0, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"metric oracle equivalence", metric_oracles},
      {"simulator calibration", calibration},
      {"baseline table structure", baseline_table},
      {"supervised idealized analog", supervised_idealized},
      {"information monotonicity analog", information_monotonicity},
      {"bandit first-segment analog", bandit_first_segment},
      {"online purity audit", online_purity},
      {"reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d (%s) [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
