#include "aep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "aep/checkpoint.hpp"
#include "aep/error.hpp"
#include "json_detail.hpp"

namespace aep::experiment {

using nlohmann::json;

namespace {

// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json network_config_to_json(const nn::NetworkConfig& c) {
  return {{"hidden", c.hidden},
          {"concrete_dropout", c.concrete_dropout},
          {"initial_dropout", c.initial_dropout},
          {"temperature", c.temperature},
          {"l2_scale", c.l2_scale},
          {"dropout_reg_scale", c.dropout_reg_scale}};
}

void network_config_from_json(const json& j, const std::string& path, nn::NetworkConfig& c) {
  ObjectReader r(j, path);
  r.get("hidden", c.hidden);
  r.get("concrete_dropout", c.concrete_dropout);
  r.get("initial_dropout", c.initial_dropout);
  r.get("temperature", c.temperature);
  r.get("l2_scale", c.l2_scale);
  r.get("dropout_reg_scale", c.dropout_reg_scale);
  r.finish();
}

json generator_to_json(const GeneratorConfig& g) {
  json info = json::object();
  for (FeatureGroup group : kAllFeatureGroups) info[std::string(to_string(group))] = g.informativeness_of(group);
  return {{"n_utterances", g.n_utterances},
          {"target_standard_cutoff_rate", g.target_standard_cutoff_rate},
          {"target_dual_cutoff_rate", g.target_dual_cutoff_rate},
          {"cutoff_steepness", g.cutoff_steepness},
          {"latency_median_ms", g.latency_median_ms},
          {"latency_log_sigma", g.latency_log_sigma},
          {"relaxed_penalty_shift_ms", g.relaxed_penalty_shift_ms},
          {"relaxed_penalty_mean_ms", g.relaxed_penalty_mean_ms},
          {"pause_median_ms", g.pause_median_ms},
          {"pause_log_scale", g.pause_log_scale},
          {"wakeword_median_ms", g.wakeword_median_ms},
          {"wakeword_log_scale", g.wakeword_log_scale},
          {"dims",
           {{"audio", g.dims.audio},
            {"hypothesis", g.dims.hypothesis},
            {"pitch", g.dims.pitch},
            {"intent_domains", g.dims.intent_domains}}},
          {"informativeness", std::move(info)}};
}

void generator_from_json(const json& j, GeneratorConfig& g) {
  ObjectReader r(j, "generator");
  r.get("n_utterances", g.n_utterances);
  r.get("target_standard_cutoff_rate", g.target_standard_cutoff_rate);
  r.get("target_dual_cutoff_rate", g.target_dual_cutoff_rate);
  r.get("cutoff_steepness", g.cutoff_steepness);
  r.get("latency_median_ms", g.latency_median_ms);
  r.get("latency_log_sigma", g.latency_log_sigma);
  r.get("relaxed_penalty_shift_ms", g.relaxed_penalty_shift_ms);
  r.get("relaxed_penalty_mean_ms", g.relaxed_penalty_mean_ms);
  r.get("pause_median_ms", g.pause_median_ms);
  r.get("pause_log_scale", g.pause_log_scale);
  r.get("wakeword_median_ms", g.wakeword_median_ms);
  r.get("wakeword_log_scale", g.wakeword_log_scale);
  if (const json* d = r.child("dims")) {
    ObjectReader rd(*d, r.path("dims"));
    rd.get("audio", g.dims.audio);
    rd.get("hypothesis", g.dims.hypothesis);
    rd.get("pitch", g.dims.pitch);
    rd.get("intent_domains", g.dims.intent_domains);
    rd.finish();
  }
  if (const json* info = r.child("informativeness")) {
    if (!info->is_object()) throw ConfigError("generator.informativeness: expected an object");
    for (auto it = info->begin(); it != info->end(); ++it) {
      FeatureGroup group;
      try {
        group = parse_feature_group(it.key());
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("generator.informativeness: ") + e.what());
      }
      g.informativeness_of(group) = it->get<double>();
    }
  }
  r.finish();
}

std::string mode_name(ObservationMode m) {
  return m == ObservationMode::first_segment ? "first_segment" : "fraction_known";
}

json observation_to_json(const ObservationSpec& o) {
  json groups = json::array();
  for (FeatureGroup g : kAllFeatureGroups) {
    if (o.enabled_groups.contains(g)) groups.push_back(to_string(g));
  }
  return {{"visible_fraction", o.visible_fraction},
          {"enabled_groups", std::move(groups)},
          {"mode", mode_name(o.mode)},
          {"segment_mean", o.segment_mean},
          {"segment_spread", o.segment_spread},
          {"noise_seed", o.noise_seed}};
}

void observation_from_json(const json& j, ObservationSpec& o) {
  ObjectReader r(j, "observation");
  r.get("visible_fraction", o.visible_fraction);
  if (const json* groups = r.child("enabled_groups")) {
    FeatureGroupSet set;
    for (const auto& name : *groups) {
      try {
        set.insert(parse_feature_group(name.get<std::string>()));
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("observation.enabled_groups: ") + e.what());
      }
    }
    o.enabled_groups = set;
  }
  std::string mode = mode_name(o.mode);
  r.get("mode", mode);
  if (mode == "fraction_known") {
    o.mode = ObservationMode::fraction_known;
  } else if (mode == "first_segment") {
    o.mode = ObservationMode::first_segment;
  } else {
    throw ConfigError("observation.mode: unknown mode '" + mode + "'");
  }
  r.get("segment_mean", o.segment_mean);
  r.get("segment_spread", o.segment_spread);
  r.get("noise_seed", o.noise_seed);
  r.finish();
}

std::string selection_name(TauSelection s) {
  return s == TauSelection::max_f1 ? "max_f1" : "max_reduction_within_tm95";
}

struct AgentToJson {
  json operator()(const StaticAgentConfig& a) const {
    return {{"kind", "static"}, {"policy", to_string(a.kind)}};
  }
  json operator()(const OracleAgentConfig&) const { return {{"kind", "oracle"}}; }
  json operator()(const SupervisedAgentConfig& a) const {
    return {{"kind", "supervised"},
            {"network", network_config_to_json(a.training.network)},
            {"learning_rate", a.training.learning_rate},
            {"epochs", a.training.epochs},
            {"batch_size", a.training.batch_size},
            {"class_weighting", a.training.class_weighting},
            {"tau_grid", a.tau_grid},
            {"selection", selection_name(a.selection)},
            {"tm95_budget_percent", a.tm95_budget_percent}};
  }
  json operator()(const BanditAgentConfig& a) const {
    return {{"kind", "bandit"},
            {"network", network_config_to_json(a.bandit.network)},
            {"exploration", {{"kind", to_string(a.bandit.exploration.kind)}, {"epsilon", a.bandit.exploration.epsilon}}},
            {"batch_size", a.bandit.batch_size},
            {"learning_rate", a.bandit.learning_rate},
            {"warmup", a.bandit.warmup},
            {"reward", {{"alpha_latency", a.reward.alpha_latency}, {"beta_cutoff", a.reward.beta_cutoff}}},
            {"sweep_ratios", a.sweep_ratios}};
  }
};

AgentConfig agent_from_json(const json& j) {
  ObjectReader r(j, "agent");
  std::string kind;
  r.get("kind", kind);
  if (kind == "static") {
    StaticAgentConfig a;
    std::string policy = std::string(to_string(a.kind));
    r.get("policy", policy);
    a.kind = parse_static_kind(policy);
    r.finish();
    return a;
  }
  if (kind == "oracle") {
    r.finish();
    return OracleAgentConfig{};
  }
  if (kind == "supervised") {
    SupervisedAgentConfig a;
    a.tau_grid = default_tau_grid();
    if (const json* n = r.child("network")) network_config_from_json(*n, "agent.network", a.training.network);
    r.get("learning_rate", a.training.learning_rate);
    r.get("epochs", a.training.epochs);
    r.get("batch_size", a.training.batch_size);
    r.get("class_weighting", a.training.class_weighting);
    r.get("tau_grid", a.tau_grid);
    std::string selection = selection_name(a.selection);
    r.get("selection", selection);
    if (selection == "max_f1") {
      a.selection = TauSelection::max_f1;
    } else if (selection == "max_reduction_within_tm95") {
      a.selection = TauSelection::max_reduction_within_tm95;
    } else {
      throw ConfigError("agent.selection: unknown rule '" + selection + "'");
    }
    r.get("tm95_budget_percent", a.tm95_budget_percent);
    r.finish();
    return a;
  }
  if (kind == "bandit") {
    BanditAgentConfig a;
    a.sweep_ratios = {2500.0, 5000.0, 10000.0};
    if (const json* n = r.child("network")) network_config_from_json(*n, "agent.network", a.bandit.network);
    if (const json* e = r.child("exploration")) {
      ObjectReader re(*e, "agent.exploration");
      std::string ek = std::string(to_string(a.bandit.exploration.kind));
      re.get("kind", ek);
      a.bandit.exploration.kind = parse_exploration(ek);
      re.get("epsilon", a.bandit.exploration.epsilon);
      re.finish();
    }
    r.get("batch_size", a.bandit.batch_size);
    r.get("learning_rate", a.bandit.learning_rate);
    r.get("warmup", a.bandit.warmup);
    if (const json* w = r.child("reward")) {
      ObjectReader rw(*w, "agent.reward");
      rw.get("alpha_latency", a.reward.alpha_latency);
      rw.get("beta_cutoff", a.reward.beta_cutoff);
      rw.finish();
    }
    r.get("sweep_ratios", a.sweep_ratios);
    r.finish();
    return a;
  }
  throw ConfigError("agent.kind: unknown agent kind '" + kind + "'");
}

json config_to_json_value(const ExperimentConfig& c, bool with_output_dir) {
  json j = {
      {"name", c.name},
      {"generator", generator_to_json(c.generator)},
      {"split_ratios", c.split_ratios},
      {"observation", observation_to_json(c.observation)},
      {"agent", std::visit(AgentToJson{}, c.agent)},
      {"n_online_steps", c.n_online_steps},
      {"eval_corpus", c.eval_corpus ? json(c.eval_corpus->string()) : json(nullptr)},
      {"seeds", {{"corpus", c.seeds.corpus}, {"agent", c.seeds.agent}}},
      {"evaluation", {{"include_cutoff_latencies", c.evaluation.include_cutoff_latencies}}},
  };
  if (with_output_dir) j["output_dir"] = c.output_dir.string();
  return j;
}

std::uint64_t order_seed(const ExperimentConfig& c) { return mix_seed(c.seeds.agent, 0x6f6e6c696e65ULL); }

// Runs fn(i) for i in [0, n) on a small pool; results are stored by index.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

MetricsReport standard_baseline(const ExperimentConfig& config, const SplitCorpus& corpus) {
  return evaluate_policy(StaticPolicy(StaticKind::standard_only), corpus.test, config.observation,
                         config.evaluation);
}

std::size_t select_tau_index(const TradeoffCurve& dev_curve, const SupervisedAgentConfig& agent) {
  std::size_t best = dev_curve.points.size() - 1;
  if (agent.selection == TauSelection::max_f1) {
    double best_f1 = -1.0;
    for (std::size_t i = 0; i < dev_curve.points.size(); ++i) {
      const double f1 = dev_curve.points[i].report.f1.value_or(-1.0);
      if (f1 > best_f1) {
        best_f1 = f1;
        best = i;
      }
    }
    return best;
  }
  double best_rate = dev_curve.points.back().report.early_ep_rate;
  for (std::size_t i = dev_curve.points.size(); i-- > 0;) {
    const auto& r = dev_curve.points[i].report;
    if (r.relative && r.relative->tm95_change <= agent.tm95_budget_percent && r.early_ep_rate < best_rate) {
      best_rate = r.early_ep_rate;
      best = i;
    }
  }
  return best;
}

struct SupervisedOutcome {
  SupervisedClassifier classifier;
  double tau = 0.5;
  MetricsReport report;
  TradeoffCurve test_curve;
};

SupervisedOutcome run_supervised(const SupervisedAgentConfig& agent, const ExperimentConfig& config,
                                 const SplitCorpus& corpus, const MetricsReport& baseline) {
  if (corpus.train.empty() || corpus.dev.empty() || corpus.test.empty()) {
    throw ConfigError("supervised runs need nonempty train, dev and test splits");
  }
  SupervisedConfig training = agent.training;
  training.seed = config.seeds.agent;
  const Matrix x = observed_features(corpus.train, config.observation);
  std::vector<Class> labels;
  labels.reserve(corpus.train.size());
  for (const auto& u : corpus.train) labels.push_back(u.label);

  SupervisedOutcome out;
  out.classifier = supervised_train(x, labels, training);

  const MetricsReport dev_baseline =
      evaluate_policy(StaticPolicy(StaticKind::standard_only), corpus.dev, config.observation, config.evaluation);
  const TradeoffCurve dev_curve =
      sweep_threshold(out.classifier, agent.tau_grid, corpus.dev, config.observation, config.evaluation, &dev_baseline);
  const std::size_t chosen = select_tau_index(dev_curve, agent);
  out.tau = agent.tau_grid[chosen];
  out.classifier.threshold = out.tau;

  out.test_curve = sweep_threshold(out.classifier, agent.tau_grid, corpus.test, config.observation,
                                   config.evaluation, &baseline);
  out.report = out.test_curve.points[chosen].report;
  return out;
}

bool same_ratio(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

std::string trace_csv(const std::vector<OnlineTracePoint>& trace) {
  std::string out = "step,early_ep_rate,mean_reward\n";
  for (const auto& p : trace) {
    out += std::to_string(p.step) + "," + format_number(p.early_ep_rate, 6) + "," +
           format_number(p.mean_reward, 9) + "\n";
  }
  return out;
}

std::vector<OnlineTracePoint> trace_from_csv(const std::string& text) {
  std::vector<OnlineTracePoint> trace;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    OnlineTracePoint p;
    char comma1 = 0;
    char comma2 = 0;
    std::istringstream ls(line);
    if (!(ls >> p.step >> comma1 >> p.early_ep_rate >> comma2 >> p.mean_reward) || comma1 != ',' || comma2 != ',') {
      throw FormatError("malformed trace line '" + line + "'");
    }
    trace.push_back(p);
  }
  return trace;
}

json agent_header(const AgentConfig& agent) {
  json h = std::visit(AgentToJson{}, agent);
  h.erase("sweep_ratios");
  h.erase("tau_grid");
  return h;
}

}  // namespace

std::string agent_kind(const AgentConfig& agent) {
  return std::visit(AgentToJson{}, agent).at("kind").get<std::string>();
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 99; ++i) grid.push_back(i / 100.0);
  for (int j = 0; j < 10; ++j) grid.push_back(0.99 + j / 1000.0);
  grid.push_back(0.9995);
  grid.push_back(1.0);
  grid.push_back(1.0 + 1e-9);
  return grid;
}

void ExperimentConfig::validate() const {
  generator.validate();
  try {
    observation.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("observation: ") + e.what());
  }
  assign_splits(0, split_ratios, 0);
  if (const auto* s = std::get_if<SupervisedAgentConfig>(&agent)) {
    s->training.validate();
    if (s->tau_grid.size() < 2) throw ConfigError("agent.tau_grid needs at least two values");
    for (std::size_t i = 1; i < s->tau_grid.size(); ++i) {
      if (!(s->tau_grid[i] > s->tau_grid[i - 1])) throw ConfigError("agent.tau_grid must be strictly increasing");
    }
  }
  if (const auto* b = std::get_if<BanditAgentConfig>(&agent)) {
    b->bandit.validate();
    try {
      b->reward.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("agent.reward: ") + e.what());
    }
    if (!b->sweep_ratios.empty() && b->reward.alpha_latency == 0.0) {
      throw ConfigError("agent.sweep_ratios needs a nonzero alpha_latency");
    }
    for (std::size_t i = 0; i < b->sweep_ratios.size(); ++i) {
      if (!(b->sweep_ratios[i] > 0.0)) throw ConfigError("agent.sweep_ratios must be positive");
      if (i > 0 && !(b->sweep_ratios[i] > b->sweep_ratios[i - 1])) {
        throw ConfigError("agent.sweep_ratios must be strictly increasing");
      }
    }
  }
}

std::string to_json(const ExperimentConfig& config) { return config_to_json_value(config, true).dump(2); }

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.get("name", c.name);
  if (const json* seeds = r.child("seeds")) {
    ObjectReader rs(*seeds, "seeds");
    rs.get("corpus", c.seeds.corpus);
    rs.get("agent", c.seeds.agent);
    rs.finish();
  }
  if (const json* g = r.child("generator")) generator_from_json(*g, c.generator);
  r.get("split_ratios", c.split_ratios);
  if (const json* o = r.child("observation")) observation_from_json(*o, c.observation);
  if (const json* a = r.child("agent")) c.agent = agent_from_json(*a);
  r.get("n_online_steps", c.n_online_steps);
  if (const json* e = r.child("eval_corpus"); e != nullptr && !e->is_null()) {
    c.eval_corpus = std::filesystem::path(e->get<std::string>());
  }
  std::string out;
  r.get("output_dir", out);
  c.output_dir = out;
  if (const json* ev = r.child("evaluation")) {
    ObjectReader re(*ev, "evaluation");
    re.get("include_cutoff_latencies", c.evaluation.include_cutoff_latencies);
    re.finish();
  }
  r.finish();
  c.generator.seed = c.seeds.corpus;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(detail::read_file(path));
}

std::string config_hash(const ExperimentConfig& config) {
  return fnv1a64_hex(config_to_json_value(config, false).dump());
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names = {"standard_only", "relaxed_only", "oracle", "idealized_full"};
  for (FeatureGroup g : kAllFeatureGroups) names.push_back("idealized_" + std::string(to_string(g)));
  for (const char* x : {"information_x20", "information_x60", "information_x100"}) names.emplace_back(x);
  names.emplace_back("first_segment_supervised");
  names.emplace_back("first_segment_bandit");
  names.emplace_back("first_segment_bandit_epsilon");
  names.emplace_back("first_segment_bandit_greedy");
  return names;
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  SupervisedAgentConfig supervised;
  supervised.tau_grid = default_tau_grid();
  BanditAgentConfig bandit;
  bandit.sweep_ratios = {2500.0, 5000.0, 10000.0};
  bandit.bandit.learning_rate = 0.003;

  if (name == "standard_only") {
    c.agent = StaticAgentConfig{StaticKind::standard_only};
  } else if (name == "relaxed_only") {
    c.agent = StaticAgentConfig{StaticKind::relaxed_only};
  } else if (name == "oracle") {
    c.agent = OracleAgentConfig{};
  } else if (name == "idealized_full") {
    c.agent = supervised;
  } else if (name.starts_with("idealized_")) {
    c.observation.enabled_groups = FeatureGroupSet::only(parse_feature_group(name.substr(10)));
    c.agent = supervised;
  } else if (name == "information_x20" || name == "information_x60" || name == "information_x100") {
    c.observation.visible_fraction = std::stod(std::string(name.substr(13)));
    c.agent = supervised;
  } else if (name == "first_segment_supervised") {
    c.observation.mode = ObservationMode::first_segment;
    c.agent = supervised;
  } else if (name == "first_segment_bandit") {
    c.observation.mode = ObservationMode::first_segment;
    c.agent = bandit;
  } else if (name == "first_segment_bandit_epsilon") {
    c.observation.mode = ObservationMode::first_segment;
    bandit.bandit.exploration = {ExplorationKind::epsilon_greedy, 0.1};
    c.agent = bandit;
  } else if (name == "first_segment_bandit_greedy") {
    c.observation.mode = ObservationMode::first_segment;
    bandit.bandit.exploration = {ExplorationKind::greedy, 0.0};
    c.agent = bandit;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  c.generator.seed = c.seeds.corpus;
  return c;
}

std::filesystem::path default_output_root() {
  if (const char* root = std::getenv("AEP_OUTPUT_ROOT"); root != nullptr && *root != '\0') return root;
  return "runs";
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  return default_output_root() / config.name;
}

SplitCorpus prepare_corpus(const ExperimentConfig& config) {
  SplitCorpus corpus;
  if (config.eval_corpus) {
    const CorpusReader reader(*config.eval_corpus);
    corpus.manifest = reader.manifest();
    if (corpus.manifest.standard_only_observational) {
      throw ConfigError("corpus " + config.eval_corpus->string() +
                        " is standard-only observational; runs need both outcomes");
    }
    corpus.train = reader.load_utterances(Split::train);
    corpus.dev = reader.load_utterances(Split::dev);
    corpus.test = reader.load_utterances(Split::test);
    return corpus;
  }
  GeneratorConfig generator = config.generator;
  generator.seed = config.seeds.corpus;
  std::vector<Utterance> all = generate(generator);
  const auto splits = assign_splits(all.size(), config.split_ratios, config.seeds.corpus);
  corpus.manifest = describe_corpus(all, splits, config.seeds.corpus, config.split_ratios);
  for (std::size_t i = 0; i < all.size(); ++i) {
    switch (splits[i]) {
      case Split::train: corpus.train.push_back(std::move(all[i])); break;
      case Split::dev: corpus.dev.push_back(std::move(all[i])); break;
      case Split::test: corpus.test.push_back(std::move(all[i])); break;
    }
  }
  return corpus;
}

CorpusManifest cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  GeneratorConfig generator = config.generator;
  generator.seed = config.seeds.corpus;
  const auto utterances = generate(generator);
  return write_corpus(utterances, out_dir, config.split_ratios, config.seeds.corpus);
}

BanditRun run_bandit(const BanditAgentConfig& agent, const ExperimentConfig& config, const SplitCorpus& corpus,
                     const MetricsReport& baseline) {
  if (corpus.train.empty() || corpus.test.empty()) throw ConfigError("bandit runs need nonempty train and test splits");
  BanditConfig bandit = agent.bandit;
  bandit.seed = config.seeds.agent;
  BanditAgent learner(bandit, corpus.train.front().features.dims().encoded());
  const CounterfactualFeed feed(corpus.train, config.observation);
  BanditRun run;
  run.stats = run_online(learner, feed, config.n_online_steps, agent.reward, order_seed(config));
  run.network = learner.network();
  run.report = evaluate_policy(GreedyBanditPolicy(run.network), corpus.test, config.observation, config.evaluation,
                               &baseline);
  return run;
}

RunResult execute_run(const ExperimentConfig& config) {
  config.validate();
  return execute_run(config, prepare_corpus(config));
}

RunResult execute_run(const ExperimentConfig& config, const SplitCorpus& corpus) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (corpus.test.empty()) throw ConfigError("the test split is empty");

  RunResult result;
  result.name = config.name;
  result.config_hash = config_hash(config);
  result.agent = agent_kind(config.agent);
  result.corpus = corpus.manifest;
  result.baseline = standard_baseline(config, corpus);

  if (const auto* s = std::get_if<StaticAgentConfig>(&config.agent)) {
    result.report = evaluate_policy(StaticPolicy(s->kind), corpus.test, config.observation, config.evaluation,
                                    &result.baseline);
  } else if (std::holds_alternative<OracleAgentConfig>(config.agent)) {
    result.report = evaluate_policy(OraclePolicy(), corpus.test, config.observation, config.evaluation,
                                    &result.baseline);
  } else if (const auto* s = std::get_if<SupervisedAgentConfig>(&config.agent)) {
    auto out = run_supervised(*s, config, corpus, result.baseline);
    result.report = out.report;
    result.selected_tau = out.tau;
    result.curves.push_back(std::move(out.test_curve));
    result.network = std::move(out.classifier.network);
  } else if (const auto* b = std::get_if<BanditAgentConfig>(&config.agent)) {
    const double configured_ratio =
        b->reward.alpha_latency > 0.0 ? b->reward.beta_cutoff / b->reward.alpha_latency : -1.0;
    std::vector<double> ratios = b->sweep_ratios;
    std::optional<std::size_t> main_index;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      if (same_ratio(ratios[i], configured_ratio)) main_index = i;
    }
    std::vector<BanditAgentConfig> agents;
    for (double ratio : ratios) {
      BanditAgentConfig point = *b;
      point.reward.beta_cutoff = ratio * b->reward.alpha_latency;
      agents.push_back(point);
    }
    if (!main_index) {
      main_index = agents.size();
      agents.push_back(*b);
    }
    std::vector<BanditRun> runs(agents.size());
    parallel_for(agents.size(), [&](std::size_t i) { runs[i] = run_bandit(agents[i], config, corpus, result.baseline); });

    result.report = runs[*main_index].report;
    result.trace = runs[*main_index].stats.trace;
    result.network = runs[*main_index].network;
    if (ratios.size() >= 2) {
      TradeoffCurve curve;
      curve.knob_name = "beta_over_alpha";
      for (std::size_t i = 0; i < ratios.size(); ++i) curve.points.push_back({ratios[i], runs[i].report});
      result.curves.push_back(std::move(curve));
    }
  }
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RunResult cmd_run(const ExperimentConfig& config) {
  RunResult result = execute_run(config);
  save_run(result, config, resolve_output_dir(config));
  return result;
}

TradeoffCurve execute_sweep(const ExperimentConfig& config, const SplitCorpus& corpus) {
  config.validate();
  const MetricsReport baseline = standard_baseline(config, corpus);
  if (const auto* s = std::get_if<SupervisedAgentConfig>(&config.agent)) {
    return run_supervised(*s, config, corpus, baseline).test_curve;
  }
  if (const auto* b = std::get_if<BanditAgentConfig>(&config.agent)) {
    if (b->sweep_ratios.size() < 2) throw ConfigError("a bandit sweep needs at least two sweep_ratios");
    std::vector<BanditRun> runs(b->sweep_ratios.size());
    parallel_for(runs.size(), [&](std::size_t i) {
      BanditAgentConfig point = *b;
      point.reward.beta_cutoff = b->sweep_ratios[i] * b->reward.alpha_latency;
      runs[i] = run_bandit(point, config, corpus, baseline);
    });
    TradeoffCurve curve;
    curve.knob_name = "beta_over_alpha";
    for (std::size_t i = 0; i < runs.size(); ++i) curve.points.push_back({b->sweep_ratios[i], runs[i].report});
    return curve;
  }
  throw ConfigError("sweeps need a supervised or bandit agent");
}

TradeoffCurve cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto curve = execute_sweep(config, prepare_corpus(config));
  const auto dir = resolve_output_dir(config);
  detail::write_file(dir / "config.json", to_json(config) + "\n");
  detail::write_file(dir / ("curve_" + curve.knob_name + ".csv"), to_csv(curve));
  detail::write_file(dir / ("curve_" + curve.knob_name + ".json"), to_json(curve) + "\n");
  return curve;
}

void save_run(const RunResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
  json metrics = {
      {"name", result.name},
      {"config_hash", result.config_hash},
      {"agent", result.agent},
      {"baseline", detail::report_to_json(result.baseline)},
      {"report", detail::report_to_json(result.report)},
      {"selected_tau", result.selected_tau ? json(*result.selected_tau) : json(nullptr)},
  };
  json curves = json::array();
  for (const auto& c : result.curves) curves.push_back(detail::curve_to_json(c));
  metrics["curves"] = std::move(curves);

  detail::write_file(dir / "config.json", to_json(config) + "\n");
  detail::write_file(dir / "corpus_manifest.json", detail::manifest_to_json(result.corpus).dump(2) + "\n");
  detail::write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  const std::vector<MetricsReport> rows = {result.baseline, result.report};
  detail::write_file(dir / "metrics.csv", to_csv(rows));
  for (const auto& c : result.curves) {
    detail::write_file(dir / ("curve_" + c.knob_name + ".csv"), to_csv(c));
    detail::write_file(dir / ("curve_" + c.knob_name + ".json"), to_json(c) + "\n");
  }
  detail::write_file(dir / "trace.csv", trace_csv(result.trace));
  if (result.network) {
    json checkpoint = {{"agent", agent_header(config.agent)}, {"network", detail::network_to_json(*result.network)}};
    detail::write_file(dir / "checkpoint.json", checkpoint.dump(1) + "\n");
  }
  std::ostringstream timing;
  timing << std::setprecision(6) << std::fixed << "{\n  \"wall_clock_seconds\": " << result.wall_clock_seconds
         << "\n}\n";
  detail::write_file(dir / "timing.json", timing.str());
}

RunResult load_run(const std::filesystem::path& dir) {
  RunResult r;
  try {
    const json metrics = json::parse(detail::read_file(dir / "metrics.json"));
    r.name = metrics.at("name").get<std::string>();
    r.config_hash = metrics.at("config_hash").get<std::string>();
    r.agent = metrics.at("agent").get<std::string>();
    r.baseline = detail::report_from_json(metrics.at("baseline"));
    r.report = detail::report_from_json(metrics.at("report"));
    if (!metrics.at("selected_tau").is_null()) r.selected_tau = metrics.at("selected_tau").get<double>();
    for (const auto& c : metrics.at("curves")) r.curves.push_back(detail::curve_from_json(c));
    r.corpus = detail::manifest_from_json(json::parse(detail::read_file(dir / "corpus_manifest.json")));
    if (std::filesystem::exists(dir / "timing.json")) {
      r.wall_clock_seconds =
          json::parse(detail::read_file(dir / "timing.json")).at("wall_clock_seconds").get<double>();
    }
    if (std::filesystem::exists(dir / "checkpoint.json")) {
      r.network = detail::network_from_json(json::parse(detail::read_file(dir / "checkpoint.json")).at("network"));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed run directory " + dir.string() + ": " + e.what());
  }
  if (std::filesystem::exists(dir / "trace.csv")) r.trace = trace_from_csv(detail::read_file(dir / "trace.csv"));
  return r;
}

namespace {

std::string pct(const std::optional<double>& v, int decimals = 2) {
  return v ? format_number(*v, decimals) : "NA";
}

std::string signed_pct(const std::optional<double>& v) {
  if (!v) return "NA";
  const std::string s = format_number(*v, 2);
  return (s.starts_with("-") || s == "0.00" ? s : "+" + s) + "%";
}

int column_rank(const MetricsReport& r) {
  if (r.policy == "standard_only") return 0;
  if (r.policy == "relaxed_only") return 1;
  if (r.policy == "oracle") return 2;
  return 3;
}

}  // namespace

ComparisonTable cmd_report(const std::vector<RunResult>& runs) {
  std::vector<const RunResult*> ordered;
  for (const auto& r : runs) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const RunResult* a, const RunResult* b) {
    return column_rank(a->report) < column_rank(b->report);
  });
  if (ordered.empty() || column_rank(ordered.front()->report) != 0) {
    throw ConfigError("report needs at least one standard_only run as the baseline");
  }
  const MetricsReport& baseline = ordered.front()->report;

  std::vector<std::string> header = {"metric"};
  for (const auto* r : ordered) header.push_back(r->name);

  std::vector<std::vector<std::string>> rows;
  auto add_row = [&](std::string label, auto cell) {
    std::vector<std::string> row = {std::move(label)};
    for (std::size_t i = 0; i < ordered.size(); ++i) row.push_back(cell(i, ordered[i]->report));
    rows.push_back(std::move(row));
  };
  auto relative = [&](std::size_t i, const MetricsReport& r) -> std::optional<RelativeDeltas> {
    if (i == 0) return std::nullopt;
    return relative_to(r, baseline);
  };
  add_row("Accuracy (%)", [](std::size_t, const MetricsReport& r) { return format_number(r.accuracy, 2); });
  add_row("Precision (%)", [](std::size_t, const MetricsReport& r) { return pct(r.precision); });
  add_row("Recall (%)", [](std::size_t, const MetricsReport& r) { return pct(r.recall); });
  add_row("F1 score", [](std::size_t, const MetricsReport& r) { return pct(r.f1); });
  add_row("Early EP rate (%)", [](std::size_t, const MetricsReport& r) { return format_number(r.early_ep_rate, 2); });
  add_row("Early EP rate change", [&](std::size_t i, const MetricsReport& r) {
    const auto d = relative(i, r);
    return d ? signed_pct(d->early_ep_rate_change) : std::string("-");
  });
  add_row("Latency TM95 (ms)", [](std::size_t, const MetricsReport& r) { return format_number(r.tm95, 2); });
  add_row("Latency (TM95) change", [&](std::size_t i, const MetricsReport& r) {
    const auto d = relative(i, r);
    return d ? signed_pct(d->tm95_change) : std::string("-");
  });
  add_row("Latency DTM95:99 (ms)", [](std::size_t, const MetricsReport& r) { return pct(r.dtm95_99); });
  add_row("Latency (DTM95:99) change", [&](std::size_t i, const MetricsReport& r) {
    const auto d = relative(i, r);
    return d ? signed_pct(d->dtm95_99_change) : std::string("-");
  });

  ComparisonTable table;
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    return line + "\n";
  };
  table.csv = join(header);
  for (const auto& row : rows) table.csv += join(row);

  std::vector<std::size_t> widths(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  auto pad = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::string cell = cells[c];
      if (c == 0) {
        cell.append(widths[c] - cell.size(), ' ');
      } else {
        cell.insert(0, widths[c] - cell.size() + 2, ' ');
      }
      line += cell;
    }
    return line + "\n";
  };
  table.text = pad(header);
  std::size_t total = 0;
  for (auto w : widths) total += w + 2;
  table.text += std::string(total - 2, '-') + "\n";
  for (const auto& row : rows) table.text += pad(row);
  return table;
}

}  // namespace aep::experiment
