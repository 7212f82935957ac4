#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aep/environment.hpp"
#include "aep/evaluation.hpp"
#include "aep/ingestion.hpp"
#include "aep/policies.hpp"

namespace aep::experiment {

struct StaticAgentConfig {
  StaticKind kind = StaticKind::standard_only;
};

struct OracleAgentConfig {};

enum class TauSelection {
  max_f1,                     // best dev F1
  max_reduction_within_tm95,  // best dev early-EP reduction with TM95 change <= budget
};

struct SupervisedAgentConfig {
  SupervisedConfig training;
  /// Thresholds swept on dev (selection) and on test (reported curve).
  std::vector<double> tau_grid;
  TauSelection selection = TauSelection::max_f1;
  double tm95_budget_percent = 1.0;
};

struct BanditAgentConfig {
  BanditConfig bandit;
  RewardSpec reward;
  /// beta/alpha ratios (ms of latency worth one cutoff) for the trade-off
  /// curve; each point is a fresh online run.
  std::vector<double> sweep_ratios;
};

using AgentConfig = std::variant<StaticAgentConfig, OracleAgentConfig, SupervisedAgentConfig, BanditAgentConfig>;

std::string agent_kind(const AgentConfig& agent);

struct Seeds {
  std::uint64_t corpus = 1;
  std::uint64_t agent = 7;
};

/// Everything a run depends on. generator.seed is always seeds.corpus and
/// the agent's own seed is seeds.agent.
struct ExperimentConfig {
  std::string name = "experiment";
  GeneratorConfig generator;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  ObservationSpec observation;
  AgentConfig agent = StaticAgentConfig{};
  std::size_t n_online_steps = 400000;
  /// Existing corpus directory; when unset the corpus is generated.
  std::optional<std::filesystem::path> eval_corpus;
  /// Empty: $AEP_OUTPUT_ROOT (or ./runs) / name.
  std::filesystem::path output_dir;
  Seeds seeds;
  EvaluationOptions evaluation;

  void validate() const;
};

std::vector<double> default_tau_grid();

/// Canonical JSON (sorted keys, every tunable present).
std::string to_json(const ExperimentConfig& config);
/// Strict parse: unknown keys are a ConfigError; missing keys keep defaults.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Hash of the canonical config without output_dir.
std::string config_hash(const ExperimentConfig& config);

std::vector<std::string> preset_names();
ExperimentConfig preset(std::string_view name);

std::filesystem::path default_output_root();
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

struct RunResult {
  std::string name;
  std::string config_hash;
  std::string agent;
  MetricsReport baseline;  // standard_only on the same test split
  MetricsReport report;
  std::optional<double> selected_tau;
  std::vector<TradeoffCurve> curves;
  std::vector<OnlineTracePoint> trace;
  CorpusManifest corpus;
  /// Trained network (supervised or bandit), persisted as checkpoint.json.
  std::optional<nn::NetworkParameters> network;
  double wall_clock_seconds = 0.0;
};

/// Corpus used by a run, already split.
struct SplitCorpus {
  CorpusManifest manifest;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

SplitCorpus prepare_corpus(const ExperimentConfig& config);

CorpusManifest cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Trains/evaluates the configured agent without touching the filesystem
/// (except for reading eval_corpus).
RunResult execute_run(const ExperimentConfig& config);
RunResult execute_run(const ExperimentConfig& config, const SplitCorpus& corpus);

/// execute_run plus persistence into resolve_output_dir(config):
///   config.json, corpus_manifest.json, metrics.json, metrics.csv,
///   curve_<knob>.csv/json, trace.csv, checkpoint.json, timing.json
RunResult cmd_run(const ExperimentConfig& config);

/// Trade-off curve only (tau for supervised, beta/alpha for bandit).
TradeoffCurve execute_sweep(const ExperimentConfig& config, const SplitCorpus& corpus);
TradeoffCurve cmd_sweep(const ExperimentConfig& config);

/// Online bandit run followed by a frozen-greedy evaluation on `eval`.
struct BanditRun {
  MetricsReport report;
  OnlineRunStats stats;
  nn::NetworkParameters network;
};

BanditRun run_bandit(const BanditAgentConfig& agent, const ExperimentConfig& config,
                     const SplitCorpus& corpus, const MetricsReport& baseline);

void save_run(const RunResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);
RunResult load_run(const std::filesystem::path& dir);

struct ComparisonTable {
  std::string csv;
  std::string text;
};

/// Side-by-side table in the order standard_only, relaxed_only, oracle,
/// then the remaining runs as given. Relative rows use the standard_only
/// run. Throws ConfigError when no standard_only run is present.
ComparisonTable cmd_report(const std::vector<RunResult>& runs);

}  // namespace aep::experiment
