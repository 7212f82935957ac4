#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aep/error.hpp"
#include "aep/evaluation.hpp"
#include "aep/experiment.hpp"
#include "aep/ingestion.hpp"

namespace ex = aep::experiment;

namespace {

int exit_code(aep::ErrorCategory c) {
  using aep::ErrorCategory;
  switch (c) {
    case ErrorCategory::config: return 3;
    case ErrorCategory::io: return 4;
    case ErrorCategory::format: return 5;
    case ErrorCategory::validation:
    case ErrorCategory::shape:
    case ErrorCategory::contract: return 6;
    case ErrorCategory::training: return 7;
    case ErrorCategory::insufficient_sample: return 8;
  }
  return 1;
}

struct ConfigOptions {
  std::string config_path;
  std::string preset_name;
  std::string out;
  std::optional<std::size_t> n_utterances;
  std::optional<std::uint64_t> corpus_seed;
  std::optional<std::uint64_t> agent_seed;
  std::optional<std::size_t> steps;
  std::optional<double> visible_fraction;
  std::string corpus;

  void attach(CLI::App* cmd) {
    auto* source = cmd->add_option_group("source");
    source->add_option("--config", config_path, "Experiment config JSON file")->check(CLI::ExistingFile);
    source->add_option("--preset", preset_name, "Built-in experiment preset (see `aep presets`)");
    source->require_option(1);
    cmd->add_option("--out", out, "Output directory (default: $AEP_OUTPUT_ROOT/<name>)");
    cmd->add_option("--n-utterances", n_utterances, "Number of synthetic utterances");
    cmd->add_option("--corpus-seed", corpus_seed, "Seed for corpus generation and splits");
    cmd->add_option("--agent-seed", agent_seed, "Seed for training and exploration");
    cmd->add_option("--steps", steps, "Online steps for bandit agents");
    cmd->add_option("--visible-fraction", visible_fraction, "Percent of each utterance visible at decision time");
    cmd->add_option("--corpus", corpus, "Evaluate on an existing corpus directory instead of generating one");
  }

  ex::ExperimentConfig resolve() const {
    ex::ExperimentConfig c = config_path.empty() ? ex::preset(preset_name) : ex::load_config(config_path);
    if (!out.empty()) c.output_dir = out;
    if (n_utterances) c.generator.n_utterances = *n_utterances;
    if (corpus_seed) c.seeds.corpus = *corpus_seed;
    if (agent_seed) c.seeds.agent = *agent_seed;
    if (steps) c.n_online_steps = *steps;
    if (visible_fraction) c.observation.visible_fraction = *visible_fraction;
    if (!corpus.empty()) c.eval_corpus = corpus;
    c.generator.seed = c.seeds.corpus;
    c.validate();
    return c;
  }
};

void print_result(const ex::RunResult& r, const std::filesystem::path& dir) {
  std::cout << aep::to_csv(std::vector<aep::MetricsReport>{r.baseline, r.report});
  if (r.selected_tau) std::cout << "selected_tau," << aep::format_number(*r.selected_tau, 6) << "\n";
  std::cout << "output," << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Endpointing policy experiments: corpus generation, training, evaluation and reporting"};
  app.require_subcommand(1);

  ConfigOptions gen_opts;
  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus with train/dev/test splits");
  gen_opts.attach(generate);

  ConfigOptions run_opts;
  auto* run = app.add_subcommand("run", "Train (if needed) and evaluate one configuration");
  run_opts.attach(run);

  ConfigOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Sweep the operating point knob and write a trade-off curve");
  sweep_opts.attach(sweep);

  std::vector<std::string> run_dirs;
  std::string csv_out;
  auto* report = app.add_subcommand("report", "Build a comparison table from saved run directories");
  report->add_option("runs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--csv", csv_out, "Also write the table as CSV to this path");

  auto* presets = app.add_subcommand("presets", "List built-in presets");

  ConfigOptions show_opts;
  auto* show = app.add_subcommand("show-config", "Print the resolved config as JSON");
  show_opts.attach(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*generate) {
      const auto c = gen_opts.resolve();
      const auto dir = gen_opts.out.empty() ? ex::resolve_output_dir(c) / "corpus" : std::filesystem::path(gen_opts.out);
      const auto m = ex::cmd_generate(c, dir);
      std::cout << "split,records,positives,positive_rate,checksum\n";
      for (std::size_t i = 0; i < m.splits.size(); ++i) {
        const auto& s = m.splits[i];
        std::cout << aep::to_string(static_cast<aep::Split>(i)) << "," << s.records << "," << s.positives << ","
                  << aep::format_number(s.positive_rate, 4) << "," << s.checksum << "\n";
      }
      std::cout << "output," << dir.string() << "\n";
    } else if (*run) {
      const auto c = run_opts.resolve();
      const auto r = ex::cmd_run(c);
      print_result(r, ex::resolve_output_dir(c));
    } else if (*sweep) {
      const auto c = sweep_opts.resolve();
      std::cout << aep::to_csv(ex::cmd_sweep(c));
      std::cout << "output," << ex::resolve_output_dir(c).string() << "\n";
    } else if (*report) {
      std::vector<ex::RunResult> runs;
      for (const auto& d : run_dirs) runs.push_back(ex::load_run(d));
      const auto table = ex::cmd_report(runs);
      std::cout << table.text;
      if (!csv_out.empty()) {
        std::ofstream f(csv_out, std::ios::binary);
        if (!(f << table.csv)) throw aep::IoError("cannot write " + csv_out);
      }
    } else if (*presets) {
      for (const auto& n : ex::preset_names()) std::cout << n << "\n";
    } else if (*show) {
      std::cout << ex::to_json(show_opts.resolve()) << "\n";
    }
  } catch (const aep::Error& e) {
    std::cerr << "error[" << aep::to_string(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
