#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aep/environment.hpp"
#include "aep/matrix.hpp"
#include "aep/nn.hpp"
#include "aep/random.hpp"
#include "aep/types.hpp"

namespace aep {

/// Argmax over the two predicted rewards; ties go to Action::standard.
Action choose_action(std::span<const double> predicted_rewards);

enum class ExplorationKind { concrete_dropout, epsilon_greedy, greedy };

std::string_view to_string(ExplorationKind kind);
ExplorationKind parse_exploration(std::string_view name);

struct Exploration {
  ExplorationKind kind = ExplorationKind::concrete_dropout;
  double epsilon = 0.1;  // epsilon_greedy only
};

struct BanditConfig {
  /// input_dim is taken from the agent constructor; output_dim is forced to 2.
  nn::NetworkConfig network;
  Exploration exploration;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  /// Leading decisions taken uniformly at random to seed both heads.
  std::size_t warmup = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Decision {
  Action action = Action::standard;
  std::array<double, 2> predicted{};
  bool random = false;  // warm-up or epsilon draw
};

/// Deep contextual bandit with one reward head per action.
///
/// The agent only ever sees (features, chosen action, realized reward): it
/// has no access to labels, latent variables or the unchosen outcome.
/// Parameters change exactly once per `batch_size` calls to learn().
class BanditAgent {
 public:
  BanditAgent(BanditConfig config, std::size_t input_dim);
  BanditAgent(BanditConfig config, nn::NetworkParameters network);

  /// Picks an action. Concrete-dropout exploration samples fresh masks for
  /// every decision; the other kinds use the deterministic network.
  Decision step(std::span<const double> features);
  void learn(std::span<const double> features, Action chosen, double realized_reward);

  std::array<double, 2> predict(std::span<const double> features) const;
  Action greedy_action(std::span<const double> features) const;

  const nn::NetworkParameters& network() const noexcept { return network_; }
  const BanditConfig& config() const noexcept { return config_; }
  std::size_t decisions() const noexcept { return decisions_; }
  std::size_t updates() const noexcept { return updates_; }
  std::size_t buffered() const noexcept { return batch_rewards_.size(); }

 private:
  void update();

  BanditConfig config_;
  nn::NetworkParameters network_;
  Rng rng_;
  std::vector<double> batch_features_;
  std::vector<Action> batch_actions_;
  std::vector<double> batch_rewards_;
  std::size_t decisions_ = 0;
  std::size_t updates_ = 0;
};

/// Gradient of the batch loss mean_i (pred_i[chosen_i] - reward_i)^2 with
/// respect to the network output. Unchosen heads get exactly zero.
Matrix chosen_head_loss_gradient(const Matrix& predictions, std::span<const Action> chosen,
                                 std::span<const double> rewards);

/// Online feedback channel over a counterfactual corpus. It exposes the
/// observed context and the outcome of the chosen action, nothing else.
class CounterfactualFeed {
 public:
  CounterfactualFeed(std::span<const Utterance> corpus, ObservationSpec observation);

  std::size_t size() const noexcept { return corpus_.size(); }
  std::vector<double> context(std::size_t i) const;
  EndpointOutcome realize(std::size_t i, Action chosen) const;

 private:
  std::span<const Utterance> corpus_;
  ObservationSpec observation_;
};

struct OnlineTracePoint {
  std::size_t step = 0;             // steps completed at the end of the window
  double early_ep_rate = 0.0;       // percent, over the last 1000 steps
  double mean_reward = 0.0;         // over the last 1000 steps
};

struct OnlineRunStats {
  std::size_t steps = 0;
  std::size_t updates = 0;
  std::vector<OnlineTracePoint> trace;
  std::vector<Action> actions;      // filled when requested
  std::vector<double> rewards;      // filled when requested
  std::vector<std::size_t> visits;  // corpus index shown at each step, when requested
};

inline constexpr std::size_t kTraceWindow = 1000;

/// Runs the online loop for `steps` decisions, cycling over the feed in
/// passes, each pass in a fresh seeded order.
OnlineRunStats run_online(BanditAgent& agent, const CounterfactualFeed& feed, std::size_t steps,
                          const RewardSpec& reward_spec, std::uint64_t order_seed,
                          bool record_trajectory = false);

struct SupervisedConfig {
  /// output_dim is forced to 1 (a single logit).
  nn::NetworkConfig network{.concrete_dropout = false};
  double learning_rate = 0.01;
  std::size_t epochs = 8;
  std::size_t batch_size = 64;
  bool class_weighting = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Binary classifier: Relaxed iff sigmoid(logit) >= threshold.
struct SupervisedClassifier {
  nn::NetworkParameters network;
  std::optional<double> threshold;

  double probability(std::span<const double> features) const;
  std::vector<double> probabilities(const Matrix& features) const;
  Action predict(std::span<const double> features, double tau) const;
};

/// Mini-batch SGD on class-weighted binary cross-entropy (inverse class
/// frequency weights when enabled). Throws TrainingError for a single-class
/// dataset.
SupervisedClassifier supervised_train(const Matrix& features, std::span<const Class> labels,
                                      const SupervisedConfig& config);

/// Decision rule evaluated per utterance on already observed features.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action decide(const Utterance& utterance, std::span<const double> observed) const = 0;
  virtual std::string name() const = 0;
};

enum class StaticKind { standard_only, relaxed_only };

std::string_view to_string(StaticKind kind);
StaticKind parse_static_kind(std::string_view name);

constexpr Action static_policy(StaticKind kind) noexcept {
  return kind == StaticKind::relaxed_only ? Action::relaxed : Action::standard;
}

/// Relaxed iff the utterance is labeled Class1.
constexpr Action oracle_policy(const Utterance& utterance) noexcept {
  return action_for(utterance.label);
}

class StaticPolicy final : public Policy {
 public:
  explicit StaticPolicy(StaticKind kind) : kind_(kind) {}
  Action decide(const Utterance&, std::span<const double>) const override { return static_policy(kind_); }
  std::string name() const override { return std::string(to_string(kind_)); }

 private:
  StaticKind kind_;
};

class OraclePolicy final : public Policy {
 public:
  Action decide(const Utterance& u, std::span<const double>) const override { return oracle_policy(u); }
  std::string name() const override { return "oracle"; }
};

class ThresholdPolicy final : public Policy {
 public:
  ThresholdPolicy(std::shared_ptr<const SupervisedClassifier> classifier, double tau)
      : classifier_(std::move(classifier)), tau_(tau) {}
  Action decide(const Utterance&, std::span<const double> observed) const override {
    return classifier_->predict(observed, tau_);
  }
  std::string name() const override { return "supervised"; }

 private:
  std::shared_ptr<const SupervisedClassifier> classifier_;
  double tau_;
};

/// Frozen snapshot of a bandit network, acting greedily.
class GreedyBanditPolicy final : public Policy {
 public:
  explicit GreedyBanditPolicy(nn::NetworkParameters network) : network_(std::move(network)) {}
  Action decide(const Utterance&, std::span<const double> observed) const override;
  std::string name() const override { return "bandit"; }

 private:
  nn::NetworkParameters network_;
};

}  // namespace aep
