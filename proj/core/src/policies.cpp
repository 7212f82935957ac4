#include "aep/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "aep/error.hpp"

namespace aep {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix row_matrix(std::span<const double> features) {
  return Matrix(1, features.size(), std::vector<double>(features.begin(), features.end()));
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
}

}  // namespace

Action choose_action(std::span<const double> predicted_rewards) {
  if (predicted_rewards.size() != kActionCount) {
    throw ShapeError("choose_action expects one prediction per action");
  }
  for (double r : predicted_rewards) {
    if (!std::isfinite(r)) throw ValidationError("choose_action: non-finite predicted reward");
  }
  return predicted_rewards[1] > predicted_rewards[0] ? Action::relaxed : Action::standard;
}

std::string_view to_string(ExplorationKind kind) {
  switch (kind) {
    case ExplorationKind::concrete_dropout: return "concrete_dropout";
    case ExplorationKind::epsilon_greedy: return "epsilon_greedy";
    case ExplorationKind::greedy: return "greedy";
  }
  return "unknown";
}

ExplorationKind parse_exploration(std::string_view name) {
  for (auto k : {ExplorationKind::concrete_dropout, ExplorationKind::epsilon_greedy, ExplorationKind::greedy}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown exploration kind '" + std::string(name) + "'");
}

std::string_view to_string(StaticKind kind) {
  return kind == StaticKind::relaxed_only ? "relaxed_only" : "standard_only";
}

StaticKind parse_static_kind(std::string_view name) {
  if (name == "standard_only") return StaticKind::standard_only;
  if (name == "relaxed_only") return StaticKind::relaxed_only;
  throw ConfigError("unknown static policy '" + std::string(name) + "'");
}

void BanditConfig::validate() const {
  if (batch_size == 0) throw ConfigError("bandit batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("bandit learning_rate must be positive");
  }
  if (exploration.kind == ExplorationKind::epsilon_greedy &&
      !(exploration.epsilon >= 0.0 && exploration.epsilon <= 1.0)) {
    throw ConfigError("epsilon must lie in [0,1]");
  }
}

BanditAgent::BanditAgent(BanditConfig config, std::size_t input_dim) : config_(std::move(config)) {
  config_.validate();
  config_.network.input_dim = input_dim;
  config_.network.output_dim = kActionCount;
  network_ = nn::make_network(config_.network, mix_seed(config_.seed, 0x6e6574ULL));
  rng_ = Rng(mix_seed(config_.seed, 0x61676e74ULL));
}

BanditAgent::BanditAgent(BanditConfig config, nn::NetworkParameters network)
    : config_(std::move(config)), network_(std::move(network)) {
  config_.validate();
  network_.validate();
  if (network_.output_dim() != kActionCount) throw ShapeError("bandit network needs two output heads");
  config_.network.input_dim = network_.input_dim();
  config_.network.output_dim = kActionCount;
  rng_ = Rng(mix_seed(config_.seed, 0x61676e74ULL));
}

std::array<double, 2> BanditAgent::predict(std::span<const double> features) const {
  const auto out = nn::predict_row(network_, features);
  return {out[0], out[1]};
}

Action BanditAgent::greedy_action(std::span<const double> features) const {
  const auto p = predict(features);
  return choose_action(p);
}

Decision BanditAgent::step(std::span<const double> features) {
  Decision d;
  const bool warming_up = decisions_ < config_.warmup;
  ++decisions_;
  if (warming_up) {
    d.predicted = predict(features);
    d.action = rng_.below(2) == 1 ? Action::relaxed : Action::standard;
    d.random = true;
    return d;
  }
  switch (config_.exploration.kind) {
    case ExplorationKind::concrete_dropout: {
      const auto result = nn::forward(network_, row_matrix(features), nn::ForwardMode::sampled, rng_);
      d.predicted = {result.output(0, 0), result.output(0, 1)};
      d.action = choose_action(d.predicted);
      break;
    }
    case ExplorationKind::epsilon_greedy:
      d.predicted = predict(features);
      if (rng_.uniform() < config_.exploration.epsilon) {
        d.action = rng_.below(2) == 1 ? Action::relaxed : Action::standard;
        d.random = true;
      } else {
        d.action = choose_action(d.predicted);
      }
      break;
    case ExplorationKind::greedy:
      d.predicted = predict(features);
      d.action = choose_action(d.predicted);
      break;
  }
  return d;
}

void BanditAgent::learn(std::span<const double> features, Action chosen, double realized_reward) {
  if (!std::isfinite(realized_reward)) throw ValidationError("bandit_learn: non-finite reward");
  if (features.size() != network_.input_dim()) {
    throw ShapeError("bandit_learn: feature dimension does not match network");
  }
  batch_features_.insert(batch_features_.end(), features.begin(), features.end());
  batch_actions_.push_back(chosen);
  batch_rewards_.push_back(realized_reward);
  if (batch_rewards_.size() == config_.batch_size) update();
}

Matrix chosen_head_loss_gradient(const Matrix& predictions, std::span<const Action> chosen,
                                 std::span<const double> rewards) {
  if (predictions.rows() != chosen.size() || chosen.size() != rewards.size() ||
      predictions.cols() != kActionCount) {
    throw ShapeError("chosen_head_loss_gradient: inconsistent batch");
  }
  Matrix grad(predictions.rows(), predictions.cols());
  const double scale = 2.0 / static_cast<double>(predictions.rows());
  for (std::size_t i = 0; i < predictions.rows(); ++i) {
    const std::size_t a = index(chosen[i]);
    grad(i, a) = scale * (predictions(i, a) - rewards[i]);
  }
  return grad;
}

void BanditAgent::update() {
  const std::size_t batch = batch_rewards_.size();
  const Matrix x(batch, network_.input_dim(), std::move(batch_features_));
  const auto mode = config_.exploration.kind == ExplorationKind::concrete_dropout
                        ? nn::ForwardMode::sampled
                        : nn::ForwardMode::deterministic;
  const auto result = nn::forward(network_, x, mode, rng_);
  const Matrix grad = chosen_head_loss_gradient(result.output, batch_actions_, batch_rewards_);
  const auto grads = nn::backward(network_, result.tape, x, grad);
  nn::sgd_step(network_, grads, config_.learning_rate);
  ++updates_;
  batch_features_ = {};
  batch_actions_.clear();
  batch_rewards_.clear();
}

CounterfactualFeed::CounterfactualFeed(std::span<const Utterance> corpus, ObservationSpec observation)
    : corpus_(corpus), observation_(observation) {
  observation_.validate();
}

std::vector<double> CounterfactualFeed::context(std::size_t i) const {
  return observe(corpus_[i], observation_).encode();
}

EndpointOutcome CounterfactualFeed::realize(std::size_t i, Action chosen) const {
  return decode(corpus_[i], chosen);
}

OnlineRunStats run_online(BanditAgent& agent, const CounterfactualFeed& feed, std::size_t steps,
                          const RewardSpec& reward_spec, std::uint64_t order_seed,
                          bool record_trajectory) {
  reward_spec.validate();
  OnlineRunStats stats;
  if (steps == 0) return stats;
  if (feed.size() == 0) throw ValidationError("online run needs a nonempty stream");

  Rng order_rng(mix_seed(order_seed, 0x6f72646572ULL));
  std::vector<std::size_t> order(feed.size());
  std::size_t cursor = order.size();
  std::size_t window_cutoffs = 0;
  double window_reward = 0.0;
  const std::size_t updates_before = agent.updates();
  if (record_trajectory) {
    stats.actions.reserve(steps);
    stats.rewards.reserve(steps);
    stats.visits.reserve(steps);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, order_rng);
      cursor = 0;
    }
    const std::size_t i = order[cursor++];
    const auto features = feed.context(i);
    const Decision decision = agent.step(features);
    const EndpointOutcome outcome = feed.realize(i, decision.action);
    const double r = reward(outcome, reward_spec);
    agent.learn(features, decision.action, r);

    window_cutoffs += outcome.cutoff ? 1 : 0;
    window_reward += r;
    if (record_trajectory) {
      stats.actions.push_back(decision.action);
      stats.rewards.push_back(r);
      stats.visits.push_back(i);
    }
    if ((t + 1) % kTraceWindow == 0) {
      stats.trace.push_back({t + 1, 100.0 * static_cast<double>(window_cutoffs) / kTraceWindow,
                             window_reward / kTraceWindow});
      window_cutoffs = 0;
      window_reward = 0.0;
    }
  }
  stats.steps = steps;
  stats.updates = agent.updates() - updates_before;
  return stats;
}

void SupervisedConfig::validate() const {
  if (batch_size == 0) throw ConfigError("supervised batch_size must be positive");
  if (epochs == 0) throw ConfigError("supervised epochs must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("supervised learning_rate must be positive");
  }
}

double SupervisedClassifier::probability(std::span<const double> features) const {
  return sigmoid(nn::predict_row(network, features).front());
}

std::vector<double> SupervisedClassifier::probabilities(const Matrix& features) const {
  const Matrix logits = nn::predict(network, features);
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(logits(i, 0));
  return out;
}

Action SupervisedClassifier::predict(std::span<const double> features, double tau) const {
  return probability(features) >= tau ? Action::relaxed : Action::standard;
}

SupervisedClassifier supervised_train(const Matrix& features, std::span<const Class> labels,
                                      const SupervisedConfig& config) {
  config.validate();
  if (features.rows() != labels.size()) throw ShapeError("supervised_train: features/labels length mismatch");
  const auto n = labels.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Class::class1));
  if (n_pos == 0 || n_pos == n) {
    throw TrainingError("supervised_train: dataset contains a single class (" + std::to_string(n_pos) +
                        " of " + std::to_string(n) + " positive)");
  }
  const double w_pos = config.class_weighting ? static_cast<double>(n) / (2.0 * n_pos) : 1.0;
  const double w_neg = config.class_weighting ? static_cast<double>(n) / (2.0 * (n - n_pos)) : 1.0;

  nn::NetworkConfig net_config = config.network;
  net_config.input_dim = features.cols();
  net_config.output_dim = 1;
  SupervisedClassifier model;
  model.network = nn::make_network(net_config, mix_seed(config.seed, 0x73757076ULL));

  Rng rng(mix_seed(config.seed, 0x65706f6368ULL));
  const auto mode = model.network.has_dropout() ? nn::ForwardMode::sampled : nn::ForwardMode::deterministic;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t d = features.cols();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Matrix x(b, d);
      for (std::size_t r = 0; r < b; ++r) {
        auto src = features.row(order[start + r]);
        std::copy(src.begin(), src.end(), x.row(r).begin());
      }
      const auto result = nn::forward(model.network, x, mode, rng);
      Matrix grad(b, 1);
      for (std::size_t r = 0; r < b; ++r) {
        const bool positive = labels[order[start + r]] == Class::class1;
        const double y = positive ? 1.0 : 0.0;
        const double w = positive ? w_pos : w_neg;
        grad(r, 0) = w * (sigmoid(result.output(r, 0)) - y) / static_cast<double>(b);
      }
      const auto grads = nn::backward(model.network, result.tape, x, grad);
      nn::sgd_step(model.network, grads, config.learning_rate);
    }
  }
  return model;
}

Action GreedyBanditPolicy::decide(const Utterance&, std::span<const double> observed) const {
  const auto out = nn::predict_row(network_, observed);
  return choose_action(out);
}

}  // namespace aep
