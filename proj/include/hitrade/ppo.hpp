#pragma once

#include "hitrade/environment.hpp"
#include "hitrade/network.hpp"
#include "hitrade/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hitrade {

struct PpoHyperparams {
    std::uint64_t total_timesteps = 200000;
    double learning_rate = 3e-4;
    std::size_t n_steps = 2048;
    std::size_t batch_size = 64;
    std::size_t n_epochs = 10;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_range = 0.2;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;

    static constexpr double kAdamBeta1 = 0.9;
    static constexpr double kAdamBeta2 = 0.999;
    static constexpr double kAdamEpsilon = 1e-8;

    bool operator==(const PpoHyperparams&) const = default;

    // Throws ConfigError naming the first offending field.
    void validate() const;
};

// Rollout buffer; observations are stored back to back.
struct Trajectory {
    std::size_t observation_size = 0;
    std::vector<double> observations;
    std::vector<std::size_t> actions;
    std::vector<double> log_probs;
    std::vector<double> values;
    std::vector<double> rewards;
    std::vector<std::uint8_t> dones;

    std::size_t size() const { return actions.size(); }
    void push(std::span<const double> observation, std::size_t action, double log_prob, double value, double reward,
              bool done);
};

struct AdvantageEstimate {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// Generalized advantage estimation; `bootstrap_value` is V of the state after the
// last step and is ignored when that step ended an episode.
AdvantageEstimate gae(const Trajectory& trajectory, double gamma, double lambda, double bootstrap_value);

struct Minibatch {
    Eigen::MatrixXd observations; // input_dim x B
    std::vector<std::size_t> actions;
    Eigen::VectorXd old_log_probs;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
};

// Scales of the three loss terms: total = policy * L_clip + value * L_vf - entropy * H.
struct LossWeights {
    double policy = 1.0;
    double value = 0.5;
    double entropy = 0.0;
};

struct LossTerms {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
};

// Minimization objective on one minibatch (advantages used as given). When
// `gradient` is non-null it receives d total / d params.
LossTerms evaluate_loss(const PolicyParameters& params, const Minibatch& batch, double clip_range,
                        const LossWeights& weights, Eigen::VectorXd* gradient);

// Zero mean, unit sample standard deviation; left untouched for a single element.
void normalize_advantages(Eigen::VectorXd& advantages);

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    std::size_t gradient_steps = 0;
};

// n_epochs passes of shuffled minibatches with clipped-gradient Adam steps.
// Throws TrainingError naming the gradient step if the loss goes non-finite.
UpdateStats ppo_update(PolicyParameters& params, const Trajectory& trajectory, const AdvantageEstimate& estimate,
                       const PpoHyperparams& hp, Rng& rng);

struct CurvePoint {
    std::uint64_t timestep = 0;
    std::optional<double> mean_episode_reward; // over episodes finished in this rollout
    std::size_t episodes = 0;
    double mean_step_reward = 0.0;
    UpdateStats stats;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct TrainResult {
    PolicyParameters params;
    std::vector<CurvePoint> curve;
};

// Alternates n_steps of sampled rollouts with ppo_update until total_timesteps are
// consumed. Deterministic for a given seed.
TrainResult train(const EnvFactory& make_env, const NetworkSpec& spec, const PpoHyperparams& hp, std::uint64_t seed);

// timestep,mean_episode_reward,episodes,mean_step_reward,policy_loss,value_loss,entropy,approx_kl,clip_fraction
void write_training_curve(std::ostream& out, std::span<const CurvePoint> curve);

} // namespace hitrade
