#include "hitrade/ppo.hpp"

#include "hitrade/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

namespace hitrade {

void PpoHyperparams::validate() const {
    if (total_timesteps == 0) throw ConfigError("total_timesteps must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (n_steps == 0) throw ConfigError("n_steps must be positive");
    if (batch_size == 0 || batch_size > n_steps) throw ConfigError("batch_size must be in [1, n_steps]");
    if (n_epochs == 0) throw ConfigError("n_epochs must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
    if (!(clip_range > 0.0)) throw ConfigError("clip_range must be positive");
    if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef must be non-negative");
    if (!(value_coef >= 0.0)) throw ConfigError("value_coef must be non-negative");
    if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
}

void Trajectory::push(std::span<const double> observation, std::size_t action, double log_prob, double value,
                      double reward, bool done) {
    if (observation.size() != observation_size)
        throw TrainingError(fmt::format("trajectory expects observations of {} values", observation_size));
    observations.insert(observations.end(), observation.begin(), observation.end());
    actions.push_back(action);
    log_probs.push_back(log_prob);
    values.push_back(value);
    rewards.push_back(reward);
    dones.push_back(done ? 1 : 0);
}

AdvantageEstimate gae(const Trajectory& traj, double gamma, double lambda, double bootstrap_value) {
    const std::size_t n = traj.size();
    AdvantageEstimate est;
    est.advantages.assign(n, 0.0);
    est.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double not_done = traj.dones[k] ? 0.0 : 1.0;
        const double next_value = k + 1 < n ? traj.values[k + 1] : bootstrap_value;
        const double delta = traj.rewards[k] + gamma * next_value * not_done - traj.values[k];
        running = delta + gamma * lambda * not_done * running;
        est.advantages[k] = running;
        est.returns[k] = running + traj.values[k];
    }
    return est;
}

void normalize_advantages(Eigen::VectorXd& adv) {
    if (adv.size() <= 1) return;
    const double mean = adv.mean();
    adv.array() -= mean;
    const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size() - 1));
    if (sd > 0.0) adv /= sd;
    else adv.setZero();
}

LossTerms evaluate_loss(const PolicyParameters& params, const Minibatch& batch, double clip_range,
                        const LossWeights& weights, Eigen::VectorXd* gradient) {
    const auto b = static_cast<Eigen::Index>(batch.actions.size());
    const double inv_b = 1.0 / static_cast<double>(b);
    BatchActivations acts = forward_batch(params, batch.observations);

    LossTerms terms;
    const auto actions = static_cast<Eigen::Index>(params.spec().action_count);
    Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(actions, b);
    Eigen::RowVectorXd d_values(b);

    for (Eigen::Index i = 0; i < b; ++i) {
        const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(i)]);
        const double log_ratio = acts.log_probs(a, i) - batch.old_log_probs(i);
        const double ratio = std::exp(log_ratio);
        const double adv = batch.advantages(i);
        const double clipped_ratio = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
        const double unclipped = ratio * adv;
        const double clipped = clipped_ratio * adv;
        const bool unclipped_active = unclipped <= clipped;
        terms.policy_loss -= std::min(unclipped, clipped);
        terms.approx_kl += (ratio - 1.0) - log_ratio;
        if (std::abs(ratio - 1.0) > clip_range) terms.clip_fraction += 1.0;

        double entropy = 0.0;
        for (Eigen::Index k = 0; k < actions; ++k) entropy -= acts.probs(k, i) * acts.log_probs(k, i);
        terms.entropy += entropy;

        const double err = acts.values(i) - batch.returns(i);
        terms.value_loss += err * err;

        if (gradient != nullptr) {
            // d(-surrogate)/d log pi(a) is -ratio * adv on the unclipped branch, else 0.
            const double d_logp = unclipped_active ? -weights.policy * inv_b * unclipped : 0.0;
            for (Eigen::Index k = 0; k < actions; ++k) {
                const double p = acts.probs(k, i);
                double g = d_logp * ((k == a ? 1.0 : 0.0) - p);
                // -w_e * dH/dz_k with dH/dz_k = -p_k (log p_k + H)
                g += weights.entropy * inv_b * p * (acts.log_probs(k, i) + entropy);
                d_logits(k, i) = g;
            }
            d_values(i) = weights.value * 2.0 * inv_b * err;
        }
    }
    terms.policy_loss *= inv_b;
    terms.value_loss *= inv_b;
    terms.entropy *= inv_b;
    terms.approx_kl *= inv_b;
    terms.clip_fraction *= inv_b;
    terms.total = weights.policy * terms.policy_loss + weights.value * terms.value_loss - weights.entropy * terms.entropy;

    if (gradient != nullptr) {
        gradient->setZero(params.values.size());
        backward_batch(params, batch.observations, acts, d_logits, d_values, *gradient);
    }
    return terms;
}

UpdateStats ppo_update(PolicyParameters& params, const Trajectory& traj, const AdvantageEstimate& est,
                       const PpoHyperparams& hp, Rng& rng) {
    const std::size_t n = traj.size();
    const std::size_t dim = traj.observation_size;
    std::vector<std::size_t> order(n);
    const LossWeights weights{1.0, hp.value_coef, hp.entropy_coef};
    UpdateStats stats;
    Eigen::VectorXd grad(params.values.size());

    for (std::size_t epoch = 0; epoch < hp.n_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += hp.batch_size) {
            const std::size_t size = std::min(hp.batch_size, n - start);
            Minibatch mb;
            mb.observations.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(size));
            mb.old_log_probs.resize(static_cast<Eigen::Index>(size));
            mb.advantages.resize(static_cast<Eigen::Index>(size));
            mb.returns.resize(static_cast<Eigen::Index>(size));
            mb.actions.resize(size);
            for (std::size_t j = 0; j < size; ++j) {
                const std::size_t idx = order[start + j];
                const auto col = static_cast<Eigen::Index>(j);
                mb.observations.col(col) = Eigen::Map<const Eigen::VectorXd>(traj.observations.data() + idx * dim,
                                                                             static_cast<Eigen::Index>(dim));
                mb.actions[j] = traj.actions[idx];
                mb.old_log_probs(col) = traj.log_probs[idx];
                mb.advantages(col) = est.advantages[idx];
                mb.returns(col) = est.returns[idx];
            }
            normalize_advantages(mb.advantages);

            LossTerms terms = evaluate_loss(params, mb, hp.clip_range, weights, &grad);
            if (!std::isfinite(terms.total) || !grad.allFinite())
                throw TrainingError(fmt::format("non-finite loss at gradient step {}", stats.gradient_steps));

            const double norm = grad.norm();
            if (norm > hp.max_grad_norm) grad *= hp.max_grad_norm / norm;

            ++params.update_count;
            const double t = static_cast<double>(params.update_count);
            params.adam_m = PpoHyperparams::kAdamBeta1 * params.adam_m + (1.0 - PpoHyperparams::kAdamBeta1) * grad;
            params.adam_v = PpoHyperparams::kAdamBeta2 * params.adam_v +
                            (1.0 - PpoHyperparams::kAdamBeta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(PpoHyperparams::kAdamBeta1, t);
            const double c2 = 1.0 - std::pow(PpoHyperparams::kAdamBeta2, t);
            params.values.array() -= hp.learning_rate * (params.adam_m.array() / c1) /
                                     ((params.adam_v.array() / c2).sqrt() + PpoHyperparams::kAdamEpsilon);

            stats.policy_loss += terms.policy_loss;
            stats.value_loss += terms.value_loss;
            stats.entropy += terms.entropy;
            stats.approx_kl += terms.approx_kl;
            stats.clip_fraction += terms.clip_fraction;
            ++stats.gradient_steps;
        }
    }
    if (stats.gradient_steps > 0) {
        const double k = static_cast<double>(stats.gradient_steps);
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.approx_kl /= k;
        stats.clip_fraction /= k;
    }
    return stats;
}

TrainResult train(const EnvFactory& make_env, const NetworkSpec& spec, const PpoHyperparams& hp, std::uint64_t seed) {
    hp.validate();
    spec.validate();
    std::unique_ptr<Environment> env = make_env();
    if (env->observation_size() != spec.input_dim)
        throw ConfigError(fmt::format("environment observation size {} does not match network input {}",
                                      env->observation_size(), spec.input_dim));
    if (env->action_count() != spec.action_count)
        throw ConfigError(fmt::format("environment has {} actions, network {}", env->action_count(),
                                      spec.action_count));

    Rng init_rng(seed);
    Rng rollout_rng(seed ^ 0x9E3779B97F4A7C15ULL);
    Rng shuffle_rng(seed ^ 0xD1B54A32D192ED03ULL);

    TrainResult result{PolicyParameters::initialize(spec, init_rng), {}};
    std::uint64_t timesteps = 0;
    std::vector<double> obs;
    try {
        obs = env->reset();
    } catch (const Error& e) {
        throw TrainingError(fmt::format("environment reset failed: {}", e.what()));
    }
    double episode_return = 0.0;

    while (timesteps < hp.total_timesteps) {
        Trajectory traj;
        traj.observation_size = spec.input_dim;
        double finished_sum = 0.0;
        std::size_t finished = 0;
        double reward_sum = 0.0;
        for (std::size_t step = 0; step < hp.n_steps; ++step) {
            PolicyOutput out = forward(result.params, obs);
            const std::size_t action = rollout_rng.categorical(out.probabilities);
            Transition tr;
            try {
                tr = env->step(action);
            } catch (const Error& e) {
                throw TrainingError(fmt::format("rollout step {}: {}", timesteps + step, e.what()));
            }
            traj.push(obs, action, out.log_probabilities[action], out.value, tr.reward, tr.done);
            reward_sum += tr.reward;
            episode_return += tr.reward;
            if (tr.done) {
                finished_sum += episode_return;
                ++finished;
                episode_return = 0.0;
                try {
                    obs = env->reset();
                } catch (const Error& e) {
                    throw TrainingError(fmt::format("rollout step {}: {}", timesteps + step, e.what()));
                }
            } else {
                obs = std::move(tr.observation);
            }
        }
        timesteps += hp.n_steps;
        const double bootstrap = forward(result.params, obs).value;
        AdvantageEstimate est = gae(traj, hp.gamma, hp.gae_lambda, bootstrap);
        UpdateStats stats = ppo_update(result.params, traj, est, hp, shuffle_rng);

        CurvePoint point;
        point.timestep = timesteps;
        if (finished > 0) point.mean_episode_reward = finished_sum / static_cast<double>(finished);
        point.episodes = finished;
        point.mean_step_reward = reward_sum / static_cast<double>(hp.n_steps);
        point.stats = stats;
        result.curve.push_back(point);
    }
    return result;
}

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

void write_training_curve(std::ostream& out, std::span<const CurvePoint> curve) {
    out << "timestep,mean_episode_reward,episodes,mean_step_reward,policy_loss,value_loss,entropy,approx_kl,"
           "clip_fraction\n";
    for (const auto& p : curve) {
        out << p.timestep << ',' << (p.mean_episode_reward ? shortest(*p.mean_episode_reward) : std::string{}) << ','
            << p.episodes << ',' << shortest(p.mean_step_reward) << ',' << shortest(p.stats.policy_loss) << ','
            << shortest(p.stats.value_loss) << ',' << shortest(p.stats.entropy) << ','
            << shortest(p.stats.approx_kl) << ',' << shortest(p.stats.clip_fraction) << '\n';
    }
}

} // namespace hitrade
