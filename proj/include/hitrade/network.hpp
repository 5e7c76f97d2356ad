#pragma once

#include "hitrade/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hitrade {

// Actor-critic pair: two tanh hidden layers for the policy and, separately, for the
// value head. Both branches share the same hidden widths.
struct NetworkSpec {
    std::size_t input_dim = 0;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 64;
    std::size_t action_count = 3;

    bool operator==(const NetworkSpec&) const = default;

    void validate() const;
    std::size_t parameter_count() const;
};

enum class LayerId : std::uint8_t { PolicyHidden1, PolicyHidden2, PolicyOut, ValueHidden1, ValueHidden2, ValueOut };

struct LayerSlice {
    std::size_t weight_offset = 0; // column-major rows x cols block
    std::size_t bias_offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

std::array<LayerSlice, 6> parameter_layout(const NetworkSpec& spec);

// Weights, biases and the adaptive-moment accumulators, all as flat vectors laid
// out by parameter_layout().
class PolicyParameters {
public:
    PolicyParameters() = default;
    // All-zero parameters.
    explicit PolicyParameters(NetworkSpec spec);

    // Orthogonal weights (gain sqrt(2) hidden, 0.01 policy head, 1.0 value head), zero biases.
    static PolicyParameters initialize(const NetworkSpec& spec, Rng& rng);

    const NetworkSpec& spec() const { return spec_; }
    const LayerSlice& slice(LayerId id) const { return layout_[static_cast<std::size_t>(id)]; }

    Eigen::Map<const Eigen::MatrixXd> weight(LayerId id) const;
    Eigen::Map<Eigen::MatrixXd> weight(LayerId id);
    Eigen::Map<const Eigen::VectorXd> bias(LayerId id) const;
    Eigen::Map<Eigen::VectorXd> bias(LayerId id);

    Eigen::VectorXd values;
    Eigen::VectorXd adam_m;
    Eigen::VectorXd adam_v;
    std::uint64_t update_count = 0;

    bool operator==(const PolicyParameters& other) const;

private:
    NetworkSpec spec_;
    std::array<LayerSlice, 6> layout_{};
};

struct PolicyOutput {
    std::vector<double> probabilities;
    std::vector<double> log_probabilities;
    double value = 0.0;
};

// Throws EnvError on an observation of the wrong length.
PolicyOutput forward(const PolicyParameters& params, std::span<const double> observation);

// argmax of the policy head; ties go to the lowest index.
std::size_t greedy_action(const PolicyParameters& params, std::span<const double> observation);

// Activations kept for the backward pass. Columns are samples.
struct BatchActivations {
    Eigen::MatrixXd policy_h1;
    Eigen::MatrixXd policy_h2;
    Eigen::MatrixXd log_probs;
    Eigen::MatrixXd probs;
    Eigen::MatrixXd value_h1;
    Eigen::MatrixXd value_h2;
    Eigen::RowVectorXd values;
};

BatchActivations forward_batch(const PolicyParameters& params, const Eigen::MatrixXd& observations);

// Accumulates into `gradient` (sized like params.values) the gradient of a scalar
// loss whose partials w.r.t. the logits and the value outputs are given.
void backward_batch(const PolicyParameters& params, const Eigen::MatrixXd& observations,
                    const BatchActivations& acts, const Eigen::MatrixXd& d_logits,
                    const Eigen::RowVectorXd& d_values, Eigen::VectorXd& gradient);

} // namespace hitrade
