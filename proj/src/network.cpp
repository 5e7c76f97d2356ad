#include "hitrade/network.hpp"

#include "hitrade/error.hpp"

#include <cmath>

#include <fmt/format.h>

namespace hitrade {

void NetworkSpec::validate() const {
    if (input_dim == 0 || hidden1 == 0 || hidden2 == 0)
        throw ConfigError("network input and hidden widths must be positive");
    if (action_count < 2) throw ConfigError("network needs at least two actions");
}

std::array<LayerSlice, 6> parameter_layout(const NetworkSpec& spec) {
    const std::array<std::pair<std::size_t, std::size_t>, 6> shapes{{{spec.hidden1, spec.input_dim},
                                                                      {spec.hidden2, spec.hidden1},
                                                                      {spec.action_count, spec.hidden2},
                                                                      {spec.hidden1, spec.input_dim},
                                                                      {spec.hidden2, spec.hidden1},
                                                                      {1, spec.hidden2}}};
    std::array<LayerSlice, 6> out{};
    std::size_t offset = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        auto [rows, cols] = shapes[i];
        out[i] = {offset, offset + rows * cols, rows, cols};
        offset += rows * cols + rows;
    }
    return out;
}

std::size_t NetworkSpec::parameter_count() const {
    auto layout = parameter_layout(*this);
    return layout.back().bias_offset + layout.back().rows;
}

PolicyParameters::PolicyParameters(NetworkSpec spec) : spec_(spec) {
    spec_.validate();
    layout_ = parameter_layout(spec_);
    const auto n = static_cast<Eigen::Index>(spec_.parameter_count());
    values = Eigen::VectorXd::Zero(n);
    adam_m = Eigen::VectorXd::Zero(n);
    adam_v = Eigen::VectorXd::Zero(n);
}

namespace {

// Orthogonal rows x cols matrix scaled by gain (QR of a Gaussian matrix, with the
// sign of R's diagonal folded in so the result is uniformly distributed).
Eigen::MatrixXd orthogonal(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
    const bool tall = rows >= cols;
    const auto n = static_cast<Eigen::Index>(tall ? rows : cols);
    const auto k = static_cast<Eigen::Index>(tall ? cols : rows);
    Eigen::MatrixXd g(n, k);
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index r = 0; r < n; ++r) g(r, c) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < k; ++c)
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
    Eigen::MatrixXd w = tall ? q : Eigen::MatrixXd(q.transpose());
    return gain * w;
}

} // namespace

PolicyParameters PolicyParameters::initialize(const NetworkSpec& spec, Rng& rng) {
    PolicyParameters p(spec);
    const double hidden_gain = std::sqrt(2.0);
    const std::array<std::pair<LayerId, double>, 6> gains{{{LayerId::PolicyHidden1, hidden_gain},
                                                            {LayerId::PolicyHidden2, hidden_gain},
                                                            {LayerId::PolicyOut, 0.01},
                                                            {LayerId::ValueHidden1, hidden_gain},
                                                            {LayerId::ValueHidden2, hidden_gain},
                                                            {LayerId::ValueOut, 1.0}}};
    for (auto [id, gain] : gains) {
        const LayerSlice& s = p.slice(id);
        p.weight(id) = orthogonal(s.rows, s.cols, gain, rng);
    }
    return p;
}

Eigen::Map<const Eigen::MatrixXd> PolicyParameters::weight(LayerId id) const {
    const LayerSlice& s = slice(id);
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
}

Eigen::Map<Eigen::MatrixXd> PolicyParameters::weight(LayerId id) {
    const LayerSlice& s = slice(id);
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols)};
}

Eigen::Map<const Eigen::VectorXd> PolicyParameters::bias(LayerId id) const {
    const LayerSlice& s = slice(id);
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
}

Eigen::Map<Eigen::VectorXd> PolicyParameters::bias(LayerId id) {
    const LayerSlice& s = slice(id);
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
}

bool PolicyParameters::operator==(const PolicyParameters& other) const {
    return spec_ == other.spec_ && update_count == other.update_count && values == other.values &&
           adam_m == other.adam_m && adam_v == other.adam_v;
}

BatchActivations forward_batch(const PolicyParameters& p, const Eigen::MatrixXd& x) {
    BatchActivations a;
    a.policy_h1 = ((p.weight(LayerId::PolicyHidden1) * x).colwise() + p.bias(LayerId::PolicyHidden1)).array().tanh();
    a.policy_h2 =
        ((p.weight(LayerId::PolicyHidden2) * a.policy_h1).colwise() + p.bias(LayerId::PolicyHidden2)).array().tanh();
    Eigen::MatrixXd logits = (p.weight(LayerId::PolicyOut) * a.policy_h2).colwise() + p.bias(LayerId::PolicyOut);
    Eigen::RowVectorXd max = logits.colwise().maxCoeff();
    Eigen::MatrixXd shifted = logits.rowwise() - max;
    Eigen::RowVectorXd log_norm = shifted.array().exp().colwise().sum().log();
    a.log_probs = shifted.rowwise() - log_norm;
    a.probs = a.log_probs.array().exp();

    a.value_h1 = ((p.weight(LayerId::ValueHidden1) * x).colwise() + p.bias(LayerId::ValueHidden1)).array().tanh();
    a.value_h2 =
        ((p.weight(LayerId::ValueHidden2) * a.value_h1).colwise() + p.bias(LayerId::ValueHidden2)).array().tanh();
    a.values = (p.weight(LayerId::ValueOut) * a.value_h2).array() + p.bias(LayerId::ValueOut)(0);
    return a;
}

namespace {

// Backward pass through one tanh MLP branch given the gradient at its output layer.
void backward_branch(const PolicyParameters& p, LayerId l1, LayerId l2, LayerId l3, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2, const Eigen::MatrixXd& d_out,
                     Eigen::VectorXd& grad) {
    auto add = [&](LayerId id, const Eigen::MatrixXd& dw, const Eigen::VectorXd& db) {
        const LayerSlice& s = p.slice(id);
        Eigen::Map<Eigen::MatrixXd>(grad.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
                                    static_cast<Eigen::Index>(s.cols)) += dw;
        Eigen::Map<Eigen::VectorXd>(grad.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)) += db;
    };
    add(l3, d_out * h2.transpose(), d_out.rowwise().sum());
    Eigen::MatrixXd d_a2 = (p.weight(l3).transpose() * d_out).array() * (1.0 - h2.array().square());
    add(l2, d_a2 * h1.transpose(), d_a2.rowwise().sum());
    Eigen::MatrixXd d_a1 = (p.weight(l2).transpose() * d_a2).array() * (1.0 - h1.array().square());
    add(l1, d_a1 * x.transpose(), d_a1.rowwise().sum());
}

} // namespace

void backward_batch(const PolicyParameters& p, const Eigen::MatrixXd& x, const BatchActivations& a,
                    const Eigen::MatrixXd& d_logits, const Eigen::RowVectorXd& d_values, Eigen::VectorXd& gradient) {
    backward_branch(p, LayerId::PolicyHidden1, LayerId::PolicyHidden2, LayerId::PolicyOut, x, a.policy_h1,
                    a.policy_h2, d_logits, gradient);
    backward_branch(p, LayerId::ValueHidden1, LayerId::ValueHidden2, LayerId::ValueOut, x, a.value_h1, a.value_h2,
                    d_values, gradient);
}

PolicyOutput forward(const PolicyParameters& params, std::span<const double> observation) {
    if (observation.size() != params.spec().input_dim)
        throw EnvError(fmt::format("observation has {} values, network expects {}", observation.size(),
                                   params.spec().input_dim));
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(observation.data(),
                                                          static_cast<Eigen::Index>(observation.size()));
    BatchActivations a = forward_batch(params, x);
    PolicyOutput out;
    out.probabilities.assign(a.probs.data(), a.probs.data() + a.probs.size());
    out.log_probabilities.assign(a.log_probs.data(), a.log_probs.data() + a.log_probs.size());
    out.value = a.values(0);
    return out;
}

std::size_t greedy_action(const PolicyParameters& params, std::span<const double> observation) {
    if (observation.size() != params.spec().input_dim)
        throw EnvError(fmt::format("observation has {} values, network expects {}", observation.size(),
                                   params.spec().input_dim));
    Eigen::Map<const Eigen::VectorXd> x(observation.data(), static_cast<Eigen::Index>(observation.size()));
    Eigen::VectorXd h1 = (params.weight(LayerId::PolicyHidden1) * x + params.bias(LayerId::PolicyHidden1)).array().tanh();
    Eigen::VectorXd h2 =
        (params.weight(LayerId::PolicyHidden2) * h1 + params.bias(LayerId::PolicyHidden2)).array().tanh();
    Eigen::VectorXd logits = params.weight(LayerId::PolicyOut) * h2 + params.bias(LayerId::PolicyOut);
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i)
        if (logits(i) > logits(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
    return best;
}

} // namespace hitrade
