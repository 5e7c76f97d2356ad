#pragma once

#include <cstddef>
#include <vector>

namespace hitrade {

struct Transition {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
};

// Episodic, discrete-action environment as seen by the policy optimizer.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t observation_size() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual std::vector<double> reset() = 0;
    virtual Transition step(std::size_t action) = 0;
};

} // namespace hitrade
