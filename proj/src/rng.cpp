#include "hitrade/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hitrade {

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (spare_) {
        double z = *spare_;
        spare_.reset();
        return z;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Rejection sampling removes modulo bias.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

std::size_t Rng::categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double target = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (target < acc) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
}

} // namespace hitrade
