#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace hitrade {

// Seeded generator whose derived draws (uniform, normal, shuffles) are computed
// here from raw mt19937_64 output, so streams are identical on every standard
// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();

    // Standard normal via Box-Muller.
    double normal();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    // Index drawn from a discrete distribution given by `probs` (need not be normalized).
    std::size_t categorical(std::span<const double> probs);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

} // namespace hitrade
