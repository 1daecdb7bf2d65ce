#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace cmdp {

/// mt19937_64 with library-independent conversions, so a seed reproduces the
/// same stream under any standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential(1) variate, used for Dirichlet sampling.
    double exponential() { return -std::log1p(-uniform()); }

    /// Index drawn from an unnormalized-safe probability row by inverse CDF.
    template <typename Row>
    int categorical(const Row& probs) {
        const double u = uniform();
        double acc = 0.0;
        const int n = static_cast<int>(probs.size());
        for (int i = 0; i < n; ++i) {
            acc += probs(i);
            if (u < acc) return i;
        }
        // rounding left u above the final partial sum: take the last positive entry
        for (int i = n - 1; i >= 0; --i)
            if (probs(i) > 0.0) return i;
        return n - 1;
    }

    /// Flat Dirichlet(1,...,1) sample of length n.
    Eigen::VectorXd dirichlet(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = exponential();
        return v / v.sum();
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

} // namespace cmdp
