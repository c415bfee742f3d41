#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace lcan {

/// Random stream for the sampler. All draws are functions of the engine
/// state alone (no cached normals), so `state()`/`restore()` round-trip a
/// stream exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on (0, 1).
    double uniform() {
        // 53 random bits, shifted off zero.
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double exponential(double rate) { return -std::log(uniform()) / rate; }
    /// Gamma(shape, scale) by Marsaglia-Tsang.
    double gamma(double shape, double scale = 1.0);
    int uniform_int(int count) {
        return static_cast<int>(uniform() * count) % count;
    }

    Eigen::VectorXd normal_vector(Eigen::Index size);

    /// Sub-stream seed for parallel chains or restarts.
    std::uint64_t split() { return engine_(); }

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

/// Inverse-Wishart(scale, df) draw, mean scale / (df - d - 1).
Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double df, Rng& rng);

}  // namespace lcan
