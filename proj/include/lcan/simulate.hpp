#pragma once

#include "lcan/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lcan {

/// Generative scenario. Every nodal covariate is drawn i.i.d. N(0, 1) and
/// enters both the sender and the receiver side.
struct ScenarioSpec {
    std::string name;
    Index n = 150;
    int K = 3;
    /// Empty means K contiguous, (nearly) equal blocks.
    std::vector<Index> community_sizes;

    std::vector<std::string> covariate_names;
    std::vector<bool> dependent;  // per covariate
    MatrixXd beta_r;              // covariates x K
    MatrixXd beta_c;              // covariates x K
    MatrixXd lambda;              // K x K

    double rho = 0.9;
    Eigen::Matrix2d sigma_ab = (Eigen::Matrix2d() << 1.0, 0.5, 0.5, 1.0).finished();
    double target_density = 0.3;
    /// Fixes the intercept and skips calibration.
    std::optional<double> beta0;
    std::optional<int> censor_cap;
    /// Replace U Lambda U^t by L Lambda L^t with continuous rows l_i ~ N(0, I_K).
    bool continuous_latent = false;
    std::uint64_t seed = 1;

    void validate() const;
    std::vector<Index> sizes() const;
};

struct SimulatedNetwork {
    Sociomatrix y;
    CovariateSet covs;
    ModelState truth;  // truth.latent.z is the latent matrix before thresholding
    /// n x K continuous latent positions (continuous_latent only).
    MatrixXd latent_positions;
    double density = 0.0;
    /// Dropped positives / all positive z (censored generation only).
    double censored_fraction = 0.0;
    /// Nodes whose number of positive z_ij exceeded the cap.
    std::vector<Index> exceeded;
};

/// Expected density of the scenario at intercept beta0, averaged over
/// `errors.size()` fixed error draws for the given offset-free mean.
double mc_density(const MatrixXd& mean_without_intercept, const std::vector<MatrixXd>& errors,
                  double beta0);

/// Number of Monte Carlo error draws per bisection probe.
inline constexpr int kCalibrationDraws = 20;

SimulatedNetwork generate_network(const ScenarioSpec& spec);

/// Generates Z as generate_network does, then keeps for each sender only the
/// (at most) censor_cap largest positive z_ij.
SimulatedNetwork generate_censored_network(const ScenarioSpec& spec);

std::vector<ScenarioSpec> scenario_presets();
/// Throws std::out_of_range for an unknown name.
ScenarioSpec scenario_preset(const std::string& name);

}  // namespace lcan
