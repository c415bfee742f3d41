#pragma once

#include "lcan/model.hpp"
#include "lcan/random.hpp"
#include "lcan/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lcan {

struct PriorSpec {
    double mu_beta0 = 0.0;
    double sigma2_beta0 = 25.0;
    VectorXd mu_betatilde;     // K
    MatrixXd sigma_betatilde;  // K x K
    VectorXd mu_lambda;        // K^2, column-major vec(Lambda)
    MatrixXd sigma_lambda;     // K^2 x K^2
    Eigen::Matrix2d iw_scale = Eigen::Matrix2d::Identity();
    double iw_df = 4.0;
    double sigma_h2_shape = 2.0;
    double sigma_h2_scale = 1.0;

    /// Weakly informative defaults: N(0, 25) on every coefficient and on
    /// vec(Lambda), Inverse-Wishart(I, 4) on Sigma_ab, IG(2, 1) on sigma_h^2.
    static PriorSpec defaults(int K);
    void validate(int K) const;
};

enum class InitMethod { Spectral, Residual, Random, Provided };

struct FitConfig {
    int n_iter = 150000;
    int burn_in = 0;
    int thin = 1;
    std::uint64_t seed = 1;
    InitMethod init_method = InitMethod::Spectral;
    int K = 3;
    bool censored_mode = false;
    /// Per-covariate overrides of the community-dependence flag, by name.
    std::map<std::string, bool> dependence_flags;
    double rho_proposal_sd = 0.05;
    /// Single-node membership proposals per iteration; 0 means max(1, ceil(n/10)).
    int membership_proposals = 0;
    /// Labels (0-based) for InitMethod::Provided.
    std::vector<int> initial_labels;
    /// Keep the initial memberships fixed (oracle or pre-estimated communities).
    bool fix_memberships = false;

    void validate() const;
    int proposals_for(Index n) const;
};

/// A Gaussian full conditional N(precision^{-1} * linear, precision^{-1}).
struct GaussianConditional {
    VectorXd mean;
    MatrixXd precision;
    Eigen::LLT<MatrixXd> factor;

    MatrixXd covariance() const;
    VectorXd draw(Rng& rng) const;
};

/// mean and precision of N(V m, V) with V = (H^t H + P)^{-1} and
/// m = H^t w + P mu. Rows of H for masked cells must already be zero.
GaussianConditional conjugate_normal(const MatrixXd& gram, const VectorXd& linear,
                                     const VectorXd& prior_mean, const MatrixXd& prior_precision);

enum class BlockKind { Intercept, Row, Column, DyadicRow, DyadicColumn };

struct CoefficientBlock {
    BlockKind kind = BlockKind::Intercept;
    Index index = 0;
};

/// Every block updated by the sampler, in update order.
std::vector<CoefficientBlock> coefficient_blocks(const CovariateSet& covs);
/// Whether the block is drawn as a single tied value.
bool block_is_tied(const CovariateSet& covs, const CoefficientBlock& block);

/// Decorrelated residual s*R + t*R^t, R = Z - (M - excluded_term), with
/// the diagonal zeroed.
MatrixXd whitened_residual(const ModelState& state, const MatrixXd& mean,
                           const MatrixXd& excluded_term);

// -- full conditionals ---------------------------------------------------------

GaussianConditional lambda_conditional(const ModelState& state, const CovariateSet& covs,
                                       const PriorSpec& priors, bool censored_mode = false);
/// For a tied block the conditional is one-dimensional.
GaussianConditional beta_conditional(const ModelState& state, const CovariateSet& covs,
                                     const PriorSpec& priors, const CoefficientBlock& block,
                                     bool censored_mode = false);
/// Joint conditional of (a_1..a_n, b_1..b_n).
GaussianConditional additive_conditional(const ModelState& state, const CovariateSet& covs,
                                         bool censored_mode = false);
/// Untruncated conditional of the censored nodes' offsets, in the order of
/// `censored_nodes`.
GaussianConditional censoring_conditional(const ModelState& state, const CovariateSet& covs,
                                          const std::vector<Index>& censored_nodes,
                                          const PriorSpec& priors);

// -- update steps ------------------------------------------------------------

MatrixXd update_lambda(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                       Rng& rng, bool censored_mode = false);

struct MembershipMove {
    bool accepted = false;
    int proposed = 0;
};
/// Metropolis step on node i's label with Z marginalized out. On acceptance
/// the dyads of node i are redrawn from their constrained distribution.
MembershipMove update_membership(ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                                 Rng& rng, Index i, bool censored_mode = false);

struct RhoMove {
    double rho = 0.0;
    bool accepted = false;
};
/// log density of rho given the current residual pairs, arcsine prior included.
double rho_log_target(const ModelState& state, const MatrixXd& mean, double rho);
RhoMove update_rho(ModelState& state, const CovariateSet& covs, double proposal_sd, Rng& rng,
                   bool censored_mode = false);

VectorXd update_beta(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                     const CoefficientBlock& block, Rng& rng, bool censored_mode = false);

/// Two half sweeps of truncated conditionals: lower triangle given upper,
/// then upper given the refreshed lower.
void update_z_gibbs(ModelState& state, const Sociomatrix& y, const CovariateSet& covs, Rng& rng,
                    bool censored_mode = false);

void update_additive_effects(ModelState& state, const CovariateSet& covs, Rng& rng,
                             bool censored_mode = false);

Eigen::Matrix2d update_sigma_ab(ModelState& state, const PriorSpec& priors, Rng& rng);

/// Joint shifts along directions that leave the mean matrix unchanged:
/// beta_r(l, k) against a on community k, beta_c(l, k) against b, rows and
/// columns of Lambda against a and b, and beta0 against a and against b.
/// Only the Gaussian priors see the shift, so each step is an exact draw.
/// Returns the number of shifts made.
int update_translations(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                        Rng& rng);

/// One coordinatewise sweep over the censored nodes' offsets, each drawn from
/// its conditional restricted to (-inf, 0); sigma_h^2 is held fixed.
VectorXd sweep_censoring_offsets(ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                                 const PriorSpec& priors, Rng& rng);

/// sweep_censoring_offsets, then sigma_h^2 from its inverse-gamma conditional.
VectorXd update_censoring_offsets(ModelState& state, const Sociomatrix& y,
                                  const CovariateSet& covs, const PriorSpec& priors, Rng& rng);

// -- chain -------------------------------------------------------------------

struct Draw {
    int iteration = 0;
    CoefficientSet coeffs;
    MatrixXd lambda;
    double rho = 0.0;
    Eigen::Matrix2d sigma_ab;
    VectorXd a;
    VectorXd b;
    VectorXd h;
    double sigma_h2 = 1.0;
    std::vector<int> labels;
    /// n x P matrix of u_i * beta for every covariate block.
    MatrixXd ubeta;
    double loglik = 0.0;
};

struct UbetaColumn {
    std::string name;  // "row:x", "col:x", "dr:x", "dc:x"
    bool community_dependent = true;
};

std::vector<UbetaColumn> ubeta_columns(const CovariateSet& covs);
MatrixXd ubeta_matrix(const ModelState& state, const CovariateSet& covs);

struct ChainOutput {
    std::vector<UbetaColumn> columns;
    std::vector<Draw> draws;
    int K = 1;
    Index n = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool censored_mode = false;
    std::vector<int> initial_labels;
    double membership_acceptance = 0.0;
    double rho_acceptance = 0.0;
    /// Wall-clock seconds spent in each update step.
    std::map<std::string, double> step_seconds;
};

struct ChainCheckpoint {
    int iteration = 0;
    ModelState state;
    std::string rng_state;
    long membership_accepts = 0;
    long membership_tries = 0;
    long rho_accepts = 0;
};

struct ChainHooks {
    int checkpoint_every = 0;
    /// Called after every `checkpoint_every` iterations with the state and
    /// the output recorded so far.
    std::function<void(const ChainCheckpoint&, const ChainOutput&)> on_checkpoint;
};

/// Raised when an update fails; carries the iteration and the last state.
class ChainFailure : public NumericalError {
public:
    ChainFailure(const std::string& what, int iteration, ModelState snapshot)
        : NumericalError(what), iteration_(iteration), snapshot_(std::move(snapshot)) {}
    int iteration() const { return iteration_; }
    const ModelState& snapshot() const { return snapshot_; }

private:
    int iteration_;
    ModelState snapshot_;
};

/// Applies the dependence overrides of `config` to a copy of `covs`.
CovariateSet apply_dependence_flags(const CovariateSet& covs, const FitConfig& config);

/// Initial state: memberships per config, Z at sign-consistent +-0.5,
/// everything else at zero (Sigma_ab at I).
ModelState initial_state(const Sociomatrix& y, const CovariateSet& covs, const FitConfig& config,
                         Rng& rng);

/// Stable fingerprint of the configuration and priors.
std::string config_fingerprint(const FitConfig& config, const PriorSpec& priors);

ChainOutput run_chain(const Sociomatrix& y, const CovariateSet& covs, const FitConfig& config,
                      const PriorSpec& priors, const ChainHooks& hooks = {},
                      const ChainCheckpoint* resume = nullptr);

}  // namespace lcan
