#pragma once

#include "lcan/model.hpp"
#include "lcan/random.hpp"
#include "lcan/types.hpp"

#include <utility>

namespace lcan {

/// Lower bound applied to every log-probability branch.
inline constexpr double kLogProbabilityFloor = -700.0;

/// Standard normal CDF.
double normal_cdf(double x);
/// log of the standard normal CDF, accurate deep in the lower tail.
double normal_log_cdf(double x);

/// P(X <= x, Y <= y) for a standard bivariate normal with correlation rho.
/// Genz's Gauss-Legendre evaluation of the Drezner-Wesolowsky single
/// integral; the rho = +-1 limits use the min/max closed forms.
double bvn_cdf(double x, double y, double rho);

struct DyadLikelihoodTerm {
    double m_ij = 0.0;
    double m_ji = 0.0;
    double rho = 0.0;
    bool y_ij = false;
    bool y_ji = false;
};

/// log P(y_ij, y_ji) for one unordered dyad under the bivariate probit.
double dyad_loglik(const DyadLikelihoodTerm& term);

/// Sum of dyad_loglik over all pairs i < j, Z marginalized out.
double network_loglik(const ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                      bool censored_mode = false);

/// Sum of dyad_loglik over the n - 1 dyads that involve node i, given the
/// row and column means of that node.
double node_loglik(const Sociomatrix& y, const NodeMeans& means, Index i, double rho);

/// Exact draw from N(mean, sd^2) restricted to (lower, upper). Either bound
/// may be infinite. Uses exponential or uniform rejection in the tails.
double sample_truncnorm(double mean, double sd, double lower, double upper, Rng& rng);

/// Gibbs sweeps used by sample_dyad_z when rejection keeps failing.
inline constexpr int kDyadSweeps = 10;
inline constexpr int kDyadRejectionLimit = 64;

/// Draw (z_ij, z_ji) from the bivariate normal with means (m_ij, m_ji) and
/// correlation rho, restricted to the orthant where z > 0 iff y = 1. Exact
/// rejection sampling; after kDyadRejectionLimit rejections (orthants of
/// negligible mass) it falls back to `sweeps` Gibbs sweeps.
std::pair<double, double> sample_dyad_z(double m_ij, double m_ji, double rho, bool y_ij, bool y_ji,
                                        Rng& rng, int sweeps = kDyadSweeps);

}  // namespace lcan
