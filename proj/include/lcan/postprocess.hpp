#pragma once

#include "lcan/sampler.hpp"
#include "lcan/types.hpp"

#include <string>
#include <vector>

namespace lcan {

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

struct Interval {
    double lower = 0.0;
    double mean = 0.0;
    double upper = 0.0;
};

Interval credible_interval(const std::vector<double>& draws, double level = 0.95);

struct CoefficientSummary {
    std::vector<UbetaColumn> columns;
    /// node_intervals[p][i]: interval of u_i beta for column p.
    std::vector<std::vector<Interval>> node_intervals;
    /// community_intervals[p][k]: endpoint-averaged interval over cluster k.
    std::vector<std::vector<Interval>> community_intervals;
    /// pooled_intervals[p][k]: interval of all draws of nodes in cluster k pooled.
    std::vector<std::vector<Interval>> pooled_intervals;
    std::vector<int> cluster;  // 0-based cluster of every node
    Eigen::VectorXi cluster_sizes;
};

/// Label-switching resolution: k-means on the per-node posterior means of all
/// community-dependent u_i beta columns jointly, then per-cluster averages of
/// the per-node interval endpoints.
CoefficientSummary resolve_labels(const ChainOutput& chain, int K, double level = 0.95,
                                  std::uint64_t seed = 0);

/// n sum_k S_k^2 beta_k |c_k| / (n^2 S^2).
double community_weighted_average(const VectorXd& per_community, const VectorXd& sizes,
                                  const VectorXd& variability, double overall_variability,
                                  Index n);

/// Ingredients of the pooled-versus-community OLS comparison for
/// Z = Diag(beta U^t) X + E with known memberships.
struct OlsDecomposition {
    VectorXd per_community;  // community OLS estimates
    VectorXd sizes;          // |c_k|
    VectorXd variability;    // S_k^2
    double overall_variability = 0.0;  // S^2
    double pooled = 0.0;     // OLS of Z on X ignoring communities
};
OlsDecomposition ols_decomposition(const MatrixXd& z, const MatrixXd& x,
                                   const CommunityAssignment& community);

struct EssResult {
    double ess = 0.0;
    bool degenerate = false;  // constant series
};
/// Geyer initial positive sequence estimator.
EssResult ess(const std::vector<double>& series);

/// Autocorrelations at lags 0..max_lag.
std::vector<double> acf(const std::vector<double>& series, int max_lag);

/// Spectral density at frequency zero from the initial positive sequence.
double spectral_variance_at_zero(const std::vector<double>& series);

/// Difference of the means of the first frac_a and last frac_b of the series
/// over its standard error.
double geweke(const std::vector<double>& series, double frac_a = 0.1, double frac_b = 0.5);

struct EssPerError {
    double value = 0.0;
    bool infinite = false;  // posterior mean equals truth
};
EssPerError ess_per_error(const std::vector<double>& series, double truth);

/// Adjusted Rand index of two labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// Per-draw series of u_i beta for column p and node i.
std::vector<double> ubeta_series(const ChainOutput& chain, Index column, Index node);

}  // namespace lcan
