#pragma once

#include "lcan/random.hpp"
#include "lcan/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lcan {

struct KMeansResult {
    std::vector<int> labels;  // 0-based
    MatrixXd centers;         // K x d
    double within_ss = 0.0;
    /// within_ss after each Lloyd iteration of the winning restart.
    std::vector<double> history;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs.
/// Equidistant points go to the lowest-index center; an emptied cluster is
/// reseeded at the point farthest from its own center.
KMeansResult kmeans(const MatrixXd& points, int K, std::uint64_t seed, int restarts = 10,
                    int max_iterations = 200);

/// Regularized-Laplacian spectral clustering of the sociomatrix.
CommunityAssignment spectral_init(const Sociomatrix& y, int K, std::uint64_t seed = 0,
                                  std::string* warning = nullptr);

struct ProbitFit {
    VectorXd beta;
    bool converged = false;
    int iterations = 0;
};

/// Probit regression by iteratively reweighted least squares. Fitted
/// probabilities are clamped to [1e-6, 1 - 1e-6].
ProbitFit probit_irls(const MatrixXd& design, const VectorXd& response, int max_iterations = 100,
                      double tolerance = 1e-8);

/// Dyad-level design (intercept, row, column and dyadic covariates) over the
/// off-diagonal cells in column-major order, and the matching responses.
MatrixXd dyad_design(const CovariateSet& covs);
VectorXd dyad_response(const Sociomatrix& y);

/// Clusters the leading left singular vectors of the probit residual matrix.
/// Falls back to spectral_init when IRLS does not converge.
CommunityAssignment residual_init(const Sociomatrix& y, const CovariateSet& covs, int K,
                                  std::uint64_t seed = 0, std::string* warning = nullptr);

CommunityAssignment random_init(Index n, int K, Rng& rng);

}  // namespace lcan
