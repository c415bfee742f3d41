#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcan {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Input data that violates a documented invariant (bad entries, wrong shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed (non-SPD covariance, non-finite draw, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Directed binary network. The diagonal is stored as an explicit "absent"
/// marker; self-ties are never observed.
class Sociomatrix {
public:
    static constexpr std::int8_t kAbsent = -1;

    Sociomatrix() = default;

    /// Builds from a dense 0/1 matrix. The diagonal of `dense` is ignored.
    /// Throws DataError on non-binary off-diagonal entries or when an
    /// out-degree exceeds `censor_cap`.
    static Sociomatrix from_dense(const MatrixXd& dense,
                                  std::optional<int> censor_cap = std::nullopt);

    Index size() const { return y_.rows(); }
    bool edge(Index i, Index j) const { return y_(i, j) == 1; }
    std::int8_t raw(Index i, Index j) const { return y_(i, j); }

    /// 0/1 matrix with zeros on the diagonal.
    MatrixXd dense() const;

    Eigen::VectorXi out_degree() const;
    Eigen::VectorXi in_degree() const;
    double density() const;

    const std::optional<int>& censor_cap() const { return censor_cap_; }
    /// 1 for nodes whose out-degree equals the cap; all zero without a cap.
    const Eigen::VectorXi& censored_flags() const { return censored_; }
    std::vector<Index> censored_nodes() const;

private:
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> y_;
    std::optional<int> censor_cap_;
    Eigen::VectorXi censored_;
};

/// A nodal covariate used on the sender (row) or receiver (column) side.
struct NodeCovariate {
    std::string name;
    VectorXd values;
    bool community_dependent = true;
};

/// An n x n covariate. The SVD factors are computed once on construction;
/// components with singular value below `kSvdDropTolerance * sigma_max` are
/// discarded.
class DyadicCovariate {
public:
    static constexpr double kSvdDropTolerance = 1e-10;

    DyadicCovariate() = default;
    DyadicCovariate(std::string name, MatrixXd values, bool community_dependent);

    const std::string& name() const { return name_; }
    const MatrixXd& values() const { return values_; }
    bool community_dependent() const { return community_dependent_; }

    /// Retained singular values, left vectors (columns of q) and right vectors
    /// (columns of w), so that values() ~= q * diag(sigma) * w^t.
    const VectorXd& sigma() const { return sigma_; }
    const MatrixXd& q() const { return q_; }
    const MatrixXd& w() const { return w_; }
    bool rank_one() const { return sigma_.size() == 1; }

private:
    std::string name_;
    MatrixXd values_;
    bool community_dependent_ = true;
    VectorXd sigma_;
    MatrixXd q_;
    MatrixXd w_;
};

struct CovariateSet {
    Index n = 0;
    std::vector<NodeCovariate> row;
    std::vector<NodeCovariate> column;
    std::vector<DyadicCovariate> dyadic;

    /// Throws DataError on shape mismatch or non-finite values.
    void validate() const;
    Index num_row() const { return static_cast<Index>(row.size()); }
    Index num_column() const { return static_cast<Index>(column.size()); }
    Index num_dyadic() const { return static_cast<Index>(dyadic.size()); }
};

/// One-hot memberships, stored as 0-based labels.
class CommunityAssignment {
public:
    CommunityAssignment() = default;
    CommunityAssignment(int K, std::vector<int> labels);

    static CommunityAssignment all_in_one(Index n, int K = 1);

    int K() const { return K_; }
    Index size() const { return static_cast<Index>(labels_.size()); }
    int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
    void set_label(Index i, int k);
    const std::vector<int>& labels() const { return labels_; }

    /// n x K indicator matrix U.
    MatrixXd one_hot() const;
    Eigen::VectorXi sizes() const;

private:
    int K_ = 1;
    std::vector<int> labels_;
};

/// Coefficient matrices are (covariates x K). A covariate flagged as
/// community independent has its K entries tied to one value.
struct CoefficientSet {
    double beta0 = 0.0;
    MatrixXd beta_r;
    MatrixXd beta_c;
    MatrixXd beta_dr;
    MatrixXd beta_dc;

    static CoefficientSet zeros(const CovariateSet& covs, int K);
    /// True when every tied block really carries one replicated value.
    bool ties_hold(const CovariateSet& covs, double tol = 0.0) const;
};

struct RandomEffects {
    VectorXd a;
    VectorXd b;
    VectorXd h;
    Eigen::Matrix2d sigma_ab = Eigen::Matrix2d::Identity();
    double sigma_h2 = 1.0;

    static RandomEffects zeros(Index n);
};

struct LatentState {
    MatrixXd z;
    double rho = 0.0;
    MatrixXd lambda;
};

struct ModelState {
    CommunityAssignment community;
    CoefficientSet coeffs;
    RandomEffects effects;
    LatentState latent;

    Index n() const { return community.size(); }
    int K() const { return community.K(); }
};

}  // namespace lcan
