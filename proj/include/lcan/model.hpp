#pragma once

#include "lcan/types.hpp"

#include <cmath>
#include <stdexcept>

namespace lcan {

/// Coefficients of the map Z -> s Z + t Z^t that whitens dyad pairs whose
/// errors have correlation rho.
template <typename Scalar>
struct Decorrelation {
    Scalar s;
    Scalar t;
};

template <typename Scalar>
Decorrelation<Scalar> decorrelation_constants(Scalar rho) {
    using std::abs;
    using std::sqrt;
    if (!(abs(rho) < Scalar(1)))
        throw std::domain_error("decorrelation_constants: |rho| must be < 1");
    const Scalar plus = Scalar(1) / sqrt(Scalar(1) + rho);
    const Scalar minus = Scalar(1) / sqrt(Scalar(1) - rho);
    return {(plus + minus) / Scalar(2), (plus - minus) / Scalar(2)};
}

/// s * z + t * z^t for square z.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
decorrelate(const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar rho) {
    if (z.rows() != z.cols()) throw std::invalid_argument("decorrelate: matrix must be square");
    const auto dc = decorrelation_constants(rho);
    return dc.s * z + dc.t * z.transpose();
}

/// Zeroes the rows of an n^2-row design (or entries of an n^2 vector) that
/// correspond to diagonal cells (i, i).
template <typename Derived>
void mask_diagonal_rows(Eigen::MatrixBase<Derived>& h, Index n) {
    for (Index i = 0; i < n; ++i) h.row(i + n * i).setZero();
}

enum class Side { Row, Column };

// -- mean structure ---------------------------------------------------------

/// Full latent mean M. The diagonal is filled but carries no meaning.
/// With `censored_mode` the offsets h_i are added along row i.
MatrixXd mean_matrix(const ModelState& state, const CovariateSet& covs, bool censored_mode);

/// The individual terms of the mean, each as an n x n matrix.
MatrixXd intercept_term(Index n, double beta0);
MatrixXd rowcol_term(const CovariateSet& covs, const CommunityAssignment& community,
                     const CoefficientSet& coeffs, Side side, Index l);
MatrixXd dyadic_term(const CovariateSet& covs, const CommunityAssignment& community,
                     const CoefficientSet& coeffs, Index l);
MatrixXd lambda_term(const CommunityAssignment& community, const MatrixXd& lambda);
MatrixXd additive_term(const VectorXd& a, const VectorXd& b);
MatrixXd censoring_term(const VectorXd& h);

/// Mean entries m_ij and m_ji for all j, if node i had label `label`.
/// `row(j)` holds m_ij and `col(j)` holds m_ji.
struct NodeMeans {
    VectorXd row;
    VectorXd col;
};
NodeMeans node_means(const ModelState& state, const CovariateSet& covs, bool censored_mode,
                     Index i, int label);

// -- Kronecker-structured designs ---------------------------------------------
//
// Every builder returns H with n^2 rows (column-major vec ordering, row index
// i + n j for cell (i, j)) such that H * vec(theta) is the vectorized,
// decorrelated contribution of the parameter block theta. Rows for diagonal
// cells are zero.

/// n^2 x K design for row covariate l (Side::Row) or column covariate l.
MatrixXd design_rowcol(const CovariateSet& covs, const CommunityAssignment& community,
                       double rho, Side side, Index l);

/// n^2 x K^2 design for vec(Lambda).
MatrixXd design_lambda(const CommunityAssignment& community, double rho);

/// n^2 x K design for the dyadic sender block (Side::Row, conditioning on
/// beta_dc) or receiver block (Side::Column, conditioning on beta_dr), summed
/// over the stored SVD components.
MatrixXd design_dyadic(const CovariateSet& covs, const CommunityAssignment& community,
                       const CoefficientSet& coeffs, double rho, Side side, Index l);

/// Sum over every stored SVD component of `cov`. `other_side` is the K-vector
/// of the opposing block's coefficients.
MatrixXd design_dyadic_svd(const DyadicCovariate& cov, const CommunityAssignment& community,
                           const VectorXd& other_side, double rho, Side side);

/// Closed form for a dyadic covariate x y^t (single outer product).
MatrixXd design_dyadic_outer(const VectorXd& x, const VectorXd& y,
                             const CommunityAssignment& community, const VectorXd& other_side,
                             double rho, Side side);

/// n^2 x n design for the censoring offsets: column i carries the offset of
/// row i and is zero for uncensored nodes.
MatrixXd design_censoring(const Eigen::VectorXi& censored_flags, double rho);

}  // namespace lcan
