#include "lcan/model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <sstream>

namespace lcan {
namespace {

void check_dimensions(const ModelState& state, const CovariateSet& covs) {
    const Index n = state.n();
    const int K = state.K();
    auto fail = [](const std::string& what) { throw std::invalid_argument("dimension mismatch: " + what); };
    if (covs.n != n) fail("covariates vs memberships");
    const auto& c = state.coeffs;
    if (c.beta_r.rows() != covs.num_row() || (covs.num_row() && c.beta_r.cols() != K)) fail("beta_r");
    if (c.beta_c.rows() != covs.num_column() || (covs.num_column() && c.beta_c.cols() != K))
        fail("beta_c");
    if (c.beta_dr.rows() != covs.num_dyadic() || c.beta_dc.rows() != covs.num_dyadic()) fail("beta_d");
    if (state.latent.lambda.rows() != K || state.latent.lambda.cols() != K) fail("lambda");
    if (state.effects.a.size() != n || state.effects.b.size() != n) fail("additive effects");
}

// diag(x) * U without forming either factor densely.
MatrixXd scaled_membership(const VectorXd& x, const CommunityAssignment& community) {
    MatrixXd a = MatrixXd::Zero(community.size(), community.K());
    for (Index i = 0; i < community.size(); ++i) a(i, community.label(i)) = x(i);
    return a;
}

VectorXd expand_by_label(const VectorXd& per_community, const CommunityAssignment& community) {
    VectorXd out(community.size());
    for (Index i = 0; i < community.size(); ++i) out(i) = per_community(community.label(i));
    return out;
}

// s * (first) + t * (second), diagonal rows zeroed.
MatrixXd combine(const MatrixXd& first, const MatrixXd& second, double rho, Index n) {
    const auto dc = decorrelation_constants(rho);
    MatrixXd h = dc.s * first + dc.t * second;
    mask_diagonal_rows(h, n);
    return h;
}

}  // namespace

MatrixXd intercept_term(Index n, double beta0) { return MatrixXd::Constant(n, n, beta0); }

MatrixXd rowcol_term(const CovariateSet& covs, const CommunityAssignment& community,
                     const CoefficientSet& coeffs, Side side, Index l) {
    const Index n = community.size();
    if (side == Side::Row) {
        const VectorXd v = covs.row.at(static_cast<std::size_t>(l)).values.cwiseProduct(
            expand_by_label(coeffs.beta_r.row(l).transpose(), community));
        return v * Eigen::RowVectorXd::Ones(n);
    }
    const VectorXd v = covs.column.at(static_cast<std::size_t>(l)).values.cwiseProduct(
        expand_by_label(coeffs.beta_c.row(l).transpose(), community));
    return VectorXd::Ones(n) * v.transpose();
}

MatrixXd dyadic_term(const CovariateSet& covs, const CommunityAssignment& community,
                     const CoefficientSet& coeffs, Index l) {
    const VectorXd dr = expand_by_label(coeffs.beta_dr.row(l).transpose(), community);
    const VectorXd dc = expand_by_label(coeffs.beta_dc.row(l).transpose(), community);
    return dr.asDiagonal() * covs.dyadic.at(static_cast<std::size_t>(l)).values() * dc.asDiagonal();
}

MatrixXd lambda_term(const CommunityAssignment& community, const MatrixXd& lambda) {
    const Index n = community.size();
    MatrixXd out(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) out(i, j) = lambda(community.label(i), community.label(j));
    return out;
}

MatrixXd additive_term(const VectorXd& a, const VectorXd& b) {
    return a * Eigen::RowVectorXd::Ones(b.size()) + VectorXd::Ones(a.size()) * b.transpose();
}

MatrixXd censoring_term(const VectorXd& h) { return h * Eigen::RowVectorXd::Ones(h.size()); }

MatrixXd mean_matrix(const ModelState& state, const CovariateSet& covs, bool censored_mode) {
    check_dimensions(state, covs);
    covs.validate();
    const Index n = state.n();
    const auto& u = state.community;
    const auto& c = state.coeffs;

    VectorXd sender = VectorXd::Constant(n, c.beta0) + state.effects.a;
    if (censored_mode) sender += state.effects.h;
    VectorXd receiver = state.effects.b;
    for (Index l = 0; l < covs.num_row(); ++l)
        sender += covs.row[l].values.cwiseProduct(expand_by_label(c.beta_r.row(l).transpose(), u));
    for (Index l = 0; l < covs.num_column(); ++l)
        receiver +=
            covs.column[l].values.cwiseProduct(expand_by_label(c.beta_c.row(l).transpose(), u));

    MatrixXd m = sender * Eigen::RowVectorXd::Ones(n) + VectorXd::Ones(n) * receiver.transpose();
    m += lambda_term(u, state.latent.lambda);
    for (Index l = 0; l < covs.num_dyadic(); ++l) m += dyadic_term(covs, u, c, l);
    return m;
}

NodeMeans node_means(const ModelState& state, const CovariateSet& covs, bool censored_mode,
                     Index i, int label) {
    const Index n = state.n();
    const auto& u = state.community;
    const auto& c = state.coeffs;
    const auto& e = state.effects;
    const MatrixXd& lambda = state.latent.lambda;

    // Sender part of row i and receiver part of column i, under `label`.
    double sender_i = c.beta0 + e.a(i) + (censored_mode ? e.h(i) : 0.0);
    double receiver_i = e.b(i);
    for (Index l = 0; l < covs.num_row(); ++l) sender_i += covs.row[l].values(i) * c.beta_r(l, label);
    for (Index l = 0; l < covs.num_column(); ++l)
        receiver_i += covs.column[l].values(i) * c.beta_c(l, label);

    NodeMeans out{VectorXd(n), VectorXd(n)};
    for (Index j = 0; j < n; ++j) {
        const int fj = j == i ? label : u.label(j);
        double sender_j = c.beta0 + e.a(j) + (censored_mode ? e.h(j) : 0.0);
        double receiver_j = e.b(j);
        for (Index l = 0; l < covs.num_row(); ++l) sender_j += covs.row[l].values(j) * c.beta_r(l, fj);
        for (Index l = 0; l < covs.num_column(); ++l)
            receiver_j += covs.column[l].values(j) * c.beta_c(l, fj);
        double mij = sender_i + receiver_j + lambda(label, fj);
        double mji = sender_j + receiver_i + lambda(fj, label);
        for (Index l = 0; l < covs.num_dyadic(); ++l) {
            const MatrixXd& x = covs.dyadic[l].values();
            mij += c.beta_dr(l, label) * x(i, j) * c.beta_dc(l, fj);
            mji += c.beta_dr(l, fj) * x(j, i) * c.beta_dc(l, label);
        }
        out.row(j) = mij;
        out.col(j) = mji;
    }
    return out;
}

MatrixXd design_rowcol(const CovariateSet& covs, const CommunityAssignment& community, double rho,
                       Side side, Index l) {
    const auto& list = side == Side::Row ? covs.row : covs.column;
    if (l < 0 || l >= static_cast<Index>(list.size()))
        throw std::out_of_range("design_rowcol: covariate index out of range");
    const Index n = community.size();
    const MatrixXd a = scaled_membership(list[static_cast<std::size_t>(l)].values, community);
    const VectorXd ones = VectorXd::Ones(n);
    const MatrixXd broadcast_rows = Eigen::kroneckerProduct(ones, a);  // cell (i,j) -> a(i,:)
    const MatrixXd broadcast_cols = Eigen::kroneckerProduct(a, ones);  // cell (i,j) -> a(j,:)
    if (side == Side::Row) return combine(broadcast_rows, broadcast_cols, rho, n);
    return combine(broadcast_cols, broadcast_rows, rho, n);
}

MatrixXd design_lambda(const CommunityAssignment& community, double rho) {
    const Index n = community.size();
    const int K = community.K();
    const MatrixXd u = community.one_hot();
    const MatrixXd direct = Eigen::kroneckerProduct(u, u);
    // The transpose of U Lambda U^t is U Lambda^t U^t: permute vec(Lambda).
    MatrixXd swapped(direct.rows(), direct.cols());
    for (int k = 0; k < K; ++k)
        for (int m = 0; m < K; ++m) swapped.col(k + K * m) = direct.col(m + K * k);
    return combine(direct, swapped, rho, n);
}

MatrixXd design_dyadic_outer(const VectorXd& x, const VectorXd& y,
                             const CommunityAssignment& community, const VectorXd& other_side,
                             double rho, Side side) {
    const Index n = community.size();
    if (x.size() != n || y.size() != n || other_side.size() != community.K())
        throw std::invalid_argument("design_dyadic_outer: dimension mismatch");
    const VectorXd other = expand_by_label(other_side, community);
    if (side == Side::Row) {
        // cell (a,b): u_ak x_a * y_b beta_dc[f(b)]
        const MatrixXd left = scaled_membership(x, community);
        const VectorXd right = y.cwiseProduct(other);
        return combine(Eigen::kroneckerProduct(right, left), Eigen::kroneckerProduct(left, right), rho,
                       n);
    }
    // cell (a,b): beta_dr[f(a)] x_a * y_b u_bk
    const VectorXd left = x.cwiseProduct(other);
    const MatrixXd right = scaled_membership(y, community);
    return combine(Eigen::kroneckerProduct(right, left), Eigen::kroneckerProduct(left, right), rho, n);
}

MatrixXd design_dyadic_svd(const DyadicCovariate& cov, const CommunityAssignment& community,
                           const VectorXd& other_side, double rho, Side side) {
    const Index n = community.size();
    if (cov.sigma().size() == 0) {
        if (cov.values().size() != 0 && cov.values().cwiseAbs().maxCoeff() > 0.0)
            throw std::invalid_argument("design_dyadic: missing SVD factors");
        return MatrixXd::Zero(n * n, community.K());
    }
    MatrixXd h = MatrixXd::Zero(n * n, community.K());
    for (Index c = 0; c < cov.sigma().size(); ++c) {
        const VectorXd x = cov.sigma()(c) * cov.q().col(c);
        h += design_dyadic_outer(x, cov.w().col(c), community, other_side, rho, side);
    }
    return h;
}

MatrixXd design_dyadic(const CovariateSet& covs, const CommunityAssignment& community,
                       const CoefficientSet& coeffs, double rho, Side side, Index l) {
    if (l < 0 || l >= covs.num_dyadic()) throw std::out_of_range("design_dyadic: index out of range");
    const DyadicCovariate& cov = covs.dyadic[static_cast<std::size_t>(l)];
    const VectorXd other =
        side == Side::Row ? coeffs.beta_dc.row(l).transpose() : coeffs.beta_dr.row(l).transpose();
    if (cov.rank_one())
        return design_dyadic_outer(cov.sigma()(0) * cov.q().col(0), cov.w().col(0), community, other,
                                   rho, side);
    return design_dyadic_svd(cov, community, other, rho, side);
}

MatrixXd design_censoring(const Eigen::VectorXi& censored_flags, double rho) {
    const Index n = censored_flags.size();
    const VectorXd ones = VectorXd::Ones(n);
    const MatrixXd identity = MatrixXd::Identity(n, n);
    const VectorXd flags = censored_flags.cast<double>();
    const MatrixXd own_row = Eigen::kroneckerProduct(ones, identity) * flags.asDiagonal();
    const MatrixXd own_col = Eigen::kroneckerProduct(identity, ones) * flags.asDiagonal();
    return combine(own_row, own_col, rho, n);
}

}  // namespace lcan
