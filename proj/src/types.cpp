#include "lcan/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lcan {

Sociomatrix Sociomatrix::from_dense(const MatrixXd& dense, std::optional<int> censor_cap) {
    if (dense.rows() != dense.cols()) throw DataError("sociomatrix must be square");
    const Index n = dense.rows();
    Sociomatrix out;
    out.y_.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (i == j) {
                out.y_(i, j) = kAbsent;
                continue;
            }
            const double v = dense(i, j);
            if (v != 0.0 && v != 1.0) {
                std::ostringstream msg;
                msg << "sociomatrix entry (" << i + 1 << "," << j + 1 << ") is not 0/1";
                throw DataError(msg.str());
            }
            out.y_(i, j) = static_cast<std::int8_t>(v);
        }
    }
    out.censor_cap_ = censor_cap;
    out.censored_ = Eigen::VectorXi::Zero(n);
    if (censor_cap) {
        if (*censor_cap < 1) throw DataError("censor cap must be positive");
        const Eigen::VectorXi deg = out.out_degree();
        for (Index i = 0; i < n; ++i) {
            if (deg(i) > *censor_cap) {
                std::ostringstream msg;
                msg << "node " << i + 1 << " has out-degree " << deg(i) << " above cap "
                    << *censor_cap;
                throw DataError(msg.str());
            }
            out.censored_(i) = deg(i) == *censor_cap ? 1 : 0;
        }
    }
    return out;
}

MatrixXd Sociomatrix::dense() const {
    MatrixXd out = y_.cast<double>();
    out.diagonal().setZero();
    return out;
}

Eigen::VectorXi Sociomatrix::out_degree() const {
    Eigen::VectorXi deg = Eigen::VectorXi::Zero(size());
    for (Index j = 0; j < size(); ++j)
        for (Index i = 0; i < size(); ++i)
            if (y_(i, j) == 1) ++deg(i);
    return deg;
}

Eigen::VectorXi Sociomatrix::in_degree() const {
    Eigen::VectorXi deg = Eigen::VectorXi::Zero(size());
    for (Index j = 0; j < size(); ++j)
        for (Index i = 0; i < size(); ++i)
            if (y_(i, j) == 1) ++deg(j);
    return deg;
}

double Sociomatrix::density() const {
    const Index n = size();
    if (n < 2) return 0.0;
    return static_cast<double>(out_degree().sum()) / static_cast<double>(n * (n - 1));
}

std::vector<Index> Sociomatrix::censored_nodes() const {
    std::vector<Index> nodes;
    for (Index i = 0; i < censored_.size(); ++i)
        if (censored_(i)) nodes.push_back(i);
    return nodes;
}

DyadicCovariate::DyadicCovariate(std::string name, MatrixXd values, bool community_dependent)
    : name_(std::move(name)), values_(std::move(values)), community_dependent_(community_dependent) {
    if (values_.rows() != values_.cols())
        throw DataError("dyadic covariate " + name_ + " must be square");
    if (!values_.allFinite()) throw DataError("dyadic covariate " + name_ + " has non-finite values");
    Eigen::JacobiSVD<MatrixXd> svd(values_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? kSvdDropTolerance * sv(0) : 0.0;
    Index keep = 0;
    while (keep < sv.size() && sv(keep) > cutoff && sv(keep) > 0.0) ++keep;
    sigma_ = sv.head(keep);
    q_ = svd.matrixU().leftCols(keep);
    w_ = svd.matrixV().leftCols(keep);
}

void CovariateSet::validate() const {
    auto check_node = [&](const NodeCovariate& c) {
        if (c.values.size() != n) throw DataError("covariate " + c.name + " has wrong length");
        if (!c.values.allFinite()) throw DataError("covariate " + c.name + " has non-finite values");
    };
    for (const auto& c : row) check_node(c);
    for (const auto& c : column) check_node(c);
    for (const auto& d : dyadic)
        if (d.values().rows() != n) throw DataError("dyadic covariate " + d.name() + " has wrong size");
}

CommunityAssignment::CommunityAssignment(int K, std::vector<int> labels)
    : K_(K), labels_(std::move(labels)) {
    if (K_ < 1) throw std::invalid_argument("community count must be >= 1");
    for (int k : labels_)
        if (k < 0 || k >= K_) throw std::invalid_argument("community label out of range");
}

CommunityAssignment CommunityAssignment::all_in_one(Index n, int K) {
    return CommunityAssignment(K, std::vector<int>(static_cast<std::size_t>(n), 0));
}

void CommunityAssignment::set_label(Index i, int k) {
    if (k < 0 || k >= K_) throw std::invalid_argument("community label out of range");
    labels_.at(static_cast<std::size_t>(i)) = k;
}

MatrixXd CommunityAssignment::one_hot() const {
    MatrixXd u = MatrixXd::Zero(size(), K_);
    for (Index i = 0; i < size(); ++i) u(i, label(i)) = 1.0;
    return u;
}

Eigen::VectorXi CommunityAssignment::sizes() const {
    Eigen::VectorXi s = Eigen::VectorXi::Zero(K_);
    for (int k : labels_) ++s(k);
    return s;
}

CoefficientSet CoefficientSet::zeros(const CovariateSet& covs, int K) {
    CoefficientSet c;
    c.beta_r = MatrixXd::Zero(covs.num_row(), K);
    c.beta_c = MatrixXd::Zero(covs.num_column(), K);
    c.beta_dr = MatrixXd::Zero(covs.num_dyadic(), K);
    // The receiver side of a dyadic term starts neutral (all ones).
    c.beta_dc = MatrixXd::Ones(covs.num_dyadic(), K);
    return c;
}

bool CoefficientSet::ties_hold(const CovariateSet& covs, double tol) const {
    auto tied = [tol](const MatrixXd& m, Index l) {
        return (m.row(l).array() - m(l, 0)).abs().maxCoeff() <= tol;
    };
    for (Index l = 0; l < covs.num_row(); ++l)
        if (!covs.row[l].community_dependent && !tied(beta_r, l)) return false;
    for (Index l = 0; l < covs.num_column(); ++l)
        if (!covs.column[l].community_dependent && !tied(beta_c, l)) return false;
    for (Index l = 0; l < covs.num_dyadic(); ++l)
        if (!covs.dyadic[l].community_dependent() && (!tied(beta_dr, l) || !tied(beta_dc, l)))
            return false;
    return true;
}

RandomEffects RandomEffects::zeros(Index n) {
    RandomEffects e;
    e.a = VectorXd::Zero(n);
    e.b = VectorXd::Zero(n);
    e.h = VectorXd::Zero(n);
    return e;
}

}  // namespace lcan
