#include "lcan/sampler.hpp"

#include "lcan/init.hpp"
#include "lcan/likelihood.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace lcan {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_spd(const MatrixXd& m, const char* what) {
    if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + " must be square");
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(what) + " must be SPD");
}

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not SPD");
    return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

// vec() of an n x n matrix, column-major.
Eigen::Map<const VectorXd> vec(const MatrixXd& m) { return {m.data(), m.size()}; }

// Design and excluded mean term of one coefficient block.
struct BlockDesign {
    MatrixXd h;
    MatrixXd excluded;
};

BlockDesign block_design(const ModelState& state, const CovariateSet& covs,
                         const CoefficientBlock& block) {
    const Index n = state.n();
    const double rho = state.latent.rho;
    const auto& u = state.community;
    const auto& c = state.coeffs;
    BlockDesign out;
    switch (block.kind) {
    case BlockKind::Intercept: {
        const auto dc = decorrelation_constants(rho);
        out.h = MatrixXd::Constant(n * n, 1, dc.s + dc.t);
        mask_diagonal_rows(out.h, n);
        out.excluded = intercept_term(n, c.beta0);
        break;
    }
    case BlockKind::Row:
        out.h = design_rowcol(covs, u, rho, Side::Row, block.index);
        out.excluded = rowcol_term(covs, u, c, Side::Row, block.index);
        break;
    case BlockKind::Column:
        out.h = design_rowcol(covs, u, rho, Side::Column, block.index);
        out.excluded = rowcol_term(covs, u, c, Side::Column, block.index);
        break;
    case BlockKind::DyadicRow:
        out.h = design_dyadic(covs, u, c, rho, Side::Row, block.index);
        out.excluded = dyadic_term(covs, u, c, block.index);
        break;
    case BlockKind::DyadicColumn:
        out.h = design_dyadic(covs, u, c, rho, Side::Column, block.index);
        out.excluded = dyadic_term(covs, u, c, block.index);
        break;
    }
    if (block.kind != BlockKind::Intercept && block_is_tied(covs, block))
        out.h = out.h.rowwise().sum().eval();
    return out;
}

MatrixXd& block_coefficients(CoefficientSet& c, BlockKind kind) {
    switch (kind) {
    case BlockKind::Row: return c.beta_r;
    case BlockKind::Column: return c.beta_c;
    case BlockKind::DyadicRow: return c.beta_dr;
    case BlockKind::DyadicColumn: return c.beta_dc;
    default: break;
    }
    throw std::invalid_argument("block has no coefficient matrix");
}

// Gram of the offsets of rows `nodes`: (s^2+t^2)(n-1) on the diagonal, 2st off it.
MatrixXd row_offset_gram(Index n, Index size, double s, double t) {
    MatrixXd g = MatrixXd::Constant(size, size, 2.0 * s * t);
    g.diagonal().setConstant((s * s + t * t) * static_cast<double>(n - 1));
    return g;
}

void check_finite(const ModelState& state) {
    auto ok = [](const auto& m) { return m.size() == 0 || m.allFinite(); };
    const auto& c = state.coeffs;
    if (!std::isfinite(c.beta0) || !ok(c.beta_r) || !ok(c.beta_c) || !ok(c.beta_dr) ||
        !ok(c.beta_dc) || !ok(state.latent.lambda) || !ok(state.latent.z) ||
        !ok(state.effects.a) || !ok(state.effects.b) || !ok(state.effects.h) ||
        !ok(state.effects.sigma_ab) || !std::isfinite(state.effects.sigma_h2) ||
        !std::isfinite(state.latent.rho))
        throw NumericalError("non-finite value in sampler state");
}

void fnv1a(std::uint64_t& hash, const std::string& text) {
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ULL;
    }
}

class StepTimer {
public:
    StepTimer(std::map<std::string, double>& sink, const char* name)
        : sink_(sink), name_(name), start_(std::chrono::steady_clock::now()) {}
    ~StepTimer() {
        sink_[name_] +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::map<std::string, double>& sink_;
    const char* name_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

// -- configuration ------------------------------------------------------------

PriorSpec PriorSpec::defaults(int K) {
    PriorSpec p;
    p.mu_betatilde = VectorXd::Zero(K);
    p.sigma_betatilde = 25.0 * MatrixXd::Identity(K, K);
    p.mu_lambda = VectorXd::Zero(K * K);
    p.sigma_lambda = 25.0 * MatrixXd::Identity(K * K, K * K);
    return p;
}

void PriorSpec::validate(int K) const {
    if (!(sigma2_beta0 > 0.0)) throw std::invalid_argument("prior: sigma2_beta0 must be > 0");
    if (mu_betatilde.size() != K || sigma_betatilde.rows() != K)
        throw std::invalid_argument("prior: betatilde hyperparameters must have dimension K");
    if (mu_lambda.size() != K * K || sigma_lambda.rows() != K * K)
        throw std::invalid_argument("prior: lambda hyperparameters must have dimension K^2");
    require_spd(sigma_betatilde, "prior: sigma_betatilde");
    require_spd(sigma_lambda, "prior: sigma_lambda");
    require_spd(iw_scale, "prior: iw_scale");
    if (!(iw_df > 1.0)) throw std::invalid_argument("prior: iw_df must exceed 1");
    if (!(sigma_h2_shape > 0.0) || !(sigma_h2_scale > 0.0))
        throw std::invalid_argument("prior: sigma_h^2 hyperparameters must be > 0");
}

void FitConfig::validate() const {
    if (n_iter < 1) throw std::invalid_argument("n_iter must be >= 1");
    if (burn_in < 0 || burn_in >= n_iter) throw std::invalid_argument("burn_in must be in [0, n_iter)");
    if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (!(rho_proposal_sd > 0.0)) throw std::invalid_argument("rho_proposal_sd must be > 0");
    if (membership_proposals < 0) throw std::invalid_argument("membership_proposals must be >= 0");
}

int FitConfig::proposals_for(Index n) const {
    if (membership_proposals > 0) return membership_proposals;
    return std::max(1, static_cast<int>((n + 9) / 10));
}

// -- Gaussian conditionals ----------------------------------------------------

MatrixXd GaussianConditional::covariance() const {
    return factor.solve(MatrixXd::Identity(precision.rows(), precision.cols()));
}

VectorXd GaussianConditional::draw(Rng& rng) const {
    const VectorXd eps = rng.normal_vector(mean.size());
    return mean + factor.matrixU().solve(eps);
}

GaussianConditional conjugate_normal(const MatrixXd& gram, const VectorXd& linear,
                                     const VectorXd& prior_mean, const MatrixXd& prior_precision) {
    const Index d = gram.rows();
    if (gram.cols() != d || linear.size() != d || prior_mean.size() != d ||
        prior_precision.rows() != d || prior_precision.cols() != d)
        throw std::invalid_argument("conjugate_normal: dimension mismatch");
    GaussianConditional out;
    out.precision = gram + prior_precision;
    out.precision = 0.5 * (out.precision + out.precision.transpose()).eval();
    out.factor.compute(out.precision);
    // Retry with growing jitter before giving up.
    const double scale = std::max(out.precision.diagonal().cwiseAbs().maxCoeff(), 1.0);
    for (int attempt = 0; out.factor.info() != Eigen::Success && attempt < 5; ++attempt) {
        out.precision.diagonal().array() += scale * 1e-10 * std::pow(100.0, attempt);
        out.factor.compute(out.precision);
    }
    if (out.factor.info() != Eigen::Success)
        throw NumericalError("conjugate_normal: posterior precision is not positive definite");
    out.mean = out.factor.solve(linear + prior_precision * prior_mean);
    if (!out.mean.allFinite()) throw NumericalError("conjugate_normal: non-finite mean");
    return out;
}

// -- blocks ----------------------------------------------------------------------

std::vector<CoefficientBlock> coefficient_blocks(const CovariateSet& covs) {
    std::vector<CoefficientBlock> blocks{{BlockKind::Intercept, 0}};
    for (Index l = 0; l < covs.num_row(); ++l) blocks.push_back({BlockKind::Row, l});
    for (Index l = 0; l < covs.num_column(); ++l) blocks.push_back({BlockKind::Column, l});
    for (Index l = 0; l < covs.num_dyadic(); ++l) {
        blocks.push_back({BlockKind::DyadicRow, l});
        // A tied dyadic term is a single scale on the sender side.
        if (covs.dyadic[l].community_dependent()) blocks.push_back({BlockKind::DyadicColumn, l});
    }
    return blocks;
}

bool block_is_tied(const CovariateSet& covs, const CoefficientBlock& block) {
    const auto at = [](const auto& v, Index l) -> const auto& { return v.at(static_cast<std::size_t>(l)); };
    switch (block.kind) {
    case BlockKind::Intercept: return true;
    case BlockKind::Row: return !at(covs.row, block.index).community_dependent;
    case BlockKind::Column: return !at(covs.column, block.index).community_dependent;
    case BlockKind::DyadicRow:
    case BlockKind::DyadicColumn: return !at(covs.dyadic, block.index).community_dependent();
    }
    return false;
}

MatrixXd whitened_residual(const ModelState& state, const MatrixXd& mean,
                           const MatrixXd& excluded_term) {
    MatrixXd r = state.latent.z - (mean - excluded_term);
    MatrixXd w = decorrelate(r, state.latent.rho);
    w.diagonal().setZero();
    return w;
}

// -- full conditionals ----------------------------------------------------------

GaussianConditional lambda_conditional(const ModelState& state, const CovariateSet& covs,
                                       const PriorSpec& priors, bool censored_mode) {
    const MatrixXd mean = mean_matrix(state, covs, censored_mode);
    const MatrixXd w =
        whitened_residual(state, mean, lambda_term(state.community, state.latent.lambda));
    const MatrixXd h = design_lambda(state.community, state.latent.rho);
    const MatrixXd prior_precision = spd_inverse(priors.sigma_lambda, "sigma_lambda");
    return conjugate_normal(h.transpose() * h, h.transpose() * vec(w), priors.mu_lambda,
                            prior_precision);
}

GaussianConditional beta_conditional(const ModelState& state, const CovariateSet& covs,
                                     const PriorSpec& priors, const CoefficientBlock& block,
                                     bool censored_mode) {
    const MatrixXd mean = mean_matrix(state, covs, censored_mode);
    const BlockDesign d = block_design(state, covs, block);
    const MatrixXd w = whitened_residual(state, mean, d.excluded);
    VectorXd prior_mean;
    MatrixXd prior_precision;
    if (block.kind == BlockKind::Intercept) {
        prior_mean = VectorXd::Constant(1, priors.mu_beta0);
        prior_precision = MatrixXd::Constant(1, 1, 1.0 / priors.sigma2_beta0);
    } else if (block_is_tied(covs, block)) {
        prior_mean = VectorXd::Constant(1, priors.mu_betatilde(0));
        prior_precision = MatrixXd::Constant(1, 1, 1.0 / priors.sigma_betatilde(0, 0));
    } else {
        prior_mean = priors.mu_betatilde;
        prior_precision = spd_inverse(priors.sigma_betatilde, "sigma_betatilde");
    }
    return conjugate_normal(d.h.transpose() * d.h, d.h.transpose() * vec(w), prior_mean,
                            prior_precision);
}

GaussianConditional additive_conditional(const ModelState& state, const CovariateSet& covs,
                                         bool censored_mode) {
    const Index n = state.n();
    const MatrixXd mean = mean_matrix(state, covs, censored_mode);
    const MatrixXd w =
        whitened_residual(state, mean, additive_term(state.effects.a, state.effects.b));
    const auto dc = decorrelation_constants(state.latent.rho);
    const double s = dc.s, t = dc.t;

    const VectorXd rows = w.rowwise().sum();
    const VectorXd cols = w.colwise().sum().transpose();
    VectorXd linear(2 * n);
    linear << s * rows + t * cols, s * cols + t * rows;

    const MatrixXd same = row_offset_gram(n, n, s, t);
    MatrixXd cross = MatrixXd::Constant(n, n, s * s + t * t);
    cross.diagonal().setConstant(2.0 * s * t * static_cast<double>(n - 1));
    MatrixXd gram(2 * n, 2 * n);
    gram << same, cross, cross.transpose(), same;

    const Eigen::Matrix2d p = spd_inverse(state.effects.sigma_ab, "sigma_ab");
    const MatrixXd id = MatrixXd::Identity(n, n);
    MatrixXd prior_precision(2 * n, 2 * n);
    prior_precision << p(0, 0) * id, p(0, 1) * id, p(1, 0) * id, p(1, 1) * id;
    return conjugate_normal(gram, linear, VectorXd::Zero(2 * n), prior_precision);
}

GaussianConditional censoring_conditional(const ModelState& state, const CovariateSet& covs,
                                          const std::vector<Index>& censored_nodes,
                                          const PriorSpec& priors) {
    (void)priors;
    const Index n = state.n();
    const Index c = static_cast<Index>(censored_nodes.size());
    const MatrixXd mean = mean_matrix(state, covs, true);
    const MatrixXd w = whitened_residual(state, mean, censoring_term(state.effects.h));
    const auto dc = decorrelation_constants(state.latent.rho);
    const VectorXd rows = w.rowwise().sum();
    const VectorXd cols = w.colwise().sum().transpose();
    VectorXd linear(c);
    for (Index k = 0; k < c; ++k) {
        const Index i = censored_nodes[static_cast<std::size_t>(k)];
        linear(k) = dc.s * rows(i) + dc.t * cols(i);
    }
    const MatrixXd gram = row_offset_gram(n, c, dc.s, dc.t);
    return conjugate_normal(gram, linear, VectorXd::Zero(c),
                            MatrixXd::Identity(c, c) / state.effects.sigma_h2);
}

// -- updates ------------------------------------------------------------------------

MatrixXd update_lambda(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                       Rng& rng, bool censored_mode) {
    const int K = state.K();
    const VectorXd draw = lambda_conditional(state, covs, priors, censored_mode).draw(rng);
    state.latent.lambda = Eigen::Map<const MatrixXd>(draw.data(), K, K);
    return state.latent.lambda;
}

MembershipMove update_membership(ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                                 Rng& rng, Index i, bool censored_mode) {
    MembershipMove move;
    const int K = state.K();
    if (K == 1) return move;
    const int current = state.community.label(i);
    move.proposed = rng.uniform_int(K);
    const double rho = state.latent.rho;
    NodeMeans chosen = node_means(state, covs, censored_mode, i, current);
    if (move.proposed != current) {
        const NodeMeans proposal = node_means(state, covs, censored_mode, i, move.proposed);
        const double log_ratio = node_loglik(y, proposal, i, rho) - node_loglik(y, chosen, i, rho);
        if (std::log(rng.uniform()) < log_ratio) {
            move.accepted = true;
            state.community.set_label(i, move.proposed);
            chosen = proposal;
        } else {
            return move;
        }
    }
    MatrixXd& z = state.latent.z;
    for (Index j = 0; j < state.n(); ++j) {
        if (j == i) continue;
        const auto [zij, zji] =
            sample_dyad_z(chosen.row(j), chosen.col(j), rho, y.edge(i, j), y.edge(j, i), rng);
        z(i, j) = zij;
        z(j, i) = zji;
    }
    return move;
}

double rho_log_target(const ModelState& state, const MatrixXd& mean, double rho) {
    if (!(std::abs(rho) < 1.0)) return kNegInf;
    const Index n = state.n();
    const MatrixXd e = state.latent.z - mean;
    double sq = 0.0, cross = 0.0;
    for (Index j = 1; j < n; ++j)
        for (Index i = 0; i < j; ++i) {
            sq += e(i, j) * e(i, j) + e(j, i) * e(j, i);
            cross += e(i, j) * e(j, i);
        }
    const double pairs = static_cast<double>(n * (n - 1) / 2);
    const double one_minus = 1.0 - rho * rho;
    // Arcsine prior contributes -log(1 - rho^2) / 2.
    return -0.5 * (pairs + 1.0) * std::log(one_minus) - (sq - 2.0 * rho * cross) / (2.0 * one_minus);
}

RhoMove update_rho(ModelState& state, const CovariateSet& covs, double proposal_sd, Rng& rng,
                   bool censored_mode) {
    const MatrixXd mean = mean_matrix(state, covs, censored_mode);
    const double current = state.latent.rho;
    const double proposal = current + proposal_sd * rng.normal();
    RhoMove move{current, false};
    if (!(std::abs(proposal) < 1.0)) return move;
    const double log_ratio =
        rho_log_target(state, mean, proposal) - rho_log_target(state, mean, current);
    if (std::log(rng.uniform()) < log_ratio) {
        state.latent.rho = proposal;
        move = {proposal, true};
    }
    return move;
}

VectorXd update_beta(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                     const CoefficientBlock& block, Rng& rng, bool censored_mode) {
    const VectorXd draw = beta_conditional(state, covs, priors, block, censored_mode).draw(rng);
    if (block.kind == BlockKind::Intercept) {
        state.coeffs.beta0 = draw(0);
        return draw;
    }
    MatrixXd& target = block_coefficients(state.coeffs, block.kind);
    if (draw.size() == 1) target.row(block.index).setConstant(draw(0));
    else target.row(block.index) = draw.transpose();
    return draw;
}

void update_z_gibbs(ModelState& state, const Sociomatrix& y, const CovariateSet& covs, Rng& rng,
                    bool censored_mode) {
    const Index n = state.n();
    const MatrixXd m = mean_matrix(state, covs, censored_mode);
    const double rho = state.latent.rho;
    const double sd = std::sqrt(1.0 - rho * rho);
    MatrixXd& z = state.latent.z;
    auto refresh = [&](Index i, Index j) {
        const double mu = m(i, j) + rho * (z(j, i) - m(j, i));
        z(i, j) = y.edge(i, j) ? sample_truncnorm(mu, sd, 0.0, kInf, rng)
                               : sample_truncnorm(mu, sd, kNegInf, 0.0, rng);
    };
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) refresh(i, j);
    for (Index j = 1; j < n; ++j)
        for (Index i = 0; i < j; ++i) refresh(i, j);
}

void update_additive_effects(ModelState& state, const CovariateSet& covs, Rng& rng,
                             bool censored_mode) {
    const Index n = state.n();
    const VectorXd draw = additive_conditional(state, covs, censored_mode).draw(rng);
    state.effects.a = draw.head(n);
    state.effects.b = draw.tail(n);
}

Eigen::Matrix2d update_sigma_ab(ModelState& state, const PriorSpec& priors, Rng& rng) {
    const Index n = state.n();
    Eigen::Matrix2d scatter = priors.iw_scale;
    for (Index i = 0; i < n; ++i) {
        const Eigen::Vector2d v(state.effects.a(i), state.effects.b(i));
        scatter += v * v.transpose();
    }
    state.effects.sigma_ab =
        sample_inverse_wishart(scatter, priors.iw_df + static_cast<double>(n), rng);
    return state.effects.sigma_ab;
}

namespace {

// Accumulates the Gaussian log prior along theta + delta * direction.
struct LineConditional {
    double precision = 0.0;
    double linear = 0.0;

    void add(const VectorXd& direction, const VectorXd& value, const VectorXd& mean,
             const MatrixXd& prior_precision) {
        const VectorXd pv = prior_precision * direction;
        precision += direction.dot(pv);
        linear -= pv.dot(value - mean);
    }
    void add_effects(const VectorXd& da, const VectorXd& db, const RandomEffects& e,
                     const Eigen::Matrix2d& p) {
        precision += p(0, 0) * da.squaredNorm() + 2.0 * p(0, 1) * da.dot(db) + p(1, 1) * db.squaredNorm();
        linear -= da.dot(p(0, 0) * e.a + p(0, 1) * e.b) + db.dot(p(1, 0) * e.a + p(1, 1) * e.b);
    }
    double draw(Rng& rng) const { return linear / precision + rng.normal() / std::sqrt(precision); }
};

}  // namespace

int update_translations(ModelState& state, const CovariateSet& covs, const PriorSpec& priors,
                        Rng& rng) {
    const Index n = state.n();
    const int K = state.K();
    const auto& f = state.community;
    const Eigen::Matrix2d p_ab = state.effects.sigma_ab.inverse();
    const MatrixXd p_beta = spd_inverse(priors.sigma_betatilde, "sigma_betatilde");
    const MatrixXd p_lambda = spd_inverse(priors.sigma_lambda, "sigma_lambda");
    const VectorXd zero = VectorXd::Zero(n);
    int shifts = 0;

    // direction: +1 on the chosen coefficients, -x on the matching effects.
    auto nodal = [&](MatrixXd& beta, Index l, const VectorXd& x, bool dependent, bool sender) {
        for (int k = 0; k < (dependent ? K : 1); ++k) {
            VectorXd dx = VectorXd::Zero(n);
            for (Index i = 0; i < n; ++i)
                if (!dependent || f.label(i) == k) dx(i) = -x(i);
            LineConditional line;
            if (dependent) {
                line.add(VectorXd::Unit(K, k), beta.row(l).transpose(), priors.mu_betatilde, p_beta);
            } else {
                line.add(VectorXd::Ones(1), VectorXd::Constant(1, beta(l, 0)),
                         VectorXd::Constant(1, priors.mu_betatilde(0)),
                         MatrixXd::Constant(1, 1, 1.0 / priors.sigma_betatilde(0, 0)));
            }
            line.add_effects(sender ? dx : zero, sender ? zero : dx, state.effects, p_ab);
            const double delta = line.draw(rng);
            if (dependent) beta(l, k) += delta;
            else beta.row(l).array() += delta;
            (sender ? state.effects.a : state.effects.b) += delta * dx;
            ++shifts;
        }
    };
    for (Index l = 0; l < static_cast<Index>(covs.row.size()); ++l)
        nodal(state.coeffs.beta_r, l, covs.row[l].values, covs.row[l].community_dependent, true);
    for (Index l = 0; l < static_cast<Index>(covs.column.size()); ++l)
        nodal(state.coeffs.beta_c, l, covs.column[l].values, covs.column[l].community_dependent, false);

    // Lambda row k (column k) against a (b) on community k.
    for (int side = 0; side < 2; ++side)
        for (int k = 0; k < K; ++k) {
            MatrixXd dl = MatrixXd::Zero(K, K);
            if (side == 0) dl.row(k).setOnes();
            else dl.col(k).setOnes();
            VectorXd dx = VectorXd::Zero(n);
            for (Index i = 0; i < n; ++i)
                if (f.label(i) == k) dx(i) = -1.0;
            LineConditional line;
            line.add(vec(dl), vec(state.latent.lambda), priors.mu_lambda, p_lambda);
            line.add_effects(side == 0 ? dx : zero, side == 0 ? zero : dx, state.effects, p_ab);
            const double delta = line.draw(rng);
            state.latent.lambda += delta * dl;
            (side == 0 ? state.effects.a : state.effects.b) += delta * dx;
            ++shifts;
        }

    // beta0 against all of a, then all of b.
    for (int side = 0; side < 2; ++side) {
        const VectorXd dx = VectorXd::Constant(n, -1.0);
        LineConditional line;
        line.add(VectorXd::Ones(1), VectorXd::Constant(1, state.coeffs.beta0),
                 VectorXd::Constant(1, priors.mu_beta0), MatrixXd::Constant(1, 1, 1.0 / priors.sigma2_beta0));
        line.add_effects(side == 0 ? dx : zero, side == 0 ? zero : dx, state.effects, p_ab);
        const double delta = line.draw(rng);
        state.coeffs.beta0 += delta;
        (side == 0 ? state.effects.a : state.effects.b) += delta * dx;
        ++shifts;
    }
    return shifts;
}

VectorXd sweep_censoring_offsets(ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                                 const PriorSpec& priors, Rng& rng) {
    const std::vector<Index> nodes = y.censored_nodes();
    const Index c = static_cast<Index>(nodes.size());
    if (c > 0) {
        const GaussianConditional cond = censoring_conditional(state, covs, nodes, priors);
        VectorXd h(c);
        for (Index k = 0; k < c; ++k) h(k) = std::min(state.effects.h(nodes[k]), 0.0);
        const MatrixXd& q = cond.precision;
        for (Index k = 0; k < c; ++k) {
            const double others = q.row(k).dot(h - cond.mean) - q(k, k) * (h(k) - cond.mean(k));
            const double mu = cond.mean(k) - others / q(k, k);
            h(k) = sample_truncnorm(mu, 1.0 / std::sqrt(q(k, k)), kNegInf, 0.0, rng);
        }
        for (Index k = 0; k < c; ++k) state.effects.h(nodes[k]) = h(k);
    }
    return state.effects.h;
}

VectorXd update_censoring_offsets(ModelState& state, const Sociomatrix& y,
                                  const CovariateSet& covs, const PriorSpec& priors, Rng& rng) {
    sweep_censoring_offsets(state, y, covs, priors, rng);
    const auto c = static_cast<double>(y.censored_nodes().size());
    const double shape = priors.sigma_h2_shape + 0.5 * c;
    const double rate = priors.sigma_h2_scale + 0.5 * state.effects.h.squaredNorm();
    state.effects.sigma_h2 = 1.0 / rng.gamma(shape, 1.0 / rate);
    return state.effects.h;
}

// -- chain ----------------------------------------------------------------------------

std::vector<UbetaColumn> ubeta_columns(const CovariateSet& covs) {
    std::vector<UbetaColumn> cols;
    for (const auto& c : covs.row) cols.push_back({"row:" + c.name, c.community_dependent});
    for (const auto& c : covs.column) cols.push_back({"col:" + c.name, c.community_dependent});
    for (const auto& c : covs.dyadic) {
        cols.push_back({"dr:" + c.name(), c.community_dependent()});
        cols.push_back({"dc:" + c.name(), c.community_dependent()});
    }
    return cols;
}

MatrixXd ubeta_matrix(const ModelState& state, const CovariateSet& covs) {
    const Index n = state.n();
    const auto& c = state.coeffs;
    MatrixXd out(n, covs.num_row() + covs.num_column() + 2 * covs.num_dyadic());
    for (Index i = 0; i < n; ++i) {
        const int k = state.community.label(i);
        Index col = 0;
        for (Index l = 0; l < covs.num_row(); ++l) out(i, col++) = c.beta_r(l, k);
        for (Index l = 0; l < covs.num_column(); ++l) out(i, col++) = c.beta_c(l, k);
        for (Index l = 0; l < covs.num_dyadic(); ++l) {
            out(i, col++) = c.beta_dr(l, k);
            out(i, col++) = c.beta_dc(l, k);
        }
    }
    return out;
}

CovariateSet apply_dependence_flags(const CovariateSet& covs, const FitConfig& config) {
    CovariateSet out = covs;
    for (const auto& [name, dependent] : config.dependence_flags) {
        bool found = false;
        for (auto& c : out.row)
            if (c.name == name) found = true, c.community_dependent = dependent;
        for (auto& c : out.column)
            if (c.name == name) found = true, c.community_dependent = dependent;
        for (auto& c : out.dyadic)
            if (c.name() == name) {
                found = true;
                c = DyadicCovariate(c.name(), c.values(), dependent);
            }
        if (!found) throw DataError("dependence flag for unknown covariate '" + name + "'");
    }
    return out;
}

ModelState initial_state(const Sociomatrix& y, const CovariateSet& covs, const FitConfig& config,
                         Rng& rng) {
    const Index n = y.size();
    const int K = config.K;
    ModelState state;
    switch (config.init_method) {
    case InitMethod::Spectral: state.community = spectral_init(y, K, config.seed); break;
    case InitMethod::Residual: state.community = residual_init(y, covs, K, config.seed); break;
    case InitMethod::Random: state.community = random_init(n, K, rng); break;
    case InitMethod::Provided:
        if (static_cast<Index>(config.initial_labels.size()) != n)
            throw DataError("initial labels must have one entry per node");
        state.community = CommunityAssignment(K, config.initial_labels);
        break;
    }
    state.coeffs = CoefficientSet::zeros(covs, K);
    state.effects = RandomEffects::zeros(n);
    state.latent.rho = 0.0;
    state.latent.lambda = MatrixXd::Zero(K, K);
    state.latent.z = MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) state.latent.z(i, j) = y.edge(i, j) ? 0.5 : -0.5;
    return state;
}

std::string config_fingerprint(const FitConfig& config, const PriorSpec& priors) {
    std::ostringstream out;
    out << std::setprecision(17) << config.n_iter << '|' << config.burn_in << '|' << config.thin
        << '|' << config.seed << '|' << static_cast<int>(config.init_method) << '|' << config.K
        << '|' << config.censored_mode << '|' << config.rho_proposal_sd << '|'
        << config.membership_proposals << '|' << config.fix_memberships << '|';
    for (const auto& [name, dep] : config.dependence_flags) out << name << '=' << dep << ',';
    out << '|';
    for (int l : config.initial_labels) out << l << ',';
    out << '|' << priors.mu_beta0 << '|' << priors.sigma2_beta0 << '|';
    auto dump = [&out](const MatrixXd& m) {
        for (Index k = 0; k < m.size(); ++k) out << m.data()[k] << ',';
        out << '|';
    };
    dump(priors.mu_betatilde);
    dump(priors.sigma_betatilde);
    dump(priors.mu_lambda);
    dump(priors.sigma_lambda);
    dump(priors.iw_scale);
    out << priors.iw_df << '|' << priors.sigma_h2_shape << '|' << priors.sigma_h2_scale;

    std::uint64_t hash = 14695981039346656037ULL;
    fnv1a(hash, out.str());
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << hash;
    return hex.str();
}

ChainOutput run_chain(const Sociomatrix& y, const CovariateSet& covs_in, const FitConfig& config,
                      const PriorSpec& priors, const ChainHooks& hooks,
                      const ChainCheckpoint* resume) {
    config.validate();
    priors.validate(config.K);
    covs_in.validate();
    if (covs_in.n != y.size()) throw DataError("covariates and network disagree on node count");
    if (config.K > y.size()) throw std::invalid_argument("K exceeds the number of nodes");
    const CovariateSet covs = apply_dependence_flags(covs_in, config);
    const bool censored = config.censored_mode;
    if (censored && !y.censor_cap()) throw DataError("censored mode requires a censoring cap");

    Rng rng(config.seed);
    ModelState state;
    int start = 0;
    long member_accepts = 0, member_tries = 0, rho_accepts = 0;
    if (resume) {
        state = resume->state;
        rng.restore(resume->rng_state);
        start = resume->iteration;
        member_accepts = resume->membership_accepts;
        member_tries = resume->membership_tries;
        rho_accepts = resume->rho_accepts;
        if (state.n() != y.size() || state.K() != config.K)
            throw DataError("checkpoint does not match the data or K");
    } else {
        state = initial_state(y, covs, config, rng);
    }

    ChainOutput out;
    out.columns = ubeta_columns(covs);
    out.K = config.K;
    out.n = y.size();
    out.seed = config.seed;
    out.config_hash = config_fingerprint(config, priors);
    out.censored_mode = censored;
    out.initial_labels = state.community.labels();
    if (!out.draws.capacity())
        out.draws.reserve(static_cast<std::size_t>(
            std::max(0, (config.n_iter - std::max(start, config.burn_in)) / config.thin + 1)));

    const auto blocks = coefficient_blocks(covs);
    const int proposals = config.proposals_for(y.size());
    auto& timing = out.step_seconds;

    for (int it = start + 1; it <= config.n_iter; ++it) {
        try {
            {
                StepTimer t(timing, "z");
                update_z_gibbs(state, y, covs, rng, censored);
            }
            if (config.K > 1 && !config.fix_memberships) {
                StepTimer t(timing, "membership");
                for (int p = 0; p < proposals; ++p) {
                    const Index node = rng.uniform_int(static_cast<int>(y.size()));
                    const MembershipMove move = update_membership(state, y, covs, rng, node, censored);
                    ++member_tries;
                    if (move.accepted) ++member_accepts;
                }
            }
            {
                StepTimer t(timing, "lambda");
                update_lambda(state, covs, priors, rng, censored);
            }
            {
                StepTimer t(timing, "beta");
                for (const auto& block : blocks) update_beta(state, covs, priors, block, rng, censored);
            }
            {
                StepTimer t(timing, "additive");
                update_additive_effects(state, covs, rng, censored);
                update_sigma_ab(state, priors, rng);
            }
            {
                StepTimer t(timing, "translations");
                update_translations(state, covs, priors, rng);
            }
            if (censored) {
                StepTimer t(timing, "censoring");
                update_censoring_offsets(state, y, covs, priors, rng);
            }
            {
                StepTimer t(timing, "rho");
                if (update_rho(state, covs, config.rho_proposal_sd, rng, censored).accepted)
                    ++rho_accepts;
            }
            check_finite(state);
        } catch (const ChainFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw ChainFailure(std::string("iteration ") + std::to_string(it) + ": " + e.what(), it,
                               state);
        }

        if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
            StepTimer t(timing, "record");
            Draw d;
            d.iteration = it;
            d.coeffs = state.coeffs;
            d.lambda = state.latent.lambda;
            d.rho = state.latent.rho;
            d.sigma_ab = state.effects.sigma_ab;
            d.a = state.effects.a;
            d.b = state.effects.b;
            d.h = state.effects.h;
            d.sigma_h2 = state.effects.sigma_h2;
            d.labels = state.community.labels();
            d.ubeta = ubeta_matrix(state, covs);
            d.loglik = network_loglik(state, y, covs, censored);
            out.draws.push_back(std::move(d));
        }

        out.membership_acceptance =
            member_tries ? static_cast<double>(member_accepts) / static_cast<double>(member_tries) : 0.0;
        out.rho_acceptance = static_cast<double>(rho_accepts) / static_cast<double>(it);

        if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
            (it % hooks.checkpoint_every == 0 || it == config.n_iter)) {
            ChainCheckpoint cp{it, state, rng.state(), member_accepts, member_tries, rho_accepts};
            hooks.on_checkpoint(cp, out);
        }
    }
    return out;
}

}  // namespace lcan
