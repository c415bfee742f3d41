#include "lcan/init.hpp"

#include "lcan/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace lcan {
namespace {

void emit_warning(std::string* sink, const std::string& message) {
    if (sink) *sink = message;
    else std::cerr << "warning: " << message << '\n';
}

struct LloydRun {
    std::vector<int> labels;
    MatrixXd centers;
    double within_ss = 0.0;
    std::vector<double> history;
};

MatrixXd plus_plus_seeds(const MatrixXd& points, int K, Rng& rng) {
    const Index n = points.rows();
    MatrixXd centers(K, points.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Index first = rng.uniform_int(static_cast<int>(n));
    centers.row(0) = points.row(first);
    chosen[static_cast<std::size_t>(first)] = true;
    VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < K; ++k) {
        Index pick = -1;
        const double total = d2.sum();
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                target -= d2(i);
                if (target <= 0.0 && d2(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0)
                for (Index i = n - 1; i >= 0; --i)
                    if (d2(i) > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            // All remaining points coincide with a center.
            std::vector<Index> free;
            for (Index i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
            pick = free[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(free.size())))];
        }
        chosen[static_cast<std::size_t>(pick)] = true;
        centers.row(k) = points.row(pick);
        d2 = d2.cwiseMin((points.rowwise() - centers.row(k)).rowwise().squaredNorm());
    }
    return centers;
}

double assign(const MatrixXd& points, const MatrixXd& centers, std::vector<int>& labels,
              VectorXd& dist2) {
    double total = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < centers.rows(); ++k) {
            const double d = (points.row(i) - centers.row(k)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
        dist2(i) = best_d;
        total += best_d;
    }
    return total;
}

void repair_empty(const MatrixXd& points, const MatrixXd& centers, std::vector<int>& labels,
                  VectorXd& dist2, int K) {
    for (int k = 0; k < K; ++k) {
        std::vector<int> counts(static_cast<std::size_t>(K), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        if (counts[static_cast<std::size_t>(k)] > 0) continue;
        Index far = -1;
        double far_d = -1.0;
        for (Index i = 0; i < points.rows(); ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(l)] < 2) continue;
            const double d = (points.row(i) - centers.row(l)).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        labels[static_cast<std::size_t>(far)] = k;
        dist2(far) = 0.0;
    }
}

MatrixXd recenter(const MatrixXd& points, const std::vector<int>& labels, int K) {
    MatrixXd centers = MatrixXd::Zero(K, points.cols());
    VectorXd counts = VectorXd::Zero(K);
    for (Index i = 0; i < points.rows(); ++i) {
        centers.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int k = 0; k < K; ++k) centers.row(k) /= counts(k);
    return centers;
}

double within_ss(const MatrixXd& points, const MatrixXd& centers, const std::vector<int>& labels) {
    double total = 0.0;
    for (Index i = 0; i < points.rows(); ++i)
        total += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return total;
}

LloydRun lloyd(const MatrixXd& points, int K, Rng& rng, int max_iterations) {
    LloydRun run;
    run.labels.assign(static_cast<std::size_t>(points.rows()), 0);
    run.centers = plus_plus_seeds(points, K, rng);
    VectorXd dist2(points.rows());
    std::vector<int> previous;
    for (int it = 0; it < max_iterations; ++it) {
        assign(points, run.centers, run.labels, dist2);
        repair_empty(points, run.centers, run.labels, dist2, K);
        run.centers = recenter(points, run.labels, K);
        const double wss = within_ss(points, run.centers, run.labels);
        if (!run.history.empty() && wss > run.history.back() * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("kmeans: within-cluster sum of squares increased");
        run.history.push_back(wss);
        if (run.labels == previous) break;
        previous = run.labels;
    }
    run.within_ss = run.history.back();
    return run;
}

MatrixXd leading_left_singular_vectors(const MatrixXd& m, int K) {
    Eigen::BDCSVD<MatrixXd> svd(m, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(K);
}

}  // namespace

KMeansResult kmeans(const MatrixXd& points, int K, std::uint64_t seed, int restarts,
                    int max_iterations) {
    if (K < 1) throw std::invalid_argument("kmeans: K must be >= 1");
    if (K > points.rows()) throw std::invalid_argument("kmeans: K exceeds the number of points");
    Rng master(seed);
    LloydRun best;
    bool have = false;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        Rng rng(master.split());
        LloydRun run = lloyd(points, K, rng, max_iterations);
        if (!have || run.within_ss < best.within_ss) {
            best = std::move(run);
            have = true;
        }
    }
    return {best.labels, best.centers, best.within_ss, best.history};
}

CommunityAssignment spectral_init(const Sociomatrix& y, int K, std::uint64_t seed,
                                  std::string* warning) {
    const Index n = y.size();
    if (K < 1) throw std::invalid_argument("spectral_init: K must be >= 1");
    if (K > n) throw std::invalid_argument("spectral_init: K exceeds node count");
    if (K == 1) return CommunityAssignment::all_in_one(n, 1);
    const MatrixXd a = y.dense();
    if (a.sum() == 0.0) {
        emit_warning(warning, "spectral_init: empty network, all nodes placed in community 1");
        return CommunityAssignment::all_in_one(n, K);
    }
    const VectorXd out_deg = a.rowwise().sum();
    const VectorXd in_deg = a.colwise().sum().transpose();
    const double tau_r = out_deg.mean();
    const double tau_c = in_deg.mean();
    const VectorXd left = (in_deg.array() + tau_c).rsqrt().matrix();
    const VectorXd right = (out_deg.array() + tau_r).rsqrt().matrix();
    const MatrixXd laplacian = left.asDiagonal() * a * right.asDiagonal();
    const KMeansResult km = kmeans(leading_left_singular_vectors(laplacian, K), K, seed);
    return CommunityAssignment(K, km.labels);
}

ProbitFit probit_irls(const MatrixXd& design, const VectorXd& response, int max_iterations,
                      double tolerance) {
    constexpr double kClamp = 1e-6;
    const double inv_sqrt_2pi = 0.3989422804014327;
    ProbitFit fit;
    fit.beta = VectorXd::Zero(design.cols());
    for (int it = 1; it <= max_iterations; ++it) {
        const VectorXd eta = design * fit.beta;
        VectorXd weights(eta.size());
        VectorXd working(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            const double mu = std::clamp(normal_cdf(eta(i)), kClamp, 1.0 - kClamp);
            const double dens = std::max(inv_sqrt_2pi * std::exp(-0.5 * eta(i) * eta(i)), 1e-12);
            weights(i) = dens * dens / (mu * (1.0 - mu));
            working(i) = eta(i) + (response(i) - mu) / dens;
        }
        const VectorXd sw = weights.cwiseSqrt();
        const MatrixXd wx = sw.asDiagonal() * design;
        const VectorXd next =
            wx.completeOrthogonalDecomposition().solve(sw.cwiseProduct(working));
        const double change = (next - fit.beta).cwiseAbs().maxCoeff();
        fit.beta = next;
        fit.iterations = it;
        if (!fit.beta.allFinite()) return fit;
        if (change < tolerance) {
            fit.converged = true;
            return fit;
        }
    }
    return fit;
}

MatrixXd dyad_design(const CovariateSet& covs) {
    const Index n = covs.n;
    const Index p = 1 + covs.num_row() + covs.num_column() + covs.num_dyadic();
    MatrixXd x(n * (n - 1), p);
    Index r = 0;
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (i == j) continue;
            Index c = 0;
            x(r, c++) = 1.0;
            for (const auto& cov : covs.row) x(r, c++) = cov.values(i);
            for (const auto& cov : covs.column) x(r, c++) = cov.values(j);
            for (const auto& cov : covs.dyadic) x(r, c++) = cov.values()(i, j);
            ++r;
        }
    }
    return x;
}

VectorXd dyad_response(const Sociomatrix& y) {
    const Index n = y.size();
    VectorXd v(n * (n - 1));
    Index r = 0;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) v(r++) = y.edge(i, j) ? 1.0 : 0.0;
    return v;
}

CommunityAssignment residual_init(const Sociomatrix& y, const CovariateSet& covs, int K,
                                  std::uint64_t seed, std::string* warning) {
    const Index n = y.size();
    if (K < 1) throw std::invalid_argument("residual_init: K must be >= 1");
    if (K > n) throw std::invalid_argument("residual_init: K exceeds node count");
    if (covs.n != n) throw std::invalid_argument("residual_init: covariates do not match network");
    if (K == 1) return CommunityAssignment::all_in_one(n, 1);

    const MatrixXd x = dyad_design(covs);
    const ProbitFit fit = probit_irls(x, dyad_response(y));
    if (!fit.converged) {
        emit_warning(warning, "residual_init: probit IRLS did not converge, using spectral_init");
        return spectral_init(y, K, seed);
    }
    const VectorXd eta = x * fit.beta;
    MatrixXd residual = MatrixXd::Zero(n, n);
    Index r = 0;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j) {
                const double mu = std::clamp(normal_cdf(eta(r)), 1e-6, 1.0 - 1e-6);
                residual(i, j) = (y.edge(i, j) ? 1.0 : 0.0) - mu;
                ++r;
            }
    const KMeansResult km = kmeans(leading_left_singular_vectors(residual, K), K, seed);
    return CommunityAssignment(K, km.labels);
}

CommunityAssignment random_init(Index n, int K, Rng& rng) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = rng.uniform_int(K);
    return CommunityAssignment(K, std::move(labels));
}

}  // namespace lcan
