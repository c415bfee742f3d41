#include "lcan/simulate.hpp"

#include "lcan/model.hpp"
#include "lcan/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lcan {
namespace {

// Dyad errors with unit variances and correlation rho; zero diagonal.
MatrixXd dyad_errors(Index n, double rho, Rng& rng) {
    const double tail = std::sqrt(1.0 - rho * rho);
    MatrixXd e = MatrixXd::Zero(n, n);
    for (Index j = 1; j < n; ++j)
        for (Index i = 0; i < j; ++i) {
            const double first = rng.normal();
            e(i, j) = first;
            e(j, i) = rho * first + tail * rng.normal();
        }
    return e;
}

double off_diagonal_density(const MatrixXd& z, double threshold) {
    const Index n = z.rows();
    double count = 0.0;
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            if (i != j && z(i, j) > threshold) count += 1.0;
    return count / static_cast<double>(n * (n - 1));
}

double calibrate_intercept(const MatrixXd& base, double target, double rho, Rng& rng) {
    std::vector<MatrixXd> errors;
    errors.reserve(kCalibrationDraws);
    for (int r = 0; r < kCalibrationDraws; ++r) errors.push_back(dyad_errors(base.rows(), rho, rng));
    double lo = -40.0, hi = 40.0;
    if (mc_density(base, errors, lo) > target || mc_density(base, errors, hi) < target)
        throw DataError("target density is unreachable for this scenario");
    for (int it = 0; it < 100 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mc_density(base, errors, mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

MatrixXd binary_from_latent(const MatrixXd& z) {
    MatrixXd y = (z.array() > 0.0).cast<double>();
    y.diagonal().setZero();
    return y;
}

}  // namespace

void ScenarioSpec::validate() const {
    if (n < 2) throw std::invalid_argument("scenario: n must be >= 2");
    if (K < 1 || K > n) throw std::invalid_argument("scenario: K must be in [1, n]");
    if (!community_sizes.empty()) {
        if (static_cast<int>(community_sizes.size()) != K)
            throw std::invalid_argument("scenario: need one size per community");
        if (std::accumulate(community_sizes.begin(), community_sizes.end(), Index{0}) != n)
            throw std::invalid_argument("scenario: community sizes must sum to n");
    }
    const Index p = static_cast<Index>(covariate_names.size());
    if (static_cast<Index>(dependent.size()) != p || beta_r.rows() != p || beta_c.rows() != p ||
        (p > 0 && (beta_r.cols() != K || beta_c.cols() != K)))
        throw std::invalid_argument("scenario: coefficient shapes do not match covariates");
    if (lambda.rows() != K || lambda.cols() != K)
        throw std::invalid_argument("scenario: lambda must be K x K");
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("scenario: |rho| must be < 1");
    if (!(target_density > 0.0 && target_density < 1.0))
        throw std::invalid_argument("scenario: target density must lie in (0, 1)");
    if (censor_cap && *censor_cap < 0) throw std::invalid_argument("scenario: negative censor cap");
    Eigen::LLT<Eigen::Matrix2d> llt(sigma_ab);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("scenario: sigma_ab must be SPD");
}

std::vector<Index> ScenarioSpec::sizes() const {
    if (!community_sizes.empty()) return community_sizes;
    std::vector<Index> out(static_cast<std::size_t>(K), n / K);
    for (Index k = 0; k < n % K; ++k) ++out[static_cast<std::size_t>(k)];
    return out;
}

double mc_density(const MatrixXd& mean_without_intercept, const std::vector<MatrixXd>& errors,
                  double beta0) {
    double total = 0.0;
    for (const auto& e : errors) total += off_diagonal_density(mean_without_intercept + e, -beta0);
    return total / static_cast<double>(errors.size());
}

SimulatedNetwork generate_network(const ScenarioSpec& spec) {
    spec.validate();
    const Index n = spec.n;
    const int K = spec.K;
    Rng rng(spec.seed);
    SimulatedNetwork out;

    std::vector<int> labels;
    const auto sizes = spec.sizes();
    for (int k = 0; k < K; ++k) labels.insert(labels.end(), static_cast<std::size_t>(sizes[k]), k);

    out.covs.n = n;
    for (std::size_t p = 0; p < spec.covariate_names.size(); ++p) {
        VectorXd x = rng.normal_vector(n);
        out.covs.row.push_back({spec.covariate_names[p], x, spec.dependent[p]});
        out.covs.column.push_back({spec.covariate_names[p], x, spec.dependent[p]});
    }

    ModelState& truth = out.truth;
    truth.community = CommunityAssignment(K, labels);
    truth.coeffs = CoefficientSet::zeros(out.covs, K);
    truth.coeffs.beta_r = spec.beta_r;
    truth.coeffs.beta_c = spec.beta_c;
    truth.effects = RandomEffects::zeros(n);
    truth.effects.sigma_ab = spec.sigma_ab;
    const Eigen::Matrix2d chol = spec.sigma_ab.llt().matrixL();
    for (Index i = 0; i < n; ++i) {
        const Eigen::Vector2d ab = chol * Eigen::Vector2d(rng.normal(), rng.normal());
        truth.effects.a(i) = ab(0);
        truth.effects.b(i) = ab(1);
    }
    truth.latent.rho = spec.rho;

    MatrixXd extra = MatrixXd::Zero(n, n);
    if (spec.continuous_latent) {
        out.latent_positions = MatrixXd(n, K);
        for (Index i = 0; i < n; ++i) out.latent_positions.row(i) = rng.normal_vector(K).transpose();
        extra = out.latent_positions * spec.lambda * out.latent_positions.transpose();
        truth.latent.lambda = MatrixXd::Zero(K, K);
    } else {
        truth.latent.lambda = spec.lambda;
    }

    const MatrixXd errors = dyad_errors(n, spec.rho, rng);
    Rng calibration(rng.split());

    truth.coeffs.beta0 = 0.0;
    const MatrixXd base = mean_matrix(truth, out.covs, false) + extra;
    truth.coeffs.beta0 =
        spec.beta0 ? *spec.beta0 : calibrate_intercept(base, spec.target_density, spec.rho, calibration);

    MatrixXd z = base.array() + truth.coeffs.beta0;
    z += errors;
    z.diagonal().setZero();
    truth.latent.z = z;
    out.y = Sociomatrix::from_dense(binary_from_latent(z));
    out.density = out.y.density();
    return out;
}

SimulatedNetwork generate_censored_network(const ScenarioSpec& spec) {
    if (!spec.censor_cap) throw std::invalid_argument("generate_censored_network: censor_cap not set");
    SimulatedNetwork out = generate_network(spec);
    const Index n = spec.n;
    const int m = *spec.censor_cap;
    const MatrixXd& z = out.truth.latent.z;
    MatrixXd y = MatrixXd::Zero(n, n);
    double positives = 0.0, dropped = 0.0;
    std::vector<Index> order;
    for (Index i = 0; i < n; ++i) {
        order.clear();
        for (Index j = 0; j < n; ++j)
            if (j != i && z(i, j) > 0.0) order.push_back(j);
        std::sort(order.begin(), order.end(), [&](Index a, Index b) { return z(i, a) > z(i, b); });
        const std::size_t keep = std::min(order.size(), static_cast<std::size_t>(m));
        for (std::size_t r = 0; r < keep; ++r) y(i, order[r]) = 1.0;
        positives += static_cast<double>(order.size());
        dropped += static_cast<double>(order.size() - keep);
        if (order.size() > static_cast<std::size_t>(m)) out.exceeded.push_back(i);
    }
    out.y = Sociomatrix::from_dense(y, m < n - 1 ? std::optional<int>(m) : std::nullopt);
    out.density = out.y.density();
    out.censored_fraction = positives > 0.0 ? dropped / positives : 0.0;
    return out;
}

std::vector<ScenarioSpec> scenario_presets() {
    std::vector<ScenarioSpec> presets;

    ScenarioSpec binary;
    binary.name = "binary-k3";
    binary.n = 150;
    binary.K = 3;
    binary.covariate_names = {"x1", "x2"};
    binary.dependent = {false, true};
    binary.beta_r = (MatrixXd(2, 3) << 1, 1, 1, 1, 0, -1).finished();
    binary.beta_c = (MatrixXd(2, 3) << 2, 2, 2, 0, -2, 2).finished();
    binary.lambda = 3.0 * MatrixXd::Identity(3, 3);
    binary.target_density = 0.3;
    presets.push_back(binary);

    ScenarioSpec censored = binary;
    censored.name = "censored-k3";
    censored.beta_c = (MatrixXd(2, 3) << 1, 1, 1, 0, -1.5, 1.5).finished();
    censored.beta_r = (MatrixXd(2, 3) << -1, -1, -1, 0.5, 0, -0.5).finished();
    censored.censor_cap = 15;
    censored.target_density = 0.03;
    presets.push_back(censored);

    ScenarioSpec misspec = binary;
    misspec.name = "misspec-continuous";
    misspec.dependent = {false, false};
    misspec.beta_r = (MatrixXd(2, 3) << 1, 1, 1, -1, -1, -1).finished();
    misspec.beta_c = (MatrixXd(2, 3) << 2, 2, 2, 0.5, 0.5, 0.5).finished();
    misspec.continuous_latent = true;
    presets.push_back(misspec);
    return presets;
}

ScenarioSpec scenario_preset(const std::string& name) {
    for (auto& p : scenario_presets())
        if (p.name == name) return p;
    throw std::out_of_range("unknown scenario preset '" + name + "'");
}

}  // namespace lcan
