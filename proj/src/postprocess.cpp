#include "lcan/postprocess.hpp"

#include "lcan/init.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace lcan {
namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Biased autocovariances gamma_0..gamma_{N-1} via zero-padded FFT.
std::vector<double> autocovariance(const std::vector<double>& series) {
    const std::size_t n = series.size();
    const double mu = mean_of(series);
    std::size_t size = 1;
    while (size < 2 * n) size <<= 1;
    std::vector<double> padded(size, 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[i] = series[i] - mu;
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, padded);
    for (auto& c : spectrum) c = std::norm(c);
    std::vector<double> back;
    fft.inv(back, spectrum);
    back.resize(n);
    for (double& g : back) g /= static_cast<double>(n);
    return back;
}

bool is_constant(const std::vector<double>& series) {
    return std::all_of(series.begin(), series.end(), [&](double x) { return x == series.front(); });
}

// -gamma_0 + 2 * sum of the initial positive sequence of paired sums.
double ips_variance(const std::vector<double>& gamma) {
    double total = -gamma[0];
    for (std::size_t m = 0; 2 * m + 1 < gamma.size(); ++m) {
        const double pair = gamma[2 * m] + gamma[2 * m + 1];
        if (pair <= 0.0) break;
        total += 2.0 * pair;
    }
    return std::max(total, 0.0);
}

}  // namespace

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile: prob outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Interval credible_interval(const std::vector<double>& draws, double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible_interval: level outside (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    Interval out{quantile(draws, tail), mean_of(draws), quantile(draws, 1.0 - tail)};
    // Guard the ordering against rounding in degenerate samples.
    out.mean = std::clamp(out.mean, out.lower, out.upper);
    return out;
}

std::vector<double> ubeta_series(const ChainOutput& chain, Index column, Index node) {
    std::vector<double> out;
    out.reserve(chain.draws.size());
    for (const auto& d : chain.draws) out.push_back(d.ubeta(node, column));
    return out;
}

CoefficientSummary resolve_labels(const ChainOutput& chain, int K, double level, std::uint64_t seed) {
    if (chain.draws.empty()) throw std::invalid_argument("resolve_labels: chain has no draws");
    const Index n = chain.draws.front().ubeta.rows();
    const Index p = static_cast<Index>(chain.columns.size());
    if (K < 1 || K > n) throw std::invalid_argument("resolve_labels: K must be in [1, n]");

    CoefficientSummary out;
    out.columns = chain.columns;
    out.node_intervals.assign(static_cast<std::size_t>(p), std::vector<Interval>(static_cast<std::size_t>(n)));
    MatrixXd means(n, p);
    for (Index c = 0; c < p; ++c)
        for (Index i = 0; i < n; ++i) {
            const Interval iv = credible_interval(ubeta_series(chain, c, i), level);
            out.node_intervals[c][i] = iv;
            means(i, c) = iv.mean;
        }

    std::vector<Index> dependent;
    for (Index c = 0; c < p; ++c)
        if (chain.columns[c].community_dependent) dependent.push_back(c);
    if (dependent.empty())
        for (Index c = 0; c < p; ++c) dependent.push_back(c);
    MatrixXd points(n, static_cast<Index>(dependent.size()));
    for (std::size_t d = 0; d < dependent.size(); ++d) points.col(static_cast<Index>(d)) = means.col(dependent[d]);
    out.cluster = points.cols() > 0 ? kmeans(points, K, seed).labels : std::vector<int>(n, 0);
    out.cluster_sizes = Eigen::VectorXi::Zero(K);
    for (int k : out.cluster) ++out.cluster_sizes(k);

    out.community_intervals.assign(static_cast<std::size_t>(p), std::vector<Interval>(static_cast<std::size_t>(K)));
    out.pooled_intervals = out.community_intervals;
    for (Index c = 0; c < p; ++c) {
        for (int k = 0; k < K; ++k) {
            Interval avg;
            std::vector<double> pooled;
            const double size = out.cluster_sizes(k);
            for (Index i = 0; i < n; ++i) {
                if (out.cluster[i] != k) continue;
                const Interval& iv = out.node_intervals[c][i];
                avg.lower += iv.lower / size;
                avg.mean += iv.mean / size;
                avg.upper += iv.upper / size;
                const auto s = ubeta_series(chain, c, i);
                pooled.insert(pooled.end(), s.begin(), s.end());
            }
            out.community_intervals[c][k] = avg;
            if (!pooled.empty()) out.pooled_intervals[c][k] = credible_interval(pooled, level);
        }
    }
    return out;
}

double community_weighted_average(const VectorXd& per_community, const VectorXd& sizes,
                                  const VectorXd& variability, double overall_variability,
                                  Index n) {
    if (per_community.size() != sizes.size() || sizes.size() != variability.size())
        throw std::invalid_argument("community_weighted_average: dimension mismatch");
    if (!(overall_variability > 0.0))
        throw std::domain_error("community_weighted_average: zero overall variability");
    const double nd = static_cast<double>(n);
    const double weighted = (variability.array() * per_community.array() * sizes.array()).sum();
    return nd * weighted / (nd * nd * overall_variability);
}

OlsDecomposition ols_decomposition(const MatrixXd& z, const MatrixXd& x,
                                   const CommunityAssignment& community) {
    const Index n = z.rows();
    if (z.cols() != n || x.rows() != n || x.cols() != n || community.size() != n)
        throw std::invalid_argument("ols_decomposition: dimension mismatch");
    const int K = community.K();
    OlsDecomposition out;
    out.sizes = community.sizes().cast<double>();
    VectorXd xz = VectorXd::Zero(K), xx = VectorXd::Zero(K);
    for (Index i = 0; i < n; ++i) {
        const int k = community.label(i);
        xz(k) += x.row(i).dot(z.row(i));
        xx(k) += x.row(i).squaredNorm();
    }
    out.per_community = xz.cwiseQuotient(xx);
    out.variability = xx.cwiseQuotient(out.sizes * static_cast<double>(n));
    out.overall_variability = x.squaredNorm() / static_cast<double>(n * n);
    out.pooled = (x.array() * z.array()).sum() / x.squaredNorm();
    return out;
}

EssResult ess(const std::vector<double>& series) {
    if (series.size() < 10) throw std::invalid_argument("ess: need at least 10 values");
    const double n = static_cast<double>(series.size());
    if (is_constant(series)) return {n, true};
    const auto gamma = autocovariance(series);
    const double sigma2 = ips_variance(gamma);
    if (!(sigma2 > 0.0)) return {n, true};
    return {n * gamma[0] / sigma2, false};
}

std::vector<double> acf(const std::vector<double>& series, int max_lag) {
    if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= series.size())
        throw std::invalid_argument("acf: max_lag must be below the series length");
    if (is_constant(series)) throw std::domain_error("acf: constant series");
    const auto gamma = autocovariance(series);
    std::vector<double> out(static_cast<std::size_t>(max_lag) + 1);
    for (int l = 0; l <= max_lag; ++l) out[l] = gamma[l] / gamma[0];
    out[0] = 1.0;
    return out;
}

double spectral_variance_at_zero(const std::vector<double>& series) {
    if (series.size() < 2 || is_constant(series)) return 0.0;
    return ips_variance(autocovariance(series));
}

double geweke(const std::vector<double>& series, double frac_a, double frac_b) {
    if (series.size() < 100) throw std::invalid_argument("geweke: need at least 100 values");
    if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
        throw std::invalid_argument("geweke: window fractions must be positive and sum to <= 1");
    const std::size_t n = series.size();
    const auto na = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(n)));
    const auto nb = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(n)));
    const std::vector<double> a(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(na));
    const std::vector<double> b(series.end() - static_cast<std::ptrdiff_t>(nb), series.end());
    const double var = spectral_variance_at_zero(a) / static_cast<double>(na) +
                       spectral_variance_at_zero(b) / static_cast<double>(nb);
    if (!(var > 0.0)) throw std::domain_error("geweke: degenerate variance");
    return (mean_of(a) - mean_of(b)) / std::sqrt(var);
}

EssPerError ess_per_error(const std::vector<double>& series, double truth) {
    const double err = std::pow(mean_of(series) - truth, 2);
    if (err == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {ess(series).ess / err, false};
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: size mismatch");
    if (a.empty()) throw std::invalid_argument("adjusted_rand_index: empty labelings");
    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    MatrixXd table = MatrixXd::Zero(ka, kb);
    for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, rows = 0.0, cols = 0.0;
    for (Index r = 0; r < ka; ++r)
        for (Index c = 0; c < kb; ++c) index += choose2(table(r, c));
    for (Index r = 0; r < ka; ++r) rows += choose2(table.row(r).sum());
    for (Index c = 0; c < kb; ++c) cols += choose2(table.col(c).sum());
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = rows * cols / total;
    const double max_index = 0.5 * (rows + cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace lcan
