#include "lcan/likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lcan {
namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre nodes on (-1, 0) and weights; the rule is symmetric.
constexpr std::array<double, 3> kX6{-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
constexpr std::array<double, 3> kW6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr std::array<double, 6> kX12{-0.9815606342467191, -0.9041172563704750,
                                     -0.7699026741943050, -0.5873179542866171,
                                     -0.3678314989981802, -0.1252334085114692};
constexpr std::array<double, 6> kW12{0.04717533638651177, 0.1069393259953183,
                                     0.1600783285433464,  0.2031674267230659,
                                     0.2334925365383547,  0.2491470458134029};
constexpr std::array<double, 10> kX20{
    -0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188,
    -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154196,
    -0.2277858511416451, -0.07652652113349733};
constexpr std::array<double, 10> kW20{
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};

template <std::size_t N, typename F>
double legendre_sum(const std::array<double, N>& x, const std::array<double, N>& w, F&& f) {
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) total += w[i] * f(x[i]);
    return total;
}

template <typename F>
double legendre_for_rho(double rho, F&& f) {
    const double r = std::abs(rho);
    if (r < 0.3) return legendre_sum(kX6, kW6, f);
    if (r < 0.75) return legendre_sum(kX12, kW12, f);
    return legendre_sum(kX20, kW20, f);
}

// Upper orthant probability P(X > h, Y > k).
double bvn_upper(double h, double k, double r) {
    if (h == kInf || k == kInf) return 0.0;
    if (h == -kInf) return k == -kInf ? 1.0 : normal_cdf(-k);
    if (k == -kInf) return normal_cdf(-h);
    if (r >= 1.0) return normal_cdf(-std::max(h, k));
    if (r <= -1.0) return std::max(0.0, normal_cdf(-h) - normal_cdf(k));
    if (r == 0.0) return normal_cdf(-h) * normal_cdf(-k);

    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r);
        bvn = legendre_for_rho(r, [&](double x) {
            double s = 0.0;
            for (double sign : {1.0, -1.0}) {
                const double sn = std::sin(asr * (sign * x + 1.0) / 2.0);
                s += std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
            return s;
        });
        return std::clamp(bvn * asr / (2.0 * kTwoPi) + normal_cdf(-h) * normal_cdf(-k), 0.0, 1.0);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * normal_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    bvn += legendre_for_rho(r, [&](double x) {
        double s = 0.0;
        for (double sign : {1.0, -1.0}) {
            const double xs = std::pow(a * (sign * x + 1.0), 2);
            const double rs = std::sqrt(1.0 - xs);
            const double asr = -(bs / xs + hk) / 2.0;
            if (asr > -100.0) {
                s += a * std::exp(asr) *
                     (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                      (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
        return s;
    });
    bvn = -bvn / kTwoPi;
    if (r > 0.0) bvn += normal_cdf(-std::max(h, k));
    else bvn = -bvn + std::max(0.0, normal_cdf(-h) - normal_cdf(-k));
    return std::clamp(bvn, 0.0, 1.0);
}

double floored_log(double p) {
    if (!(p > 0.0)) return kLogProbabilityFloor;
    return std::max(std::log(p), kLogProbabilityFloor);
}

// Standard normal restricted to (a, b), a < b.
double std_truncnorm(double a, double b, Rng& rng) {
    if (b <= 0.0) return -std_truncnorm(-b, -a, rng);
    if (a < 0.0) {
        if (b - a >= 2.5066282746310002) {
            for (;;) {
                const double x = rng.normal();
                if (x > a && x < b) return x;
            }
        }
        for (;;) {
            const double x = a + (b - a) * rng.uniform();
            if (rng.uniform() < std::exp(-0.5 * x * x)) return x;
        }
    }
    // 0 <= a < b
    const double root = std::sqrt(a * a + 4.0);
    const double lambda = (a + root) / 2.0;
    const double uniform_cutoff = (2.0 / (a + root)) * std::exp((a * a - a * root) / 4.0 + 0.5);
    if (b - a < uniform_cutoff) {
        for (;;) {
            const double x = a + (b - a) * rng.uniform();
            if (rng.uniform() < std::exp(0.5 * (a * a - x * x))) return x;
        }
    }
    for (;;) {
        const double x = a + rng.exponential(lambda);
        if (x >= b) continue;
        if (rng.uniform() < std::exp(-0.5 * (x - lambda) * (x - lambda))) return x;
    }
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_log_cdf(double x) {
    if (x > -35.0) return std::log(normal_cdf(x));
    // Mills-ratio expansion of the lower tail.
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(kTwoPi) + std::log(series);
}

double bvn_cdf(double x, double y, double rho) {
    if (std::isnan(x) || std::isnan(y) || std::isnan(rho)) throw std::domain_error("bvn_cdf: NaN input");
    if (std::abs(rho) > 1.0) throw std::domain_error("bvn_cdf: |rho| > 1");
    return bvn_upper(-x, -y, rho);
}

double dyad_loglik(const DyadLikelihoodTerm& term) {
    const double sij = term.y_ij ? 1.0 : -1.0;
    const double sji = term.y_ji ? 1.0 : -1.0;
    const double p = bvn_cdf(sij * term.m_ij, sji * term.m_ji, sij * sji * term.rho);
    return floored_log(p);
}

double network_loglik(const ModelState& state, const Sociomatrix& y, const CovariateSet& covs,
                      bool censored_mode) {
    const MatrixXd m = mean_matrix(state, covs, censored_mode);
    const Index n = y.size();
    double total = 0.0;
    for (Index j = 1; j < n; ++j)
        for (Index i = 0; i < j; ++i)
            total += dyad_loglik({m(i, j), m(j, i), state.latent.rho, y.edge(i, j), y.edge(j, i)});
    return total;
}

double node_loglik(const Sociomatrix& y, const NodeMeans& means, Index i, double rho) {
    double total = 0.0;
    for (Index j = 0; j < y.size(); ++j) {
        if (j == i) continue;
        total += dyad_loglik({means.row(j), means.col(j), rho, y.edge(i, j), y.edge(j, i)});
    }
    return total;
}

double sample_truncnorm(double mean, double sd, double lower, double upper, Rng& rng) {
    if (!(sd > 0.0)) throw std::invalid_argument("sample_truncnorm: sd must be > 0");
    if (!(lower < upper)) throw std::invalid_argument("sample_truncnorm: empty interval");
    const double a = (lower - mean) / sd;
    const double b = (upper - mean) / sd;
    return mean + sd * std_truncnorm(a, b, rng);
}

std::pair<double, double> sample_dyad_z(double m_ij, double m_ji, double rho, bool y_ij, bool y_ji,
                                        Rng& rng, int sweeps) {
    if (!(std::abs(rho) < 1.0)) throw std::domain_error("sample_dyad_z: |rho| must be < 1");
    const double sd = std::sqrt(1.0 - rho * rho);
    auto lower = [](bool y) { return y ? 0.0 : -kInf; };
    auto upper = [](bool y) { return y ? kInf : 0.0; };
    auto half_prob = [](double m, bool y) { return y ? normal_cdf(m) : normal_cdf(-m); };

    // Draw the coordinate with the smaller half-line probability from its
    // truncated marginal proposal, accept with the conditional probability
    // of the other coordinate's half-line, then draw the other exactly.
    const bool first_ij = half_prob(m_ij, y_ij) <= half_prob(m_ji, y_ji);
    const double m_a = first_ij ? m_ij : m_ji, m_b = first_ij ? m_ji : m_ij;
    const bool y_a = first_ij ? y_ij : y_ji, y_b = first_ij ? y_ji : y_ij;
    for (int attempt = 0; attempt < kDyadRejectionLimit; ++attempt) {
        const double za = sample_truncnorm(m_a, 1.0, lower(y_a), upper(y_a), rng);
        const double cond = m_b + rho * (za - m_a);
        const double accept = y_b ? normal_cdf(cond / sd) : normal_cdf(-cond / sd);
        if (rng.uniform() < accept) {
            const double zb = sample_truncnorm(cond, sd, lower(y_b), upper(y_b), rng);
            return first_ij ? std::make_pair(za, zb) : std::make_pair(zb, za);
        }
    }

    double z_ji = y_ji ? std::max(m_ji, 0.0) : std::min(m_ji, 0.0);
    double z_ij = 0.0;
    for (int s = 0; s < sweeps; ++s) {
        z_ij = sample_truncnorm(m_ij + rho * (z_ji - m_ji), sd, lower(y_ij), upper(y_ij), rng);
        z_ji = sample_truncnorm(m_ji + rho * (z_ij - m_ij), sd, lower(y_ji), upper(y_ji), rng);
    }
    return {z_ij, z_ji};
}

}  // namespace lcan
