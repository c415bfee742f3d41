#include "lcan/random.hpp"

#include "lcan/types.hpp"

#include <cmath>
#include <sstream>

namespace lcan {

double Rng::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma: parameters must be > 0");
    if (shape < 1.0) {
        // Boost to shape + 1 and rescale.
        const double g = gamma(shape + 1.0, 1.0);
        return scale * g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index size) {
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal();
    return v;
}

std::string Rng::state() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream in(state);
    in >> engine_;
    if (!in) throw DataError("could not restore random stream state");
}

Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double df, Rng& rng) {
    const Eigen::Index d = scale.rows();
    if (scale.cols() != d) throw std::invalid_argument("inverse Wishart scale must be square");
    if (!(df > static_cast<double>(d) - 1.0)) throw std::invalid_argument("inverse Wishart df too small");
    // W ~ Wishart(scale^{-1}, df) by Bartlett, then invert.
    const Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
    if (scale_llt.info() != Eigen::Success) throw NumericalError("inverse Wishart scale not SPD");
    const Eigen::MatrixXd inv_scale = scale_llt.solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::LLT<Eigen::MatrixXd> inv_llt(inv_scale);
    const Eigen::MatrixXd l = inv_llt.matrixL();

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i)), 1.0));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    }
    const Eigen::MatrixXd la = l * a;
    const Eigen::MatrixXd w = la * la.transpose();
    Eigen::MatrixXd out = w.llt().solve(Eigen::MatrixXd::Identity(d, d));
    return 0.5 * (out + out.transpose());
}

}  // namespace lcan
