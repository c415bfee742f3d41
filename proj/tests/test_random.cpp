#include "lcan/random.hpp"

#include <doctest.h>

#include <vector>

using namespace lcan;

TEST_CASE("uniform and normal moments") {
    Rng rng(1);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sn / n) < 4 / std::sqrt(double(n)));
    CHECK(std::abs(sn2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
}

TEST_CASE("gamma moments across shapes") {
    Rng rng(2);
    for (double shape : {0.3, 1.0, 2.5, 12.0}) {
        const double scale = 1.7;
        const int n = 100000;
        double s = 0, s2 = 0;
        for (int k = 0; k < n; ++k) {
            const double g = rng.gamma(shape, scale);
            s += g;
            s2 += g * g;
        }
        const double mean = shape * scale, var = shape * scale * scale;
        CHECK(std::abs(s / n - mean) < 4 * std::sqrt(var / n));
        CHECK(std::abs(s2 / n - (var + mean * mean)) / (var + mean * mean) < 0.05);
    }
    CHECK_THROWS(rng.gamma(0.0));
}

TEST_CASE("inverse Wishart mean") {
    Rng rng(3);
    Eigen::Matrix2d scale;
    scale << 2.0, 0.3, 0.3, 1.0;
    const double df = 9.0;
    const int n = 40000;
    Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
    for (int k = 0; k < n; ++k) sum += sample_inverse_wishart(scale, df, rng);
    const Eigen::Matrix2d expected = scale / (df - 3.0);
    CHECK(((sum / n) - expected).cwiseAbs().maxCoeff() < 0.01);
    CHECK_THROWS(sample_inverse_wishart(scale, 0.5, rng));
}

TEST_CASE("uniform_int covers its range evenly") {
    Rng rng(4);
    std::vector<int> counts(5, 0);
    for (int k = 0; k < 50000; ++k) ++counts[rng.uniform_int(5)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("state round trip reproduces the stream") {
    Rng rng(5);
    rng.normal();
    const std::string saved = rng.state();
    std::vector<double> first;
    for (int k = 0; k < 10; ++k) first.push_back(rng.normal());
    Rng other(99);
    other.restore(saved);
    for (int k = 0; k < 10; ++k) CHECK(other.normal() == first[static_cast<std::size_t>(k)]);
    CHECK_THROWS(other.restore("garbage"));
}
