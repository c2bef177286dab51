#include <doctest.h>

#include "fppi/mean_estimation.hpp"
#include "fppi/rng.hpp"

#include "../support/convert.hpp"

#include <cmath>

using namespace fppi;

namespace {

struct Fixture {
    LabeledDataset labeled;
    UnlabeledDataset unlabeled;
    Predictions f;
};

Fixture make_fixture(std::uint64_t seed, Index n, Index N) {
    std::mt19937_64 rng(seed);
    const Matrix xl = testutil::random_matrix(rng, n, 1);
    const Matrix xu = testutil::random_matrix(rng, N, 1);
    const Vector noise = testutil::random_vector(rng, n);
    Vector y = xl.col(0) + xl.col(0).cwiseProduct(xl.col(0)) + noise;
    Predictions f{xl.col(0).array().square().matrix() - Vector::Constant(n, 0.5),
                  xu.col(0).array().square().matrix() - Vector::Constant(N, 0.5)};
    return {LabeledDataset(xl, y), UnlabeledDataset(xu), f};
}

Region positive_x() {
    return Region::sign_product({[](const Matrix& x, const Vector&) { return Vector(x.col(0)); }, 1, "x"},
                                {[](const Matrix& x, const Vector&) { return Vector::Ones(x.rows()).eval(); }, 1, "1"});
}

struct Brute {
    double ybar, correction, cov, var_f, var_y;
};

Brute brute(const Fixture& fx, const Region& region) {
    const BoolVector ml = region.membership(fx.labeled.x(), fx.f.labeled);
    const BoolVector mu = region.membership(fx.unlabeled.x(), fx.f.unlabeled);
    const double n = static_cast<double>(fx.labeled.rows()), N = static_cast<double>(fx.unlabeled.rows());
    ref::Vec y(fx.labeled.y().data(), fx.labeled.y().data() + fx.labeled.rows());
    ref::Vec fl, fu;
    for (Index i = 0; i < fx.labeled.rows(); ++i) fl.push_back(ml[static_cast<std::size_t>(i)] ? fx.f.labeled(i) : 0.0);
    for (Index j = 0; j < fx.unlabeled.rows(); ++j) fu.push_back(mu[static_cast<std::size_t>(j)] ? fx.f.unlabeled(j) : 0.0);
    Brute b{};
    b.ybar = ref::mean(y);
    b.correction = ref::mean(fu) - ref::mean(fl);
    for (std::size_t i = 0; i < y.size(); ++i) b.cov += (y[i] - b.ybar) * fl[i] / n;
    for (std::size_t i = 0; i < y.size(); ++i) b.var_y += (y[i] - b.ybar) * (y[i] - b.ybar) / (n - 1);
    double pooled = 0.0;
    for (double v : fl) pooled += v;
    for (double v : fu) pooled += v;
    pooled /= (n + N);
    for (double v : fu) b.var_f += (v - pooled) * (v - pooled) / N;
    return b;
}

}  // namespace

TEST_CASE("fppi_mean equals the direct formula") {
    const Fixture fx = make_fixture(31, 80, 700);
    for (const Region& region : {Region::all(), positive_x()}) {
        const Brute b = brute(fx, region);
        for (double lambda : {0.0, 0.3, 1.0, -0.7}) {
            const MeanFppiResult r = fppi_mean(fx.labeled, fx.unlabeled, fx.f, region, lambda);
            CHECK(r.theta_hat == doctest::Approx(b.ybar + lambda * b.correction).epsilon(1e-12));
            CHECK(r.labeled_mean == doctest::Approx(b.ybar).epsilon(1e-13));
            CHECK(r.correction_term == doctest::Approx(b.correction).epsilon(1e-12));
            CHECK(r.lambda_hat == lambda);
        }
    }
}

TEST_CASE("lambda = 0 is the classical mean and the empty region ignores f") {
    const Fixture fx = make_fixture(32, 50, 300);
    const double ybar = fx.labeled.y().mean();
    CHECK(fppi_mean(fx.labeled, fx.unlabeled, fx.f, Region::all(), 0.0).theta_hat == doctest::Approx(ybar));
    const MeanFppiResult e = plugin_fppi_mean(fx.labeled, fx.unlabeled, fx.f, Region::empty());
    CHECK(e.theta_hat == doctest::Approx(ybar));
    CHECK(e.lambda_hat == 0.0);
    CHECK(e.diagnostics.degenerate);
    CHECK_FALSE(lambda_hat_plugin(fx.labeled, fx.unlabeled, fx.f, Region::empty()).has_value());
}

TEST_CASE("ppi with lambda = 1 adds the prediction rectifier") {
    const Fixture fx = make_fixture(33, 60, 400);
    const double expect = fx.labeled.y().mean() + fx.f.unlabeled.mean() - fx.f.labeled.mean();
    CHECK(ppi_plusplus_mean(fx.labeled, fx.unlabeled, fx.f, 1.0).theta_hat == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("plug-in weight matches its moment formula") {
    const Fixture fx = make_fixture(34, 120, 900);
    for (const Region& region : {Region::all(), positive_x()}) {
        const Brute b = brute(fx, region);
        const double n = 120, N = 900;
        const double expect = b.cov / b.var_f / (1.0 + n / N);
        const auto lam = lambda_hat_plugin(fx.labeled, fx.unlabeled, fx.f, region);
        REQUIRE(lam.has_value());
        CHECK(*lam == doctest::Approx(expect).epsilon(1e-11));
        const MeanFppiResult r = plugin_fppi_mean(fx.labeled, fx.unlabeled, fx.f, region);
        CHECK(r.lambda_hat == doctest::Approx(expect).epsilon(1e-11));
        CHECK(r.std_error == doctest::Approx(std::sqrt(fppi_mean_variance(b.var_y, b.var_f, b.cov, expect, n, N))).epsilon(1e-10));
    }
}

TEST_CASE("scenario1 population moments by enumeration") {
    const ref::Scenario1Population pop;
    const bool all[4] = {true, true, true, true};
    CHECK(pop.cov(0, all) == doctest::Approx(0.5));
    CHECK(pop.cov(1, all) == doctest::Approx(1.5));
    CHECK(pop.cov(2, all) == doctest::Approx(11.0));
    CHECK(pop.var_f(2, all) == doctest::Approx(9.0));
    CHECK(*lambda_star_population(11.0, 9.0, 5000, 100000) == doctest::Approx(11.0 / 9.0 / 1.05));
    // f2 on {0, 3}: f_S = (-1, 0, 0, 1)
    const bool s2[4] = {true, false, false, true};
    CHECK(pop.cov(1, s2) == doctest::Approx(3.0));
    CHECK(pop.var_f(1, s2) == doctest::Approx(0.5));
    // f3 on {0, 2, 3}: f_S = (-5, 0, 1, 3)
    const bool s3[4] = {true, false, true, true};
    CHECK(pop.cov(2, s3) == doctest::Approx(12.0));
    CHECK(pop.var_f(2, s3) == doctest::Approx(8.6875));
    CHECK_FALSE(lambda_star_population(1.0, 0.0, 10, 10).has_value());
    CHECK_THROWS(lambda_star_population(1.0, 1.0, 0, 10));
}

TEST_CASE("variance formula is minimized at the optimal weight") {
    std::mt19937_64 rng(35);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        const double var_y = u(rng) + 1.0, var_f = u(rng), n = 10 + 100 * u(rng), N = n * (1 + 10 * u(rng));
        const double cov = 0.9 * std::sqrt(var_y * var_f) * (u(rng) - 1.5) / 1.5;
        const double lam = *lambda_star_population(cov, var_f, n, N);
        const double vmin = fppi_mean_variance(var_y, var_f, cov, lam, n, N);
        CHECK(vmin == doctest::Approx(minimized_variance(var_y, var_f, cov, n, N)).epsilon(1e-12));
        for (double d : {-0.1, 0.1, 1.0}) CHECK(fppi_mean_variance(var_y, var_f, cov, lam + d, n, N) > vmin);
        CHECK(vmin <= var_y / n);
    }
    CHECK_THROWS(fppi_mean_variance(-1, 1, 0, 0, 1, 1));
    CHECK_THROWS(minimized_variance(1, 0, 0, 1, 1));
}

TEST_CASE("example closed forms agree with the general variance") {
    // X ~ N(1,1), f = (x-1)^2 - 1: var_f = 2, cov(Y, f) = 0
    for (double lam : {0.0, 0.5, 1.0})
        CHECK(fppi_mean_variance(2.0, 2.0, 0.0, lam, 200, 2000) == doctest::Approx(ref::example1_variance(lam, 1.0, 200, 2000)));
    const double pi = 3.14159265358979323846;
    // f 1{x > 1}: E[(Z^2-1)^2 1{Z>0}] = 1 and E[(Z^2-1) 1{Z>0}] = 0, so var = 1
    // cov(Y, f 1_S) = E[Z (Z^2 - 1) 1{Z>0}] = 1/sqrt(2 pi)
    const double cov = 1.0 / std::sqrt(2.0 * pi);
    const double lam = *lambda_star_population(cov, 1.0, 200, 2000);
    CHECK(lam == doctest::Approx(ref::example2_lambda_star(200, 2000)));
    CHECK(minimized_variance(2.0, 1.0, cov, 200, 2000) == doctest::Approx(ref::example2_min_variance(1.0, 200, 2000)));
    CHECK(fppi_mean_variance(2.0, 1.0, cov, 0.3, 200, 2000) ==
          doctest::Approx(ref::example2_variance(0.3, 1.0, 200, 2000)));
}

TEST_CASE("constant prediction is degenerate") {
    const Fixture fx = make_fixture(36, 40, 200);
    const Predictions c{Vector::Constant(40, 2.0), Vector::Constant(200, 2.0)};
    const MeanFppiResult r = plugin_fppi_mean(fx.labeled, fx.unlabeled, c, Region::all());
    CHECK(r.diagnostics.degenerate);
    CHECK(r.lambda_hat == 0.0);
    CHECK(r.theta_hat == doctest::Approx(fx.labeled.y().mean()));
    CHECK_FALSE(r.diagnostics.warnings.empty());
    const IntervalEstimate ci = confidence_interval(r, fx.labeled, fx.unlabeled, c, 0.95);
    const double sd = std::sqrt((fx.labeled.y().array() - fx.labeled.y().mean()).square().sum() / 39.0 / 40.0);
    CHECK(ci.std_error == doctest::Approx(sd));
}

TEST_CASE("interval is symmetric with the normal quantile") {
    const Fixture fx = make_fixture(37, 100, 1000);
    const MeanFppiResult r = plugin_fppi_mean(fx.labeled, fx.unlabeled, fx.f, positive_x());
    const IntervalEstimate ci = confidence_interval(r, fx.labeled, fx.unlabeled, fx.f, 0.9);
    CHECK(ci.point == r.theta_hat);
    CHECK(ci.std_error == doctest::Approx(r.std_error));
    CHECK(ci.upper - ci.point == doctest::Approx(1.6448536269514722 * ci.std_error));
    CHECK(ci.point - ci.lower == doctest::Approx(ci.upper - ci.point));
}

TEST_CASE("algorithm1 with the discrete oracle selects the informative categories") {
    // Categories 0..3 with conditional means -2, -1, 5, 10 (no noise) and f3
    const ref::Scenario1Population pop;
    const Index n = 400, N = 4000;
    Matrix xl(n, 1), xu(N, 1);
    Vector y(n), fl(n), fu(N);
    for (Index i = 0; i < n; ++i) {
        xl(i, 0) = static_cast<double>(i % 4);
        y(i) = pop.m[i % 4];
        fl(i) = pop.f[2][i % 4];
    }
    for (Index j = 0; j < N; ++j) {
        xu(j, 0) = static_cast<double>(j % 4);
        fu(j) = pop.f[2][j % 4];
    }
    const LabeledDataset l(xl, y);
    const UnlabeledDataset u(xu);
    const Predictions f{fl, fu};
    const MeanFppiResult r = algorithm1_estimate(l, u, f, DiscreteOracle{});
    const std::vector<int> expect = pop.region(2);
    REQUIRE(r.region.kind() == Region::Kind::DiscreteSet);
    REQUIRE(r.region.categories().size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(r.region.categories()[i](0) == expect[i]);
    CHECK(r.theta_hat == doctest::Approx(3.0));
    CHECK(r.diagnostics.n_region_fit == n);
}

TEST_CASE("sample splitting uses disjoint halves") {
    const Fixture fx = make_fixture(38, 100, 500);
    const MeanFppiResult a = algorithm1_split_estimate(fx.labeled, fx.unlabeled, fx.f, 0.3, KnnOracle{5}, 9);
    const MeanFppiResult b = algorithm1_split_estimate(fx.labeled, fx.unlabeled, fx.f, 0.3, KnnOracle{5}, 9);
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.diagnostics.n_region_fit == 30);
    CHECK(a.diagnostics.n_used == 70);
    CHECK_THROWS(algorithm1_split_estimate(fx.labeled, fx.unlabeled, fx.f, 1.0, KnnOracle{5}, 9));
    CHECK_THROWS(algorithm1_split_estimate(fx.labeled, fx.unlabeled, fx.f, 0.001, KnnOracle{5}, 9));

    std::vector<Index> fit, est;
    for (Index i = 0; i < 100; ++i) (i < 50 ? fit : est).push_back(i);
    const MeanFppiResult p = split_estimate_with_partition(fx.labeled, fx.unlabeled, fx.f, fit, est, KnnOracle{5});
    // The estimate only sees rows 50..99.
    const LabeledDataset half = fx.labeled.subset(est);
    Predictions hf{fx.f.labeled.tail(50), fx.f.unlabeled};
    CHECK(p.theta_hat == doctest::Approx(plugin_fppi_mean(half, fx.unlabeled, hf, p.region).theta_hat).epsilon(1e-13));
}

TEST_CASE("misaligned predictions are rejected") {
    const Fixture fx = make_fixture(39, 20, 30);
    const Predictions bad{Vector::Zero(19), Vector::Zero(30)};
    CHECK_THROWS_AS(fppi_mean(fx.labeled, fx.unlabeled, bad, Region::all(), 1.0), DimensionError);
}
