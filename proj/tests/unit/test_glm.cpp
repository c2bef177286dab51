#include <doctest.h>

#include "fppi/glm.hpp"
#include "fppi/linalg.hpp"

#include "../support/convert.hpp"

#include <cmath>

using namespace fppi;
using testutil::to_ref;

namespace {

struct GlmFixture {
    LabeledDataset labeled;
    UnlabeledDataset unlabeled;
    Predictions f;
};

double draw_response(const GlmFamily& fam, double eta, std::mt19937_64& rng) {
    const double mu = fam.eval(eta).a1;
    switch (fam.kind()) {
        case GlmFamily::Kind::Gaussian: return mu + std::normal_distribution<double>(0.0, 1.0)(rng);
        case GlmFamily::Kind::Bernoulli: return std::bernoulli_distribution(mu)(rng) ? 1.0 : 0.0;
        case GlmFamily::Kind::Poisson: return static_cast<double>(std::poisson_distribution<int>(mu)(rng));
    }
    return 0.0;
}

GlmFixture make_glm(const GlmFamily& fam, std::uint64_t seed, Index n, Index N, Index p) {
    std::mt19937_64 rng(seed);
    Matrix xl = testutil::random_matrix(rng, n, p, 0.5);
    Matrix xu = testutil::random_matrix(rng, N, p, 0.5);
    xl.col(0).setOnes();
    xu.col(0).setOnes();
    Vector theta = Vector::LinSpaced(p, 0.4, -0.4);
    Vector y(n), fl(n), fu(N);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (Index i = 0; i < n; ++i) {
        const double eta = xl.row(i).dot(theta) + 0.3 * xl(i, p - 1) * xl(i, p - 1);
        y(i) = draw_response(fam, eta, rng);
        fl(i) = fam.eval(eta).a1 + nd(rng);
    }
    for (Index j = 0; j < N; ++j) {
        const double eta = xu.row(j).dot(theta) + 0.3 * xu(j, p - 1) * xu(j, p - 1);
        fu(j) = fam.eval(eta).a1 + nd(rng);
    }
    return {LabeledDataset(xl, y), UnlabeledDataset(xu), Predictions{fl, fu}};
}

// Half of the covariate space, first non-constant column positive.
Region half_region() {
    return Region::sign_product({[](const Matrix& x, const Vector&) { return Vector(x.col(1)); }, -1, "x2"},
                                {[](const Matrix& x, const Vector&) { return Vector::Ones(x.rows()).eval(); }, -1, "1"});
}

double naive_a(const GlmFamily& fam, double eta) {
    switch (fam.kind()) {
        case GlmFamily::Kind::Gaussian: return eta * eta / 2.0;
        case GlmFamily::Kind::Bernoulli: return std::log1p(std::exp(eta));
        case GlmFamily::Kind::Poisson: return std::exp(eta);
    }
    return 0.0;
}

// Filtered objective written out term by term.
double brute_objective(const ref::Vec& theta, const GlmFixture& fx, const BoolVector& ml, const BoolVector& mu,
                       double lambda, const GlmFamily& fam) {
    const double n = static_cast<double>(fx.labeled.rows()), N = static_cast<double>(fx.unlabeled.rows());
    auto dot = [&](const Matrix& x, Index i) {
        double s = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) s += x(i, static_cast<Index>(j)) * theta[j];
        return s;
    };
    double total = 0.0;
    for (Index i = 0; i < fx.labeled.rows(); ++i) {
        const double eta = dot(fx.labeled.x(), i);
        total += (naive_a(fam, eta) - fx.labeled.y()(i) * eta) / n;
        if (ml[static_cast<std::size_t>(i)]) total -= lambda * (naive_a(fam, eta) - fx.f.labeled(i) * eta) / n;
    }
    for (Index j = 0; j < fx.unlabeled.rows(); ++j) {
        if (!mu[static_cast<std::size_t>(j)]) continue;
        const double eta = dot(fx.unlabeled.x(), j);
        total += lambda * (naive_a(fam, eta) - fx.f.unlabeled(j) * eta) / N;
    }
    return total;
}

const GlmFamily families[] = {GlmFamily::gaussian(), GlmFamily::bernoulli(), GlmFamily::poisson()};

}  // namespace

TEST_CASE("filtered objective matches the term-by-term sum") {
    for (const GlmFamily& fam : families) {
        const GlmFixture fx = make_glm(fam, 41, 60, 200, 3);
        const Region region = half_region();
        const BoolVector ml = region.membership(fx.labeled.x(), fx.f.labeled);
        const BoolVector mu = region.membership(fx.unlabeled.x(), fx.f.unlabeled);
        Vector theta(3);
        theta << 0.2, -0.1, 0.3;
        for (double lambda : {0.0, 0.6, 1.0}) {
            CAPTURE(fam.name());
            const double v = fppi_glm_objective(theta, fx.labeled, fx.unlabeled, fx.f, region, lambda, fam);
            CHECK(v == doctest::Approx(brute_objective(to_ref(theta), fx, ml, mu, lambda, fam)).epsilon(1e-12));
        }
        CHECK(fppi_glm_objective(theta, fx.labeled, fx.unlabeled, fx.f, region, 0.0, fam) ==
              doctest::Approx(glm_objective(theta, fx.labeled, fam)).epsilon(1e-13));
    }
}

TEST_CASE("gradient agrees with central differences") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const GlmFamily& fam : families) {
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            const GlmFixture fx = make_glm(fam, 100 + static_cast<std::uint64_t>(rep), 40, 120, 2 + rep % 3);
            const Region region = rep % 2 ? half_region() : Region::all();
            const FppiGlmObjective obj(fx.labeled, fx.unlabeled, fx.f, region, u(rng) + 0.5, fam);
            Vector theta(obj.dim());
            for (Index j = 0; j < theta.size(); ++j) theta(j) = 0.5 * u(rng);
            const Vector g = obj.gradient(theta);
            const ref::Vec fd = ref::fd_gradient([&](const ref::Vec& t) { return obj.value(testutil::to_vec(t)); },
                                                 to_ref(theta), 1e-5);
            for (Index j = 0; j < theta.size(); ++j) worst = std::max(worst, std::abs(g(j) - fd[static_cast<std::size_t>(j)]));
            Vector g2;
            CHECK(obj.value_and_gradient(theta, g2) == doctest::Approx(obj.value(theta)));
            CHECK((g2 - g).cwiseAbs().maxCoeff() == 0.0);
        }
        CAPTURE(fam.name());
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("gaussian with lambda = 0 reproduces OLS") {
    const GlmFixture fx = make_glm(GlmFamily::gaussian(), 43, 150, 500, 4);
    const GlmFppiResult r = fppi_glm_estimate(fx.labeled, fx.unlabeled, fx.f, Region::all(), 0.0, GlmFamily::gaussian());
    const ref::Vec ols = ref::ols(to_ref(fx.labeled.x()), to_ref(fx.labeled.y()));
    for (Index j = 0; j < 4; ++j) CHECK(r.theta_hat(j) == doctest::Approx(ols[static_cast<std::size_t>(j)]).epsilon(1e-6));
    const GlmFit mle = glm_mle(fx.labeled, GlmFamily::gaussian());
    CHECK(mle.convergence.converged);
    CHECK((mle.theta - r.theta_hat).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("newton reference fit agrees with gradient descent") {
    for (const GlmFamily& fam : families) {
        const GlmFixture fx = make_glm(fam, 44, 300, 10, 3);
        const GlmFit gd = glm_mle(fx.labeled, fam);
        const GlmFit nt = glm_fit_mean_response(fx.labeled.x(), fx.labeled.y(), fam);
        CHECK((gd.theta - nt.theta).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("plug-in matrices match their sums and are PSD") {
    for (const GlmFamily& fam : families) {
        const GlmFixture fx = make_glm(fam, 45, 80, 300, 3);
        const Region region = half_region();
        const GlmFit mle = glm_mle(fx.labeled, fam);
        const PluginMatrices pm = estimate_plugin_matrices(fx.labeled, fx.unlabeled, fx.f, region, mle.theta, fam);
        const SquareMatrix omega = estimate_omega(fx.labeled, mle.theta, fam);
        const BoolVector ml = region.membership(fx.labeled.x(), fx.f.labeled);
        const BoolVector mu = region.membership(fx.unlabeled.x(), fx.f.unlabeled);
        SquareMatrix s = SquareMatrix::Zero(3, 3), m = s, g = s, o = s;
        for (Index j = 0; j < fx.unlabeled.rows(); ++j) {
            const Vector xj = fx.unlabeled.x().row(j).transpose();
            const FamilyValues v = fam.eval(xj.dot(mle.theta));
            s += v.a2 * xj * xj.transpose() / 300.0;
            if (mu[static_cast<std::size_t>(j)]) {
                const double d = fx.f.unlabeled(j) - v.a1;
                m += d * d * xj * xj.transpose() / 300.0;
            }
        }
        for (Index i = 0; i < fx.labeled.rows(); ++i) {
            const Vector xi = fx.labeled.x().row(i).transpose();
            const double a1 = fam.eval(xi.dot(mle.theta)).a1;
            const double ry = fx.labeled.y()(i) - a1;
            o += ry * ry * xi * xi.transpose() / 80.0;
            if (ml[static_cast<std::size_t>(i)]) g += ry * (fx.f.labeled(i) - a1) * xi * xi.transpose() / 80.0;
        }
        CAPTURE(fam.name());
        CHECK((pm.sigma - s).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((pm.m - m).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((pm.gamma - g).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((omega - o).cwiseAbs().maxCoeff() < 1e-12);
        for (const SquareMatrix* a : {&pm.sigma, &pm.m, &omega}) {
            Eigen::SelfAdjointEigenSolver<SquareMatrix> es(*a);
            CHECK(es.eigenvalues().minCoeff() > -1e-12);
        }
    }
}

TEST_CASE("amse is a convex quadratic minimized at the closed-form weight") {
    std::mt19937_64 rng(46);
    for (int rep = 0; rep < 100; ++rep) {
        const Index p = 1 + rep % 5;
        const SquareMatrix sigma = testutil::random_spd(rng, p);
        const SquareMatrix omega = testutil::random_spd(rng, p);
        const SquareMatrix m = testutil::random_spd(rng, p);
        const SquareMatrix a = testutil::random_matrix(rng, p, p);
        const SquareMatrix gamma = 0.5 * (a + a.transpose());
        const double r = 0.05 * (1 + rep % 7);
        const double lam = *lambda_star_glm(sigma, gamma, m, r);

        const ref::Mat si = ref::inverse(to_ref(sigma));
        auto sandwich = [&](const SquareMatrix& x) { return ref::trace(ref::matmul(ref::matmul(si, to_ref(x)), si)); };
        const double tg = sandwich(gamma), tm = sandwich(m), to = sandwich(omega);
        CHECK(lam == doctest::Approx(tg / ((1 + r) * tm)).epsilon(1e-10));
        const double min_closed = to - tg * tg / ((1 + r) * tm);
        CHECK(std::abs(amse(sigma, omega, m, gamma, lam, r) - min_closed) <= 1e-12 * std::max(1.0, std::abs(min_closed)));

        // second differences are constant and positive
        const double h = 0.5, a0 = amse(sigma, omega, m, gamma, 0.0, r), a1 = amse(sigma, omega, m, gamma, h, r),
                     a2 = amse(sigma, omega, m, gamma, 2 * h, r), a3 = amse(sigma, omega, m, gamma, 3 * h, r);
        CHECK((a2 - 2 * a1 + a0) == doctest::Approx(a3 - 2 * a2 + a1).epsilon(1e-8));
        CHECK((a2 - 2 * a1 + a0) == doctest::Approx(2 * h * h * (1 + r) * tm).epsilon(1e-8));
        for (double d = -2.0; d <= 2.0; d += 0.25)
            if (d != 0.0) CHECK(amse(sigma, omega, m, gamma, lam + d, r) > amse(sigma, omega, m, gamma, lam, r));
    }
}

TEST_CASE("lambda star is undefined without prediction signal") {
    const SquareMatrix s = SquareMatrix::Identity(2, 2);
    CHECK_FALSE(lambda_star_glm(s, SquareMatrix::Zero(2, 2), SquareMatrix::Zero(2, 2), 0.1).has_value());
    CHECK_THROWS_AS(lambda_star_glm(SquareMatrix::Zero(2, 2), s, s, 0.1), SingularMatrixError);
    CHECK_THROWS_AS(lambda_star_glm(s, SquareMatrix::Identity(3, 3), s, 0.1), DimensionError);
}

TEST_CASE("random restarts land on the same minimizer") {
    std::mt19937_64 rng(47);
    for (const GlmFamily& fam : families) {
        const GlmFixture fx = make_glm(fam, 48, 200, 1000, 3);
        const GlmFppiResult base = fppi_glm_estimate(fx.labeled, fx.unlabeled, fx.f, half_region(), 0.7, fam);
        for (int k = 0; k < 10; ++k) {
            const Vector start = testutil::random_vector(rng, 3);
            const GlmFppiResult r = fppi_glm_estimate(fx.labeled, fx.unlabeled, fx.f, half_region(), 0.7, fam, {}, start);
            CHECK((r.theta_hat - base.theta_hat).cwiseAbs().maxCoeff() < 1e-4);
        }
    }
}

TEST_CASE("prediction equal to the fitted mean gives an empty region and the MLE") {
    for (const GlmFamily& fam : families) {
        GlmFixture fx = make_glm(fam, 49, 150, 600, 3);
        const GlmFit mle = glm_mle(fx.labeled, fam);
        fx.f.labeled = glm_means(fx.labeled.x(), mle.theta, fam);
        fx.f.unlabeled = glm_means(fx.unlabeled.x(), mle.theta, fam);
        const GlmFppiResult r = algorithm2_estimate(fx.labeled, fx.unlabeled, fx.f, KnnOracle{10}, fam);
        CHECK(r.labeled_in_region == 0);
        CHECK(r.unlabeled_in_region == 0);
        CHECK(r.degenerate);
        CHECK(r.lambda_hat == 0.0);
        CHECK((r.theta_hat - r.theta_mle).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((r.theta_mle - mle.theta).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("balanced bernoulli intercept-only fit is zero") {
    Matrix x = Matrix::Ones(10, 1);
    Vector y(10);
    y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
    const GlmFit fit = glm_mle(LabeledDataset(x, y), GlmFamily::bernoulli());
    CHECK(std::abs(fit.theta(0)) < 1e-8);
}

TEST_CASE("iteration cap raises with the last iterate") {
    const GlmFixture fx = make_glm(GlmFamily::poisson(), 50, 100, 100, 3);
    GlmOptions opts;
    opts.max_iter = 2;
    try {
        glm_mle(fx.labeled, GlmFamily::poisson(), opts);
        FAIL("expected NonConvergenceError");
    } catch (const NonConvergenceError& e) {
        CHECK(e.last_iterate().size() == 3);
        CHECK_FALSE(e.convergence().converged);
        CHECK(e.convergence().iterations == 2);
    }
}

TEST_CASE("fitted covariance and standard errors") {
    const GlmFixture fx = make_glm(GlmFamily::bernoulli(), 51, 400, 4000, 3);
    const GlmFppiResult r = algorithm2_estimate(fx.labeled, fx.unlabeled, fx.f, KnnOracle{15}, GlmFamily::bernoulli());
    const double rr = 0.1;
    CHECK(r.amse_estimate ==
          doctest::Approx(amse(r.sigma_hat, r.omega_hat, r.m_hat_matrix, r.gamma_hat, r.lambda_hat, rr)));
    const Vector se = r.std_errors();
    for (Index j = 0; j < 3; ++j) CHECK(se(j) == doctest::Approx(std::sqrt(r.covariance(j, j) / 400.0)));
    // the estimated weight never does worse than lambda = 0 in plug-in AMSE
    CHECK(r.amse_estimate <= amse(r.sigma_hat, r.omega_hat, r.m_hat_matrix, r.gamma_hat, 0.0, rr) + 1e-12);
}
