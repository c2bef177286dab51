#include <doctest.h>

#include "fppi/linalg.hpp"
#include "fppi/oracles.hpp"

#include "../support/convert.hpp"

#include <vector>

using namespace fppi;
using testutil::to_ref;

TEST_CASE("knn matches brute force with full sort") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = 30 + rep * 7, p = 1 + rep % 4;
        const Matrix x = testutil::random_matrix(rng, n, p);
        const Vector y = testutil::random_vector(rng, n);
        const Index k = 1 + rep % 15;
        const KnnModel model = KnnModel::fit(LabeledDataset(x, y), k);
        const Matrix q = testutil::random_matrix(rng, 25, p);
        const Vector pred = model.predict(q);
        const ref::Mat rx = to_ref(x);
        const ref::Vec ry = to_ref(y);
        for (Index i = 0; i < q.rows(); ++i) {
            const ref::Vec qi = to_ref(Vector(q.row(i).transpose()));
            CHECK(pred(i) == doctest::Approx(ref::knn_predict(rx, ry, qi, static_cast<std::size_t>(k))).epsilon(1e-12));
        }
    }
}

TEST_CASE("knn ties broken by training index") {
    // Four training points at equal distance from the query; k = 2 keeps rows 0 and 1.
    Matrix x(4, 1);
    x << 1, -1, 1, -1;
    Vector y(4);
    y << 10, 20, 30, 40;
    const KnnModel model = KnnModel::fit(LabeledDataset(x, y), 2);
    Matrix q(1, 1);
    q << 0;
    CHECK(model.predict(q)(0) == 15.0);
    CHECK(model.neighbors(q.row(0)) == std::vector<Index>{0, 1});
    const KnnModel three = KnnModel::fit(LabeledDataset(x, y), 3);
    CHECK(three.predict(q)(0) == 20.0);
}

TEST_CASE("knn with k = n averages everything") {
    Matrix x(3, 1);
    x << 0, 5, 9;
    Vector y(3);
    y << 1, 2, 6;
    const KnnModel model = KnnModel::fit(LabeledDataset(x, y), 3);
    Matrix q(2, 1);
    q << -100, 100;
    CHECK(model.predict(q)(0) == doctest::Approx(3.0));
    CHECK(model.predict(q)(1) == doctest::Approx(3.0));
}

TEST_CASE("knn argument checks") {
    Matrix x(3, 2);
    x.setZero();
    const LabeledDataset d(x, Vector::Zero(3));
    CHECK_THROWS(KnnModel::fit(d, 0));
    CHECK_THROWS(KnnModel::fit(d, 4));
    const KnnModel m = KnnModel::fit(d, 1);
    CHECK_THROWS_AS(m.predict(Matrix::Zero(1, 3)), DimensionError);
}

TEST_CASE("ols agrees with gaussian elimination") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = 40, p = 1 + rep % 5;
        const Matrix x = testutil::random_matrix(rng, n, p);
        const Vector y = testutil::random_vector(rng, n);
        const OlsModel m = OlsModel::fit(LabeledDataset(x, y));
        const ref::Vec expect = ref::ols(to_ref(x), to_ref(y));
        for (Index j = 0; j < p; ++j)
            CHECK(m.theta()(j) == doctest::Approx(expect[static_cast<std::size_t>(j)]).epsilon(1e-9));
        const Vector pred = m.predict(x);
        CHECK((pred - x * m.theta()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ols recovers a noiseless linear model and rejects rank deficiency") {
    Matrix x(5, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
    Vector y = x * Vector(Vector::LinSpaced(2, 2, -3));
    const OlsModel m = OlsModel::fit(LabeledDataset(x, y));
    CHECK(m.theta()(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m.theta()(1) == doctest::Approx(-3.0).epsilon(1e-12));
    Matrix dup(4, 2);
    dup << 1, 1, 2, 2, 3, 3, 4, 4;
    CHECK_THROWS_AS(OlsModel::fit(LabeledDataset(dup, Vector::Ones(4))), SingularMatrixError);
    CHECK_THROWS_AS(OlsModel::fit(LabeledDataset(Matrix::Ones(2, 3), Vector::Ones(2))), SingularMatrixError);
}

TEST_CASE("sample mean") {
    const std::vector<double> v{1.0, 2.0, 6.0};
    CHECK(sample_mean(v) == 3.0);
    CHECK(sample_mean(Vector(Vector::Constant(4, 2.5))) == 2.5);
    CHECK_THROWS(sample_mean(std::vector<double>{}));
}
