#include <doctest.h>

#include "fppi/types.hpp"

#include <cmath>
#include <limits>

using namespace fppi;

TEST_CASE("labeled dataset validation") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    Vector y(3);
    y << 1, 2, 3;
    LabeledDataset d(x, y);
    CHECK(d.rows() == 3);
    CHECK(d.cols() == 1);

    CHECK_THROWS_AS(LabeledDataset(x, Vector(Vector::Zero(2))), DimensionError);
    CHECK_THROWS_AS(LabeledDataset(Matrix(0, 1), Vector(0)), DataError);
    Vector bad = y;
    bad(1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(LabeledDataset(x, bad), DataError);
    Matrix badx = x;
    badx(2, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(LabeledDataset(badx, y), DataError);

    const LabeledDataset s = d.subset({2, 0});
    CHECK(s.rows() == 2);
    CHECK(s.y()(0) == 3);
    CHECK(s.x()(1, 0) == 1);
    CHECK_THROWS(d.subset({5}));
}

TEST_CASE("prediction sources") {
    Matrix x(2, 1);
    x << 1, 2;
    const auto pre = PredictionSource::precomputed(Vector(Vector::Constant(2, 4.0)));
    CHECK(pre.is_precomputed());
    CHECK(pre.evaluate(x)(1) == 4.0);
    Matrix x3(3, 1);
    x3 << 1, 2, 3;
    CHECK_THROWS_AS(pre.evaluate(x3), DimensionError);

    const auto fn = PredictionSource::functional([](const Matrix& m) { return Vector(m.col(0) * 2.0); });
    CHECK(fn.evaluate(x3)(2) == 6.0);

    LabeledDataset l(x, Vector(Vector::Zero(2)));
    UnlabeledDataset u(x3);
    const Predictions p = Predictions::evaluate(fn, l, u);
    CHECK(p.labeled.size() == 2);
    CHECK(p.unlabeled.size() == 3);
    CHECK_NOTHROW(p.check_aligned(l, u));
    const Predictions bad{Vector::Zero(3), Vector::Zero(3)};
    CHECK_THROWS_AS(bad.check_aligned(l, u), DimensionError);
}

TEST_CASE("full-space and empty regions") {
    Matrix x(5, 2);
    x.setRandom();
    const Vector f = Vector::LinSpaced(5, -2, 2);
    const BoolVector all = membership_vector(Region::all(), x, f);
    const BoolVector none = membership_vector(Region::empty(), x, f);
    CHECK(all == BoolVector(5, true));
    CHECK(none == BoolVector(5, false));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK_FALSE((all[i] && none[i]));
        CHECK((all[i] || none[i]));
    }
}

TEST_CASE("discrete set membership") {
    Matrix x(5, 1);
    x << 0, 1, 2, 3, 3;
    const Region r = Region::discrete_set({Vector::Constant(1, 3.0)});
    CHECK(r.membership(x, Vector::Zero(5)) == BoolVector{false, false, false, true, true});
    const Region two = Region::discrete_set({Vector::Constant(1, 0.0), Vector::Constant(1, 2.0)});
    CHECK(two.membership(x, Vector::Zero(5)) == BoolVector{true, false, true, false, false});
    Matrix wide(1, 2);
    wide << 3, 3;
    CHECK_THROWS_AS(r.membership(wide, Vector::Zero(1)), DimensionError);
}

TEST_CASE("sign product uses strict inequality") {
    RegionComponent g{[](const Matrix& x, const Vector&) { return Vector(x.col(0)); }, 1, "x"};
    RegionComponent h{[](const Matrix&, const Vector& f) { return f; }, -1, "f"};
    const Region r = Region::sign_product(g, h);
    Matrix x(5, 1);
    x << -1, 0, 1, 2, -2;
    Vector f(5);
    f << -1, 5, 0, 1, 3;
    CHECK(r.membership(x, f) == BoolVector{true, false, false, true, false});
    Matrix wide(1, 2);
    wide << 1, 1;
    CHECK_THROWS_AS(r.membership(wide, Vector::Ones(1)), DimensionError);
}

TEST_CASE("filtered predictions and counts") {
    const Vector f = Vector::LinSpaced(4, 1, 4);
    const BoolVector mask{true, false, true, false};
    const Vector fs = filtered(f, mask);
    CHECK(fs(0) == 1.0);
    CHECK(fs(1) == 0.0);
    CHECK(fs(2) == 3.0);
    CHECK(count(mask) == 2);
}

TEST_CASE("interval construction") {
    const IntervalEstimate ci = make_interval(2.0, 0.5, 0.95, 0.3, "S");
    CHECK(ci.lower == doctest::Approx(2.0 - 1.959963984540054 * 0.5).epsilon(1e-14));
    CHECK(ci.upper == doctest::Approx(2.0 + 1.959963984540054 * 0.5).epsilon(1e-14));
    CHECK(ci.lambda_used == 0.3);
    CHECK_THROWS(make_interval(0.0, 1.0, 1.5, 0.0, ""));
}
