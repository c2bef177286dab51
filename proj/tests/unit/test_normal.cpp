#include <doctest.h>

#include "fppi/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

using namespace fppi;

TEST_CASE("quantile matches boost") {
    const boost::math::normal_distribution<double> nd;
    for (double p : {1e-300, 1e-200, 1e-50, 1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.25, 0.5, 0.6, 0.975, 0.97575, 0.999,
                     1 - 1e-9, 1 - 1e-15}) {
        const double expect = boost::math::quantile(nd, p);
        CAPTURE(p);
        CHECK(std::abs(normal_quantile(p) - expect) <= 1e-13 * std::max(1.0, std::abs(expect)));
    }
    for (int i = 1; i < 2000; ++i) {
        const double p = i / 2000.0;
        CHECK(std::abs(normal_quantile(p) - boost::math::quantile(nd, p)) < 5e-14);
    }
}

TEST_CASE("cdf matches boost and inverts the quantile") {
    const boost::math::normal_distribution<double> nd;
    for (double x = -8.0; x <= 8.0; x += 0.37) CHECK(std::abs(normal_cdf(x) - boost::math::cdf(nd, x)) < 1e-15);
    for (double p : {0.01, 0.3, 0.5, 0.77, 0.99}) CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-14));
}

TEST_CASE("critical values") {
    CHECK(std::abs(z_value(0.95) - 1.959963984540054) < 1e-14);
    CHECK(std::abs(z_value(0.90) - 1.6448536269514722) < 1e-14);
    CHECK_THROWS(z_value(0.0));
    CHECK_THROWS(z_value(1.0));
    CHECK(std::isinf(normal_quantile(0.0)));
    CHECK(normal_quantile(0.0) < 0);
    CHECK(std::isinf(normal_quantile(1.0)));
    CHECK_THROWS(normal_quantile(1.5));
    CHECK_THROWS(normal_quantile(std::nan("")));
}
