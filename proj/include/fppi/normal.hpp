#pragma once

namespace fppi {

double normal_cdf(double x);

// Inverse of the standard normal CDF. Rational approximation refined by one
// Halley step; absolute error below 1e-14 on (1e-300, 1 - 1e-16).
double normal_quantile(double p);

// Two-sided critical value: normal_quantile((1 + level) / 2).
double z_value(double level);

}  // namespace fppi
