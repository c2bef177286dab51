#pragma once

#include "fppi/region_estimation.hpp"
#include "fppi/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fppi {

struct MeanDiagnostics {
    Index labeled_in_region = 0;
    Index unlabeled_in_region = 0;
    // Region empty, f constant, or f_S without spread: lambda forced to 0.
    bool degenerate = false;
    // Plug-in variance came out negative and was replaced by the classical one.
    bool variance_clamped = false;
    // Rows used for the estimate (n2 under sample splitting).
    Index n_used = 0;
    Index n_region_fit = 0;
    std::vector<std::string> warnings;
};

struct MeanFppiResult {
    double theta_hat = 0.0;
    double lambda_hat = 0.0;
    Region region;
    // (1/N) sum f_S(x~_j) - (1/n) sum f_S(x_i)
    double correction_term = 0.0;
    double std_error = 0.0;
    double labeled_mean = 0.0;
    MeanDiagnostics diagnostics;
};

// ybar + lambda * [(1/N) sum f(x~_j) 1_S(x~_j) - (1/n) sum f(x_i) 1_S(x_i)]
MeanFppiResult fppi_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const Predictions& f,
                         const Region& region, double lambda);

// fppi_mean over the whole covariate space; lambda = 1 is classical PPI.
MeanFppiResult ppi_plusplus_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                 const Predictions& f, double lambda);

// cov / var / (1 + n/N); nullopt when var_f_S <= 0 (degenerate region).
std::optional<double> lambda_star_population(double cov_yf_S, double var_f_S, double n, double N);

// Plug-in weight: labeled covariance of (y, f_S) over the unlabeled spread of
// f_S around the pooled mean, times 1/(1 + n/N). nullopt when the spread is 0
// or f is constant.
std::optional<double> lambda_hat_plugin(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const Region& region);

// Exact finite-sample variance for a fixed region and weight.
double fppi_mean_variance(double var_y, double var_f_S, double cov_yf_S, double lambda, double n, double N);

// Variance at the optimal weight: var_y/n - N/(n(N+n)) cov^2/var_f_S.
double minimized_variance(double var_y, double var_f_S, double cov_yf_S, double n, double N);

// fppi_mean at the plug-in weight for a fixed region; falls back to lambda = 0
// (classical mean) when the region is degenerate.
MeanFppiResult plugin_fppi_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                const Predictions& f, const Region& region);

// Fit the oracle on all labeled rows, estimate the informative region, then
// apply plugin_fppi_mean on that region. DiscreteOracle builds the category
// list from the distinct covariate rows of both samples.
MeanFppiResult algorithm1_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                   const Predictions& f, const OracleSpec& oracle);

// Sample-splitting variant: a random split_fraction of the labeled rows fits the
// oracle and the region; the rest supplies the weight and the estimate.
MeanFppiResult algorithm1_split_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                         const Predictions& f, double split_fraction, const OracleSpec& oracle,
                                         std::uint64_t seed);

// Split-sample estimate with an explicit partition into fit rows and estimation rows.
MeanFppiResult split_estimate_with_partition(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                             const Predictions& f, const std::vector<Index>& fit_rows,
                                             const std::vector<Index>& estimate_rows, const OracleSpec& oracle);

// Normal interval around result.theta_hat from plug-in moments at result.lambda_hat.
// The labeled and prediction arguments must be the rows the estimate used.
IntervalEstimate confidence_interval(const MeanFppiResult& result, const LabeledDataset& labeled,
                                     const UnlabeledDataset& unlabeled, const Predictions& f, double level);

// Plug-in moments shared by the weight, the standard error and the interval.
struct PluginMoments {
    double var_y = 0.0;     // labeled, divisor n - 1
    double cov_yf = 0.0;    // labeled, divisor n
    double var_f = 0.0;     // unlabeled spread around the pooled mean, divisor N
    double n = 0.0;
    double N = 0.0;
};

PluginMoments plugin_moments(const Vector& y, const Vector& f_labeled_filtered, const Vector& f_unlabeled_filtered);

}  // namespace fppi
