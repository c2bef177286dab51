#pragma once

#include "fppi/glm_family.hpp"
#include "fppi/oracles.hpp"
#include "fppi/types.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace fppi {

using RowMap = std::function<Vector(const Matrix&)>;

// A fitted regression estimate m_hat of the conditional mean E(Y | X = x).
struct FittedRegressor {
    RowMap predict;
    Index cols = -1;
    std::string name;
};

FittedRegressor as_regressor(KnnModel model);
FittedRegressor as_regressor(OlsModel model);

// Which regression oracle to fit when a region has to be estimated.
struct KnnOracle {
    Index k = 15;
};
struct OlsOracle {};
// Exact-match categories; region estimated from within-category means.
struct DiscreteOracle {};
using OracleSpec = std::variant<KnnOracle, OlsOracle, DiscreteOracle>;

// Parses "knn:K", "knn" (K = 15), "ols" or "discrete".
OracleSpec parse_oracle(const std::string& text);
std::string oracle_name(const OracleSpec& spec);

// Fits the continuous-covariate oracle; throws std::invalid_argument for DiscreteOracle.
FittedRegressor fit_oracle(const OracleSpec& spec, const LabeledDataset& data);

// {x : (m(x) - mean_y) * f(x) > 0}
Region oracle_region_mean(RowMap m, double mean_y, std::string name = "m");

struct DiscreteRegionEstimate {
    Region region;
    std::vector<Vector> selected;
    // Categories with no labeled rows; never part of the region.
    std::vector<Vector> excluded;
    std::vector<double> category_means;
    std::vector<Index> category_counts;
};

// Categories k with (m_hat(k) - theta_hat) * f(k) > 0, where m_hat(k) is the
// within-category labeled mean and theta_hat the grand mean.
DiscreteRegionEstimate estimate_region_discrete(const LabeledDataset& labeled, const std::vector<Vector>& categories,
                                                const Vector& f_at_categories);

// {x : (m_hat(x) - ybar) * f(x) > 0}
Region estimate_region_continuous(const LabeledDataset& labeled, const FittedRegressor& m_hat);

// {x : (f(x) - mu(x)) * (m(x) - mu(x)) > 0}
Region oracle_region_glm(RowMap m, RowMap mu, std::string name = "m");

// {x : (f(x) - A'(x'theta)) * (m_hat(x) - A'(x'theta)) > 0}
Region estimate_region_glm(const FittedRegressor& m_hat, const Vector& theta_mle, const GlmFamily& family);

// Fraction of probe rows on which the two regions disagree.
double mis_recovery_probability(const Region& estimated, const Region& oracle, const Matrix& probe_x,
                                const Vector& probe_f);

// Distinct rows in order of first appearance across the given matrices.
std::vector<Vector> distinct_rows(const std::vector<const Matrix*>& sources);

// A'(x' theta) for every row.
Vector glm_means(const Matrix& x, const Vector& theta, const GlmFamily& family);

}  // namespace fppi
