#include "fppi/mean_estimation.hpp"

#include "fppi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fppi {

namespace {

constexpr std::uint64_t split_stream = 0x5B117;

// Spread below this fraction of the mean square counts as zero: a constant
// f_S only leaves rounding noise in the pooled variance.
constexpr double degenerate_ratio = 1e-12;

double mean_of(const Vector& v) { return v.size() == 0 ? 0.0 : v.sum() / static_cast<double>(v.size()); }

bool spread_is_degenerate(const PluginMoments& m, const Vector& f_unlabeled_filtered) {
    const double mean_square = f_unlabeled_filtered.squaredNorm() / m.N;
    return !(m.var_f > degenerate_ratio * mean_square) || m.var_f <= 0.0;
}

bool prediction_is_constant(const Predictions& f) {
    const double v = f.labeled.size() ? f.labeled(0) : (f.unlabeled.size() ? f.unlabeled(0) : 0.0);
    return (f.labeled.array() == v).all() && (f.unlabeled.array() == v).all();
}

struct Filtered {
    BoolVector mask_labeled;
    BoolVector mask_unlabeled;
    Vector f_labeled;
    Vector f_unlabeled;
};

Filtered apply_region(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const Predictions& f,
                      const Region& region) {
    f.check_aligned(labeled, unlabeled);
    Filtered out;
    out.mask_labeled = region.membership(labeled.x(), f.labeled);
    out.mask_unlabeled = region.membership(unlabeled.x(), f.unlabeled);
    out.f_labeled = filtered(f.labeled, out.mask_labeled);
    out.f_unlabeled = filtered(f.unlabeled, out.mask_unlabeled);
    return out;
}

double plugin_variance(const PluginMoments& m, double lambda, bool& clamped) {
    const double v = fppi_mean_variance(m.var_y, m.var_f, m.cov_yf, lambda, m.n, m.N);
    if (v < 0.0) {
        clamped = true;
        return m.var_y / m.n;
    }
    return v;
}

MeanFppiResult estimate_on_region(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Predictions& f, const Region& region, std::optional<double> fixed_lambda) {
    const Filtered fs = apply_region(labeled, unlabeled, f, region);
    const PluginMoments moments = plugin_moments(labeled.y(), fs.f_labeled, fs.f_unlabeled);

    MeanFppiResult r;
    r.region = region;
    r.labeled_mean = sample_mean(labeled.y());
    r.correction_term = mean_of(fs.f_unlabeled) - mean_of(fs.f_labeled);
    r.diagnostics.labeled_in_region = count(fs.mask_labeled);
    r.diagnostics.unlabeled_in_region = count(fs.mask_unlabeled);
    r.diagnostics.n_used = labeled.rows();

    const bool constant = prediction_is_constant(f);
    const bool degenerate = constant || spread_is_degenerate(moments, fs.f_unlabeled);
    if (fixed_lambda) {
        r.lambda_hat = *fixed_lambda;
    } else if (constant) {
        r.lambda_hat = 0.0;
        r.diagnostics.degenerate = true;
        r.diagnostics.warnings.push_back("prediction is constant; weight set to 0");
    } else if (degenerate) {
        r.lambda_hat = 0.0;
        r.diagnostics.degenerate = true;
        r.diagnostics.warnings.push_back("degenerate region (" + region.description() +
                                         "): prediction has no spread there; weight set to 0");
    } else {
        r.lambda_hat = moments.cov_yf / moments.var_f / (1.0 + moments.n / moments.N);
    }
    r.theta_hat = r.labeled_mean + r.lambda_hat * r.correction_term;
    r.std_error = std::sqrt(plugin_variance(moments, r.lambda_hat, r.diagnostics.variance_clamped));
    if (r.diagnostics.variance_clamped)
        r.diagnostics.warnings.push_back("negative plug-in variance; classical standard error used");
    return r;
}

}  // namespace

PluginMoments plugin_moments(const Vector& y, const Vector& f_labeled_filtered, const Vector& f_unlabeled_filtered) {
    if (y.size() < 1 || f_unlabeled_filtered.size() < 1) throw std::invalid_argument("plug-in moments need data");
    if (y.size() != f_labeled_filtered.size()) throw DimensionError("plug-in moments: misaligned labeled vectors");
    PluginMoments m;
    m.n = static_cast<double>(y.size());
    m.N = static_cast<double>(f_unlabeled_filtered.size());
    const double ybar = y.sum() / m.n;
    double ss = 0.0;
    double cross = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double d = y(i) - ybar;
        ss += d * d;
        cross += d * f_labeled_filtered(i);
    }
    m.var_y = y.size() > 1 ? ss / (m.n - 1.0) : 0.0;
    m.cov_yf = cross / m.n;
    const double pooled = (f_labeled_filtered.sum() + f_unlabeled_filtered.sum()) / (m.n + m.N);
    double spread = 0.0;
    for (Index j = 0; j < f_unlabeled_filtered.size(); ++j) {
        const double d = f_unlabeled_filtered(j) - pooled;
        spread += d * d;
    }
    m.var_f = spread / m.N;
    return m;
}

MeanFppiResult fppi_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const Predictions& f,
                         const Region& region, double lambda) {
    return estimate_on_region(labeled, unlabeled, f, region, lambda);
}

MeanFppiResult ppi_plusplus_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                 const Predictions& f, double lambda) {
    return fppi_mean(labeled, unlabeled, f, Region::all(), lambda);
}

std::optional<double> lambda_star_population(double cov_yf_S, double var_f_S, double n, double N) {
    if (!(n > 0.0 && N > 0.0)) throw std::invalid_argument("sample sizes must be positive");
    if (!(var_f_S > 0.0)) return std::nullopt;
    return cov_yf_S / var_f_S / (1.0 + n / N);
}

std::optional<double> lambda_hat_plugin(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const Region& region) {
    const Filtered fs = apply_region(labeled, unlabeled, f, region);
    const PluginMoments m = plugin_moments(labeled.y(), fs.f_labeled, fs.f_unlabeled);
    if (prediction_is_constant(f) || spread_is_degenerate(m, fs.f_unlabeled)) return std::nullopt;
    return m.cov_yf / m.var_f / (1.0 + m.n / m.N);
}

double fppi_mean_variance(double var_y, double var_f_S, double cov_yf_S, double lambda, double n, double N) {
    if (var_y < 0.0 || var_f_S < 0.0) throw std::invalid_argument("variances must be non-negative");
    if (!(n > 0.0 && N > 0.0)) throw std::invalid_argument("sample sizes must be positive");
    return var_y / n + lambda * lambda * (N + n) / (N * n) * var_f_S - 2.0 * lambda / n * cov_yf_S;
}

double minimized_variance(double var_y, double var_f_S, double cov_yf_S, double n, double N) {
    if (!(var_f_S > 0.0)) throw std::invalid_argument("minimized variance needs var_f_S > 0");
    if (var_y < 0.0) throw std::invalid_argument("variances must be non-negative");
    if (!(n > 0.0 && N > 0.0)) throw std::invalid_argument("sample sizes must be positive");
    return var_y / n - N / (n * (N + n)) * cov_yf_S * cov_yf_S / var_f_S;
}

MeanFppiResult plugin_fppi_mean(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                const Predictions& f, const Region& region) {
    return estimate_on_region(labeled, unlabeled, f, region, std::nullopt);
}

namespace {

struct RegionFit {
    Region region;
    std::vector<std::string> warnings;
};

RegionFit fit_region(const LabeledDataset& fit_data, const Vector& fit_f, const UnlabeledDataset& unlabeled,
                     const Vector& unlabeled_f, const OracleSpec& oracle) {
    RegionFit out;
    if (std::holds_alternative<DiscreteOracle>(oracle)) {
        const std::vector<Vector> categories = distinct_rows({&fit_data.x(), &unlabeled.x()});
        // Prediction at each category, taken from its first occurrence. Categories
        // are in first-appearance order, so a single forward scan finds them.
        Vector f_cat(static_cast<Index>(categories.size()));
        std::size_t next = 0;
        auto scan = [&](const Matrix& x, const Vector& fx) {
            for (Index i = 0; i < x.rows() && next < categories.size(); ++i) {
                if ((x.row(i).transpose().array() == categories[next].array()).all())
                    f_cat(static_cast<Index>(next++)) = fx(i);
            }
        };
        scan(fit_data.x(), fit_f);
        scan(unlabeled.x(), unlabeled_f);
        const DiscreteRegionEstimate est = estimate_region_discrete(fit_data, categories, f_cat);
        out.region = est.region;
        if (!est.excluded.empty())
            out.warnings.push_back(std::to_string(est.excluded.size()) +
                                   " categories have no labeled rows and were excluded from the region");
        return out;
    }
    out.region = estimate_region_continuous(fit_data, fit_oracle(oracle, fit_data));
    return out;
}

}  // namespace

MeanFppiResult algorithm1_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                   const Predictions& f, const OracleSpec& oracle) {
    f.check_aligned(labeled, unlabeled);
    RegionFit fit = fit_region(labeled, f.labeled, unlabeled, f.unlabeled, oracle);
    MeanFppiResult r = plugin_fppi_mean(labeled, unlabeled, f, fit.region);
    r.diagnostics.n_region_fit = labeled.rows();
    r.diagnostics.warnings.insert(r.diagnostics.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
    return r;
}

MeanFppiResult split_estimate_with_partition(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                             const Predictions& f, const std::vector<Index>& fit_rows,
                                             const std::vector<Index>& estimate_rows, const OracleSpec& oracle) {
    f.check_aligned(labeled, unlabeled);
    if (fit_rows.empty() || estimate_rows.empty())
        throw std::invalid_argument("sample splitting needs both halves nonempty");
    const LabeledDataset fit_data = labeled.subset(fit_rows);
    const LabeledDataset est_data = labeled.subset(estimate_rows);
    Vector fit_f(static_cast<Index>(fit_rows.size()));
    for (std::size_t i = 0; i < fit_rows.size(); ++i) fit_f(static_cast<Index>(i)) = f.labeled(fit_rows[i]);
    Predictions est_f{Vector(static_cast<Index>(estimate_rows.size())), f.unlabeled};
    for (std::size_t i = 0; i < estimate_rows.size(); ++i) est_f.labeled(static_cast<Index>(i)) = f.labeled(estimate_rows[i]);

    RegionFit fit = fit_region(fit_data, fit_f, unlabeled, f.unlabeled, oracle);
    MeanFppiResult r = plugin_fppi_mean(est_data, unlabeled, est_f, fit.region);
    r.diagnostics.n_region_fit = fit_data.rows();
    r.diagnostics.warnings.insert(r.diagnostics.warnings.begin(), fit.warnings.begin(), fit.warnings.end());
    return r;
}

MeanFppiResult algorithm1_split_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                         const Predictions& f, double split_fraction, const OracleSpec& oracle,
                                         std::uint64_t seed) {
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw std::invalid_argument("split fraction must lie in (0, 1)");
    const Index n = labeled.rows();
    const auto n1 = static_cast<Index>(std::llround(split_fraction * static_cast<double>(n)));
    if (n1 < 1 || n1 > n - 1)
        throw std::invalid_argument("split leaves an empty half (n = " + std::to_string(n) + ")");
    RandomStream rng(seed, 0, split_stream);
    const std::vector<Index> perm = random_permutation(n, rng);
    std::vector<Index> fit_rows(perm.begin(), perm.begin() + n1);
    std::vector<Index> est_rows(perm.begin() + n1, perm.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(est_rows.begin(), est_rows.end());
    return split_estimate_with_partition(labeled, unlabeled, f, fit_rows, est_rows, oracle);
}

IntervalEstimate confidence_interval(const MeanFppiResult& result, const LabeledDataset& labeled,
                                     const UnlabeledDataset& unlabeled, const Predictions& f, double level) {
    const Filtered fs = apply_region(labeled, unlabeled, f, result.region);
    const PluginMoments m = plugin_moments(labeled.y(), fs.f_labeled, fs.f_unlabeled);
    std::string summary = result.region.description();
    double variance = m.var_y / m.n;
    if (result.diagnostics.degenerate || count(fs.mask_labeled) + count(fs.mask_unlabeled) == 0) {
        summary += " (degenerate: classical interval)";
    } else {
        bool clamped = false;
        variance = plugin_variance(m, result.lambda_hat, clamped);
        if (clamped) summary += " (variance clamped)";
    }
    return make_interval(result.theta_hat, std::sqrt(variance), level, result.lambda_hat, std::move(summary));
}

}  // namespace fppi
