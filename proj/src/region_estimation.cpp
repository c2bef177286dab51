#include "fppi/region_estimation.hpp"

#include <charconv>
#include <map>
#include <sstream>

namespace fppi {

namespace {

struct RowLess {
    bool operator()(const Vector& a, const Vector& b) const {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    }
};

RegionComponent prediction_component() {
    return {[](const Matrix&, const Vector& f) { return f; }, -1, "f"};
}

}  // namespace

FittedRegressor as_regressor(KnnModel model) {
    const Index cols = model.cols();
    const std::string name = "knn(k=" + std::to_string(model.k()) + ")";
    auto shared = std::make_shared<const KnnModel>(std::move(model));
    return {[shared](const Matrix& x) { return shared->predict(x); }, cols, name};
}

FittedRegressor as_regressor(OlsModel model) {
    const auto cols = static_cast<Index>(model.theta().size());
    auto shared = std::make_shared<const OlsModel>(std::move(model));
    return {[shared](const Matrix& x) { return shared->predict(x); }, cols, "ols"};
}

OracleSpec parse_oracle(const std::string& text) {
    if (text == "ols") return OlsOracle{};
    if (text == "discrete") return DiscreteOracle{};
    if (text == "knn") return KnnOracle{};
    if (text.rfind("knn:", 0) == 0) {
        long long k = 0;
        const char* first = text.data() + 4;
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, k);
        if (ec != std::errc{} || ptr != last || k < 1)
            throw std::invalid_argument("bad oracle '" + text + "': expected knn:K with K >= 1");
        return KnnOracle{static_cast<Index>(k)};
    }
    throw std::invalid_argument("unknown oracle '" + text + "' (expected knn:K, ols or discrete)");
}

std::string oracle_name(const OracleSpec& spec) {
    if (const auto* k = std::get_if<KnnOracle>(&spec)) return "knn:" + std::to_string(k->k);
    if (std::holds_alternative<OlsOracle>(spec)) return "ols";
    return "discrete";
}

FittedRegressor fit_oracle(const OracleSpec& spec, const LabeledDataset& data) {
    if (const auto* k = std::get_if<KnnOracle>(&spec)) return as_regressor(KnnModel::fit(data, k->k));
    if (std::holds_alternative<OlsOracle>(spec)) return as_regressor(OlsModel::fit(data));
    throw std::invalid_argument("the discrete oracle does not produce a fitted regressor");
}

Region oracle_region_mean(RowMap m, double mean_y, std::string name) {
    std::ostringstream desc;
    desc.precision(17);
    desc << name << " - " << mean_y;
    RegionComponent g{[m = std::move(m), mean_y](const Matrix& x, const Vector&) {
                          return Vector(m(x).array() - mean_y);
                      },
                      -1, desc.str()};
    return Region::sign_product(std::move(g), prediction_component());
}

DiscreteRegionEstimate estimate_region_discrete(const LabeledDataset& labeled, const std::vector<Vector>& categories,
                                                const Vector& f_at_categories) {
    if (static_cast<Index>(categories.size()) != f_at_categories.size())
        throw DimensionError("discrete region: one prediction per category required");
    std::map<Vector, std::size_t, RowLess> index;
    for (std::size_t t = 0; t < categories.size(); ++t) {
        if (categories[t].size() != labeled.cols())
            throw DimensionError("discrete region: category width differs from covariates");
        index.emplace(categories[t], t);
    }
    std::vector<double> sums(categories.size(), 0.0);
    std::vector<Index> counts(categories.size(), 0);
    double total = 0.0;
    for (Index i = 0; i < labeled.rows(); ++i) {
        const Vector row = labeled.x().row(i).transpose();
        auto it = index.find(row);
        if (it == index.end()) throw std::invalid_argument("discrete region: labeled row matches no category");
        sums[it->second] += labeled.y()(i);
        counts[it->second] += 1;
        total += labeled.y()(i);
    }
    const double grand = total / static_cast<double>(labeled.rows());

    DiscreteRegionEstimate out;
    out.category_counts = counts;
    out.category_means.resize(categories.size(), 0.0);
    for (std::size_t t = 0; t < categories.size(); ++t) {
        if (counts[t] == 0) {
            out.excluded.push_back(categories[t]);
            continue;
        }
        const double mean = sums[t] / static_cast<double>(counts[t]);
        out.category_means[t] = mean;
        if ((mean - grand) * f_at_categories(static_cast<Index>(t)) > 0.0) out.selected.push_back(categories[t]);
    }
    out.region = out.selected.empty() ? Region::empty() : Region::discrete_set(out.selected);
    return out;
}

Region estimate_region_continuous(const LabeledDataset& labeled, const FittedRegressor& m_hat) {
    const double ybar = sample_mean(labeled.y());
    std::ostringstream desc;
    desc.precision(17);
    desc << m_hat.name << " - " << ybar;
    RegionComponent g{[m = m_hat.predict, ybar](const Matrix& x, const Vector&) {
                          return Vector(m(x).array() - ybar);
                      },
                      m_hat.cols, desc.str()};
    return Region::sign_product(std::move(g), prediction_component());
}

Region oracle_region_glm(RowMap m, RowMap mu, std::string name) {
    RegionComponent g{[mu](const Matrix& x, const Vector& f) { return Vector(f - mu(x)); }, -1, "f - mu"};
    RegionComponent h{[m = std::move(m), mu](const Matrix& x, const Vector&) { return Vector(m(x) - mu(x)); }, -1,
                      name + " - mu"};
    return Region::sign_product(std::move(g), std::move(h));
}

Region estimate_region_glm(const FittedRegressor& m_hat, const Vector& theta_mle, const GlmFamily& family) {
    const auto p = static_cast<Index>(theta_mle.size());
    RegionComponent g{[theta_mle, family](const Matrix& x, const Vector& f) {
                          return Vector(f - glm_means(x, theta_mle, family));
                      },
                      p, "f - mu_hat"};
    RegionComponent h{[m = m_hat.predict, theta_mle, family](const Matrix& x, const Vector&) {
                          return Vector(m(x) - glm_means(x, theta_mle, family));
                      },
                      p, m_hat.name + " - mu_hat"};
    return Region::sign_product(std::move(g), std::move(h));
}

double mis_recovery_probability(const Region& estimated, const Region& oracle, const Matrix& probe_x,
                                const Vector& probe_f) {
    if (probe_x.rows() < 1) throw std::invalid_argument("mis-recovery needs a nonempty probe");
    const BoolVector a = estimated.membership(probe_x, probe_f);
    const BoolVector b = oracle.membership(probe_x, probe_f);
    Index differ = 0;
    for (std::size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i] ? 1 : 0;
    return static_cast<double>(differ) / static_cast<double>(probe_x.rows());
}

std::vector<Vector> distinct_rows(const std::vector<const Matrix*>& sources) {
    std::map<Vector, std::size_t, RowLess> seen;
    std::vector<Vector> out;
    for (const Matrix* m : sources) {
        for (Index i = 0; i < m->rows(); ++i) {
            Vector row = m->row(i).transpose();
            if (seen.emplace(row, out.size()).second) out.push_back(std::move(row));
        }
    }
    return out;
}

Vector glm_means(const Matrix& x, const Vector& theta, const GlmFamily& family) {
    if (x.cols() != theta.size())
        throw DimensionError("GLM mean: covariates have " + std::to_string(x.cols()) + " columns, theta has " +
                             std::to_string(theta.size()));
    const Vector eta = x * theta;
    Vector out(eta.size());
    for (Index i = 0; i < eta.size(); ++i) out(i) = family.eval(eta(i)).a1;
    return out;
}

}  // namespace fppi
