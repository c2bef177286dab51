#include "fppi/simulation.hpp"

#include "fppi/glm_family.hpp"
#include "fppi/linalg.hpp"
#include "fppi/normal.hpp"
#include "fppi/oracles.hpp"
#include "fppi/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fppi {

namespace {

constexpr std::uint64_t stream_labeled_x = 1;
constexpr std::uint64_t stream_labeled_noise = 2;
constexpr std::uint64_t stream_unlabeled_x = 3;
constexpr std::uint64_t stream_split = 4;
constexpr std::uint64_t stream_probe = 10;
constexpr std::uint64_t stream_reference = 100;
constexpr std::uint64_t reference_seed = 0x5EEDF00DULL;
constexpr Index reference_rows = 1000000;

const double scenario1_m[4] = {-2.0, -1.0, 5.0, 10.0};
const double scenario1_f[3][4] = {{1.0, 1.0, -5.0, 3.0}, {-1.0, 1.0, -1.0, 1.0}, {-5.0, 1.0, 1.0, 3.0}};

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

int category_of(double v) {
    const double r = std::round(v);
    if (r != v || r < 0 || r > 3) throw DataError("scenario1 covariate must be one of 0, 1, 2, 3");
    return static_cast<int>(r);
}

double smooth_sum(const Matrix& x, Index i, double a_sin, double a_cos) {
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) s += a_sin * std::sin(x(i, j)) + a_cos * std::cos(x(i, j));
    return s;
}

double scenario2_f(PredictionId pred, const Matrix& x, Index i) {
    switch (pred) {
        case PredictionId::F1: return smooth_sum(x, i, 2.5, -0.5);
        case PredictionId::F2: return smooth_sum(x, i, 2.25, -0.25);
        case PredictionId::F3: return smooth_sum(x, i, 2.0, 0.0);
    }
    return 0.0;
}

void require_cols(const Matrix& x, Index cols, const char* what) {
    if (x.cols() != cols)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                             std::to_string(x.cols()));
}

Index scenario_cols(ScenarioId id) {
    return (id == ScenarioId::Scenario2 || id == ScenarioId::Scenario3) ? 4 : 1;
}

Matrix draw_x(const ScenarioSpec& spec, Index rows, RandomStream& rng) {
    const Index p = scenario_cols(spec.id);
    Matrix x(rows, p);
    for (Index i = 0; i < rows; ++i) {
        switch (spec.id) {
            case ScenarioId::Scenario1:
                x(i, 0) = static_cast<double>(std::min<std::uint64_t>(rng.below(4), 3));
                break;
            case ScenarioId::Scenario2:
            case ScenarioId::Scenario3:
                for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
                break;
            case ScenarioId::Example1:
            case ScenarioId::Example2:
                x(i, 0) = 1.0 + rng.normal();
                break;
            case ScenarioId::MarginSeparation: {
                // inverse CDF of |X| on [c, 1] with density ~ t^ell, then a fair sign
                const double a = spec.margin_ell + 1.0;
                const double lo = std::pow(spec.margin_c, a);
                const double mag = std::pow(lo + rng.uniform() * (1.0 - lo), 1.0 / a);
                x(i, 0) = rng.uniform() < 0.5 ? -mag : mag;
                break;
            }
        }
    }
    return x;
}

Vector draw_response(const ScenarioSpec& spec, const Matrix& x, RandomStream& rng) {
    const Vector m = scenario_conditional_mean(spec)(x);
    const double sd = spec.effective_noise_sd();
    Vector y(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        if (spec.id == ScenarioId::Scenario3)
            y(i) = rng.uniform() < m(i) ? 1.0 : 0.0;
        else
            y(i) = m(i) + sd * rng.normal();
    }
    return y;
}

struct Neumaier {
    double sum = 0.0;
    double c = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

template <typename Fn>
void parallel_for(Index count, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = default_threads();
    threads = static_cast<unsigned>(std::min<Index>(std::max<Index>(1, count), threads));
    std::atomic<Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

struct RepOutcome {
    bool ok = false;
    Vector estimate;
    double squared_error = 0.0;
    double coverage = 0.0;
    double lambda = 0.0;
    int exact_recovery = -1;  // -1 when not applicable
};

const std::vector<std::string>& known_kinds() {
    static const std::vector<std::string> kinds = {"classical", "ppi", "ppi++", "fppi", "fppi_split", "fppi_oracle"};
    return kinds;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

OracleSpec mean_oracle(const ScenarioSpec& spec) {
    if (spec.id == ScenarioId::Scenario1) return DiscreteOracle{};
    return KnnOracle{spec.knn_k};
}

std::vector<Vector> scenario1_categories() {
    std::vector<Vector> cats;
    for (int k = 0; k < 4; ++k) cats.push_back(Vector::Constant(1, k));
    return cats;
}

Matrix scenario1_category_matrix() {
    Matrix x(4, 1);
    for (int k = 0; k < 4; ++k) x(k, 0) = k;
    return x;
}

bool same_on_categories(const Region& a, const Region& b, PredictionId pred) {
    const Matrix x = scenario1_category_matrix();
    const Vector f = scenario_prediction(ScenarioId::Scenario1, pred).evaluate(x);
    return a.membership(x, f) == b.membership(x, f);
}

RepOutcome run_mean_estimator(const ScenarioSpec& spec, const EstimatorSpec& est, const GeneratedData& d,
                              Index rep) {
    RepOutcome out;
    const double theta = d.truth.theta_star(0);
    const auto& L = d.labeled;
    const auto& U = d.unlabeled;
    const auto& f = d.f;
    MeanFppiResult r;
    LabeledDataset used_l = L;
    Predictions used_f = f;

    auto at_region = [&](const Region& region) {
        return est.fixed_lambda ? fppi_mean(L, U, f, region, *est.fixed_lambda) : plugin_fppi_mean(L, U, f, region);
    };

    if (est.kind == "classical") {
        r = fppi_mean(L, U, f, Region::empty(), 0.0);
    } else if (est.kind == "ppi") {
        r = fppi_mean(L, U, f, Region::all(), est.fixed_lambda.value_or(1.0));
    } else if (est.kind == "ppi++") {
        r = at_region(Region::all());
    } else if (est.kind == "fppi") {
        r = algorithm1_estimate(L, U, f, mean_oracle(spec));
        if (est.fixed_lambda) r = fppi_mean(L, U, f, r.region, *est.fixed_lambda);
    } else if (est.kind == "fppi_split") {
        const std::uint64_t split_seed = splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(rep) + stream_split));
        const Index n = L.rows();
        const auto n1 = static_cast<Index>(std::llround(spec.split_fraction * static_cast<double>(n)));
        RandomStream rng(split_seed, 0, 0x5B117);
        const auto perm = random_permutation(n, rng);
        std::vector<Index> fit(perm.begin(), perm.begin() + n1), rest(perm.begin() + n1, perm.end());
        std::sort(fit.begin(), fit.end());
        std::sort(rest.begin(), rest.end());
        r = split_estimate_with_partition(L, U, f, fit, rest, mean_oracle(spec));
        used_l = L.subset(rest);
        Vector fl(static_cast<Index>(rest.size()));
        for (std::size_t i = 0; i < rest.size(); ++i) fl(static_cast<Index>(i)) = f.labeled(rest[i]);
        used_f = Predictions{fl, f.unlabeled};
    } else if (est.kind == "fppi_oracle") {
        r = at_region(d.truth.oracle_region);
    } else {
        throw std::invalid_argument("unknown estimator kind: " + est.kind);
    }

    out.ok = true;
    out.estimate = Vector::Constant(1, r.theta_hat);
    out.squared_error = (r.theta_hat - theta) * (r.theta_hat - theta);
    out.lambda = r.lambda_hat;
    const IntervalEstimate ci = confidence_interval(r, used_l, U, used_f, spec.level);
    out.coverage = (ci.lower <= theta && theta <= ci.upper) ? 1.0 : 0.0;
    if (spec.id == ScenarioId::Scenario1 && (est.kind == "fppi" || est.kind == "fppi_split"))
        out.exact_recovery = same_on_categories(r.region, d.truth.oracle_region, spec.prediction) ? 1 : 0;
    return out;
}

RepOutcome run_glm_estimator(const ScenarioSpec& spec, const EstimatorSpec& est, const GeneratedData& d,
                             const GlmFit& mle, const GlmFamily& family) {
    const auto& L = d.labeled;
    const auto& U = d.unlabeled;
    const auto& f = d.f;
    GlmFppiResult r;
    if (est.kind == "classical") {
        r = glm_estimate_on_region(L, U, f, Region::empty(), family, {}, 0.0, mle);
    } else if (est.kind == "ppi") {
        r = glm_estimate_on_region(L, U, f, Region::all(), family, {}, est.fixed_lambda.value_or(1.0), mle);
    } else if (est.kind == "ppi++") {
        r = glm_estimate_on_region(L, U, f, Region::all(), family, {}, est.fixed_lambda, mle);
    } else if (est.kind == "fppi") {
        const FittedRegressor m_hat = fit_oracle(KnnOracle{spec.knn_k}, L);
        const Region region = estimate_region_glm(m_hat, mle.theta, family);
        r = glm_estimate_on_region(L, U, f, region, family, {}, est.fixed_lambda, mle);
    } else if (est.kind == "fppi_oracle") {
        r = glm_estimate_on_region(L, U, f, d.truth.oracle_region, family, {}, est.fixed_lambda, mle);
    } else {
        throw std::invalid_argument("estimator not available for regression scenarios: " + est.kind);
    }
    RepOutcome out;
    out.ok = true;
    out.estimate = r.theta_hat;
    out.squared_error = (r.theta_hat - d.truth.theta_star).squaredNorm();
    out.lambda = r.lambda_hat;
    const Vector se = r.std_errors();
    const double z = z_value(spec.level);
    double covered = 0.0;
    for (Index j = 0; j < se.size(); ++j)
        if (std::abs(r.theta_hat(j) - d.truth.theta_star(j)) <= z * se(j)) covered += 1.0;
    out.coverage = covered / static_cast<double>(se.size());
    return out;
}

bool is_estimator_failure(const std::exception& e) {
    return dynamic_cast<const NonConvergenceError*>(&e) != nullptr ||
           dynamic_cast<const SingularMatrixError*>(&e) != nullptr;
}

EstimatorSummary summarize(const std::string& name, const std::vector<RepOutcome>& reps, const Vector& theta_star,
                           bool has_coverage) {
    EstimatorSummary s;
    s.name = name;
    const Index p = theta_star.size();
    std::vector<Neumaier> mean(static_cast<std::size_t>(p));
    Neumaier mse, lam, cov, exact;
    Index ok = 0, exact_n = 0;
    for (const auto& r : reps) {
        if (!r.ok) {
            ++s.failures;
            s.squared_errors.push_back(std::numeric_limits<double>::quiet_NaN());
            s.estimates.emplace_back();
            continue;
        }
        ++ok;
        s.squared_errors.push_back(r.squared_error);
        s.estimates.push_back(r.estimate);
        for (Index j = 0; j < p; ++j) mean[static_cast<std::size_t>(j)].add(r.estimate(j));
        mse.add(r.squared_error);
        lam.add(r.lambda);
        cov.add(r.coverage);
        if (r.exact_recovery >= 0) {
            ++exact_n;
            exact.add(r.exact_recovery);
        }
    }
    s.metrics.push_back({"replications_ok", static_cast<double>(ok)});
    s.metrics.push_back({"failures", static_cast<double>(s.failures)});
    if (ok == 0) return s;
    const double k = static_cast<double>(ok);
    Vector m(p);
    for (Index j = 0; j < p; ++j) m(j) = mean[static_cast<std::size_t>(j)].value() / k;
    const double mse_v = mse.value() / k;

    // variance (divisor R) around the Monte Carlo mean, and MSE spread
    Neumaier var, mse_dev;
    for (const auto& r : reps) {
        if (!r.ok) continue;
        var.add((r.estimate - m).squaredNorm());
        mse_dev.add((r.squared_error - mse_v) * (r.squared_error - mse_v));
    }
    if (p == 1) {
        s.metrics.push_back({"mean_estimate", m(0)});
    } else {
        for (Index j = 0; j < p; ++j) s.metrics.push_back({"mean_estimate_" + std::to_string(j), m(j)});
    }
    s.metrics.push_back({"mse", mse_v});
    s.metrics.push_back({"mse_se", ok > 1 ? std::sqrt(mse_dev.value() / (k - 1.0) / k) : 0.0});
    s.metrics.push_back({"variance", var.value() / k});
    s.metrics.push_back({"bias_sq", (m - theta_star).squaredNorm()});
    if (has_coverage) s.metrics.push_back({"coverage", cov.value() / k});
    s.metrics.push_back({"mean_lambda", lam.value() / k});
    if (exact_n > 0) s.metrics.push_back({"exact_recovery", exact.value() / static_cast<double>(exact_n)});
    return s;
}

nlohmann::ordered_json spec_json(const ScenarioSpec& spec) {
    nlohmann::ordered_json j;
    j["scenario"] = scenario_name(spec.id);
    j["prediction"] = prediction_name(spec.prediction);
    j["n"] = spec.n;
    j["N"] = spec.N;
    j["replications"] = spec.replications;
    j["seed"] = spec.seed;
    std::vector<std::string> est;
    for (const auto& e : spec.estimators) est.push_back(e.label());
    j["estimators"] = est;
    j["noise_sd"] = spec.effective_noise_sd();
    j["margin_c"] = spec.margin_c;
    j["margin_ell"] = spec.margin_ell;
    j["knn_k"] = spec.knn_k;
    j["split_fraction"] = spec.split_fraction;
    j["level"] = spec.level;
    return j;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

ScenarioId parse_scenario(const std::string& name) {
    static const std::map<std::string, ScenarioId> names = {
        {"example1", ScenarioId::Example1},   {"example2", ScenarioId::Example2},
        {"scenario1", ScenarioId::Scenario1}, {"scenario2", ScenarioId::Scenario2},
        {"scenario3", ScenarioId::Scenario3}, {"margin_separation", ScenarioId::MarginSeparation}};
    const auto it = names.find(name);
    if (it == names.end()) throw std::invalid_argument("unknown scenario: " + name);
    return it->second;
}

std::string scenario_name(ScenarioId id) {
    switch (id) {
        case ScenarioId::Example1: return "example1";
        case ScenarioId::Example2: return "example2";
        case ScenarioId::Scenario1: return "scenario1";
        case ScenarioId::Scenario2: return "scenario2";
        case ScenarioId::Scenario3: return "scenario3";
        case ScenarioId::MarginSeparation: return "margin_separation";
    }
    return "?";
}

PredictionId parse_prediction(const std::string& name) {
    if (name == "f1") return PredictionId::F1;
    if (name == "f2") return PredictionId::F2;
    if (name == "f3") return PredictionId::F3;
    throw std::invalid_argument("unknown prediction: " + name);
}

std::string prediction_name(PredictionId id) {
    switch (id) {
        case PredictionId::F1: return "f1";
        case PredictionId::F2: return "f2";
        case PredictionId::F3: return "f3";
    }
    return "?";
}

bool is_glm_scenario(ScenarioId id) { return id == ScenarioId::Scenario2 || id == ScenarioId::Scenario3; }

std::string EstimatorSpec::label() const {
    if (!fixed_lambda) return kind;
    return kind + "@" + format_double(*fixed_lambda);
}

EstimatorSpec parse_estimator(const std::string& text) {
    EstimatorSpec e;
    const auto at = text.find('@');
    e.kind = text.substr(0, at);
    if (e.kind == "fppi-split") e.kind = "fppi_split";
    if (e.kind == "fppi-oracle") e.kind = "fppi_oracle";
    if (std::find(known_kinds().begin(), known_kinds().end(), e.kind) == known_kinds().end())
        throw std::invalid_argument("unknown estimator: " + text);
    if (at != std::string::npos) {
        const std::string num = text.substr(at + 1);
        char* end = nullptr;
        const double v = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size() || !std::isfinite(v))
            throw std::invalid_argument("bad fixed weight in estimator: " + text);
        e.fixed_lambda = v;
    }
    return e;
}

double ScenarioSpec::effective_noise_sd() const {
    if (!std::isnan(noise_sd)) return noise_sd;
    return id == ScenarioId::Scenario2 ? 2.0 : 1.0;
}

void ScenarioSpec::validate() const {
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    if (N < 1) throw std::invalid_argument("N must be at least 1");
    if (replications < 1) throw std::invalid_argument("replications must be at least 1");
    if (!(effective_noise_sd() >= 0) || !std::isfinite(effective_noise_sd()))
        throw std::invalid_argument("noise_sd must be finite and non-negative");
    if (!(margin_c > 0 && margin_c < 1)) throw std::invalid_argument("margin_c must lie in (0, 1)");
    if (!(margin_ell > -1) || !std::isfinite(margin_ell)) throw std::invalid_argument("margin_ell must exceed -1");
    if (!(split_fraction > 0 && split_fraction < 1)) throw std::invalid_argument("split_fraction must lie in (0, 1)");
    if (!(level > 0 && level < 1)) throw std::invalid_argument("level must lie in (0, 1)");
    if (knn_k < 1) throw std::invalid_argument("knn_k must be positive");
    for (const auto& e : estimators) {
        if (is_glm_scenario(id) && e.kind == "fppi_split")
            throw std::invalid_argument("fppi_split is only available for mean scenarios");
        const bool needs_knn = (e.kind == "fppi" && id != ScenarioId::Scenario1) || e.kind == "fppi_split";
        if (needs_knn && id != ScenarioId::Scenario1) {
            const Index fit_rows = e.kind == "fppi_split"
                                       ? static_cast<Index>(std::llround(split_fraction * static_cast<double>(n)))
                                       : n;
            if (fit_rows < knn_k) throw std::invalid_argument("too few labeled rows for the kNN oracle");
        }
        if (e.kind == "fppi_split") {
            const auto n1 = static_cast<Index>(std::llround(split_fraction * static_cast<double>(n)));
            if (n1 < 1 || n - n1 < 2) throw std::invalid_argument("split leaves an empty half");
        }
    }
}

PredictionSource scenario_prediction(ScenarioId id, PredictionId pred) {
    const std::string name = scenario_name(id) + ":" + prediction_name(pred);
    switch (id) {
        case ScenarioId::Scenario1:
            return PredictionSource::functional(
                [pred](const Matrix& x) {
                    require_cols(x, 1, "scenario1 prediction");
                    Vector f(x.rows());
                    for (Index i = 0; i < x.rows(); ++i)
                        f(i) = scenario1_f[static_cast<int>(pred)][category_of(x(i, 0))];
                    return f;
                },
                name);
        case ScenarioId::Scenario2:
        case ScenarioId::Scenario3: {
            const bool logistic = id == ScenarioId::Scenario3;
            return PredictionSource::functional(
                [pred, logistic](const Matrix& x) {
                    require_cols(x, 4, "regression scenario prediction");
                    Vector f(x.rows());
                    for (Index i = 0; i < x.rows(); ++i) {
                        const double v = scenario2_f(pred, x, i);
                        f(i) = logistic ? sigmoid(v) : v;
                    }
                    return f;
                },
                name);
        }
        case ScenarioId::Example1:
        case ScenarioId::Example2:
            return PredictionSource::functional(
                [](const Matrix& x) {
                    require_cols(x, 1, "example prediction");
                    Vector f(x.rows());
                    for (Index i = 0; i < x.rows(); ++i) f(i) = (x(i, 0) - 1.0) * (x(i, 0) - 1.0) - 1.0;
                    return f;
                },
                scenario_name(id) + ":f");
        case ScenarioId::MarginSeparation:
            return PredictionSource::functional(
                [](const Matrix& x) {
                    require_cols(x, 1, "margin_separation prediction");
                    return Vector(Vector::Ones(x.rows()));
                },
                "margin_separation:f");
    }
    throw std::invalid_argument("unknown scenario");
}

RowMap scenario_conditional_mean(const ScenarioSpec& spec) {
    switch (spec.id) {
        case ScenarioId::Scenario1:
            return [](const Matrix& x) {
                require_cols(x, 1, "scenario1 mean");
                Vector m(x.rows());
                for (Index i = 0; i < x.rows(); ++i) m(i) = scenario1_m[category_of(x(i, 0))];
                return m;
            };
        case ScenarioId::Scenario2:
        case ScenarioId::Scenario3: {
            const bool logistic = spec.id == ScenarioId::Scenario3;
            return [logistic](const Matrix& x) {
                require_cols(x, 4, "regression scenario mean");
                Vector m(x.rows());
                for (Index i = 0; i < x.rows(); ++i) {
                    const double v = smooth_sum(x, i, 1.0, 1.0);
                    m(i) = logistic ? sigmoid(v - 2.0) : v;
                }
                return m;
            };
        }
        case ScenarioId::Example1:
        case ScenarioId::Example2:
        case ScenarioId::MarginSeparation:
            return [](const Matrix& x) {
                require_cols(x, 1, "univariate mean");
                return Vector(x.col(0));
            };
    }
    throw std::invalid_argument("unknown scenario");
}

GlmFamily scenario_family(ScenarioId id) {
    if (id == ScenarioId::Scenario3) return GlmFamily::bernoulli();
    return GlmFamily::gaussian();
}

Matrix draw_covariates(const ScenarioSpec& spec, Index rows, std::uint64_t stream, std::uint64_t replication) {
    RandomStream rng(spec.seed, replication, stream);
    return draw_x(spec, rows, rng);
}

LabeledDataset draw_labeled(const ScenarioSpec& spec, Index rows, std::uint64_t replication) {
    RandomStream rx(spec.seed, replication, stream_labeled_x);
    RandomStream ry(spec.seed, replication, stream_labeled_noise);
    Matrix x = draw_x(spec, rows, rx);
    Vector y = draw_response(spec, x, ry);
    return LabeledDataset(std::move(x), std::move(y));
}

Vector reference_theta_star(const ScenarioSpec& spec) {
    switch (spec.id) {
        case ScenarioId::Scenario1: return Vector::Constant(1, 3.0);
        case ScenarioId::Example1:
        case ScenarioId::Example2: return Vector::Constant(1, 1.0);
        case ScenarioId::MarginSeparation: return Vector::Constant(1, 0.0);
        case ScenarioId::Scenario2:
        case ScenarioId::Scenario3: break;
    }
    static std::mutex cache_mutex;
    static std::map<ScenarioId, Vector> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    const auto it = cache.find(spec.id);
    if (it != cache.end()) return it->second;
    ScenarioSpec ref = spec;
    ref.seed = reference_seed;
    const Matrix x = draw_covariates(ref, reference_rows, stream_reference);
    const Vector r = scenario_conditional_mean(ref)(x);
    GlmOptions opts;
    opts.tol = 1e-10;
    const Vector theta = glm_fit_mean_response(x, r, scenario_family(spec.id), opts).theta;
    cache.emplace(spec.id, theta);
    return theta;
}

Region scenario_oracle_region(const ScenarioSpec& spec, const Vector& theta_star) {
    switch (spec.id) {
        case ScenarioId::Scenario1:
        case ScenarioId::MarginSeparation:
            return oracle_region_mean(scenario_conditional_mean(spec), theta_star(0), "m");
        case ScenarioId::Example1:
        case ScenarioId::Example2: {
            RegionComponent g{[](const Matrix& x, const Vector&) { return Vector(x.col(0).array() - 1.0); }, 1,
                              "x - 1"};
            RegionComponent h{[](const Matrix& x, const Vector&) { return Vector(Vector::Ones(x.rows())); }, 1, "1"};
            return Region::sign_product(std::move(g), std::move(h));
        }
        case ScenarioId::Scenario2:
        case ScenarioId::Scenario3: {
            const GlmFamily family = scenario_family(spec.id);
            RowMap mu = [theta_star, family](const Matrix& x) { return glm_means(x, theta_star, family); };
            return oracle_region_glm(scenario_conditional_mean(spec), std::move(mu), "m");
        }
    }
    throw std::invalid_argument("unknown scenario");
}

GeneratedData generate(const ScenarioSpec& spec, Index rep_index) {
    const auto rep = static_cast<std::uint64_t>(rep_index);
    LabeledDataset labeled = draw_labeled(spec, spec.n, rep);
    UnlabeledDataset unlabeled(draw_covariates(spec, spec.N, stream_unlabeled_x, rep));
    const PredictionSource src = scenario_prediction(spec.id, spec.prediction);
    Predictions f = Predictions::evaluate(src, labeled, unlabeled);
    const Vector theta = reference_theta_star(spec);
    Truth truth{theta, scenario_oracle_region(spec, theta)};
    return GeneratedData{std::move(labeled), std::move(unlabeled), std::move(f), std::move(truth)};
}

std::optional<double> EstimatorSummary::metric(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m.value;
    return std::nullopt;
}

const EstimatorSummary& SimulationReport::estimator(const std::string& label) const {
    for (const auto& e : estimators)
        if (e.name == label) return e;
    throw std::out_of_range("no estimator in report: " + label);
}

unsigned default_threads() {
    if (const char* env = std::getenv("FPPI_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

SimulationReport run_monte_carlo(const ScenarioSpec& spec, unsigned threads) {
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    SimulationReport report;
    report.spec = spec;
    report.theta_star = reference_theta_star(spec);
    const std::size_t k = spec.estimators.size();
    std::vector<std::vector<RepOutcome>> outcomes(k, std::vector<RepOutcome>(static_cast<std::size_t>(spec.replications)));
    const bool glm = is_glm_scenario(spec.id);
    const GlmFamily family = scenario_family(spec.id);

    if (k > 0) {
        parallel_for(spec.replications, threads, [&](Index rep) {
            const GeneratedData d = generate(spec, rep);
            std::optional<GlmFit> mle;
            if (glm) {
                try {
                    mle = glm_mle(d.labeled, family);
                } catch (const NonConvergenceError&) {
                    return;  // every estimator of this rep counts as failed
                }
            }
            for (std::size_t e = 0; e < k; ++e) {
                try {
                    outcomes[e][static_cast<std::size_t>(rep)] =
                        glm ? run_glm_estimator(spec, spec.estimators[e], d, *mle, family)
                            : run_mean_estimator(spec, spec.estimators[e], d, rep);
                } catch (const std::exception& ex) {
                    if (!is_estimator_failure(ex)) throw;
                }
            }
        });
    }

    for (std::size_t e = 0; e < k; ++e)
        report.estimators.push_back(summarize(spec.estimators[e].label(), outcomes[e], report.theta_star, true));
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

RecoveryRow recovery_at(const ScenarioSpec& base, Index n, Index probe_rows, unsigned threads) {
    ScenarioSpec spec = base;
    spec.n = n;
    const Vector theta = reference_theta_star(spec);
    const Region oracle = scenario_oracle_region(spec, theta);
    const PredictionSource src = scenario_prediction(spec.id, spec.prediction);
    const bool discrete = spec.id == ScenarioId::Scenario1;
    const bool glm = is_glm_scenario(spec.id);
    const GlmFamily family = scenario_family(spec.id);

    Matrix probe_x;
    Vector probe_f;
    if (!discrete) {
        probe_x = draw_covariates(spec, probe_rows, stream_probe);
        probe_f = src.evaluate(probe_x);
    }
    const std::vector<Vector> cats = scenario1_categories();
    const Vector cat_f = discrete ? src.evaluate(scenario1_category_matrix()) : Vector();

    std::vector<double> values(static_cast<std::size_t>(spec.replications));
    // Offset the replication index so recovery draws never coincide with run_monte_carlo draws.
    const std::uint64_t rep_base = 0x7E000000ULL + static_cast<std::uint64_t>(n) * 0x100000ULL;
    parallel_for(spec.replications, threads, [&](Index rep) {
        const LabeledDataset labeled = draw_labeled(spec, n, rep_base + static_cast<std::uint64_t>(rep));
        double v;
        if (discrete) {
            const Region est = estimate_region_discrete(labeled, cats, cat_f).region;
            v = same_on_categories(est, oracle, spec.prediction) ? 1.0 : 0.0;
        } else {
            const FittedRegressor m_hat = fit_oracle(KnnOracle{std::min(spec.knn_k, n)}, labeled);
            Region est;
            if (glm) {
                const GlmFit mle = glm_mle(labeled, family);
                est = estimate_region_glm(m_hat, mle.theta, family);
            } else {
                est = estimate_region_continuous(labeled, m_hat);
            }
            v = mis_recovery_probability(est, oracle, probe_x, probe_f);
        }
        values[static_cast<std::size_t>(rep)] = v;
    });

    Neumaier sum;
    for (double v : values) sum.add(v);
    const double r = static_cast<double>(values.size());
    const double mean = sum.value() / r;
    Neumaier dev;
    for (double v : values) dev.add((v - mean) * (v - mean));
    RecoveryRow row;
    row.n = n;
    row.value = mean;
    row.std_error = values.size() > 1 ? std::sqrt(dev.value() / (r - 1.0) / r) : 0.0;
    row.exact = discrete;
    return row;
}

std::vector<RecoveryRow> region_recovery_experiment(const ScenarioSpec& spec, const std::vector<Index>& n_grid,
                                                    Index probe_rows, unsigned threads) {
    std::vector<RecoveryRow> rows;
    for (Index n : n_grid) rows.push_back(recovery_at(spec, n, probe_rows, threads));
    return rows;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    throw std::invalid_argument("unknown report format: " + name);
}

std::string report_to_csv(const SimulationReport& report) {
    std::ostringstream out;
    out << "scenario,prediction,estimator,n,N,metric,value\n";
    const auto& s = report.spec;
    for (const auto& e : report.estimators)
        for (const auto& m : e.metrics)
            out << scenario_name(s.id) << ',' << prediction_name(s.prediction) << ',' << e.name << ',' << s.n << ','
                << s.N << ',' << m.name << ',' << format_double(m.value) << '\n';
    return out.str();
}

std::string report_to_json(const SimulationReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = "fppi.report.v1";
    j["spec"] = spec_json(report.spec);
    j["theta_star"] = std::vector<double>(report.theta_star.data(), report.theta_star.data() + report.theta_star.size());
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& e : report.estimators)
        for (const auto& m : e.metrics)
            rows.push_back({{"estimator", e.name},
                            {"n", report.spec.n},
                            {"N", report.spec.N},
                            {"metric", m.name},
                            {"value", m.value}});
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

std::string spec_to_json(const ScenarioSpec& spec) { return spec_json(spec).dump(2); }

void export_report(const SimulationReport& report, ReportFormat format, const std::string& path) {
    write_file(path, format == ReportFormat::Csv ? report_to_csv(report) : report_to_json(report));
}

void write_manifest(const SimulationReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    j["schema"] = "fppi.manifest.v1";
    j["version"] = version_string();
    j["spec"] = spec_json(report.spec);
    j["theta_star"] = std::vector<double>(report.theta_star.data(), report.theta_star.data() + report.theta_star.size());
    j["wall_seconds"] = report.wall_seconds;
    write_file(path, j.dump(2) + "\n");
}

std::string version_string() { return "fppi 0.1.0"; }

std::pair<double, double> paired_difference(const EstimatorSummary& a, const EstimatorSummary& b) {
    const std::size_t r = std::min(a.squared_errors.size(), b.squared_errors.size());
    std::vector<double> d;
    for (std::size_t i = 0; i < r; ++i)
        if (std::isfinite(a.squared_errors[i]) && std::isfinite(b.squared_errors[i]))
            d.push_back(a.squared_errors[i] - b.squared_errors[i]);
    if (d.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    Neumaier s;
    for (double v : d) s.add(v);
    const double k = static_cast<double>(d.size());
    const double mean = s.value() / k;
    Neumaier dev;
    for (double v : d) dev.add((v - mean) * (v - mean));
    const double se = d.size() > 1 ? std::sqrt(dev.value() / (k - 1.0) / k) : 0.0;
    return {mean, se};
}

}  // namespace fppi
