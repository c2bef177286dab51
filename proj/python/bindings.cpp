#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fppi/glm.hpp"
#include "fppi/linalg.hpp"
#include "fppi/region_estimation.hpp"
#include "fppi/mean_estimation.hpp"
#include "fppi/normal.hpp"
#include "fppi/simulation.hpp"

namespace py = pybind11;
using namespace fppi;

namespace {

struct Inputs {
    LabeledDataset labeled;
    UnlabeledDataset unlabeled;
    Predictions f;
};

Inputs make_inputs(const Matrix& xl, const Vector& y, const Vector& fl, const Matrix& xu, const Vector& fu) {
    Inputs in{LabeledDataset(xl, y), UnlabeledDataset(xu), Predictions{fl, fu}};
    in.f.check_aligned(in.labeled, in.unlabeled);
    return in;
}

py::dict mean_result(const MeanFppiResult& r, const IntervalEstimate& ci) {
    py::dict d;
    d["point"] = r.theta_hat;
    d["std_error"] = r.std_error;
    d["ci"] = py::make_tuple(ci.lower, ci.upper);
    d["level"] = ci.level;
    d["lambda_hat"] = r.lambda_hat;
    d["labeled_mean"] = r.labeled_mean;
    d["correction_term"] = r.correction_term;
    d["region"] = r.region.description();
    d["labeled_in_region"] = r.diagnostics.labeled_in_region;
    d["unlabeled_in_region"] = r.diagnostics.unlabeled_in_region;
    d["degenerate"] = r.diagnostics.degenerate;
    d["warnings"] = r.diagnostics.warnings;
    return d;
}

py::dict estimate_mean(const Matrix& xl, const Vector& y, const Vector& fl, const Matrix& xu, const Vector& fu,
                       const std::string& estimator, const std::string& oracle, double level, double split,
                       std::uint64_t seed, std::optional<double> lam) {
    const Inputs in = make_inputs(xl, y, fl, xu, fu);
    const OracleSpec spec = parse_oracle(oracle);
    MeanFppiResult r;
    if (estimator == "classical") {
        r = fppi_mean(in.labeled, in.unlabeled, in.f, Region::empty(), 0.0);
    } else if (estimator == "ppi") {
        r = fppi_mean(in.labeled, in.unlabeled, in.f, Region::all(), lam.value_or(1.0));
    } else if (estimator == "ppi++") {
        r = lam ? fppi_mean(in.labeled, in.unlabeled, in.f, Region::all(), *lam)
                : plugin_fppi_mean(in.labeled, in.unlabeled, in.f, Region::all());
    } else if (estimator == "fppi") {
        r = algorithm1_estimate(in.labeled, in.unlabeled, in.f, spec);
        if (lam) r = fppi_mean(in.labeled, in.unlabeled, in.f, r.region, *lam);
    } else if (estimator == "fppi_split" || estimator == "fppi-split") {
        r = algorithm1_split_estimate(in.labeled, in.unlabeled, in.f, split, spec, seed);
        return mean_result(r, make_interval(r.theta_hat, r.std_error, level, r.lambda_hat, r.region.description()));
    } else {
        throw std::invalid_argument("unknown estimator: " + estimator);
    }
    return mean_result(r, confidence_interval(r, in.labeled, in.unlabeled, in.f, level));
}

py::dict estimate_glm(const Matrix& xl, const Vector& y, const Vector& fl, const Matrix& xu, const Vector& fu,
                      const std::string& family_name, const std::string& estimator, const std::string& oracle,
                      double level, double tol, int max_iter, std::optional<double> lam) {
    const Inputs in = make_inputs(xl, y, fl, xu, fu);
    const GlmFamily family = GlmFamily::from_name(family_name);
    GlmOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    GlmFppiResult r;
    if (estimator == "classical") {
        r = glm_estimate_on_region(in.labeled, in.unlabeled, in.f, Region::empty(), family, opts, 0.0);
    } else if (estimator == "ppi") {
        r = glm_estimate_on_region(in.labeled, in.unlabeled, in.f, Region::all(), family, opts, lam.value_or(1.0));
    } else if (estimator == "ppi++") {
        r = glm_estimate_on_region(in.labeled, in.unlabeled, in.f, Region::all(), family, opts, lam);
    } else if (estimator == "fppi") {
        r = algorithm2_estimate(in.labeled, in.unlabeled, in.f, parse_oracle(oracle), family, opts);
        if (lam) r = glm_estimate_on_region(in.labeled, in.unlabeled, in.f, r.region, family, opts, lam);
    } else {
        throw std::invalid_argument("unknown estimator: " + estimator);
    }
    const Vector se = r.std_errors();
    const double z = z_value(level);
    py::dict d;
    d["theta_hat"] = r.theta_hat;
    d["std_errors"] = se;
    d["lower"] = Vector(r.theta_hat - z * se);
    d["upper"] = Vector(r.theta_hat + z * se);
    d["lambda_hat"] = r.lambda_hat;
    d["covariance"] = r.covariance;
    d["amse"] = r.amse_estimate;
    d["theta_mle"] = r.theta_mle;
    d["iterations"] = r.convergence.iterations;
    d["grad_norm"] = r.convergence.grad_norm;
    d["region"] = r.region.description();
    d["labeled_in_region"] = r.labeled_in_region;
    d["unlabeled_in_region"] = r.unlabeled_in_region;
    d["degenerate"] = r.degenerate;
    d["warnings"] = r.warnings;
    return d;
}

Region simple_region(const std::string& name) {
    if (name == "all") return Region::all();
    if (name == "empty") return Region::empty();
    throw std::invalid_argument("region must be 'all' or 'empty' (got '" + name + "')");
}

ScenarioSpec make_spec(const std::string& scenario, const std::string& prediction, Index n, Index N, Index reps,
                       std::uint64_t seed, const std::vector<std::string>& estimators, std::optional<double> noise_sd,
                       double margin_c, double margin_ell, Index knn_k, double split, double level) {
    ScenarioSpec s;
    s.id = parse_scenario(scenario);
    s.prediction = parse_prediction(prediction);
    s.n = n;
    s.N = N;
    s.replications = reps;
    s.seed = seed;
    for (const auto& e : estimators) s.estimators.push_back(parse_estimator(e));
    if (noise_sd) s.noise_sd = *noise_sd;
    s.margin_c = margin_c;
    s.margin_ell = margin_ell;
    s.knn_k = knn_k;
    s.split_fraction = split;
    s.level = level;
    return s;
}

py::dict simulate(const std::string& scenario, const std::string& prediction, Index n, Index N, Index reps,
                  std::uint64_t seed, const std::vector<std::string>& estimators, unsigned threads,
                  std::optional<double> noise_sd, double margin_c, double margin_ell, Index knn_k, double split,
                  double level) {
    const ScenarioSpec s =
        make_spec(scenario, prediction, n, N, reps, seed, estimators, noise_sd, margin_c, margin_ell, knn_k, split, level);
    s.validate();
    SimulationReport r;
    {
        py::gil_scoped_release release;
        r = run_monte_carlo(s, threads);
    }
    py::dict metrics;
    for (const auto& e : r.estimators) {
        py::dict m;
        for (const auto& x : e.metrics) m[py::str(x.name)] = x.value;
        metrics[py::str(e.name)] = m;
    }
    py::dict d;
    d["theta_star"] = r.theta_star;
    d["estimators"] = metrics;
    d["csv"] = report_to_csv(r);
    d["json"] = report_to_json(r);
    return d;
}

}  // namespace

PYBIND11_MODULE(_fppi, m) {
    m.doc() = "Filtered prediction-powered inference";

    m.def("estimate_mean", &estimate_mean, py::arg("x_labeled"), py::arg("y"), py::arg("f_labeled"),
          py::arg("x_unlabeled"), py::arg("f_unlabeled"), py::arg("estimator") = "fppi", py::arg("oracle") = "knn:15",
          py::arg("level") = 0.95, py::arg("split") = 0.5, py::arg("seed") = 1, py::arg("lam") = py::none());

    m.def("estimate_glm", &estimate_glm, py::arg("x_labeled"), py::arg("y"), py::arg("f_labeled"),
          py::arg("x_unlabeled"), py::arg("f_unlabeled"), py::arg("family") = "gaussian",
          py::arg("estimator") = "fppi", py::arg("oracle") = "knn:15", py::arg("level") = 0.95, py::arg("tol") = 1e-8,
          py::arg("max_iter") = 5000, py::arg("lam") = py::none());

    m.def(
        "glm_objective",
        [](const Vector& theta, const Matrix& xl, const Vector& y, const Vector& fl, const Matrix& xu, const Vector& fu,
           double lam, const std::string& family, const std::string& region) {
            const Inputs in = make_inputs(xl, y, fl, xu, fu);
            return fppi_glm_objective(theta, in.labeled, in.unlabeled, in.f, simple_region(region), lam,
                                      GlmFamily::from_name(family));
        },
        py::arg("theta"), py::arg("x_labeled"), py::arg("y"), py::arg("f_labeled"), py::arg("x_unlabeled"),
        py::arg("f_unlabeled"), py::arg("lam"), py::arg("family") = "gaussian", py::arg("region") = "all");

    m.def(
        "glm_gradient",
        [](const Vector& theta, const Matrix& xl, const Vector& y, const Vector& fl, const Matrix& xu, const Vector& fu,
           double lam, const std::string& family, const std::string& region) {
            const Inputs in = make_inputs(xl, y, fl, xu, fu);
            return fppi_glm_gradient(theta, in.labeled, in.unlabeled, in.f, simple_region(region), lam,
                                     GlmFamily::from_name(family));
        },
        py::arg("theta"), py::arg("x_labeled"), py::arg("y"), py::arg("f_labeled"), py::arg("x_unlabeled"),
        py::arg("f_unlabeled"), py::arg("lam"), py::arg("family") = "gaussian", py::arg("region") = "all");

    m.def("lambda_star_glm", &lambda_star_glm, py::arg("sigma"), py::arg("gamma"), py::arg("m"), py::arg("r"));
    m.def("amse", &amse, py::arg("sigma"), py::arg("omega"), py::arg("m"), py::arg("gamma"), py::arg("lam"),
          py::arg("r"));
    m.def("fppi_mean_variance", &fppi_mean_variance, py::arg("var_y"), py::arg("var_f"), py::arg("cov_yf"),
          py::arg("lam"), py::arg("n"), py::arg("N"));
    m.def("lambda_star_population", &lambda_star_population, py::arg("cov_yf"), py::arg("var_f"), py::arg("n"),
          py::arg("N"));

    m.def("simulate", &simulate, py::arg("scenario"), py::arg("prediction") = "f3", py::arg("n") = 500,
          py::arg("N") = 10000, py::arg("reps") = 1000, py::arg("seed") = 1,
          py::arg("estimators") = std::vector<std::string>{"classical", "ppi++", "fppi"}, py::arg("threads") = 0,
          py::arg("noise_sd") = py::none(), py::arg("margin_c") = 0.5, py::arg("margin_ell") = 1.0,
          py::arg("knn_k") = 15, py::arg("split") = 0.5, py::arg("level") = 0.95);

    m.def(
        "generate",
        [](const std::string& scenario, const std::string& prediction, Index n, Index N, std::uint64_t seed, Index rep,
           std::optional<double> noise_sd) {
            const ScenarioSpec s =
                make_spec(scenario, prediction, n, N, 1, seed, {}, noise_sd, 0.5, 1.0, 15, 0.5, 0.95);
            s.validate();
            const GeneratedData g = generate(s, rep);
            py::dict d;
            d["x_labeled"] = g.labeled.x();
            d["y"] = g.labeled.y();
            d["f_labeled"] = g.f.labeled;
            d["x_unlabeled"] = g.unlabeled.x();
            d["f_unlabeled"] = g.f.unlabeled;
            d["theta_star"] = g.truth.theta_star;
            return d;
        },
        py::arg("scenario"), py::arg("prediction") = "f3", py::arg("n") = 500, py::arg("N") = 10000,
        py::arg("seed") = 1, py::arg("rep") = 0, py::arg("noise_sd") = py::none());

    m.def(
        "region_recovery",
        [](const std::string& scenario, const std::string& prediction, const std::vector<Index>& n_grid, Index reps,
           std::uint64_t seed, Index probe_rows, unsigned threads) {
            ScenarioSpec s = make_spec(scenario, prediction, n_grid.empty() ? 1 : n_grid.front(), 1000, reps, seed, {},
                                       std::nullopt, 0.5, 1.0, 15, 0.5, 0.95);
            std::vector<RecoveryRow> rows;
            {
                py::gil_scoped_release release;
                rows = region_recovery_experiment(s, n_grid, probe_rows, threads);
            }
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["n"] = r.n;
                d["value"] = r.value;
                d["std_error"] = r.std_error;
                d["exact"] = r.exact;
                out.append(d);
            }
            return out;
        },
        py::arg("scenario"), py::arg("prediction") = "f3", py::arg("n_grid") = std::vector<Index>{50, 100, 200, 400},
        py::arg("reps") = 200, py::arg("seed") = 1, py::arg("probe_rows") = 2000, py::arg("threads") = 0);

    m.attr("__version__") = version_string().substr(5);

    py::register_exception<NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);
    py::register_exception<SingularMatrixError>(m, "SingularMatrixError", PyExc_ArithmeticError);
}
