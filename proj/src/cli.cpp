#include "fppi/cli.hpp"

#include "fppi/csv.hpp"
#include "fppi/glm.hpp"
#include "fppi/linalg.hpp"
#include "fppi/mean_estimation.hpp"
#include "fppi/normal.hpp"
#include "fppi/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace fppi {

namespace {

using json = nlohmann::ordered_json;

// Degenerate input: nothing left to estimate from.
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> as_list(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json as_rows(const SquareMatrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

struct InputFlags {
    std::string labeled;
    std::string unlabeled;
    std::string pred_col = "f";
    std::string pred_fn;
};

void add_input_flags(CLI::App* cmd, InputFlags& in) {
    cmd->add_option("--labeled", in.labeled, "labeled CSV (x1..xp, y[, f])")->required();
    cmd->add_option("--unlabeled", in.unlabeled, "unlabeled CSV (x1..xp[, f])")->required();
    cmd->add_option("--pred-col", in.pred_col, "prediction column name");
    cmd->add_option("--pred-fn", in.pred_fn, "built-in prediction function, e.g. scenario1:f3");
}

struct LoadedInputs {
    LabeledDataset labeled;
    UnlabeledDataset unlabeled;
    Predictions f;
    json rows;
};

LoadedInputs load_inputs(const InputFlags& in) {
    const LoadedTable lt = load_table(in.labeled, true, in.pred_col);
    const LoadedTable ut = load_table(in.unlabeled, false, in.pred_col);
    json rows;
    rows["labeled_read"] = lt.rows_read;
    rows["labeled_dropped"] = lt.rows_dropped;
    rows["unlabeled_read"] = ut.rows_read;
    rows["unlabeled_dropped"] = ut.rows_dropped;
    if (lt.x.rows() == 0) throw DegenerateInput("no labeled rows remain after dropping incomplete rows");
    if (ut.x.rows() == 0) throw DegenerateInput("no unlabeled rows remain after dropping incomplete rows");
    if (lt.x_names != ut.x_names) throw CsvError("labeled and unlabeled covariate columns differ");
    rows["labeled_used"] = lt.x.rows();
    rows["unlabeled_used"] = ut.x.rows();

    LabeledDataset labeled(lt.x, *lt.y);
    UnlabeledDataset unlabeled(ut.x);
    Predictions f;
    if (!in.pred_fn.empty()) {
        const auto colon = in.pred_fn.find(':');
        const ScenarioId id = parse_scenario(in.pred_fn.substr(0, colon));
        const std::string p = colon == std::string::npos ? "f1" : in.pred_fn.substr(colon + 1);
        const PredictionId pred = (p == "f") ? PredictionId::F1 : parse_prediction(p);
        f = Predictions::evaluate(scenario_prediction(id, pred), labeled, unlabeled);
    } else {
        if (!lt.f || !ut.f)
            throw CsvError("prediction column '" + in.pred_col + "' missing; supply it or use --pred-fn");
        f = Predictions{*lt.f, *ut.f};
    }
    return LoadedInputs{std::move(labeled), std::move(unlabeled), std::move(f), std::move(rows)};
}

struct MeanFlags {
    InputFlags in;
    std::string estimator = "fppi";
    std::string oracle = "knn:15";
    double level = 0.95;
    double split = 0.5;
    std::uint64_t seed = 1;
    std::optional<double> lambda;
};

int cmd_estimate_mean(const MeanFlags& fl, std::ostream& out) {
    const OracleSpec oracle = parse_oracle(fl.oracle);
    if (!(fl.level > 0 && fl.level < 1)) throw std::invalid_argument("--level must lie in (0, 1)");
    LoadedInputs d = load_inputs(fl.in);
    const auto& L = d.labeled;
    const auto& U = d.unlabeled;
    const auto& f = d.f;

    MeanFppiResult r;
    std::optional<IntervalEstimate> ci;
    const std::string& e = fl.estimator;
    if (e == "classical") {
        r = fppi_mean(L, U, f, Region::empty(), 0.0);
    } else if (e == "ppi") {
        r = fppi_mean(L, U, f, Region::all(), fl.lambda.value_or(1.0));
    } else if (e == "ppi++") {
        r = fl.lambda ? fppi_mean(L, U, f, Region::all(), *fl.lambda) : plugin_fppi_mean(L, U, f, Region::all());
    } else if (e == "fppi") {
        r = algorithm1_estimate(L, U, f, oracle);
        if (fl.lambda) r = fppi_mean(L, U, f, r.region, *fl.lambda);
    } else if (e == "fppi-split" || e == "fppi_split") {
        if (!(fl.split > 0 && fl.split < 1)) throw std::invalid_argument("--split must lie in (0, 1)");
        r = algorithm1_split_estimate(L, U, f, fl.split, oracle, fl.seed);
        ci = make_interval(r.theta_hat, r.std_error, fl.level, r.lambda_hat, r.region.description());
    } else {
        throw std::invalid_argument("unknown estimator: " + e);
    }
    if (!ci) ci = confidence_interval(r, L, U, f, fl.level);

    json j;
    j["schema"] = "fppi.estimate_mean.v1";
    j["estimator"] = e;
    j["point"] = r.theta_hat;
    j["std_error"] = r.std_error;
    j["ci"] = {{"level", fl.level}, {"lower", ci->lower}, {"upper", ci->upper}};
    j["lambda_hat"] = r.lambda_hat;
    j["labeled_mean"] = r.labeled_mean;
    j["correction_term"] = r.correction_term;
    j["region"] = {{"description", r.region.description()},
                   {"labeled_in_region", r.diagnostics.labeled_in_region},
                   {"unlabeled_in_region", r.diagnostics.unlabeled_in_region},
                   {"degenerate", r.diagnostics.degenerate},
                   {"variance_clamped", r.diagnostics.variance_clamped}};
    d.rows["n_used"] = r.diagnostics.n_used;
    d.rows["n_region_fit"] = r.diagnostics.n_region_fit;
    j["rows"] = d.rows;
    j["warnings"] = r.diagnostics.warnings;
    out << j.dump(2) << '\n';
    return exit_ok;
}

struct GlmFlags {
    InputFlags in;
    std::string estimator = "fppi";
    std::string oracle = "knn:15";
    std::string family = "gaussian";
    double level = 0.95;
    double tol = 1e-8;
    int max_iter = 5000;
    std::optional<double> lambda;
};

int cmd_estimate_glm(const GlmFlags& fl, std::ostream& out) {
    const OracleSpec oracle = parse_oracle(fl.oracle);
    if (std::holds_alternative<DiscreteOracle>(oracle))
        throw std::invalid_argument("estimate-glm needs a continuous oracle (knn:K or ols)");
    const GlmFamily family = GlmFamily::from_name(fl.family);
    if (!(fl.level > 0 && fl.level < 1)) throw std::invalid_argument("--level must lie in (0, 1)");
    if (!(fl.tol > 0) || fl.max_iter < 1) throw std::invalid_argument("--tol and --max-iter must be positive");
    GlmOptions opts;
    opts.tol = fl.tol;
    opts.max_iter = fl.max_iter;
    LoadedInputs d = load_inputs(fl.in);
    const auto& L = d.labeled;
    const auto& U = d.unlabeled;
    const auto& f = d.f;

    GlmFppiResult r;
    const std::string& e = fl.estimator;
    if (e == "classical") {
        r = glm_estimate_on_region(L, U, f, Region::empty(), family, opts, 0.0);
    } else if (e == "ppi") {
        r = glm_estimate_on_region(L, U, f, Region::all(), family, opts, fl.lambda.value_or(1.0));
    } else if (e == "ppi++") {
        r = glm_estimate_on_region(L, U, f, Region::all(), family, opts, fl.lambda);
    } else if (e == "fppi") {
        if (fl.lambda) {
            const GlmFit mle = glm_mle(L, family, opts);
            const Region region = estimate_region_glm(fit_oracle(oracle, L), mle.theta, family);
            r = glm_estimate_on_region(L, U, f, region, family, opts, fl.lambda, mle);
        } else {
            r = algorithm2_estimate(L, U, f, oracle, family, opts);
        }
    } else {
        throw std::invalid_argument("unknown estimator: " + e);
    }

    const Vector se = r.std_errors();
    const double z = z_value(fl.level);
    json intervals = json::array();
    for (Index k = 0; k < se.size(); ++k)
        intervals.push_back({{"lower", r.theta_hat(k) - z * se(k)}, {"upper", r.theta_hat(k) + z * se(k)}});

    json j;
    j["schema"] = "fppi.estimate_glm.v1";
    j["estimator"] = e;
    j["family"] = fl.family;
    j["theta_hat"] = as_list(r.theta_hat);
    j["std_errors"] = as_list(se);
    j["level"] = fl.level;
    j["intervals"] = intervals;
    j["lambda_hat"] = r.lambda_hat;
    j["covariance"] = as_rows(r.covariance);
    j["amse"] = r.amse_estimate;
    j["theta_mle"] = as_list(r.theta_mle);
    j["convergence"] = {{"iterations", r.convergence.iterations},
                        {"grad_norm", r.convergence.grad_norm},
                        {"converged", r.convergence.converged}};
    j["region"] = {{"description", r.region.description()},
                   {"labeled_in_region", r.labeled_in_region},
                   {"unlabeled_in_region", r.unlabeled_in_region},
                   {"degenerate", r.degenerate}};
    j["rows"] = d.rows;
    j["warnings"] = r.warnings;
    out << j.dump(2) << '\n';
    return exit_ok;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct ScenarioFlags {
    std::string scenario;
    std::string pred = "f3";
    Index n = 500;
    Index N = 10000;
    std::uint64_t seed = 1;
    std::optional<double> noise_sd;
    double margin_c = 0.5;
    double margin_ell = 1.0;
    Index knn_k = 15;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& s) {
    cmd->add_option("--scenario", s.scenario, "example1|example2|scenario1|scenario2|scenario3|margin_separation")
        ->required();
    cmd->add_option("--pred", s.pred, "f1|f2|f3");
    cmd->add_option("--n", s.n, "labeled rows");
    cmd->add_option("--N", s.N, "unlabeled rows");
    cmd->add_option("--seed", s.seed, "64-bit seed");
    cmd->add_option("--noise-sd", s.noise_sd, "response noise sd (scenario default when omitted)");
    cmd->add_option("--margin-c", s.margin_c, "margin_separation gap half-width");
    cmd->add_option("--margin-ell", s.margin_ell, "margin_separation density exponent");
    cmd->add_option("--knn-k", s.knn_k, "neighbors for the kNN oracle");
}

ScenarioSpec to_spec(const ScenarioFlags& s) {
    ScenarioSpec spec;
    spec.id = parse_scenario(s.scenario);
    spec.prediction = parse_prediction(s.pred);
    spec.n = s.n;
    spec.N = s.N;
    spec.seed = s.seed;
    if (s.noise_sd) spec.noise_sd = *s.noise_sd;
    spec.margin_c = s.margin_c;
    spec.margin_ell = s.margin_ell;
    spec.knn_k = s.knn_k;
    return spec;
}

struct SimulateFlags {
    ScenarioFlags s;
    Index reps = 1000;
    std::string out;
    std::string format;
    std::string estimators;
    std::string manifest;
    unsigned threads = 0;
    double level = 0.95;
    double split = 0.5;
};

int cmd_simulate(const SimulateFlags& fl, std::ostream& out) {
    ScenarioSpec spec = to_spec(fl.s);
    spec.replications = fl.reps;
    spec.level = fl.level;
    spec.split_fraction = fl.split;
    std::string est = fl.estimators;
    if (est.empty()) est = is_glm_scenario(spec.id) ? "classical,ppi,ppi++,fppi" : "classical,ppi,ppi++,fppi,fppi_split";
    for (const auto& e : split_list(est)) spec.estimators.push_back(parse_estimator(e));
    std::string format = fl.format;
    if (format.empty()) format = (fl.out.size() >= 5 && fl.out.substr(fl.out.size() - 5) == ".json") ? "json" : "csv";
    const ReportFormat rf = parse_report_format(format);
    spec.validate();

    const SimulationReport report = run_monte_carlo(spec, fl.threads);
    export_report(report, rf, fl.out);
    if (!fl.manifest.empty()) write_manifest(report, fl.manifest);
    for (const auto& e : report.estimators) {
        out << e.name;
        for (const char* m : {"mse", "mse_se", "variance", "coverage", "mean_lambda"})
            if (auto v = e.metric(m)) out << ' ' << m << '=' << *v;
        out << " failures=" << e.failures << '\n';
    }
    return exit_ok;
}

struct GenerateFlags {
    ScenarioFlags s;
    Index rep = 0;
    std::string labeled_out;
    std::string unlabeled_out;
    bool no_f = false;
};

int cmd_generate(const GenerateFlags& fl, std::ostream& out) {
    ScenarioSpec spec = to_spec(fl.s);
    spec.replications = 1;
    spec.validate();
    if (fl.rep < 0) throw std::invalid_argument("--rep must be non-negative");
    const GeneratedData d = generate(spec, fl.rep);
    write_table_csv(fl.labeled_out, d.labeled.x(), &d.labeled.y(), fl.no_f ? nullptr : &d.f.labeled);
    write_table_csv(fl.unlabeled_out, d.unlabeled.x(), nullptr, fl.no_f ? nullptr : &d.f.unlabeled);
    json j;
    j["schema"] = "fppi.generate.v1";
    j["spec"] = json::parse(spec_to_json(spec));
    j["rep"] = fl.rep;
    j["theta_star"] = as_list(d.truth.theta_star);
    j["labeled"] = fl.labeled_out;
    j["unlabeled"] = fl.unlabeled_out;
    out << j.dump(2) << '\n';
    return exit_ok;
}

struct RecoveryFlags {
    ScenarioFlags s;
    Index reps = 1000;
    std::string n_grid = "50,100,200,400,800";
    Index probe_rows = 2000;
    unsigned threads = 0;
};

int cmd_recovery(const RecoveryFlags& fl, std::ostream& out) {
    ScenarioSpec spec = to_spec(fl.s);
    spec.replications = fl.reps;
    spec.validate();
    std::vector<Index> grid;
    for (const auto& s : split_list(fl.n_grid)) {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size() || v < 2) throw std::invalid_argument("bad --n-grid entry: " + s);
        grid.push_back(static_cast<Index>(v));
    }
    if (fl.probe_rows < 1) throw std::invalid_argument("--probe-rows must be positive");
    const auto rows = region_recovery_experiment(spec, grid, fl.probe_rows, fl.threads);
    json j;
    j["schema"] = "fppi.recovery.v1";
    j["spec"] = json::parse(spec_to_json(spec));
    j["rows"] = json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"n", r.n},
                             {r.exact ? "exact_recovery_rate" : "mis_recovery_probability", r.value},
                             {"std_error", r.std_error}});
    out << j.dump(2) << '\n';
    return exit_ok;
}

void print_error(std::ostream& out, std::ostream& err, const std::string& kind, const std::string& message) {
    err << "fppi: " << message << '\n';
    json j;
    j["schema"] = "fppi.error.v1";
    j["error"] = kind;
    j["message"] = message;
    out << j.dump(2) << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("fppi");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Filtered prediction-powered inference", "fppi"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());

    MeanFlags mean;
    auto* c_mean = app.add_subcommand("estimate-mean", "Mean of Y from labeled + unlabeled CSV files");
    add_input_flags(c_mean, mean.in);
    c_mean->add_option("--estimator", mean.estimator, "classical|ppi|ppi++|fppi|fppi-split");
    c_mean->add_option("--oracle", mean.oracle, "knn:K|discrete|ols");
    c_mean->add_option("--level", mean.level, "interval level");
    c_mean->add_option("--split", mean.split, "fraction of labeled rows fitting the region (fppi-split)");
    c_mean->add_option("--seed", mean.seed, "split seed");
    c_mean->add_option("--lambda", mean.lambda, "fixed weight instead of the plug-in");

    GlmFlags glm;
    auto* c_glm = app.add_subcommand("estimate-glm", "GLM coefficients from labeled + unlabeled CSV files");
    add_input_flags(c_glm, glm.in);
    c_glm->add_option("--estimator", glm.estimator, "classical|ppi|ppi++|fppi");
    c_glm->add_option("--oracle", glm.oracle, "knn:K|ols");
    c_glm->add_option("--family", glm.family, "gaussian|bernoulli|poisson");
    c_glm->add_option("--level", glm.level, "interval level");
    c_glm->add_option("--tol", glm.tol, "gradient infinity-norm tolerance");
    c_glm->add_option("--max-iter", glm.max_iter, "gradient descent iteration cap");
    c_glm->add_option("--lambda", glm.lambda, "fixed weight instead of the plug-in");

    SimulateFlags sim;
    auto* c_sim = app.add_subcommand("simulate", "Monte Carlo study of a built-in scenario");
    add_scenario_flags(c_sim, sim.s);
    c_sim->add_option("--reps", sim.reps, "replications");
    c_sim->add_option("--out", sim.out, "report path")->required();
    c_sim->add_option("--format", sim.format, "csv|json (default from the extension)");
    c_sim->add_option("--estimators", sim.estimators, "comma list; kind@lambda fixes the weight");
    c_sim->add_option("--manifest", sim.manifest, "manifest JSON path");
    c_sim->add_option("--threads", sim.threads, "worker threads (default FPPI_THREADS or all cores)");
    c_sim->add_option("--level", sim.level, "interval level for coverage");
    c_sim->add_option("--split", sim.split, "split fraction for fppi_split");

    GenerateFlags gen;
    auto* c_gen = app.add_subcommand("generate", "Write one replication of a scenario as CSV files");
    add_scenario_flags(c_gen, gen.s);
    c_gen->add_option("--rep", gen.rep, "replication index");
    c_gen->add_option("--labeled-out", gen.labeled_out, "labeled CSV path")->required();
    c_gen->add_option("--unlabeled-out", gen.unlabeled_out, "unlabeled CSV path")->required();
    c_gen->add_flag("--no-f", gen.no_f, "omit the prediction column");

    RecoveryFlags rec;
    auto* c_rec = app.add_subcommand("recovery", "Region recovery against the population region over n");
    add_scenario_flags(c_rec, rec.s);
    c_rec->add_option("--reps", rec.reps, "replications per n");
    c_rec->add_option("--n-grid", rec.n_grid, "comma list of labeled sizes");
    c_rec->add_option("--probe-rows", rec.probe_rows, "probe rows for continuous scenarios");
    c_rec->add_option("--threads", rec.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_bad_input;
    }

    try {
        if (c_mean->parsed()) return cmd_estimate_mean(mean, out);
        if (c_glm->parsed()) return cmd_estimate_glm(glm, out);
        if (c_sim->parsed()) return cmd_simulate(sim, out);
        if (c_gen->parsed()) return cmd_generate(gen, out);
        if (c_rec->parsed()) return cmd_recovery(rec, out);
    } catch (const NonConvergenceError& e) {
        err << "fppi: " << e.what() << '\n';
        json j;
        j["schema"] = "fppi.error.v1";
        j["error"] = "non_convergence";
        j["message"] = e.what();
        j["last_iterate"] = as_list(e.last_iterate());
        j["iterations"] = e.convergence().iterations;
        j["grad_norm"] = e.convergence().grad_norm;
        out << j.dump(2) << '\n';
        return exit_nonconvergence;
    } catch (const DegenerateInput& e) {
        print_error(out, err, "degenerate_input", e.what());
        return exit_degenerate;
    } catch (const SingularMatrixError& e) {
        print_error(out, err, "singular_matrix", e.what());
        return exit_degenerate;
    } catch (const std::invalid_argument& e) {
        print_error(out, err, "bad_input", e.what());
        return exit_bad_input;
    } catch (const std::exception& e) {
        print_error(out, err, "internal", e.what());
        return exit_internal;
    }
    return exit_internal;
}

}  // namespace fppi
