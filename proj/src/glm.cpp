#include "fppi/glm.hpp"

#include "fppi/linalg.hpp"

#include <cmath>
#include <cstdio>

namespace fppi {

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

void check_theta(const Vector& theta, Index p) {
    if (theta.size() != p)
        throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, covariates have " +
                             std::to_string(p) + " columns");
}

// Gradient descent with Armijo backtracking. When the objective decrease drops
// into rounding noise, a step is also accepted under the approximate Wolfe
// conditions (objective within noise, directional derivative not overshot).
template <class ValueGrad>
Vector minimize(const ValueGrad& value_grad, Vector theta, const GlmOptions& opts, Convergence& conv) {
    const Index p = theta.size();
    Vector grad(p);
    double value = value_grad(theta, grad);
    Vector trial(p);
    Vector trial_grad(p);
    conv = Convergence{};
    for (int it = 0;; ++it) {
        conv.iterations = it;
        conv.grad_norm = max_abs(grad);
        if (!std::isfinite(value) || !grad.allFinite()) break;
        if (conv.grad_norm < opts.tol) {
            conv.converged = true;
            break;
        }
        if (it >= opts.max_iter) break;
        const double slope = grad.squaredNorm();
        const double noise = 1e-12 * (1.0 + std::abs(value));
        bool accepted = false;
        double step = opts.initial_step;
        for (int bt = 0; bt < 200; ++bt) {
            trial = theta - step * grad;
            const double v = value_grad(trial, trial_grad);
            if (std::isfinite(v)) {
                const bool armijo = v <= value - opts.armijo * step * slope;
                const bool approx_wolfe =
                    v <= value + noise && -trial_grad.dot(grad) <= (1.0 - 2.0 * opts.armijo) * slope;
                if (armijo || approx_wolfe) {
                    theta.swap(trial);
                    grad.swap(trial_grad);
                    value = v;
                    accepted = true;
                    break;
                }
            }
            step *= opts.shrink;
        }
        if (!accepted) break;
    }
    return theta;
}

}  // namespace

double glm_objective(const Vector& theta, const LabeledDataset& labeled, const GlmFamily& family) {
    check_theta(theta, labeled.cols());
    const Vector eta = labeled.x() * theta;
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += family.eval(eta(i)).a - labeled.y()(i) * eta(i);
    return s / static_cast<double>(labeled.rows());
}

namespace {

GlmFit gd_fit(const Matrix& x, const Vector& r, const GlmFamily& family, const GlmOptions& opts) {
    if (x.rows() != r.size()) throw DimensionError("GLM fit: response length differs from covariate rows");
    if (x.rows() < 1) throw DataError("GLM fit needs data");
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    auto value_grad = [&](const Vector& theta, Vector& grad) {
        const Vector eta = x * theta;
        Vector resid(eta.size());
        double s = 0.0;
        for (Index i = 0; i < eta.size(); ++i) {
            const FamilyValues fv = family.eval(eta(i));
            s += fv.a - r(i) * eta(i);
            resid(i) = fv.a1 - r(i);
        }
        grad.noalias() = inv_n * (x.transpose() * resid);
        return s * inv_n;
    };
    GlmFit fit;
    fit.theta = minimize(value_grad, Vector::Zero(x.cols()), opts, fit.convergence);
    if (!fit.convergence.converged)
        throw NonConvergenceError("GLM MLE did not converge (gradient norm " +
                                      sci(fit.convergence.grad_norm) + " after " +
                                      std::to_string(fit.convergence.iterations) + " iterations)",
                                  fit.theta, fit.convergence);
    return fit;
}

}  // namespace

GlmFit glm_fit_mean_response(const Matrix& x, const Vector& r, const GlmFamily& family, const GlmOptions& opts) {
    if (x.rows() != r.size()) throw DimensionError("GLM fit: response length differs from covariate rows");
    if (x.rows() < 1) throw DataError("GLM fit needs data");
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    const Index p = x.cols();
    auto objective = [&](const Vector& theta) {
        const Vector eta = x * theta;
        double s = 0.0;
        for (Index i = 0; i < eta.size(); ++i) s += family.eval(eta(i)).a - r(i) * eta(i);
        return s * inv_n;
    };
    // damped Newton
    GlmFit fit;
    Vector theta = Vector::Zero(p);
    double value = objective(theta);
    for (int it = 0;; ++it) {
        const Vector eta = x * theta;
        Vector resid(eta.size()), w(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            const FamilyValues fv = family.eval(eta(i));
            resid(i) = fv.a1 - r(i);
            w(i) = fv.a2;
        }
        const Vector grad = inv_n * (x.transpose() * resid);
        fit.convergence.iterations = it;
        fit.convergence.grad_norm = max_abs(grad);
        if (fit.convergence.grad_norm < opts.tol) {
            fit.convergence.converged = true;
            break;
        }
        if (it >= opts.max_iter) break;
        const SquareMatrix hess = inv_n * (x.transpose() * w.asDiagonal() * x);
        const Vector dir = SpdFactor(hess).solve(grad);
        double t = 1.0;
        Vector trial = theta - dir;
        double v = objective(trial);
        while (!(v <= value + 1e-12 * (1.0 + std::abs(value))) && t > 1e-10) {
            t *= 0.5;
            trial = theta - t * dir;
            v = objective(trial);
        }
        if (t <= 1e-10) break;
        theta = trial;
        value = v;
    }
    fit.theta = theta;
    if (!fit.convergence.converged)
        throw NonConvergenceError("GLM fit did not converge (gradient norm " +
                                      sci(fit.convergence.grad_norm) + " after " +
                                      std::to_string(fit.convergence.iterations) + " iterations)",
                                  fit.theta, fit.convergence);
    return fit;
}

GlmFit glm_mle(const LabeledDataset& labeled, const GlmFamily& family, const GlmOptions& opts) {
    for (Index i = 0; i < labeled.rows(); ++i) family.check_response(labeled.y()(i));
    return gd_fit(labeled.x(), labeled.y(), family, opts);
}

FppiGlmObjective::FppiGlmObjective(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                   const Predictions& f, const Region& region, double lambda,
                                   const GlmFamily& family)
    : FppiGlmObjective(labeled, unlabeled, f, region_masks(region, labeled, unlabeled, f), lambda, family) {}

FppiGlmObjective::FppiGlmObjective(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                   const Predictions& f, RegionMasks masks, double lambda, const GlmFamily& family)
    : labeled_(labeled),
      unlabeled_(unlabeled),
      f_(f),
      mask_labeled_(std::move(masks.labeled)),
      mask_unlabeled_(std::move(masks.unlabeled)),
      lambda_(lambda),
      family_(family) {
    f.check_aligned(labeled, unlabeled);
    if (static_cast<Index>(mask_labeled_.size()) != labeled.rows() ||
        static_cast<Index>(mask_unlabeled_.size()) != unlabeled.rows())
        throw DimensionError("region masks do not match the samples");
}

double FppiGlmObjective::value_and_gradient(const Vector& theta, Vector& grad) const {
    check_theta(theta, labeled_.cols());
    const double inv_n = 1.0 / static_cast<double>(labeled_.rows());
    const double inv_N = 1.0 / static_cast<double>(unlabeled_.rows());

    const Vector eta_l = labeled_.x() * theta;
    Vector coef_l(eta_l.size());
    double value_l = 0.0;
    for (Index i = 0; i < eta_l.size(); ++i) {
        const FamilyValues fv = family_.eval(eta_l(i));
        const double y = labeled_.y()(i);
        double term = fv.a - eta_l(i) * y;
        double c = fv.a1 - y;
        if (mask_labeled_[static_cast<std::size_t>(i)]) {
            const double fi = f_.labeled(i);
            term -= lambda_ * (fv.a - eta_l(i) * fi);
            c -= lambda_ * (fv.a1 - fi);
        }
        value_l += term;
        coef_l(i) = c;
    }

    const Vector eta_u = unlabeled_.x() * theta;
    Vector coef_u(eta_u.size());
    double value_u = 0.0;
    for (Index j = 0; j < eta_u.size(); ++j) {
        if (!mask_unlabeled_[static_cast<std::size_t>(j)]) {
            coef_u(j) = 0.0;
            continue;
        }
        const FamilyValues fv = family_.eval(eta_u(j));
        const double fj = f_.unlabeled(j);
        value_u += fv.a - eta_u(j) * fj;
        coef_u(j) = fv.a1 - fj;
    }

    grad.noalias() = inv_n * (labeled_.x().transpose() * coef_l);
    grad.noalias() += (lambda_ * inv_N) * (unlabeled_.x().transpose() * coef_u);
    return value_l * inv_n + lambda_ * inv_N * value_u;
}

double FppiGlmObjective::value(const Vector& theta) const {
    Vector g(theta.size());
    return value_and_gradient(theta, g);
}

Vector FppiGlmObjective::gradient(const Vector& theta) const {
    Vector g(theta.size());
    value_and_gradient(theta, g);
    return g;
}

double fppi_glm_objective(const Vector& theta, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                          const Predictions& f, const Region& region, double lambda, const GlmFamily& family) {
    return FppiGlmObjective(labeled, unlabeled, f, region, lambda, family).value(theta);
}

Vector fppi_glm_gradient(const Vector& theta, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                         const Predictions& f, const Region& region, double lambda, const GlmFamily& family) {
    return FppiGlmObjective(labeled, unlabeled, f, region, lambda, family).gradient(theta);
}

PluginMatrices estimate_plugin_matrices(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const Region& region, const Vector& theta_mle,
                                        const GlmFamily& family) {
    return estimate_plugin_matrices(labeled, unlabeled, f, region_masks(region, labeled, unlabeled, f), theta_mle,
                                    family);
}

PluginMatrices estimate_plugin_matrices(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const RegionMasks& masks, const Vector& theta_mle,
                                        const GlmFamily& family) {
    f.check_aligned(labeled, unlabeled);
    check_theta(theta_mle, labeled.cols());
    const BoolVector& in_l = masks.labeled;
    const BoolVector& in_u = masks.unlabeled;
    if (static_cast<Index>(in_l.size()) != labeled.rows() || static_cast<Index>(in_u.size()) != unlabeled.rows())
        throw DimensionError("region masks do not match the samples");

    const Vector eta_u = unlabeled.x() * theta_mle;
    Vector w_sigma(eta_u.size());
    Vector w_m(eta_u.size());
    for (Index j = 0; j < eta_u.size(); ++j) {
        const FamilyValues fv = family.eval(eta_u(j));
        w_sigma(j) = fv.a2;
        const double d = f.unlabeled(j) - fv.a1;
        w_m(j) = in_u[static_cast<std::size_t>(j)] ? d * d : 0.0;
    }
    const Vector eta_l = labeled.x() * theta_mle;
    Vector w_gamma(eta_l.size());
    for (Index i = 0; i < eta_l.size(); ++i) {
        const double mu = family.eval(eta_l(i)).a1;
        w_gamma(i) = in_l[static_cast<std::size_t>(i)] ? (labeled.y()(i) - mu) * (f.labeled(i) - mu) : 0.0;
    }

    const double inv_N = 1.0 / static_cast<double>(unlabeled.rows());
    const double inv_n = 1.0 / static_cast<double>(labeled.rows());
    PluginMatrices out;
    out.sigma = inv_N * (unlabeled.x().transpose() * w_sigma.asDiagonal() * unlabeled.x());
    out.m = inv_N * (unlabeled.x().transpose() * w_m.asDiagonal() * unlabeled.x());
    out.gamma = inv_n * (labeled.x().transpose() * w_gamma.asDiagonal() * labeled.x());
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
    out.m = 0.5 * (out.m + out.m.transpose());
    out.gamma = 0.5 * (out.gamma + out.gamma.transpose());
    return out;
}

SquareMatrix estimate_omega(const LabeledDataset& labeled, const Vector& theta, const GlmFamily& family) {
    check_theta(theta, labeled.cols());
    const Vector eta = labeled.x() * theta;
    Vector w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        const double r = labeled.y()(i) - family.eval(eta(i)).a1;
        w(i) = r * r;
    }
    SquareMatrix omega = (labeled.x().transpose() * w.asDiagonal() * labeled.x()) / static_cast<double>(labeled.rows());
    return 0.5 * (omega + omega.transpose());
}

namespace {

// tr(S^-1 A S^-1) = tr(S^-2 A) for symmetric S.
double sandwich_trace(const SquareMatrix& sigma_inv, const SquareMatrix& a) {
    return (sigma_inv * a * sigma_inv).trace();
}

void check_square(const SquareMatrix& a, Index p, const char* name) {
    if (a.rows() != p || a.cols() != p) throw DimensionError(std::string(name) + " has the wrong shape");
}

}  // namespace

std::optional<double> lambda_star_glm(const SquareMatrix& sigma, const SquareMatrix& gamma,
                                      const SquareMatrix& m_matrix, double r) {
    check_square(gamma, sigma.rows(), "gamma");
    check_square(m_matrix, sigma.rows(), "M");
    if (!(r >= 0.0)) throw std::invalid_argument("r must be non-negative");
    const SquareMatrix sigma_inv = SpdFactor(sigma).inverse();
    const double denom = sandwich_trace(sigma_inv, m_matrix);
    if (!(denom != 0.0) || !std::isfinite(denom)) return std::nullopt;
    return sandwich_trace(sigma_inv, gamma) / ((1.0 + r) * denom);
}

SquareMatrix asymptotic_covariance(const SquareMatrix& sigma, const SquareMatrix& omega, const SquareMatrix& m_matrix,
                                   const SquareMatrix& gamma, double lambda, double r) {
    const Index p = sigma.rows();
    check_square(omega, p, "omega");
    check_square(m_matrix, p, "M");
    check_square(gamma, p, "gamma");
    const SquareMatrix sigma_inv = SpdFactor(sigma).inverse();
    const SquareMatrix middle = omega + lambda * lambda * (1.0 + r) * m_matrix - 2.0 * lambda * gamma;
    SquareMatrix cov = sigma_inv * middle * sigma_inv;
    return 0.5 * (cov + cov.transpose());
}

double amse(const SquareMatrix& sigma, const SquareMatrix& omega, const SquareMatrix& m_matrix,
            const SquareMatrix& gamma, double lambda, double r) {
    return asymptotic_covariance(sigma, omega, m_matrix, gamma, lambda, r).trace();
}

Vector GlmFppiResult::std_errors() const {
    Vector se(covariance.rows());
    for (Index i = 0; i < se.size(); ++i)
        se(i) = std::sqrt(std::max(covariance(i, i), 0.0) / static_cast<double>(std::max<Index>(n, 1)));
    return se;
}

namespace {

GlmFppiResult estimate_with_masks(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Predictions& f, const Region& region, RegionMasks masks, double lambda,
                                  const GlmFamily& family, const GlmOptions& opts, std::optional<Vector> start) {
    const FppiGlmObjective objective(labeled, unlabeled, f, std::move(masks), lambda, family);
    Vector theta0 = start ? *start : Vector::Zero(labeled.cols());
    check_theta(theta0, labeled.cols());
    GlmFppiResult r;
    r.lambda_hat = lambda;
    r.region = region;
    r.n = labeled.rows();
    r.labeled_in_region = count(objective.labeled_mask());
    r.unlabeled_in_region = count(objective.unlabeled_mask());
    r.theta_hat = minimize([&](const Vector& t, Vector& g) { return objective.value_and_gradient(t, g); },
                           std::move(theta0), opts, r.convergence);
    if (!r.convergence.converged)
        throw NonConvergenceError("FPPI GLM estimate did not converge (gradient norm " +
                                      sci(r.convergence.grad_norm) + " after " +
                                      std::to_string(r.convergence.iterations) + " iterations)",
                                  r.theta_hat, r.convergence);
    return r;
}

}  // namespace

GlmFppiResult fppi_glm_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                const Predictions& f, const Region& region, double lambda, const GlmFamily& family,
                                const GlmOptions& opts, std::optional<Vector> start) {
    return estimate_with_masks(labeled, unlabeled, f, region, region_masks(region, labeled, unlabeled, f), lambda,
                               family, opts, std::move(start));
}

GlmFppiResult glm_estimate_on_region(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                     const Predictions& f, const Region& region, const GlmFamily& family,
                                     const GlmOptions& opts, std::optional<double> fixed_lambda,
                                     std::optional<GlmFit> mle) {
    f.check_aligned(labeled, unlabeled);
    const GlmFit base = mle ? *mle : glm_mle(labeled, family, opts);
    RegionMasks masks = region_masks(region, labeled, unlabeled, f);
    const PluginMatrices pm = estimate_plugin_matrices(labeled, unlabeled, f, masks, base.theta, family);
    const SquareMatrix omega = estimate_omega(labeled, base.theta, family);
    const double r = static_cast<double>(labeled.rows()) / static_cast<double>(unlabeled.rows());

    double lambda = 0.0;
    bool degenerate = false;
    if (fixed_lambda) {
        lambda = *fixed_lambda;
    } else if (auto l = lambda_star_glm(pm.sigma, pm.gamma, pm.m, r)) {
        lambda = *l;
    } else {
        degenerate = true;
    }

    GlmFppiResult out =
        estimate_with_masks(labeled, unlabeled, f, region, std::move(masks), lambda, family, opts, base.theta);
    out.theta_mle = base.theta;
    out.sigma_hat = pm.sigma;
    out.m_hat_matrix = pm.m;
    out.gamma_hat = pm.gamma;
    out.omega_hat = omega;
    out.degenerate = degenerate;
    if (degenerate)
        out.warnings.push_back("degenerate region (" + region.description() +
                               "): no prediction signal there; weight set to 0, MLE returned");
    out.covariance = asymptotic_covariance(pm.sigma, omega, pm.m, pm.gamma, lambda, r);
    out.amse_estimate = out.covariance.trace();
    return out;
}

GlmFppiResult algorithm2_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Predictions& f, const OracleSpec& oracle, const GlmFamily& family,
                                  const GlmOptions& opts) {
    f.check_aligned(labeled, unlabeled);
    const GlmFit mle = glm_mle(labeled, family, opts);
    const FittedRegressor m_hat = fit_oracle(oracle, labeled);
    const Region region = estimate_region_glm(m_hat, mle.theta, family);
    return glm_estimate_on_region(labeled, unlabeled, f, region, family, opts, std::nullopt, mle);
}

}  // namespace fppi
