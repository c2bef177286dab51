#pragma once

#include "fppi/glm_family.hpp"
#include "fppi/region_estimation.hpp"
#include "fppi/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fppi {

// Full-batch gradient descent with Armijo backtracking.
struct GlmOptions {
    double tol = 1e-8;  // on the gradient infinity-norm
    int max_iter = 5000;
    double armijo = 1e-4;
    double shrink = 0.5;
    double initial_step = 1.0;
};

struct Convergence {
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
};

class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, Vector last_iterate, Convergence conv)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)), conv_(conv) {}

    const Vector& last_iterate() const noexcept { return last_iterate_; }
    const Convergence& convergence() const noexcept { return conv_; }

private:
    Vector last_iterate_;
    Convergence conv_;
};

struct GlmFit {
    Vector theta;
    Convergence convergence;
};

// (1/n) sum [A(x_i'theta) - y_i x_i'theta]
double glm_objective(const Vector& theta, const LabeledDataset& labeled, const GlmFamily& family);

GlmFit glm_mle(const LabeledDataset& labeled, const GlmFamily& family, const GlmOptions& opts = {});

// Minimizer of (1/n) sum [A(x_i'theta) - r_i x_i'theta] for real-valued r
// (e.g. conditional means) by damped Newton; no response-support check.
// Meant for large reference draws where plain gradient descent stalls.
GlmFit glm_fit_mean_response(const Matrix& x, const Vector& r, const GlmFamily& family, const GlmOptions& opts = {});

// The filtered objective with the region memberships resolved once. Labeled
// rows carry weight (1 - lambda 1_S)/n on A and the linear term mixes y and f;
// unlabeled rows in the region carry lambda/N.
class FppiGlmObjective {
public:
    FppiGlmObjective(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const Predictions& f,
                     const Region& region, double lambda, const GlmFamily& family);
    FppiGlmObjective(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const Predictions& f,
                     RegionMasks masks, double lambda, const GlmFamily& family);

    double value(const Vector& theta) const;
    Vector gradient(const Vector& theta) const;
    double value_and_gradient(const Vector& theta, Vector& grad) const;
    Index dim() const noexcept { return labeled_.cols(); }

    const BoolVector& labeled_mask() const noexcept { return mask_labeled_; }
    const BoolVector& unlabeled_mask() const noexcept { return mask_unlabeled_; }

private:
    const LabeledDataset& labeled_;
    const UnlabeledDataset& unlabeled_;
    const Predictions& f_;
    BoolVector mask_labeled_;
    BoolVector mask_unlabeled_;
    double lambda_;
    GlmFamily family_;
};

double fppi_glm_objective(const Vector& theta, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                          const Predictions& f, const Region& region, double lambda, const GlmFamily& family);

Vector fppi_glm_gradient(const Vector& theta, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                         const Predictions& f, const Region& region, double lambda, const GlmFamily& family);

struct PluginMatrices {
    SquareMatrix sigma;   // (1/N) sum A''(x~'theta) x~ x~'
    SquareMatrix m;       // (1/N) sum 1_S (f - A')^2 x~ x~'
    SquareMatrix gamma;   // (1/n) sum 1_S (y - A')(f - A') x x'
};

PluginMatrices estimate_plugin_matrices(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const Region& region, const Vector& theta_mle,
                                        const GlmFamily& family);
PluginMatrices estimate_plugin_matrices(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                        const Predictions& f, const RegionMasks& masks, const Vector& theta_mle,
                                        const GlmFamily& family);

// (1/n) sum (y - A'(x'theta))^2 x x'
SquareMatrix estimate_omega(const LabeledDataset& labeled, const Vector& theta, const GlmFamily& family);

// tr(S^-1 G S^-1) / ((1 + r) tr(S^-1 M S^-1)); nullopt when the denominator
// trace is zero. Throws SingularMatrixError for a singular sigma.
std::optional<double> lambda_star_glm(const SquareMatrix& sigma, const SquareMatrix& gamma,
                                      const SquareMatrix& m_matrix, double r);

// tr(S^-1 (Omega + lambda^2 (1 + r) M - 2 lambda Gamma) S^-1)
double amse(const SquareMatrix& sigma, const SquareMatrix& omega, const SquareMatrix& m_matrix,
            const SquareMatrix& gamma, double lambda, double r);

// S^-1 (Omega + lambda^2 (1 + r) M - 2 lambda Gamma) S^-1
SquareMatrix asymptotic_covariance(const SquareMatrix& sigma, const SquareMatrix& omega, const SquareMatrix& m_matrix,
                                   const SquareMatrix& gamma, double lambda, double r);

struct GlmFppiResult {
    Vector theta_hat;
    double lambda_hat = 0.0;
    Region region;
    SquareMatrix sigma_hat;
    SquareMatrix m_hat_matrix;
    SquareMatrix gamma_hat;
    SquareMatrix omega_hat;
    // Asymptotic covariance of sqrt(n) (theta_hat - theta*).
    SquareMatrix covariance;
    double amse_estimate = 0.0;
    Convergence convergence;
    Vector theta_mle;
    Index labeled_in_region = 0;
    Index unlabeled_in_region = 0;
    Index n = 0;
    bool degenerate = false;
    std::vector<std::string> warnings;

    // sqrt(diag(covariance) / n)
    Vector std_errors() const;
};

// Minimizes the filtered objective by gradient descent from `start` (zero vector
// when omitted). Only theta_hat, lambda_hat, region and convergence are set.
GlmFppiResult fppi_glm_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                const Predictions& f, const Region& region, double lambda, const GlmFamily& family,
                                const GlmOptions& opts = {}, std::optional<Vector> start = std::nullopt);

// MLE, plug-in matrices on the given region, weight (estimated unless fixed),
// gradient descent from the MLE and the plug-in covariance.
GlmFppiResult glm_estimate_on_region(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                     const Predictions& f, const Region& region, const GlmFamily& family,
                                     const GlmOptions& opts = {}, std::optional<double> fixed_lambda = std::nullopt,
                                     std::optional<GlmFit> mle = std::nullopt);

// MLE, region from the fitted oracle, then glm_estimate_on_region.
GlmFppiResult algorithm2_estimate(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Predictions& f, const OracleSpec& oracle, const GlmFamily& family,
                                  const GlmOptions& opts = {});

}  // namespace fppi
