#pragma once

#include <string>
#include <string_view>

namespace fppi {

// Log-partition function A and its first two derivatives at one linear predictor.
struct FamilyValues {
    double a = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

// Canonical exponential-family working model. The mean is A'(eta) and the
// variance function A''(eta); A'' > 0 everywhere.
class GlmFamily {
public:
    enum class Kind { Gaussian, Bernoulli, Poisson };

    static GlmFamily gaussian(double sigma2 = 1.0);
    static GlmFamily bernoulli(double eta_max = 30.0);
    static GlmFamily poisson(double eta_max = 30.0);
    // "gaussian", "bernoulli" or "poisson"; throws std::invalid_argument otherwise.
    static GlmFamily from_name(std::string_view name);

    Kind kind() const noexcept { return kind_; }
    std::string name() const;
    double sigma2() const noexcept { return sigma2_; }
    double eta_max() const noexcept { return eta_max_; }

    // |eta| is clamped to eta_max before exponentiation (bernoulli, poisson).
    FamilyValues eval(double eta) const;
    double mean(double eta) const { return eval(eta).a1; }

    // Throws std::invalid_argument when a response is outside the family's support.
    void check_response(double y) const;

private:
    GlmFamily(Kind kind, double sigma2, double eta_max) : kind_(kind), sigma2_(sigma2), eta_max_(eta_max) {}

    Kind kind_;
    double sigma2_;
    double eta_max_;
};

FamilyValues family_eval(const GlmFamily& family, double eta);

}  // namespace fppi
