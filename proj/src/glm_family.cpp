#include "fppi/glm_family.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fppi {

GlmFamily GlmFamily::gaussian(double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian family needs sigma2 > 0");
    return GlmFamily(Kind::Gaussian, sigma2, 0.0);
}

GlmFamily GlmFamily::bernoulli(double eta_max) { return GlmFamily(Kind::Bernoulli, 1.0, eta_max); }

GlmFamily GlmFamily::poisson(double eta_max) { return GlmFamily(Kind::Poisson, 1.0, eta_max); }

GlmFamily GlmFamily::from_name(std::string_view name) {
    if (name == "gaussian") return gaussian();
    if (name == "bernoulli") return bernoulli();
    if (name == "poisson") return poisson();
    throw std::invalid_argument("unknown GLM family '" + std::string(name) + "'");
}

std::string GlmFamily::name() const {
    switch (kind_) {
        case Kind::Gaussian: return "gaussian";
        case Kind::Bernoulli: return "bernoulli";
        case Kind::Poisson: return "poisson";
    }
    return "unknown";
}

FamilyValues GlmFamily::eval(double eta) const {
    switch (kind_) {
        case Kind::Gaussian: return {0.5 * eta * eta / sigma2_, eta / sigma2_, 1.0 / sigma2_};
        case Kind::Bernoulli: {
            const double e = std::clamp(eta, -eta_max_, eta_max_);
            // log(1 + e^e) without overflow for either sign.
            const double a = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
            const double s = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
            return {a, s, s * (1.0 - s)};
        }
        case Kind::Poisson: {
            const double v = std::exp(std::clamp(eta, -eta_max_, eta_max_));
            return {v, v, v};
        }
    }
    return {};
}

void GlmFamily::check_response(double y) const {
    switch (kind_) {
        case Kind::Gaussian: return;
        case Kind::Bernoulli:
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("bernoulli responses must be 0 or 1");
            return;
        case Kind::Poisson:
            if (!(y >= 0.0) || std::floor(y) != y)
                throw std::invalid_argument("poisson responses must be non-negative integers");
            return;
    }
}

FamilyValues family_eval(const GlmFamily& family, double eta) { return family.eval(eta); }

}  // namespace fppi
