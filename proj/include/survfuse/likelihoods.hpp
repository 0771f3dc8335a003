#ifndef SURVFUSE_LIKELIHOODS_HPP
#define SURVFUSE_LIKELIHOODS_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "survfuse/errors.hpp"

namespace survfuse {

// Floor applied to event/censoring times before log terms (times are modeled
// after rescaling by the training-set mean, so the scale is ~1).
inline constexpr double kTimeFloor = 1e-8;

// Encoder log-variances and Gaussian reconstruction log-variances are kept
// within this range.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct WeibullParams {
    double shape; // k > 0
    double scale; // lambda > 0

    void validate() const {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw DomainError("WeibullParams: shape and scale must be strictly positive");
    }
};

struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> log_var;

    void validate() const {
        if (mean.size() != log_var.size())
            throw DimensionError("DiagGaussian: mean and log-variance length mismatch");
    }
};

enum class ColumnKind { gaussian, bernoulli, categorical, image_mse };

struct ColumnLikelihood {
    ColumnKind kind = ColumnKind::gaussian;
    int levels = 0; // categorical only, >= 2

    static ColumnLikelihood gaussian() { return {ColumnKind::gaussian, 0}; }
    static ColumnLikelihood bernoulli() { return {ColumnKind::bernoulli, 0}; }
    static ColumnLikelihood categorical(int levels) {
        if (levels < 2)
            throw DomainError("categorical likelihood needs at least 2 levels");
        return {ColumnKind::categorical, levels};
    }
    static ColumnLikelihood image_mse() { return {ColumnKind::image_mse, 0}; }
};

struct WeibullTerms {
    double log_hazard;
    double log_survival;
    double cdf;
};

// Closed-form Weibull hazard/survival/cdf. The time floor only affects the
// hazard's log t term; survival and cdf are exact at t = 0.
inline WeibullTerms weibull_terms(const WeibullParams& p, double t) {
    p.validate();
    if (t < 0.0)
        throw DomainError("weibull_terms: t must be nonnegative, got " + std::to_string(t));
    const double k = p.shape, lam = p.scale;
    const double log_lam = std::log(lam);
    const double t_floored = std::max(t, kTimeFloor);
    WeibullTerms out;
    out.log_hazard = std::log(k) - log_lam + (k - 1.0) * (std::log(t_floored) - log_lam);
    out.log_survival = t == 0.0 ? 0.0 : -std::pow(t / lam, k);
    out.cdf = -std::expm1(out.log_survival);
    return out;
}

// Eq-4 style censored contribution: log h + log S if the event was observed,
// log S alone under censoring.
inline double censored_time_loglik(const WeibullParams& p, double t, bool event) {
    const WeibullTerms w = weibull_terms(p, t);
    return event ? w.log_hazard + w.log_survival : w.log_survival;
}

struct GaussianPrediction {
    double mean;
    double log_var; // clamped to [kLogVarMin, kLogVarMax] by callers
};

inline double gaussian_loglik(const GaussianPrediction& p, double x) {
    const double lv = std::min(kLogVarMax, std::max(kLogVarMin, p.log_var));
    const double d = x - p.mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi) + lv + d * d * std::exp(-lv));
}

inline double bernoulli_loglik(double p_hat, double x) {
    if (x != 0.0 && x != 1.0)
        throw DomainError("bernoulli_loglik: observed value must be 0 or 1");
    const double p = std::min(1.0 - 1e-12, std::max(1e-12, p_hat));
    return x == 1.0 ? std::log(p) : std::log1p(-p);
}

inline double categorical_loglik(const std::vector<double>& probs, int observed) {
    if (observed < 0 || observed >= static_cast<int>(probs.size()))
        throw DomainError("categorical_loglik: observed level " + std::to_string(observed) +
                          " outside [0," + std::to_string(probs.size()) + ")");
    return std::log(std::max(1e-12, probs[observed]));
}

// Unit-variance Gaussian likelihood with the additive constant dropped:
// -0.5 * sum((x - xhat)^2).
inline double image_mse_loglik(const std::vector<double>& predicted,
                               const std::vector<double>& observed) {
    if (predicted.size() != observed.size())
        throw DimensionError("image_mse_loglik: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = observed[i] - predicted[i];
        s += d * d;
    }
    return -0.5 * s;
}

// Per-column log-likelihood dispatcher. `params` holds the predicted
// distribution parameters: {mean, log_var} for gaussian, {p} for bernoulli,
// the level probabilities for categorical.
inline double covariate_loglik(const ColumnLikelihood& kind,
                               const std::vector<double>& params, double observed) {
    switch (kind.kind) {
        case ColumnKind::gaussian:
            if (params.size() != 2)
                throw ContractError("gaussian column expects {mean, log_var}");
            return gaussian_loglik({params[0], params[1]}, observed);
        case ColumnKind::bernoulli:
            if (params.size() != 1)
                throw ContractError("bernoulli column expects {p}");
            return bernoulli_loglik(params[0], observed);
        case ColumnKind::categorical:
            if (static_cast<int>(params.size()) != kind.levels)
                throw ContractError("categorical column expects one probability per level");
            return categorical_loglik(params, static_cast<int>(observed));
        case ColumnKind::image_mse:
            throw ContractError("image_mse needs the vector-observed overload");
    }
    throw ContractError("unknown column likelihood kind");
}

inline double covariate_loglik(const ColumnLikelihood& kind,
                               const std::vector<double>& params,
                               const std::vector<double>& observed) {
    if (kind.kind != ColumnKind::image_mse)
        throw ContractError("vector-observed overload is for image_mse");
    return image_mse_loglik(params, observed);
}

// KL(q || N(0, I)) for a diagonal Gaussian posterior.
inline double kl_diag_gaussian(const DiagGaussian& q) {
    q.validate();
    double s = 0.0;
    for (std::size_t d = 0; d < q.mean.size(); ++d) {
        const double mu = q.mean[d];
        const double lv = q.log_var[d];
        s += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
    }
    return s;
}

} // namespace survfuse

#endif
