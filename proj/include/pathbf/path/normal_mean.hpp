#pragma once

#include <cmath>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/rng.hpp"

namespace pathbf::path {

/// y_i ~ N(mu, 1), mu ~ N(0, prior_sd^2). Conjugate, so every tempered
/// posterior and the evidence are available in closed form.
struct NormalMeanModel {
    std::vector<double> y;
    double prior_sd = 1.0;

    double n() const { return static_cast<double>(y.size()); }

    double sum() const
    {
        double s = 0.0;
        for (double v : y)
            s += v;
        return s;
    }

    double loglik(double mu) const
    {
        double out = 0.0;
        for (double v : y)
            out += -0.5 * (log_two_pi + (v - mu) * (v - mu));
        return out;
    }

    double log_prior(double mu) const
    {
        const double z = mu / prior_sd;
        return -0.5 * (log_two_pi + z * z) - std::log(prior_sd);
    }

    double log_pl(double mu) const { return loglik(mu) + log_prior(mu); }

    double log_marginal() const
    {
        const double prec = 1.0 / (prior_sd * prior_sd) + n();
        const double s = sum();
        double ss = 0.0;
        for (double v : y)
            ss += v * v;
        return -0.5 * n() * log_two_pi - std::log(prior_sd) - 0.5 * std::log(prec) - 0.5 * ss
            + 0.5 * s * s / prec;
    }

    /// Exact draw from prior x likelihood^t.
    double draw_power_posterior(double t, RngStream& rng) const
    {
        const double prec = 1.0 / (prior_sd * prior_sd) + t * n();
        return t * sum() / prec + rng.normal() / std::sqrt(prec);
    }

    /// Log-likelihood draws along the geometric path, for the path engine.
    std::vector<double> gmp_chain(double t, int m, int /*burnin*/, RngStream rng) const
    {
        std::vector<double> out(static_cast<std::size_t>(m));
        for (auto& v : out)
            v = loglik(draw_power_posterior(t, rng));
        return out;
    }
};

} // namespace pathbf::path
