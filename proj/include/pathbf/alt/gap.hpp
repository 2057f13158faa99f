#pragma once

#include <vector>

#include "pathbf/alt/laplace.hpp"
#include "pathbf/factor/gibbs.hpp"

namespace pathbf::alt {

struct GapReport {
    int k_small = 0;
    int k_big = 0;
    double n = 0.0;
    double max_loglik_small = 0.0;
    double max_loglik_big = 0.0;
    double gap = 0.0;       // max_loglik_big - max_loglik_small
    double gap_per_n = 0.0;
};

/// Maximum marginal log-likelihood of a k-factor model, searched from the
/// best state of a posterior chain.
inline MpleResult max_loglik(const Matrix& y, int k, const factor::PriorSpec& prior, int m, int burnin,
                             const RngStream& stream, std::vector<Vector> cands = {})
{
    factor::ChainOptions opt;
    opt.keep_states = true;
    opt.marginal_loglik = false;
    const auto chain = factor::run_chain(factor::TemperedTarget::posterior(k), y, k, prior, m, burnin, stream, opt);
    const FactorLaplaceModel model(y, k, prior);
    cands.reserve(cands.size() + chain.loadings.size());
    for (std::size_t i = 0; i < chain.loadings.size(); ++i)
        cands.push_back(model.pack(chain.loadings[i], chain.sigma2[i]));
    auto ll = [&](const Vector& th) { return model.loglik(th); };
    return find_mple(ll, cands);
}

/// Difference of maximised log-likelihoods between nested factor models.
inline GapReport loglik_gap_report(const Matrix& y, int k_small, int k_big, const factor::PriorSpec& prior, int m,
                                   int burnin, const RngStream& stream)
{
    if (k_small > k_big)
        throw DomainError("loglik_gap_report: k_small must not exceed k_big");
    GapReport r;
    r.k_small = k_small;
    r.k_big = k_big;
    r.n = static_cast<double>(y.rows());
    const auto small = max_loglik(y, k_small, prior, m, burnin, stream.split(static_cast<std::uint64_t>(k_small)));
    r.max_loglik_small = small.log_pl_at_max;
    if (k_big == k_small) {
        r.max_loglik_big = r.max_loglik_small;
    } else {
        // The smaller optimum embedded with zero extra columns is a candidate,
        // so the larger maximum never falls below it.
        const FactorLaplaceModel ms(y, k_small, prior), mb(y, k_big, prior);
        Matrix lambda;
        Vector sigma2;
        ms.unpack(small.theta_hat, lambda, sigma2);
        Matrix big = Matrix::Zero(y.cols(), k_big);
        big.leftCols(k_small) = lambda;
        r.max_loglik_big = max_loglik(y, k_big, prior, m, burnin, stream.split(static_cast<std::uint64_t>(k_big)),
                                      {mb.pack(big, sigma2)})
                               .log_pl_at_max;
    }
    r.gap = r.max_loglik_big - r.max_loglik_small;
    r.gap_per_n = r.gap / r.n;
    return r;
}

} // namespace pathbf::alt
