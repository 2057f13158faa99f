#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pathbf/alt/laplace.hpp"
#include "pathbf/factor/gibbs.hpp"

namespace pathbf::alt {

struct LaplaceEstimates {
    int k = 0;
    double bicm = 0.0;
    std::optional<double> bicim; // empty when the information is singular
    MpleResult mple;
    double chain_max = 0.0;
};

/// BICM and BICIM log marginals of the k-factor model from one posterior chain.
inline LaplaceEstimates factor_laplace(const Matrix& y, int k, const factor::PriorSpec& prior, int m, int burnin,
                                       const RngStream& stream)
{
    factor::ChainOptions opt;
    opt.keep_states = true;
    opt.marginal_loglik = false;
    const auto chain = factor::run_chain(factor::TemperedTarget::posterior(k), y, k, prior, m, burnin, stream, opt);
    const FactorLaplaceModel model(y, k, prior);
    LogPlSample lp;
    std::vector<Vector> cands;
    cands.reserve(chain.loadings.size());
    for (std::size_t i = 0; i < chain.loadings.size(); ++i) {
        cands.push_back(model.pack(chain.loadings[i], chain.sigma2[i]));
        lp.values.push_back(model.log_pl(cands.back()));
    }
    LaplaceEstimates out;
    out.k = k;
    out.bicm = bicm(lp, static_cast<double>(y.rows()));
    out.chain_max = *std::max_element(lp.values.begin(), lp.values.end());
    try {
        out.bicim = bicim(model, cands, &out.mple);
    } catch (const SingularInformation&) {
        out.mple = find_mple(model, cands);
    }
    return out;
}

} // namespace pathbf::alt
