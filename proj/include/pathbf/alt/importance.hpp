#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pathbf/core/linalg.hpp"
#include "pathbf/core/rng.hpp"
#include "pathbf/factor/gibbs.hpp"
#include "pathbf/path/engine.hpp"
#include "pathbf/path/grid.hpp"

namespace pathbf::alt {

using factor::FactorState;
using factor::PriorSpec;
using factor::TemperedTarget;
using path::BfEstimate;
using path::Grid;

struct WeightedEstimate {
    BfEstimate estimate;
    std::vector<double> log_weights;
    double max_normalized_weight = 0.0;
    bool weight_degeneracy = false; // max normalised weight above 0.5
};

/// log BF_{h,h-1} = -log mean w, with w estimating m_{h-1} / m_h.
inline WeightedEstimate weighted_log_bf(std::vector<double> log_w, std::string method)
{
    if (log_w.empty())
        throw DomainError("importance estimate needs at least one weight");
    WeightedEstimate r;
    const Vector v = Eigen::Map<const Vector>(log_w.data(), static_cast<Eigen::Index>(log_w.size()));
    const double lse = log_sum_exp(v);
    r.estimate.method = std::move(method);
    r.estimate.log_bf = -(lse - std::log(static_cast<double>(log_w.size())));
    r.max_normalized_weight = std::exp(v.maxCoeff() - lse);
    r.weight_degeneracy = r.max_normalized_weight > 0.5;
    r.log_weights = std::move(log_w);
    return r;
}

/// Calls fn(state) after each retained sweep of the h-factor posterior chain.
template <class Fn>
void for_each_posterior_draw(const Matrix& y, int h, const PriorSpec& prior, int m, int burnin,
                             const RngStream& stream, Fn&& fn)
{
    const auto target = TemperedTarget::posterior(h);
    const auto pat = factor::LoadingPattern::make(target, y.cols(), h);
    auto rs = factor::SweepStreams::from(stream);
    FactorState s = factor::init_state(y.cols(), h, y.rows(), pat, prior, rs);
    for (int it = 0; it < burnin + m; ++it) {
        factor::gibbs_sweep(s, y, target, pat, prior, rs);
        if (it >= burnin)
            fn(s);
    }
}

/// Importance sampling from the h-factor posterior.
///
/// The smaller model's likelihood at a draw drops column h. With
/// drop_column = false the two models coincide and every weight is 1.
inline WeightedEstimate run_is(const Matrix& y, int h, const PriorSpec& prior, int m, int burnin,
                               const RngStream& stream, bool drop_column = true)
{
    prior.validate();
    if (h < 1 || h > y.cols() || m < 1)
        throw DomainError("run_is: invalid h or m");
    const auto full = TemperedTarget::pamp(h, 1.0);
    const auto reduced = TemperedTarget::pamp(h, 0.0);
    std::vector<double> log_w;
    log_w.reserve(static_cast<std::size_t>(m));
    for_each_posterior_draw(y, h, prior, m, burnin, stream.split(1), [&](const FactorState& s) {
        if (!drop_column) {
            log_w.push_back(0.0);
            return;
        }
        const Matrix lambda = s.loadings(), eta = s.factors();
        log_w.push_back(factor::loglik_conditional(y, lambda, s.sigma2, eta, reduced)
                        - factor::loglik_conditional(y, lambda, s.sigma2, eta, full));
    });
    return weighted_log_bf(std::move(log_w), "is");
}

/// Log weight of one annealing run over a descending ladder.
///
/// loglik(state, t) is the log target at t up to the prior; transition(state, t)
/// moves the state under the target at t.
template <class State, class LogLik, class Transition>
double anneal_log_weight(const std::vector<double>& ladder_desc, State& state, LogLik&& loglik,
                         Transition&& transition)
{
    double lw = 0.0;
    double prev = loglik(state, ladder_desc.front());
    for (std::size_t r = 1; r < ladder_desc.size(); ++r) {
        const double cur = loglik(state, ladder_desc[r]);
        lw += cur - prev;
        if (r + 1 < ladder_desc.size()) {
            transition(state, ladder_desc[r]);
            prev = loglik(state, ladder_desc[r]);
        }
    }
    return lw;
}

/// Annealed importance sampling on the arithmetic mean path, from the
/// h-factor posterior at t = 1 down to t = 0.
inline WeightedEstimate run_ais(const Matrix& y, int h, const Grid& grid, const PriorSpec& prior, int m,
                                int sweeps_per_rung, int burnin, const RngStream& stream)
{
    prior.validate();
    if (h < 1 || h > y.cols() || m < 1 || sweeps_per_rung < 0)
        throw DomainError("run_ais: invalid h, m or sweeps per rung");
    std::vector<double> ladder(grid.points().rbegin(), grid.points().rend());

    std::vector<factor::LoadingPattern> pats;
    for (double t : ladder)
        pats.push_back(factor::LoadingPattern::make(TemperedTarget::pamp(h, t), y.cols(), h));
    auto index_of = [&](double t) {
        return static_cast<std::size_t>(std::find(ladder.begin(), ladder.end(), t) - ladder.begin());
    };

    std::vector<double> log_w;
    log_w.reserve(static_cast<std::size_t>(m));
    std::uint64_t draw = 0;
    const RngStream anneal_base = stream.split(2);
    for_each_posterior_draw(y, h, prior, m, burnin, stream.split(1), [&](const FactorState& s0) {
        FactorState s = s0;
        auto rs = factor::SweepStreams::from(anneal_base.split(draw++));
        auto loglik = [&](const FactorState& st, double t) {
            return factor::loglik_conditional(y, st.loadings(), st.sigma2, st.factors(), TemperedTarget::pamp(h, t));
        };
        auto transition = [&](FactorState& st, double t) {
            const auto target = TemperedTarget::pamp(h, t);
            for (int k = 0; k < sweeps_per_rung; ++k)
                factor::gibbs_sweep(st, y, target, pats[index_of(t)], prior, rs);
        };
        log_w.push_back(anneal_log_weight(ladder, s, loglik, transition));
    });
    return weighted_log_bf(std::move(log_w), "ais");
}

} // namespace pathbf::alt
