#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/numerics.hpp"
#include "pathbf/core/parallel.hpp"
#include "pathbf/core/rng.hpp"
#include "pathbf/factor/gibbs.hpp"
#include "pathbf/factor/model.hpp"
#include "pathbf/path/grid.hpp"

namespace pathbf::path {

using factor::ChainOptions;
using factor::ChainSamples;
using factor::PriorSpec;

struct PointSummary {
    double t = 0.0;
    double e_hat = 0.0;
    double sd_within = 0.0; // naive sd of the score draws
    double n_eff = 0.0;

    /// Monte Carlo standard error of e_hat from the effective sample size.
    double mc_se() const { return n_eff > 0.0 ? sd_within / std::sqrt(n_eff) : 0.0; }
};

struct BfEstimate {
    std::string method;
    double log_bf = 0.0;
    std::vector<PointSummary> per_point;
    std::optional<double> replicate_sd;
    std::vector<int> steps;                              // PS-SC step indices
    std::vector<double> per_step;                        // PS-SC step-wise log BF'
    std::vector<std::vector<PointSummary>> step_points;  // PS-SC per-step curves
};

inline PointSummary summarize(double t, const std::vector<double>& draws)
{
    PointSummary s;
    s.t = t;
    s.e_hat = mean(draws);
    s.sd_within = stddev(draws);
    s.n_eff = effective_sample_size(draws);
    return s;
}

/// Trapezoid assembly of per-point estimates over the grid.
inline double integrate(const Grid& grid, const std::vector<PointSummary>& pts)
{
    if (pts.size() != grid.size())
        throw GridError("integrate: one summary per grid point is required");
    std::vector<double> vals(pts.size());
    for (std::size_t g = 0; g < pts.size(); ++g)
        vals[g] = pts[g].e_hat;
    return trapezoid(grid.points(), vals);
}

/// Evaluates estimator(g) for every grid index and assembles the estimate.
template <class Estimator>
BfEstimate run_path(const Grid& grid, unsigned workers, Estimator&& estimator, std::string method = "ps")
{
    BfEstimate out;
    out.method = std::move(method);
    out.per_point.resize(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t g) { out.per_point[g] = estimator(g); });
    out.log_bf = integrate(grid, out.per_point);
    return out;
}

/// Sums step-wise estimates in step order.
inline BfEstimate assemble_steps(std::vector<int> steps, std::vector<BfEstimate> parts)
{
    BfEstimate out;
    out.method = "pssc";
    out.steps = std::move(steps);
    for (auto& part : parts) {
        out.per_step.push_back(part.log_bf);
        out.step_points.push_back(std::move(part.per_point));
    }
    double total = 0.0;
    for (double v : out.per_step)
        total += v;
    out.log_bf = total;
    return out;
}

struct PointResult {
    PointSummary summary;
    ChainSamples chain;
};

/// Chain mean of the score under one tempered target.
inline PointResult estimate_Et(const factor::TemperedTarget& target, const Matrix& y, int k, const PriorSpec& prior,
                               int m, int burnin, const RngStream& stream, const ChainOptions& opt = {})
{
    PointResult r;
    r.chain = factor::run_chain(target, y, k, prior, m, burnin, stream, opt);
    r.summary = summarize(target.t, r.chain.score);
    return r;
}

struct RunOptions {
    unsigned workers = 1;
    bool keep_chains = false;
    ChainOptions chain{};
};

struct PathRun {
    BfEstimate estimate;
    /// PS: one chain per grid point. PS-SC: step-major, grid-minor.
    std::vector<ChainSamples> chains;
};

namespace detail {

inline void check_inputs(const Matrix& y, int h, const PriorSpec& prior, int m, int burnin)
{
    prior.validate_for_path();
    if (h < 1 || h > y.cols())
        throw DomainError("path run: h out of range");
    if (m < 1 || burnin < 0)
        throw DomainError("path run: m must be positive and burnin non-negative");
}

} // namespace detail

/// Path sampling on the arithmetic mean path scaling column h.
inline PathRun run_ps(const Matrix& y, int h, const Grid& grid, const PriorSpec& prior, int m, int burnin,
                      const RngStream& stream, const RunOptions& opt = {})
{
    detail::check_inputs(y, h, prior, m, burnin);
    PathRun run;
    if (opt.keep_chains)
        run.chains.resize(grid.size());
    run.estimate = run_path(grid, opt.workers, [&](std::size_t g) {
        auto r = estimate_Et(factor::TemperedTarget::pamp(h, grid[g]), y, h, prior, m, burnin, stream.split(g),
                             opt.chain);
        if (opt.keep_chains)
            run.chains[g] = std::move(r.chain);
        return r.summary;
    });
    run.estimate.method = "ps";
    return run;
}

/// Step indices (0-based rows of column h) used by path sampling with small changes.
inline std::vector<int> pssc_steps(int p, int h)
{
    std::vector<int> steps;
    for (int i = std::max(1, h - 1); i <= p - 1; ++i)
        steps.push_back(i);
    return steps;
}

/// Path sampling with small changes: one path per entry of column h.
inline PathRun run_pssc(const Matrix& y, int h, const Grid& grid, const PriorSpec& prior, int m, int burnin,
                        const RngStream& stream, const RunOptions& opt = {})
{
    detail::check_inputs(y, h, prior, m, burnin);
    if (h < 2 || y.cols() < 2)
        throw DomainError("run_pssc: needs h >= 2 and p >= 2");
    const auto steps = pssc_steps(static_cast<int>(y.cols()), h);
    const std::size_t ng = grid.size();
    const std::size_t total = steps.size() * ng;

    std::vector<PointSummary> pts(total);
    PathRun run;
    if (opt.keep_chains)
        run.chains.resize(total);
    parallel_for(total, opt.workers, [&](std::size_t task) {
        const std::size_t s = task / ng;
        const std::size_t g = task % ng;
        const int i = steps[s];
        auto r = estimate_Et(factor::TemperedTarget::pssc(h, i, grid[g]), y, h, prior, m, burnin,
                             stream.split(1000 + static_cast<std::uint64_t>(i)).split(g), opt.chain);
        pts[task] = r.summary;
        if (opt.keep_chains)
            run.chains[task] = std::move(r.chain);
    });

    std::vector<BfEstimate> parts(steps.size());
    for (std::size_t s = 0; s < steps.size(); ++s) {
        parts[s].per_point.assign(pts.begin() + static_cast<std::ptrdiff_t>(s * ng),
                                  pts.begin() + static_cast<std::ptrdiff_t>((s + 1) * ng));
        parts[s].log_bf = integrate(grid, parts[s].per_point);
    }
    run.estimate = assemble_steps(steps, std::move(parts));
    return run;
}

/// Factor model on the geometric prior-to-posterior path.
struct FactorGmpModel {
    const Matrix& y;
    int k;
    PriorSpec prior;

    std::vector<double> gmp_chain(double t, int m, int burnin, const RngStream& stream) const
    {
        ChainOptions opt;
        opt.marginal_loglik = false;
        return factor::run_chain(factor::TemperedTarget::gmp(k, t), y, k, prior, m, burnin, stream, opt).score;
    }
};

/// log marginal by integrating E_t[log-likelihood] from prior to posterior.
///
/// Model provides gmp_chain(t, m, burnin, stream) returning log-likelihood draws.
template <class Model>
BfEstimate run_gmp_marginal(const Model& model, const Grid& grid, int m, int burnin, const RngStream& stream,
                            unsigned workers = 1)
{
    auto est = run_path(grid, workers, [&](std::size_t g) {
        return summarize(grid[g], model.gmp_chain(grid[g], m, burnin, stream.split(g)));
    });
    est.method = "gmp";
    return est;
}

/// Lower bound on the MCMC variance of the optimal path, [arctan(H / sqrt(4 - H^2))]^2 / m.
inline double optimal_path_bound(double hellinger, int m)
{
    if (!(hellinger >= 0.0 && hellinger <= 2.0))
        throw DomainError("optimal_path_bound: Hellinger distance must lie in [0, 2]");
    if (m < 1)
        throw DomainError("optimal_path_bound: m must be positive");
    double a;
    if (hellinger == 2.0)
        a = 0.5 * std::numbers::pi;
    else
        a = std::atan(hellinger / std::sqrt(4.0 - hellinger * hellinger));
    return a * a / static_cast<double>(m);
}

struct ReplicateSummary {
    std::vector<double> values;
    double mean = 0.0;
    double sd = 0.0;
};

/// Replicate stream r of a master seed.
inline RngStream replicate_stream(std::uint64_t seed, int r)
{
    return RngStream(seed, 0).split(0x7265706cULL + static_cast<std::uint64_t>(r));
}

/// R independent runs on disjoint streams; runner(stream) returns one estimate.
inline ReplicateSummary replicate_runs(const std::function<double(const RngStream&)>& runner, int replicates,
                                       std::uint64_t seed, unsigned workers = 1)
{
    if (replicates < 2)
        throw DomainError("replicate_runs: need at least two replicates");
    ReplicateSummary s;
    s.values.resize(static_cast<std::size_t>(replicates));
    parallel_for(s.values.size(), workers,
                 [&](std::size_t r) { s.values[r] = runner(replicate_stream(seed, static_cast<int>(r))); });
    s.mean = mean(s.values);
    s.sd = stddev(s.values);
    return s;
}

inline void write_curve_csv(std::ostream& os, const std::vector<PointSummary>& pts)
{
    os << "t,E_hat,sd_within,n_eff\n";
    os.precision(17);
    for (const auto& p : pts)
        os << p.t << ',' << p.e_hat << ',' << p.sd_within << ',' << p.n_eff << '\n';
}

inline void write_steps_csv(std::ostream& os, const BfEstimate& est)
{
    os << "step,log_bf\n";
    os.precision(17);
    for (std::size_t s = 0; s < est.per_step.size(); ++s)
        os << est.steps[s] << ',' << est.per_step[s] << '\n';
}

} // namespace pathbf::path
