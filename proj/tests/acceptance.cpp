#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pathbf/alt/gap.hpp"
#include "pathbf/alt/laplace.hpp"
#include "pathbf/cli/commands.hpp"
#include "pathbf/diag/diagnostics.hpp"
#include "pathbf/path/normal_mean.hpp"
#include "pathbf/toy/covariance.hpp"

using namespace pathbf;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

unsigned workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(double v, int prec = 3)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

std::string list(const std::vector<double>& v, int prec = 3)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? " " : "") + fmt(v[i], prec);
    return s + "]";
}

Matrix factor_data(int truth_k, std::uint64_t seed, int n = 100)
{
    cli::RunConfig c;
    c.preset = "tables-2-3";
    c.truth_k = truth_k;
    c.n = n;
    c.seed = seed;
    return cli::load_or_simulate(c).data.y;
}

Matrix toy_data(bool dependent, std::uint64_t seed)
{
    cli::RunConfig c;
    c.preset = "a3";
    c.toy_dependent = dependent;
    c.n = 100;
    c.seed = seed;
    return cli::load_or_simulate(c).data.y;
}

// ---------------------------------------------------------------------------
// Toy oracle

double iw_1d_quadrature(const Matrix& y, double df, double psi)
{
    const double n = static_cast<double>(y.rows());
    const double ss = y.squaredNorm();
    const InverseGamma prior{0.5 * df, 0.5 * psi};
    auto f = [&](double u) {
        const double s2 = std::exp(u);
        return std::exp(-0.5 * n * (log_two_pi + u) - 0.5 * ss / s2 + log_pdf(prior, s2) + u);
    };
    const int steps = 400000;
    const double lo = -40.0, hi = 40.0, h = (hi - lo) / steps;
    double s = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < steps; ++i)
        s += f(lo + i * h);
    return std::log(s * h);
}

Outcome criterion1()
{
    RngStream rng(101, 1);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + rep % 5;
        Matrix y(n, 1);
        for (int i = 0; i < n; ++i)
            y(i, 0) = (0.5 + 0.1 * rep) * rng.normal();
        const toy::IwPrior prior{3.0 + 0.5 * rep, Matrix::Constant(1, 1, 0.3 + 0.2 * rep)};
        const double exact = toy::iw_log_marginal(y, prior);
        const double quad = iw_1d_quadrature(y, prior.df, prior.scale(0, 0));
        worst = std::max(worst, std::abs(exact - quad) / std::max(1.0, std::abs(quad)));
    }

    Matrix s0(2, 2);
    s0 << 1.0, 0.4, 0.4, 0.8;
    RngStream drng(102, 1);
    const Matrix y = toy::simulate_gaussian(s0, 5, drng);
    const toy::IwPrior prior{5.0, Matrix::Identity(2, 2)};
    const Matrix scatter = y.transpose() * y;
    const int draws = 1000000;
    std::vector<double> lik(draws);
    RngStream mc(102, 2);
    double mx = -1e300;
    for (int i = 0; i < draws; ++i) {
        lik[i] = toy::gaussian_loglik_scatter(draw(InverseWishart{prior.df, prior.scale}, mc), scatter, 5.0);
        mx = std::max(mx, lik[i]);
    }
    for (auto& v : lik)
        v = std::exp(v - mx);
    const double m = mean(lik), se = stddev(lik) / std::sqrt(static_cast<double>(draws));
    const double z = (std::exp(toy::iw_log_marginal(y, prior) - mx) - m) / se;
    return {worst < 1e-8 && std::abs(z) < 3.0,
            "max rel quadrature error " + fmt(worst) + ", d=2 Monte Carlo z " + fmt(z)};
}

// ---------------------------------------------------------------------------
// Toy path sampling

Outcome criterion2()
{
    const toy::BlockSpec spec{10, 7};
    const auto full = toy::IwPrior::standard(10);
    const std::pair blocks{toy::IwPrior::standard(7), toy::IwPrior::standard(3)};
    const toy::MhOptions mh;
    const auto grid = path::Grid::uniform(0.01);
    int dep_ok = 0, ind_ok = 0;
    std::vector<double> dep_ratio, ind_ratio;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (bool dependent : {true, false}) {
            const Matrix y = toy_data(dependent, seed);
            const auto r = toy::run_toy_ps(y, spec, full, blocks, grid, mh, path::replicate_stream(seed, 0), workers());
            const double truth = r.truth.log_bf, ps = r.estimate.log_bf;
            std::cerr << "  toy seed " << seed << (dependent ? " dependent" : " independent") << ": PS " << ps
                      << " analytic " << truth << '\n';
            if (dependent) {
                dep_ok += std::abs(ps - truth) <= std::max(0.25 * std::abs(truth), 10.0);
                dep_ratio.push_back(ps / truth);
            } else {
                ind_ok += std::abs(truth) >= 2.0 * std::abs(ps);
                ind_ratio.push_back(truth / ps);
            }
        }
    }
    return {dep_ok >= 7 && ind_ok >= 7, "dependent within tolerance " + std::to_string(dep_ok)
                                            + "/10 (PS/analytic " + list(dep_ratio) + "); independent underestimated 2x "
                                            + std::to_string(ind_ok) + "/10 (analytic/PS " + list(ind_ratio) + ")"};
}

// ---------------------------------------------------------------------------
// Factor-model runs shared by criteria 3, 5 and 8

struct FactorRun {
    double ps = 0.0;
    double pssc = 0.0;
    bool zone_found = false;
    bool zone_hits = false;
    double acf_ps = std::nan("");
    double acf_pssc = std::nan("");
};

constexpr int acf_lag = 10;

double lag_acf(const std::vector<double>& x)
{
    try {
        return autocorr(x, acf_lag);
    } catch (const Error&) {
        return std::nan("");
    }
}

std::map<std::pair<int, std::uint64_t>, FactorRun>& factor_runs()
{
    static std::map<std::pair<int, std::uint64_t>, FactorRun> runs;
    return runs;
}

const FactorRun& factor_run(int truth_k, std::uint64_t seed)
{
    auto& cache = factor_runs();
    const auto key = std::pair{truth_k, seed};
    if (auto it = cache.find(key); it != cache.end())
        return it->second;
    const Matrix y = factor_data(truth_k, seed);
    const auto grid = path::Grid::uniform(0.01);
    const factor::PriorSpec prior;
    path::RunOptions opt;
    opt.workers = workers();
    opt.keep_chains = true;
    FactorRun fr;
    const auto ps = path::run_ps(y, 2, grid, prior, 6000, 1000, path::replicate_stream(seed, 0), opt);
    fr.ps = ps.estimate.log_bf;
    const auto clusters = diag::cluster_mixing(ps.chains);
    fr.zone_found = !clusters.zone_empty();
    fr.zone_hits = clusters.zone_intersects(0.03, 0.2);

    // Matched t: the zone point whose mixing proportion is nearest one half,
    // or the grid points bracketing a zone that falls between two of them.
    std::optional<std::size_t> g_match;
    if (clusters.zone) {
        const double lo = clusters.zone->first, hi = clusters.zone->second;
        bool inside = false;
        for (std::size_t g = 0; g < grid.size(); ++g)
            inside = inside || (grid[g] >= lo && grid[g] <= hi);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const bool in_zone = grid[g] >= lo && grid[g] <= hi;
            const bool brackets = (g + 1 < grid.size() && grid[g] < lo && grid[g + 1] > hi)
                || (g > 0 && grid[g - 1] < lo && grid[g] > hi);
            if (!(inside ? in_zone : brackets))
                continue;
            const double q = clusters.proportion[g];
            if (!g_match || std::abs(q - 0.5) < std::abs(clusters.proportion[*g_match] - 0.5))
                g_match = g;
        }
    }
    if (g_match)
        fr.acf_ps = lag_acf(ps.chains[*g_match].monitored);

    opt.chain.marginal_loglik = false;
    opt.keep_chains = g_match.has_value();
    const auto sc = path::run_pssc(y, 2, grid, prior, 6000, 1000, path::replicate_stream(seed, 0), opt);
    fr.pssc = sc.estimate.log_bf;
    // Step 1 moves the same loading that PS monitors.
    if (g_match)
        fr.acf_pssc = lag_acf(sc.chains[*g_match].monitored);
    std::cerr << "  factor truth " << truth_k << " seed " << seed << ": PS " << fr.ps << " PS-SC " << fr.pssc
              << " zone " << (clusters.zone ? fmt(clusters.zone->first) + "-" + fmt(clusters.zone->second) : "none")
              << " acf10 " << fr.acf_ps << " vs " << fr.acf_pssc << '\n';
    return cache.emplace(key, fr).first->second;
}

Outcome criterion3()
{
    int sc_ok = 0, ps_ok = 0;
    std::vector<double> sc1, sc2, ps1, ps2;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto& a = factor_run(1, seed);
        const auto& b = factor_run(2, seed);
        sc_ok += (a.pssc < 0.0) + (b.pssc > 0.0);
        ps_ok += (a.ps < 0.0) + (b.ps > 0.0);
        sc1.push_back(a.pssc);
        sc2.push_back(b.pssc);
        ps1.push_back(a.ps);
        ps2.push_back(b.ps);
    }
    return {sc_ok == 20 && ps_ok == 20,
            "PS-SC signs " + std::to_string(sc_ok) + "/20, PS signs " + std::to_string(ps_ok) + "/20; PS-SC 1-factor "
                + list(sc1) + " 2-factor " + list(sc2) + "; PS 1-factor " + list(ps1) + " 2-factor " + list(ps2)};
}

Outcome criterion4()
{
    const auto grid = path::Grid::uniform(0.01);
    path::RunOptions opt;
    opt.workers = workers();
    opt.chain.marginal_loglik = false;
    double sd[3] = {0.0, 0.0, 0.0};
    std::string detail;
    for (int truth : {1, 2}) {
        const Matrix y = factor_data(truth, 1);
        std::vector<double> v;
        for (int r = 0; r < 10; ++r)
            v.push_back(path::run_pssc(y, 2, grid, factor::PriorSpec{}, 6000, 1000, path::replicate_stream(1, r), opt)
                            .estimate.log_bf);
        sd[truth] = stddev(v);
        detail += (truth == 1 ? "" : "; ") + std::to_string(truth) + "-factor sd " + fmt(sd[truth]) + " of " + list(v);
    }
    return {sd[1] < 0.1 && sd[2] < 2.0, detail};
}

Outcome criterion5()
{
    int ok = 0;
    std::vector<double> ratio;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto& r = factor_run(2, seed);
        ok += r.ps < 0.5 * r.pssc;
        ratio.push_back(r.ps / r.pssc);
    }
    return {ok >= 8, std::to_string(ok) + "/10 with PS < 0.5 PS-SC; PS/PS-SC " + list(ratio)};
}

Outcome criterion6()
{
    const Matrix y = factor_data(2, 1);
    const auto grid = path::Grid::uniform(0.01);
    path::RunOptions opt;
    opt.workers = workers();
    opt.chain.marginal_loglik = false;
    std::vector<double> v;
    for (double df : {1.0, 5.0, 10.0, 90.0, factor::infinite_df}) {
        factor::PriorSpec prior;
        prior.t_df = df;
        prior.allow_low_df = true;
        std::vector<double> reps;
        for (int r = 0; r < 10; ++r)
            reps.push_back(path::run_ps(y, 2, grid, prior, 6000, 1000, path::replicate_stream(1, r), opt).estimate.log_bf);
        v.push_back(mean(reps));
    }
    const bool mono = std::is_sorted(v.begin(), v.end());
    return {mono && std::abs(v[3] - v[4]) < 1.0,
            "mean PS of 10 replicates over df 1,5,10,90,inf " + list(v, 5) + (mono ? " nondecreasing" : " not monotone")};
}

Outcome criterion7()
{
    const Matrix y = factor_data(2, 1);
    cli::RunConfig c;
    c.m = 10000;
    c.burnin = 1000;
    c.workers = workers();
    std::map<std::string, double> sd;
    std::string detail;
    for (const char* method : {"bicm", "bicim", "is"}) {
        c.method = method;
        std::vector<double> v;
        for (int r = 0; r < 10; ++r)
            v.push_back(cli::estimate_once(c, y, 2, path::replicate_stream(1, r)).log_bf);
        sd[method] = stddev(v);
        detail += std::string(detail.empty() ? "" : "; ") + method + " sd " + fmt(sd[method]) + " mean "
            + fmt(mean(v));
    }
    return {sd["bicm"] < 2.0 && sd["bicim"] < 2.0 && sd["is"] > 10.0, detail};
}

Outcome criterion8()
{
    int hit = 0, empty = 0, acf_ok = 0;
    std::vector<double> acf_ps, acf_sc;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto& b = factor_run(2, seed);
        hit += b.zone_hits;
        acf_ok += b.acf_ps > b.acf_pssc;
        acf_ps.push_back(b.acf_ps);
        acf_sc.push_back(b.acf_pssc);
        empty += !factor_run(1, seed).zone_found;
    }
    return {hit >= 8 && empty >= 8 && acf_ok >= 8,
            "2-factor zones meeting [0.03,0.2] " + std::to_string(hit) + "/10; 1-factor empty zones "
                + std::to_string(empty) + "/10; lag-10 ACF PS > PS-SC " + std::to_string(acf_ok) + "/10 (PS "
                + list(acf_ps) + " PS-SC " + list(acf_sc) + ")"};
}

Outcome criterion9()
{
    const auto start = std::chrono::steady_clock::now();
    std::string bins = PATHBF_PROPERTY_BINARIES;
    std::vector<std::string> failed;
    std::size_t pos = 0;
    while (pos <= bins.size()) {
        const auto next = std::min(bins.find('|', pos), bins.size());
        const std::string bin = bins.substr(pos, next - pos);
        pos = next + 1;
        if (bin.empty())
            continue;
        const std::string cmd = "\"" + bin + "\" \"[property]\" --allow-running-no-tests --reporter compact > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0)
            failed.push_back(bin.substr(bin.find_last_of('/') + 1));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string detail = "property suites " + std::string(failed.empty() ? "green" : "failing:");
    for (const auto& f : failed)
        detail += " " + f;
    return {failed.empty() && secs < 300.0, detail + " in " + fmt(secs) + " s"};
}

Outcome criterion10()
{
    path::NormalMeanModel m;
    m.prior_sd = 1.0;
    RngStream rng(110, 1);
    for (int i = 0; i < 100; ++i)
        m.y.push_back(0.4 + rng.normal());
    RngStream draws(110, 2);
    alt::LogPlSample lp;
    std::vector<Vector> cands;
    for (int i = 0; i < 100000; ++i) {
        const double mu = m.draw_power_posterior(1.0, draws);
        lp.values.push_back(m.log_pl(mu));
        if (i < 200)
            cands.push_back(Vector::Constant(1, mu));
    }
    auto f = [&](const Vector& x) { return m.log_pl(x(0)); };
    const double truth = m.log_marginal();
    const double e1 = std::abs(alt::bicm(lp, m.n()) - truth);
    const double e2 = std::abs(alt::bicim(f, cands) - truth);
    return {e1 < 1.0 && e2 < 0.5, "bicm error " + fmt(e1) + ", bicim error " + fmt(e2)};
}

Outcome criterion11()
{
    const std::vector<double> ns{50, 100, 200};
    std::vector<double> gap2, gap1;
    for (double n : ns) {
        const int ni = static_cast<int>(n);
        gap2.push_back(alt::loglik_gap_report(factor_data(2, 11, ni), 1, 2, factor::PriorSpec{}, 3000, 500,
                                              RngStream(11, 2))
                           .gap);
        gap1.push_back(alt::loglik_gap_report(factor_data(1, 11, ni), 1, 2, factor::PriorSpec{}, 3000, 500,
                                              RngStream(11, 1))
                           .gap);
    }
    const auto fit = linear_fit(ns, gap2);
    const bool small = *std::max_element(gap1.begin(), gap1.end()) < 10.0;
    return {fit.slope > 0.0 && fit.r_squared > 0.8 && small,
            "2-factor gaps " + list(gap2) + " slope " + fmt(fit.slope) + " R2 " + fmt(fit.r_squared)
                + "; 1-factor gaps " + list(gap1)};
}

} // namespace

int main(int argc, char** argv)
{
    using Fn = Outcome (*)();
    const std::vector<Fn> criteria{criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
                                   criterion7, criterion8, criterion9, criterion10, criterion11};
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i)
        chosen.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!chosen.empty() && !chosen.count(id))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(secs) << " s) "
                  << o.detail << std::endl;
    }
    return failed ? 1 : 0;
}
