#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/numerics.hpp"
#include "pathbf/factor/gibbs.hpp"
#include "pathbf/path/engine.hpp"

namespace pathbf::diag {

using factor::ChainSamples;
using path::BfEstimate;

struct CurveRow {
    double t = 0.0;
    double e_hat = 0.0;
    double sd_within = 0.0;
    double sd_replicate = std::numeric_limits<double>::quiet_NaN();
    double n_eff = 0.0;
};

struct CurveTable {
    std::vector<CurveRow> rows;
};

inline CurveTable et_curve(const BfEstimate& est)
{
    CurveTable c;
    for (const auto& p : est.per_point)
        c.rows.push_back({p.t, p.e_hat, p.sd_within, std::numeric_limits<double>::quiet_NaN(), p.n_eff});
    return c;
}

/// Mean curve over replicates with the across-replicate sd per point.
inline CurveTable et_curve(const std::vector<BfEstimate>& reps)
{
    if (reps.empty())
        throw DomainError("et_curve: no replicates");
    const std::size_t np = reps.front().per_point.size();
    for (const auto& r : reps) {
        if (r.per_point.size() != np)
            throw GridError("et_curve: replicates use different grids");
        for (std::size_t g = 0; g < np; ++g)
            if (r.per_point[g].t != reps.front().per_point[g].t)
                throw GridError("et_curve: replicates use different grids");
    }
    CurveTable c;
    for (std::size_t g = 0; g < np; ++g) {
        std::vector<double> e, sd, ne;
        for (const auto& r : reps) {
            e.push_back(r.per_point[g].e_hat);
            sd.push_back(r.per_point[g].sd_within);
            ne.push_back(r.per_point[g].n_eff);
        }
        CurveRow row;
        row.t = reps.front().per_point[g].t;
        row.e_hat = mean(e);
        row.sd_within = mean(sd);
        row.n_eff = mean(ne);
        if (reps.size() >= 2)
            row.sd_replicate = stddev(e);
        c.rows.push_back(row);
    }
    return c;
}

inline void write_curve_csv(std::ostream& os, const CurveTable& c)
{
    os << "t,E_hat,sd_within,sd_replicate,n_eff\n";
    os.precision(17);
    for (const auto& r : c.rows) {
        os << r.t << ',' << r.e_hat << ',' << r.sd_within << ',';
        if (!std::isnan(r.sd_replicate))
            os << r.sd_replicate;
        os << ',' << r.n_eff << '\n';
    }
}

struct ContinuityReport {
    std::size_t pairs = 0;
    std::size_t within = 0;
    double fraction() const { return pairs ? static_cast<double>(within) / static_cast<double>(pairs) : 1.0; }
};

/// Counts adjacent points whose jump is below factor times the pooled Monte
/// Carlo standard error of the two points.
inline ContinuityReport continuity_check(const CurveTable& c, double factor = 10.0)
{
    ContinuityReport r;
    auto se = [](const CurveRow& row) { return row.n_eff > 0.0 ? row.sd_within / std::sqrt(row.n_eff) : 0.0; };
    for (std::size_t g = 1; g < c.rows.size(); ++g) {
        const double pooled = std::hypot(se(c.rows[g - 1]), se(c.rows[g]));
        ++r.pairs;
        if (std::abs(c.rows[g].e_hat - c.rows[g - 1].e_hat) < factor * pooled)
            ++r.within;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
    std::vector<double> edges; // bins + 1 edges
    std::vector<long> counts;

    std::size_t bins() const { return counts.size(); }
    long total() const
    {
        long s = 0;
        for (long c : counts)
            s += c;
        return s;
    }
};

/// Equal-width histogram over [lo, hi]; values outside are clamped to the end bins.
inline Histogram histogram(const std::vector<double>& v, int bins, double lo, double hi)
{
    if (bins < 2)
        throw DomainError("histogram: need at least two bins");
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (int b = 0; b <= bins; ++b)
        h.edges.push_back(lo + (hi - lo) * b / bins);
    for (double x : v) {
        int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

inline Histogram param_histogram(const std::vector<double>& v, int bins)
{
    if (v.empty())
        return histogram(v, bins, 0.0, 1.0);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return histogram(v, bins, *lo, *hi);
}

// ---------------------------------------------------------------------------
// Log-likelihood clusters and the conflict zone

struct ClusterOptions {
    std::optional<double> threshold; // manual override
    double band_lo = 0.05;
    double band_hi = 0.95;
    int bins = 60;
    /// Valley between the two modes relative to the smaller mode.
    double max_valley = 0.25;
    /// Smaller mode as a fraction of all draws.
    double min_mode_mass = 0.01;
};

struct ClusterReport {
    double threshold = std::numeric_limits<double>::quiet_NaN();
    bool unimodal = false;
    std::vector<double> t;
    std::vector<double> proportion; // share of draws above the threshold
    std::optional<std::pair<double, double>> zone;

    bool zone_empty() const { return !zone.has_value(); }
    bool zone_intersects(double a, double b) const { return zone && zone->first <= b && zone->second >= a; }
};

struct ModeSplit {
    bool found = false;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double low_mode = 0.0;
    double high_mode = 0.0;
};

/// Midpoint of the two tallest well-separated histogram modes.
inline ModeSplit split_modes(const std::vector<double>& v, const ClusterOptions& opt = {})
{
    ModeSplit out;
    if (v.size() < 4)
        return out;
    const auto h = param_histogram(v, opt.bins);
    const std::size_t nb = h.bins();
    std::vector<double> s(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        double acc = 0.0;
        int cnt = 0;
        for (std::size_t c = (b == 0 ? 0 : b - 1); c <= std::min(nb - 1, b + 1); ++c, ++cnt)
            acc += static_cast<double>(h.counts[c]);
        s[b] = acc / cnt;
    }
    std::vector<std::size_t> peaks;
    for (std::size_t b = 0; b < nb; ++b) {
        const double left = b == 0 ? -1.0 : s[b - 1];
        const double right = b + 1 == nb ? -1.0 : s[b + 1];
        if (s[b] > 0.0 && s[b] > left && s[b] >= right)
            peaks.push_back(b);
    }
    const double total = static_cast<double>(v.size());
    double best = -1.0;
    std::pair<std::size_t, std::size_t> pick{0, 0};
    for (std::size_t a = 0; a < peaks.size(); ++a) {
        for (std::size_t b = a + 1; b < peaks.size(); ++b) {
            const std::size_t i = peaks[a], j = peaks[b];
            const double lower = std::min(s[i], s[j]);
            const auto first = s.begin() + static_cast<std::ptrdiff_t>(i);
            const auto last = s.begin() + static_cast<std::ptrdiff_t>(j) + 1;
            const double valley = *std::min_element(first, last);
            if (valley > opt.max_valley * lower)
                continue;
            // Mass on each side of the valley floor.
            std::size_t lo = i, hi = j;
            while (s[lo] != valley)
                ++lo;
            while (s[hi] != valley)
                --hi;
            double mass_i = 0.0, mass_j = 0.0;
            for (std::size_t c = 0; c < lo; ++c)
                mass_i += static_cast<double>(h.counts[c]);
            for (std::size_t c = hi + 1; c < nb; ++c)
                mass_j += static_cast<double>(h.counts[c]);
            if (std::min(mass_i, mass_j) < opt.min_mode_mass * total)
                continue;
            if (lower > best) {
                best = lower;
                pick = {i, j};
            }
        }
    }
    if (best < 0.0)
        return out;
    auto centre = [&](std::size_t b) { return 0.5 * (h.edges[b] + h.edges[b + 1]); };
    out.found = true;
    out.low_mode = centre(pick.first);
    out.high_mode = centre(pick.second);
    out.threshold = 0.5 * (out.low_mode + out.high_mode);
    return out;
}

/// Share of draws above the threshold per t and the hull of the t values
/// whose share, interpolated linearly between grid points, lies inside the band.
inline ClusterReport cluster_mixing(const std::vector<double>& ts, const std::vector<std::vector<double>>& series,
                                    const ClusterOptions& opt = {})
{
    if (ts.size() != series.size() || ts.empty())
        throw DomainError("cluster_mixing: one series per t is required");
    for (const auto& s : series)
        if (s.empty())
            throw DomainError("cluster_mixing: empty series");
    ClusterReport r;
    r.t = ts;
    if (opt.threshold) {
        r.threshold = *opt.threshold;
    } else {
        std::vector<double> pooled;
        for (const auto& s : series)
            pooled.insert(pooled.end(), s.begin(), s.end());
        const auto split = split_modes(pooled, opt);
        r.unimodal = !split.found;
        r.threshold = split.found ? split.threshold : std::numeric_limits<double>::infinity();
    }
    for (const auto& s : series) {
        long above = 0;
        for (double x : s)
            above += x > r.threshold ? 1 : 0;
        r.proportion.push_back(static_cast<double>(above) / static_cast<double>(s.size()));
    }
    if (!r.unimodal) {
        auto widen = [&](double a, double b) {
            if (!r.zone)
                r.zone = std::pair{a, b};
            r.zone->first = std::min(r.zone->first, a);
            r.zone->second = std::max(r.zone->second, b);
        };
        for (std::size_t g = 0; g < ts.size(); ++g)
            if (r.proportion[g] >= opt.band_lo && r.proportion[g] <= opt.band_hi)
                widen(ts[g], ts[g]);
        // Between grid points the share is linear in t.
        for (std::size_t g = 0; g + 1 < ts.size(); ++g) {
            const double a = r.proportion[g], b = r.proportion[g + 1];
            if (a == b)
                continue;
            double s0 = (opt.band_lo - a) / (b - a), s1 = (opt.band_hi - a) / (b - a);
            if (s0 > s1)
                std::swap(s0, s1);
            s0 = std::max(s0, 0.0);
            s1 = std::min(s1, 1.0);
            if (s0 <= s1)
                widen(ts[g] + s0 * (ts[g + 1] - ts[g]), ts[g] + s1 * (ts[g + 1] - ts[g]));
        }
    }
    return r;
}

inline ClusterReport cluster_mixing(const std::vector<ChainSamples>& chains, const ClusterOptions& opt = {})
{
    std::vector<double> ts;
    std::vector<std::vector<double>> series;
    for (const auto& c : chains) {
        ts.push_back(c.target.t);
        series.push_back(c.marginal_loglik.empty() ? c.loglik : c.marginal_loglik);
    }
    return cluster_mixing(ts, series, opt);
}

inline void write_cluster_csv(std::ostream& os, const ClusterReport& r)
{
    os.precision(17);
    os << "# threshold=" << r.threshold << " unimodal=" << (r.unimodal ? 1 : 0);
    if (r.zone)
        os << " zone=" << r.zone->first << ':' << r.zone->second;
    else
        os << " zone=empty";
    os << "\nt,proportion_upper\n";
    for (std::size_t g = 0; g < r.t.size(); ++g)
        os << r.t[g] << ',' << r.proportion[g] << '\n';
}

// ---------------------------------------------------------------------------
// Autocorrelation

using Selector = std::function<std::vector<double>(const ChainSamples&)>;

/// First free entry of the tempered column.
inline std::vector<double> monitored_parameter(const ChainSamples& c) { return c.monitored; }

struct AcfRow {
    double t = 0.0;
    std::vector<double> acf; // one per lag
    double n_eff = 0.0;
};

struct AcfReport {
    std::vector<int> lags;
    std::vector<AcfRow> rows;
};

inline AcfRow acf_row(double t, const std::vector<double>& x, const std::vector<int>& lags)
{
    AcfRow row;
    row.t = t;
    for (int l : lags)
        row.acf.push_back(autocorr(x, static_cast<std::size_t>(l)));
    row.n_eff = effective_sample_size(x);
    return row;
}

inline AcfReport acf_report(const std::vector<ChainSamples>& chains, const std::vector<int>& lags,
                            const Selector& select = monitored_parameter)
{
    AcfReport r;
    r.lags = lags;
    for (const auto& c : chains)
        r.rows.push_back(acf_row(c.target.t, select(c), lags));
    return r;
}

inline void write_acf_csv(std::ostream& os, const AcfReport& r)
{
    os.precision(17);
    os << "t";
    for (int l : r.lags)
        os << ",lag" << l;
    os << ",n_eff\n";
    for (const auto& row : r.rows) {
        os << row.t;
        for (double a : row.acf)
            os << ',' << a;
        os << ',' << row.n_eff << '\n';
    }
}

inline void write_hist_csv(std::ostream& os, const std::vector<std::pair<double, Histogram>>& panels)
{
    os.precision(17);
    os << "t,bin,lo,hi,count\n";
    for (const auto& [t, h] : panels)
        for (std::size_t b = 0; b < h.bins(); ++b)
            os << t << ',' << b << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
}

inline void write_trace_csv(std::ostream& os, const std::vector<ChainSamples>& chains)
{
    os.precision(17);
    os << "t,iter,loglik,monitored\n";
    for (const auto& c : chains) {
        const auto& ll = c.marginal_loglik.empty() ? c.loglik : c.marginal_loglik;
        for (std::size_t i = 0; i < ll.size(); ++i)
            os << c.target.t << ',' << i << ',' << ll[i] << ',' << (i < c.monitored.size() ? c.monitored[i] : 0.0)
               << '\n';
    }
}

/// Chains whose t is nearest to each requested value, without repeats.
inline std::vector<ChainSamples> select_panels(const std::vector<ChainSamples>& chains, const std::vector<double>& want)
{
    std::vector<ChainSamples> out;
    std::vector<std::size_t> used;
    for (double w : want) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < chains.size(); ++i)
            if (std::abs(chains[i].target.t - w) < std::abs(chains[best].target.t - w))
                best = i;
        if (chains.empty() || std::find(used.begin(), used.end(), best) != used.end())
            continue;
        used.push_back(best);
        out.push_back(chains[best]);
    }
    return out;
}

struct FigurePackOptions {
    std::vector<int> lags{0, 1, 5, 10, 20, 50};
    std::vector<double> panel_t{0.0, 0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.5, 1.0};
    int bins = 40;
    ClusterOptions cluster{};
};

/// Writes curve, cluster, acf, hist and trace tables for one path run.
inline ClusterReport write_figure_pack(const std::filesystem::path& dir, const BfEstimate& est,
                                       const std::vector<ChainSamples>& chains, const FigurePackOptions& opt = {})
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f)
            throw Error(std::string("cannot write ") + (dir / name).string());
        return f;
    };
    {
        auto f = open("curve.csv");
        write_curve_csv(f, et_curve(est));
    }
    if (chains.empty())
        return {};
    const auto clusters = cluster_mixing(chains, opt.cluster);
    {
        auto f = open("clusters.csv");
        write_cluster_csv(f, clusters);
    }
    const auto panels = select_panels(chains, opt.panel_t);
    {
        auto f = open("acf.csv");
        write_acf_csv(f, acf_report(panels, opt.lags));
    }
    {
        std::vector<std::pair<double, Histogram>> hs;
        for (const auto& c : panels)
            hs.emplace_back(c.target.t, param_histogram(c.monitored, opt.bins));
        auto f = open("hist.csv");
        write_hist_csv(f, hs);
    }
    {
        auto f = open("trace.csv");
        write_trace_csv(f, panels);
    }
    return clusters;
}

} // namespace pathbf::diag
