#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pathbf/alt/factor_laplace.hpp"
#include "pathbf/alt/importance.hpp"
#include "pathbf/cli/config.hpp"
#include "pathbf/cli/presets.hpp"
#include "pathbf/diag/diagnostics.hpp"
#include "pathbf/factor/io.hpp"
#include "pathbf/factor/model.hpp"
#include "pathbf/path/engine.hpp"
#include "pathbf/toy/covariance.hpp"

namespace pathbf::cli {

namespace fs = std::filesystem;
using path::BfEstimate;
using path::Grid;

/// Files of one command invocation, listed in the manifest in write order.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path& root() const { return root_; }

    void write(const std::string& name, const std::string& text)
    {
        std::ofstream f(root_ / name, std::ios::binary);
        if (!f)
            throw ConfigError("cannot write " + (root_ / name).string());
        f << text;
        if (name != "manifest.json" && name != "timing.json")
            artifacts_.push_back(name);
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    template <class Fn>
    void write_with(const std::string& name, Fn&& fn)
    {
        std::ostringstream os;
        fn(os);
        write(name, os.str());
    }

    /// Lists a file written by other code.
    void record(const std::string& name) { artifacts_.push_back(name); }

    const std::vector<std::string>& artifacts() const { return artifacts_; }

private:
    fs::path root_;
    std::vector<std::string> artifacts_;
};

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

/// Seeds, config and artifacts; no wall-clock values.
inline json make_manifest(const std::string& command, const RunConfig& c, const OutputDir& out,
                          const json& dataset = json::object())
{
    json j;
    j["tool"] = "pathbf";
    j["version"] = tool_version;
    j["command"] = command;
    j["master_seed"] = c.seed;
    j["config"] = to_json(c);
    j["dataset"] = dataset;
    j["artifacts"] = out.artifacts();
    return j;
}

inline RunConfig config_from_manifest(const json& j)
{
    RunConfig c;
    if (!j.contains("config"))
        throw ConfigError("manifest has no config section");
    const auto& cfg = j.at("config");
    try {
        c.method = cfg.at("method");
        c.preset = cfg.at("preset");
        c.truth_k = cfg.at("truth_k");
        c.toy_dependent = cfg.at("toy_dependent");
        c.data = cfg.at("data");
        c.standardize = cfg.at("standardize");
        c.n = cfg.at("n");
        c.h = cfg.at("h");
        c.h_max = cfg.at("h_max");
        c.grid = cfg.at("grid");
        c.m = cfg.at("m");
        c.burnin = cfg.at("burnin");
        c.replicates = cfg.at("replicates");
        c.prior_df = parse_df(cfg.at("prior_df").get<std::string>());
        c.t_scale = cfg.at("t_scale");
        c.ig_shape = cfg.at("ig_shape");
        c.ig_rate = cfg.at("ig_rate");
        c.sign_constraint = cfg.at("sign_constraint");
        c.allow_low_df = cfg.at("allow_low_df");
        c.seed = cfg.at("seed");
        c.workers = cfg.at("workers");
        c.out = cfg.at("out");
        c.threshold = cfg.at("threshold");
        c.ais_sweeps = cfg.at("ais_sweeps");
        c.estimators = cfg.at("estimators").get<std::vector<std::string>>();
        c.toy_induced = cfg.at("toy_induced");
        c.step = cfg.at("step");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest config is incomplete: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Data

inline constexpr std::uint64_t simulation_stream = 0x73696d75ULL;

struct LoadedData {
    factor::Dataset data;
    json info;
};

/// CSV from c.data, or a simulated dataset from the preset.
inline LoadedData load_or_simulate(const RunConfig& c)
{
    LoadedData out;
    if (!c.data.empty()) {
        out.data = factor::read_csv_file(c.data);
        if (c.standardize)
            factor::standardize(out.data);
        out.info["source"] = c.data;
    } else {
        RngStream rng(c.seed, simulation_stream);
        if (c.preset == "a3") {
            const auto t = a3_preset(c.toy_dependent);
            out.data.y = toy::simulate_gaussian(t.sigma, c.n, rng);
        } else {
            const auto pr = factor_preset(c.preset).truncated(c.truth_k);
            out.data.y = factor::simulate(pr.lambda, pr.sigma2, c.n, rng);
        }
        for (Eigen::Index j = 0; j < out.data.y.cols(); ++j)
            out.data.names.push_back("y" + std::to_string(j + 1));
        out.info["source"] = "preset:" + c.preset;
    }
    out.info["n"] = out.data.n();
    out.info["p"] = out.data.p();
    out.info["standardized"] = out.data.standardized;
    return out;
}

inline json cmd_simulate(const RunConfig& c)
{
    c.validate();
    OutputDir out(c.out);
    RunConfig sim = c;
    sim.data.clear();
    const auto d = load_or_simulate(sim);
    out.write_with("data.csv", [&](std::ostream& os) { factor::write_csv(os, d.data.y, d.data.names); });
    const auto manifest = make_manifest("simulate", c, out, d.info);
    out.write_json("manifest.json", manifest);
    return d.info;
}

inline json cmd_ingest(const RunConfig& c)
{
    if (c.data.empty())
        throw ConfigError("ingest needs --data pointing to a CSV file");
    OutputDir out(c.out);
    const auto d = load_or_simulate(c);
    out.write_with("data.csv", [&](std::ostream& os) { factor::write_csv(os, d.data.y, d.data.names); });
    out.write_json("manifest.json", make_manifest("ingest", c, out, d.info));
    return d.info;
}

// ---------------------------------------------------------------------------
// Estimation

struct MethodRun {
    std::vector<BfEstimate> replicates;
    std::vector<double> values;
    json extra = json::object();
};

/// One log BF_{h,h-1} estimate of the configured method on stream s.
inline BfEstimate estimate_once(const RunConfig& c, const Matrix& y, int h, const RngStream& s, json* extra = nullptr)
{
    const auto prior = c.prior();
    const Grid grid = Grid::uniform(c.grid);
    path::RunOptions ro;
    ro.workers = c.workers;
    ro.chain.marginal_loglik = false;
    if (c.method == "ps")
        return path::run_ps(y, h, grid, prior, c.m, c.burnin, s, ro).estimate;
    if (c.method == "pssc")
        return path::run_pssc(y, h, grid, prior, c.m, c.burnin, s, ro).estimate;
    if (c.method == "gmp") {
        BfEstimate e;
        e.method = "gmp";
        const double big = path::run_gmp_marginal(path::FactorGmpModel{y, h, prior}, grid, c.m, c.burnin,
                                                  s.split(static_cast<std::uint64_t>(h)), c.workers)
                               .log_bf;
        double small = 0.0;
        if (h > 1)
            small = path::run_gmp_marginal(path::FactorGmpModel{y, h - 1, prior}, grid, c.m, c.burnin,
                                           s.split(static_cast<std::uint64_t>(h - 1)), c.workers)
                        .log_bf;
        else
            small = factor::zero_factor_log_marginal(y, prior);
        e.log_bf = big - small;
        return e;
    }
    if (c.method == "is") {
        auto w = alt::run_is(y, h, prior, c.m, c.burnin, s);
        if (extra)
            (*extra)["max_normalized_weight"].push_back(w.max_normalized_weight);
        return w.estimate;
    }
    if (c.method == "ais") {
        auto w = alt::run_ais(y, h, grid, prior, c.m, c.ais_sweeps, c.burnin, s);
        if (extra)
            (*extra)["max_normalized_weight"].push_back(w.max_normalized_weight);
        return w.estimate;
    }
    if (c.method == "bicm" || c.method == "bicim") {
        if (h < 2)
            throw ConfigError("bicm and bicim compare h against h-1 and need h >= 2");
        const auto big = alt::factor_laplace(y, h, prior, c.m, c.burnin, s.split(static_cast<std::uint64_t>(h)));
        const auto small =
            alt::factor_laplace(y, h - 1, prior, c.m, c.burnin, s.split(static_cast<std::uint64_t>(h - 1)));
        BfEstimate e;
        e.method = c.method;
        if (c.method == "bicm") {
            e.log_bf = big.bicm - small.bicm;
        } else {
            if (!big.bicim || !small.bicim)
                throw SingularInformation("bicim: observed information is singular at the maximiser");
            e.log_bf = *big.bicim - *small.bicim;
        }
        return e;
    }
    throw ConfigError("method '" + c.method + "' is not a factor-model estimator");
}

inline MethodRun run_replicates(const RunConfig& c, const Matrix& y, int h)
{
    MethodRun r;
    for (int rep = 0; rep < c.replicates; ++rep) {
        r.replicates.push_back(estimate_once(c, y, h, path::replicate_stream(c.seed, rep), &r.extra));
        r.values.push_back(r.replicates.back().log_bf);
    }
    return r;
}

inline json summary_json(const std::vector<double>& values)
{
    json j;
    j["log_bf"] = mean(values);
    if (values.size() >= 2)
        j["replicate_sd"] = stddev(values);
    else
        j["replicate_sd"] = nullptr;
    j["replicates"] = values;
    return j;
}

inline void write_step_curves(std::ostream& os, const std::vector<BfEstimate>& reps)
{
    os.precision(17);
    os << "step,t,E_hat,sd_within,sd_replicate,n_eff\n";
    const auto& first = reps.front();
    for (std::size_t s = 0; s < first.steps.size(); ++s) {
        std::vector<BfEstimate> parts;
        for (const auto& r : reps) {
            BfEstimate b;
            b.per_point = r.step_points[s];
            parts.push_back(std::move(b));
        }
        for (const auto& row : diag::et_curve(parts).rows) {
            os << first.steps[s] << ',' << row.t << ',' << row.e_hat << ',' << row.sd_within << ',';
            if (!std::isnan(row.sd_replicate))
                os << row.sd_replicate;
            os << ',' << row.n_eff << '\n';
        }
    }
}

inline void write_steps_table(std::ostream& os, const std::vector<BfEstimate>& reps)
{
    os.precision(17);
    os << "step,log_bf,replicate_sd\n";
    const auto& first = reps.front();
    for (std::size_t s = 0; s < first.steps.size(); ++s) {
        std::vector<double> v;
        for (const auto& r : reps)
            v.push_back(r.per_step[s]);
        os << first.steps[s] << ',' << mean(v) << ',';
        if (v.size() >= 2)
            os << stddev(v);
        os << '\n';
    }
}

inline json run_toy(const RunConfig& c, const Matrix& y, OutputDir& out)
{
    const toy::BlockSpec spec{static_cast<int>(y.cols()), std::min(7, static_cast<int>(y.cols()) - 1)};
    const auto full = toy::IwPrior::standard(spec.p);
    const std::pair blocks{toy::IwPrior::standard(spec.p1()), toy::IwPrior::standard(spec.p2())};
    toy::MhOptions mh;
    mh.m = c.m;
    mh.burnin = c.burnin;
    const Grid grid = Grid::uniform(c.grid);
    std::vector<BfEstimate> reps;
    std::vector<double> values;
    bool warn = false;
    toy::ToyMarginals truth;
    for (int rep = 0; rep < c.replicates; ++rep) {
        auto r = toy::run_toy_ps(y, spec, full, blocks, grid, mh, path::replicate_stream(c.seed, rep), c.workers);
        truth = r.truth;
        warn = warn || r.acceptance_warning;
        values.push_back(r.estimate.log_bf);
        reps.push_back(std::move(r.estimate));
    }
    json j = summary_json(values);
    j["method"] = "toy";
    j["true_log_bf"] = truth.log_bf;
    j["log_m1"] = truth.log_m1;
    j["log_m0"] = truth.log_m0;
    j["acceptance_warning"] = warn;
    if (c.toy_induced) {
        const auto ind = toy::induced_t0_log_marginal(y, spec, full, toy::power_grid(40), mh,
                                                      RngStream(c.seed, 0x696e64ULL), c.workers);
        j["induced_t0_log_marginal"] = ind.log_bf;
        j["path_target_log_bf"] = truth.log_m1 - ind.log_bf;
    }
    out.write_with("curve.csv", [&](std::ostream& os) { diag::write_curve_csv(os, diag::et_curve(reps)); });
    return j;
}

inline json cmd_run(const RunConfig& c)
{
    c.validate();
    Timer timer;
    OutputDir out(c.out);
    const auto d = load_or_simulate(c);
    json result;
    if (c.method == "toy") {
        result = run_toy(c, d.data.y, out);
    } else {
        const auto run = run_replicates(c, d.data.y, c.h);
        result = summary_json(run.values);
        result["method"] = c.method;
        result["h"] = c.h;
        result["comparison"] = "log BF_{" + std::to_string(c.h) + "," + std::to_string(c.h - 1) + "}";
        for (auto it = run.extra.begin(); it != run.extra.end(); ++it)
            result[it.key()] = it.value();
        if (c.method == "ps")
            out.write_with("curve.csv", [&](std::ostream& os) {
                diag::write_curve_csv(os, diag::et_curve(run.replicates));
            });
        if (c.method == "pssc") {
            out.write_with("curve.csv", [&](std::ostream& os) { write_step_curves(os, run.replicates); });
            out.write_with("steps.csv", [&](std::ostream& os) { write_steps_table(os, run.replicates); });
        }
    }
    result["seed"] = c.seed;
    out.write_json("results.json", result);
    out.write_json("manifest.json", make_manifest("run", c, out, d.info));
    out.write_json("timing.json", json{{"command", "run"}, {"seconds", timer.seconds()}});
    return result;
}

// ---------------------------------------------------------------------------
// Model choice

/// Ascends h = 2, 3, ... while log BF_{h,h-1} exceeds the threshold; the
/// chosen k is the last h accepted, or 1.
inline int choose_k(const std::vector<double>& log_bfs, double threshold = 0.0)
{
    int k = 1;
    for (std::size_t i = 0; i < log_bfs.size(); ++i) {
        if (!(log_bfs[i] > threshold))
            break;
        k = static_cast<int>(i) + 2;
    }
    return k;
}

/// h is usable when the h-factor model is not overparameterised.
inline bool usable_k(int p, int k)
{
    try {
        factor::num_free_params(p, k);
        return k <= p;
    } catch (const OverparameterizedModel&) {
        return false;
    }
}

inline json cmd_select(const RunConfig& c)
{
    c.validate();
    Timer timer;
    OutputDir out(c.out);
    const auto d = load_or_simulate(c);
    const int p = static_cast<int>(d.data.p());
    json pairs = json::array();
    std::vector<double> decisive;
    for (int h = 2; h <= c.h_max && usable_k(p, h); ++h) {
        json pr;
        pr["h"] = h;
        double first = 0.0;
        for (std::size_t e = 0; e < c.estimators.size(); ++e) {
            RunConfig ce = c;
            ce.method = c.estimators[e];
            const auto run = run_replicates(ce, d.data.y, h);
            pr["estimates"][ce.method] = summary_json(run.values);
            if (e == 0)
                first = mean(run.values);
        }
        decisive.push_back(first);
        pairs.push_back(pr);
        if (!(first > c.threshold))
            break;
    }
    json result;
    result["decided_by"] = c.estimators.front();
    result["threshold"] = c.threshold;
    result["pairs"] = pairs;
    result["chosen_k"] = choose_k(decisive, c.threshold);
    out.write_json("results.json", result);
    out.write_json("manifest.json", make_manifest("select", c, out, d.info));
    out.write_json("timing.json", json{{"command", "select"}, {"seconds", timer.seconds()}});
    return result;
}

/// Pairs (h, h-1) confirmed by PS-SC around the screened k.
inline std::vector<int> confirmation_pairs(int k_screen, int h_max, int p)
{
    std::vector<int> hs;
    if (k_screen >= 2)
        hs.push_back(k_screen);
    if (k_screen + 1 <= std::max(h_max, k_screen + 1) && usable_k(p, k_screen + 1))
        hs.push_back(k_screen + 1);
    return hs;
}

/// k after confirmation: step down when BF_{k,k-1} fails, up when BF_{k+1,k} passes.
inline int confirm_k(int k_screen, const std::vector<std::pair<int, double>>& bfs, double threshold)
{
    int k = k_screen;
    for (const auto& [h, v] : bfs) {
        if (h == k_screen && !(v > threshold))
            k = k_screen - 1;
        if (h == k_screen + 1 && v > threshold && k == k_screen)
            k = k_screen + 1;
    }
    return std::max(k, 1);
}

inline json cmd_screen(const RunConfig& c)
{
    c.validate();
    Timer total;
    OutputDir out(c.out);
    const auto d = load_or_simulate(c);
    const int p = static_cast<int>(d.data.p());
    const auto prior = c.prior();

    Timer t1;
    json phase1 = json::array();
    int best_bicim = 0, best_bicm = 0;
    double v_bicim = -std::numeric_limits<double>::infinity(), v_bicm = v_bicim;
    for (int k = 1; k <= c.h_max && usable_k(p, k); ++k) {
        const auto est = alt::factor_laplace(d.data.y, k, prior, c.m, c.burnin,
                                             path::replicate_stream(c.seed, 0).split(static_cast<std::uint64_t>(k)));
        json row;
        row["k"] = k;
        row["bicm"] = est.bicm;
        row["bicim"] = est.bicim ? json(*est.bicim) : json(nullptr);
        phase1.push_back(row);
        if (est.bicm > v_bicm) {
            v_bicm = est.bicm;
            best_bicm = k;
        }
        if (est.bicim && *est.bicim > v_bicim) {
            v_bicim = *est.bicim;
            best_bicim = k;
        }
    }
    const int k_screen = best_bicim > 0 ? best_bicim : best_bicm;
    const double phase1_s = t1.seconds();

    Timer t2;
    RunConfig cp = c;
    cp.method = "pssc";
    json phase2 = json::array();
    std::vector<std::pair<int, double>> bfs;
    for (int h : confirmation_pairs(k_screen, c.h_max, p)) {
        const auto run = run_replicates(cp, d.data.y, h);
        json row = summary_json(run.values);
        row["h"] = h;
        phase2.push_back(row);
        bfs.emplace_back(h, mean(run.values));
    }
    const double phase2_s = t2.seconds();
    const int full_pairs = std::max(1, c.h_max - 1);
    const double per_pair = bfs.empty() ? 0.0 : phase2_s / static_cast<double>(bfs.size());

    json result;
    result["phase1"] = phase1;
    result["k_bicm"] = best_bicm;
    result["k_bicim"] = best_bicim;
    result["k_screen"] = k_screen;
    result["phase2"] = phase2;
    result["pairs_run"] = bfs.size();
    result["pairs_skipped"] = std::max(0, full_pairs - static_cast<int>(bfs.size()));
    result["chosen_k"] = confirm_k(k_screen, bfs, c.threshold);
    out.write_json("results.json", result);
    out.write_json("manifest.json", make_manifest("screen", c, out, d.info));
    out.write_json("timing.json", json{{"command", "screen"},
                                       {"seconds", total.seconds()},
                                       {"phase1_seconds", phase1_s},
                                       {"phase2_seconds", phase2_s},
                                       {"estimated_full_pssc_seconds", per_pair * full_pairs},
                                       {"estimated_seconds_saved", per_pair * full_pairs - phase2_s}});
    return result;
}

// ---------------------------------------------------------------------------
// Diagnostics

inline json cmd_diag(const RunConfig& c)
{
    c.validate();
    Timer timer;
    const auto d = load_or_simulate(c);
    const Grid grid = Grid::uniform(c.grid);
    const auto prior = c.prior();
    path::RunOptions ro;
    ro.workers = c.workers;
    ro.keep_chains = true;
    const RngStream s = path::replicate_stream(c.seed, 0);
    BfEstimate est;
    std::vector<factor::ChainSamples> chains;
    if (c.step < 0) {
        auto run = path::run_ps(d.data.y, c.h, grid, prior, c.m, c.burnin, s, ro);
        est = std::move(run.estimate);
        chains = std::move(run.chains);
    } else {
        const auto steps = path::pssc_steps(static_cast<int>(d.data.p()), c.h);
        if (std::find(steps.begin(), steps.end(), c.step) == steps.end())
            throw ConfigError("step " + std::to_string(c.step) + " is not a PS-SC step for h=" + std::to_string(c.h));
        chains.resize(grid.size());
        est = path::run_path(grid, c.workers, [&](std::size_t g) {
            auto r = path::estimate_Et(factor::TemperedTarget::pssc(c.h, c.step, grid[g]), d.data.y, c.h, prior, c.m,
                                       c.burnin, s.split(1000 + static_cast<std::uint64_t>(c.step)).split(g), ro.chain);
            chains[g] = std::move(r.chain);
            return r.summary;
        }, "pssc-step");
    }
    OutputDir out(c.out);
    const auto clusters = diag::write_figure_pack(out.root(), est, chains);
    for (const char* f : {"curve.csv", "clusters.csv", "acf.csv", "hist.csv", "trace.csv"})
        out.record(f);
    json result;
    result["method"] = c.step < 0 ? "ps" : "pssc-step";
    result["log_bf"] = est.log_bf;
    result["threshold"] = clusters.threshold;
    result["unimodal"] = clusters.unimodal;
    if (clusters.zone)
        result["conflict_zone"] = {clusters.zone->first, clusters.zone->second};
    else
        result["conflict_zone"] = nullptr;
    out.write_json("results.json", result);
    out.write_json("manifest.json", make_manifest("diag", c, out, d.info));
    out.write_json("timing.json", json{{"command", "diag"}, {"seconds", timer.seconds()}});
    return result;
}

} // namespace pathbf::cli
