#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathbf/cli/commands.hpp"

using namespace pathbf;
using namespace pathbf::cli;

namespace {

/// Flags of one subcommand; only flags given on the command line override
/// the manifest and config file.
class Flags {
public:
    explicit Flags(CLI::App* app) : app_(app)
    {
        app_->set_help_flag("--help", "print this help and exit");
        app_->add_option("--config", config_file_, "TOML file with any of the settings below");
        app_->add_option("--manifest", manifest_file_, "manifest.json of an earlier run to repeat");
        add("--method", &RunConfig::method, "ps | pssc | gmp | is | ais | bicm | bicim | toy");
        add("--preset", &RunConfig::preset, "tables-2-3 | table-8-model-{1,2,3} | p20 | a3");
        add("--truth-k", &RunConfig::truth_k, "factors kept when simulating from a factor preset");
        add("--data", &RunConfig::data, "CSV data file, rows are observations");
        add("--n", &RunConfig::n, "rows to simulate");
        add("--h", &RunConfig::h, "larger model of the comparison h vs h-1");
        add("--h-max", &RunConfig::h_max, "largest model for select and screen");
        add("--grid", &RunConfig::grid, "uniform grid step");
        add("--m", &RunConfig::m, "retained draws per chain");
        add("--burnin", &RunConfig::burnin, "discarded draws per chain");
        add("--replicates", &RunConfig::replicates, "independent full runs");
        add("--t-scale", &RunConfig::t_scale, "scale of the t prior on loadings");
        add("--ig-shape", &RunConfig::ig_shape, "inverse-gamma shape for variances");
        add("--ig-rate", &RunConfig::ig_rate, "inverse-gamma rate for variances");
        add("--seed", &RunConfig::seed, "master seed");
        add("--workers", &RunConfig::workers, "worker threads");
        add("--out", &RunConfig::out, "output directory");
        add("--threshold", &RunConfig::threshold, "log BF threshold for model choice");
        add("--ais-sweeps", &RunConfig::ais_sweeps, "Gibbs sweeps per AIS rung");
        add("--step", &RunConfig::step, "diag: PS-SC step to inspect, -1 for PS");
        flag("--standardize", &RunConfig::standardize, "standardize data columns");
        flag("--sign-constraint", &RunConfig::sign_constraint, "folded-t prior on diagonal loadings");
        flag("--allow-low-df", &RunConfig::allow_low_df, "allow prior df below 5 for path sampling");
        flag("--toy-induced", &RunConfig::toy_induced, "toy: also estimate the t = 0 normaliser");
        auto* ind = app_->add_flag("--toy-independent", toy_independent_, "toy: simulate block-independent data");
        apply_.emplace_back(ind, [this](RunConfig& c) { c.toy_dependent = !toy_independent_; });
        auto* df = app_->add_option("--prior-df", prior_df_, "t prior df, or inf for the normal prior");
        apply_.emplace_back(df, [this](RunConfig& c) { c.prior_df = parse_df(prior_df_); });
        auto* est = app_->add_option("--estimators", estimators_, "comma-separated estimators for select")
                        ->delimiter(',');
        apply_.emplace_back(est, [this](RunConfig& c) { c.estimators = estimators_; });
    }

    RunConfig resolve() const
    {
        RunConfig c;
        if (!manifest_file_.empty()) {
            std::ifstream f(manifest_file_);
            if (!f)
                throw ConfigError("cannot open manifest " + manifest_file_);
            json j;
            try {
                f >> j;
            } catch (const json::exception& e) {
                throw ConfigError("cannot parse manifest " + manifest_file_ + ": " + e.what());
            }
            c = config_from_manifest(j);
        }
        if (!config_file_.empty())
            apply_toml_file(c, config_file_);
        for (const auto& [opt, fn] : apply_)
            if (opt->count() > 0)
                fn(c);
        return c;
    }

private:
    template <class T>
    void add(const std::string& name, T RunConfig::*member, const std::string& desc)
    {
        auto* o = app_->add_option(name, values_.*member, desc);
        apply_.emplace_back(o, [this, member](RunConfig& c) { c.*member = values_.*member; });
    }

    void flag(const std::string& name, bool RunConfig::*member, const std::string& desc)
    {
        auto* o = app_->add_flag(name, values_.*member, desc);
        apply_.emplace_back(o, [this, member](RunConfig& c) { c.*member = values_.*member; });
    }

    CLI::App* app_;
    RunConfig values_;
    std::string config_file_, manifest_file_, prior_df_;
    bool toy_independent_ = false;
    std::vector<std::string> estimators_;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> apply_;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Log Bayes factors for nested factor models by path sampling"};
    app.set_help_flag("-h,--help", "print this help and exit");
    app.require_subcommand(1);
    struct Sub {
        CLI::App* app;
        std::unique_ptr<Flags> flags;
        std::function<json(const RunConfig&)> run;
    };
    std::vector<Sub> subs;
    auto add = [&](const char* name, const char* desc, std::function<json(const RunConfig&)> fn) {
        auto* sc = app.add_subcommand(name, desc);
        subs.push_back({sc, std::make_unique<Flags>(sc), std::move(fn)});
    };
    add("simulate", "simulate a dataset from a preset", cmd_simulate);
    add("ingest", "read and optionally standardize a CSV dataset", cmd_ingest);
    add("run", "estimate one log Bayes factor or toy run", cmd_run);
    add("select", "choose the number of factors by sequential Bayes factors", cmd_select);
    add("screen", "screen with BICM/BICIM, then confirm with PS-SC", cmd_screen);
    add("diag", "write the chain diagnostics tables of one path run", cmd_diag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        for (auto& s : subs) {
            if (!s.app->parsed())
                continue;
            const RunConfig c = s.flags->resolve();
            const json result = s.run(c);
            std::cout << result.dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const GridError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
