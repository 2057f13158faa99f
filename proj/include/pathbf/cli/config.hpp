#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "pathbf/core/errors.hpp"
#include "pathbf/factor/model.hpp"

namespace pathbf::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* tool_version = "1.0.0";

/// Every setting of a command; the TOML file and the flags share these names.
struct RunConfig {
    std::string method = "pssc";
    std::string preset = "tables-2-3";
    int truth_k = 2;
    bool toy_dependent = true;
    std::string data;
    bool standardize = false;
    int n = 100;
    int h = 2;
    int h_max = 4;
    double grid = 0.01;
    int m = 6000;
    int burnin = 1000;
    int replicates = 10;
    double prior_df = 10.0;
    double t_scale = 1.0;
    double ig_shape = 1.0;
    double ig_rate = 0.2;
    bool sign_constraint = false;
    bool allow_low_df = false;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out = "out";
    double threshold = 0.0;
    int ais_sweeps = 1;
    std::vector<std::string> estimators{"pssc"};
    bool toy_induced = false;
    int step = -1; // diag: PS-SC step to inspect, -1 for PS

    factor::PriorSpec prior() const
    {
        factor::PriorSpec p;
        p.t_df = prior_df;
        p.t_scale = t_scale;
        p.ig_shape = ig_shape;
        p.ig_rate = ig_rate;
        p.sign_constraint = sign_constraint;
        p.allow_low_df = allow_low_df;
        return p;
    }

    void validate() const
    {
        static const std::set<std::string> methods{"ps", "pssc", "gmp", "is", "ais", "bicm", "bicim", "toy"};
        if (!methods.count(method))
            throw ConfigError("method '" + method + "' is not one of ps, pssc, gmp, is, ais, bicm, bicim, toy");
        for (const auto& e : estimators)
            if (!methods.count(e) || e == "toy")
                throw ConfigError("estimator '" + e + "' cannot be used for model selection");
        if (estimators.empty())
            throw ConfigError("estimators must name at least one method");
        if (!(grid > 0.0 && grid <= 1.0))
            throw ConfigError("grid must be a step in (0, 1], got " + std::to_string(grid));
        if (m < 1)
            throw ConfigError("m must be positive");
        if (burnin < 0)
            throw ConfigError("burnin must be non-negative");
        if (replicates < 1)
            throw ConfigError("replicates must be at least 1");
        if (n < 2)
            throw ConfigError("n must be at least 2");
        if (h < 1 || h_max < 2)
            throw ConfigError("h must be at least 1 and h_max at least 2");
        if (workers < 1)
            throw ConfigError("workers must be at least 1");
        if (ais_sweeps < 0)
            throw ConfigError("ais_sweeps must be non-negative");
        if (!(prior_df >= 1.0))
            throw ConfigError("prior_df must be at least 1 (use inf for the normal prior)");
        if (!(t_scale > 0.0 && ig_shape > 0.0 && ig_rate > 0.0))
            throw ConfigError("t_scale, ig_shape and ig_rate must be positive");
        const bool path = method == "ps" || method == "pssc"
            || std::find(estimators.begin(), estimators.end(), "ps") != estimators.end()
            || std::find(estimators.begin(), estimators.end(), "pssc") != estimators.end();
        if (path && prior_df < 5.0 && !allow_low_df)
            throw ConfigError("prior_df below 5 leaves the path score without finite variance; "
                              "pass --allow-low-df to run anyway");
    }
};

/// df as text: a number, or inf / normal for the normal limit.
inline double parse_df(const std::string& s)
{
    if (s == "inf" || s == "normal" || s == "infinity")
        return factor::infinite_df;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw ConfigError("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("prior_df must be a number, inf or normal; got '" + s + "'");
    }
}

inline std::string df_text(double df)
{
    if (std::isinf(df))
        return "inf";
    std::ostringstream os;
    os.precision(17);
    os << df;
    return os.str();
}

inline json to_json(const RunConfig& c)
{
    json j;
    j["method"] = c.method;
    j["preset"] = c.preset;
    j["truth_k"] = c.truth_k;
    j["toy_dependent"] = c.toy_dependent;
    j["data"] = c.data;
    j["standardize"] = c.standardize;
    j["n"] = c.n;
    j["h"] = c.h;
    j["h_max"] = c.h_max;
    j["grid"] = c.grid;
    j["m"] = c.m;
    j["burnin"] = c.burnin;
    j["replicates"] = c.replicates;
    j["prior_df"] = df_text(c.prior_df);
    j["t_scale"] = c.t_scale;
    j["ig_shape"] = c.ig_shape;
    j["ig_rate"] = c.ig_rate;
    j["sign_constraint"] = c.sign_constraint;
    j["allow_low_df"] = c.allow_low_df;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["out"] = c.out;
    j["threshold"] = c.threshold;
    j["ais_sweeps"] = c.ais_sweeps;
    j["estimators"] = c.estimators;
    j["toy_induced"] = c.toy_induced;
    j["step"] = c.step;
    return j;
}

namespace detail {

template <class T>
T toml_get(const toml::node& node, const std::string& key)
{
    if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.value<bool>())
            return *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.value<std::string>())
            return *v;
    } else if constexpr (std::is_integral_v<T>) {
        if (auto v = node.value<std::int64_t>()) {
            if (*v < 0 && std::is_unsigned_v<T>)
                throw ConfigError("config key '" + key + "' must be non-negative");
            return static_cast<T>(*v);
        }
    } else {
        if (auto v = node.value<double>())
            return static_cast<T>(*v);
    }
    throw ConfigError("config key '" + key + "' has the wrong type");
}

} // namespace detail

/// Overlays the keys of a TOML document on c. Unknown keys are errors.
inline void apply_toml(RunConfig& c, const toml::table& tbl)
{
    for (auto&& [k, node] : tbl) {
        const std::string key(k.str());
        using detail::toml_get;
        if (key == "method")
            c.method = toml_get<std::string>(node, key);
        else if (key == "preset")
            c.preset = toml_get<std::string>(node, key);
        else if (key == "truth_k")
            c.truth_k = toml_get<int>(node, key);
        else if (key == "toy_dependent")
            c.toy_dependent = toml_get<bool>(node, key);
        else if (key == "data")
            c.data = toml_get<std::string>(node, key);
        else if (key == "standardize")
            c.standardize = toml_get<bool>(node, key);
        else if (key == "n")
            c.n = toml_get<int>(node, key);
        else if (key == "h")
            c.h = toml_get<int>(node, key);
        else if (key == "h_max")
            c.h_max = toml_get<int>(node, key);
        else if (key == "grid")
            c.grid = toml_get<double>(node, key);
        else if (key == "m")
            c.m = toml_get<int>(node, key);
        else if (key == "burnin")
            c.burnin = toml_get<int>(node, key);
        else if (key == "replicates")
            c.replicates = toml_get<int>(node, key);
        else if (key == "prior_df")
            c.prior_df = node.is_string() ? parse_df(toml_get<std::string>(node, key)) : toml_get<double>(node, key);
        else if (key == "t_scale")
            c.t_scale = toml_get<double>(node, key);
        else if (key == "ig_shape")
            c.ig_shape = toml_get<double>(node, key);
        else if (key == "ig_rate")
            c.ig_rate = toml_get<double>(node, key);
        else if (key == "sign_constraint")
            c.sign_constraint = toml_get<bool>(node, key);
        else if (key == "allow_low_df")
            c.allow_low_df = toml_get<bool>(node, key);
        else if (key == "seed")
            c.seed = toml_get<std::uint64_t>(node, key);
        else if (key == "workers")
            c.workers = toml_get<unsigned>(node, key);
        else if (key == "out")
            c.out = toml_get<std::string>(node, key);
        else if (key == "threshold")
            c.threshold = toml_get<double>(node, key);
        else if (key == "ais_sweeps")
            c.ais_sweeps = toml_get<int>(node, key);
        else if (key == "toy_induced")
            c.toy_induced = toml_get<bool>(node, key);
        else if (key == "step")
            c.step = toml_get<int>(node, key);
        else if (key == "estimators") {
            const auto* arr = node.as_array();
            if (!arr)
                throw ConfigError("config key 'estimators' must be an array of strings");
            c.estimators.clear();
            for (auto&& e : *arr)
                c.estimators.push_back(toml_get<std::string>(e, key));
        } else
            throw ConfigError("unknown config key '" + key + "'");
    }
}

inline void apply_toml_file(RunConfig& c, const std::string& path)
{
    try {
        apply_toml(c, toml::parse_file(path));
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "cannot parse config " << path << ": " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(os.str());
    }
}

inline void apply_toml_string(RunConfig& c, std::string_view text)
{
    try {
        apply_toml(c, toml::parse(text));
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + std::string(e.description()));
    }
}

} // namespace pathbf::cli
