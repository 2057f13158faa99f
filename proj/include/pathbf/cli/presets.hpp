#pragma once

#include <string>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/toy/covariance.hpp"

namespace pathbf::cli {

/// Generating parameters of a factor model.
struct FactorPreset {
    std::string name;
    Matrix lambda;
    Vector sigma2;

    int p() const { return static_cast<int>(lambda.rows()); }
    int k() const { return static_cast<int>(lambda.cols()); }

    /// Copy with every column beyond truth_k set to zero; sigma2 unchanged.
    FactorPreset truncated(int truth_k) const
    {
        if (truth_k < 0 || truth_k > k())
            throw ConfigError("truth_k must lie in [0, " + std::to_string(k()) + "] for preset " + name);
        FactorPreset out = *this;
        out.lambda.rightCols(k() - truth_k).setZero();
        return out;
    }
};

inline Matrix table2_loadings()
{
    Matrix l(7, 2);
    l << .89, 0, 0, .9, .25, .25, 0, .4, .8, 0, 0, .5, .5, 0;
    return l;
}

/// Diagonal of Sigma, model 1 to 3; model 1 equals the tables-2-3 values.
inline Vector table8_sigma2(int model)
{
    Vector s(7);
    switch (model) {
    case 1:
        s << .2079, .19, .15, .2, .36, .1875, .1875;
        break;
    case 2:
        s << .553, .52, .48, .54, .409, .55, .54;
        break;
    case 3:
        s << .73, .71, .67, .7, .599, .67, .72;
        break;
    default:
        throw ConfigError("table-8 model must be 1, 2 or 3");
    }
    return s;
}

inline Vector table3_sigma2() { return table8_sigma2(1); }

/// p = 20, three factors on separate variable groups.
inline FactorPreset p20_design()
{
    Matrix l = Matrix::Zero(20, 3);
    const double c1[] = {.9, .8, .7, .85, .75, .8, .9, .7};
    for (int j = 0; j < 8; ++j)
        l(j, 0) = c1[j];
    l(1, 1) = .6;
    const double c2[] = {.85, .8, .9, .75, .8, .7};
    for (int j = 0; j < 6; ++j)
        l(8 + j, 1) = c2[j];
    l(2, 2) = .5;
    const double c3[] = {.8, .9, .75, .85, .7, .8};
    for (int j = 0; j < 6; ++j)
        l(14 + j, 2) = c3[j];
    l(8, 0) = .3;
    l(14, 1) = .3;
    Vector s(20);
    for (int j = 0; j < 20; ++j)
        s(j) = .2 + .05 * (j % 5);
    return {"p20", l, s};
}

/// Known preset names: tables-2-3, table-8-model-{1,2,3}, p20.
inline FactorPreset factor_preset(const std::string& name)
{
    if (name == "tables-2-3")
        return {name, table2_loadings(), table3_sigma2()};
    for (int m = 1; m <= 3; ++m)
        if (name == "table-8-model-" + std::to_string(m))
            return {name, table2_loadings(), table8_sigma2(m)};
    if (name == "p20")
        return p20_design();
    throw ConfigError("unknown factor preset '" + name
                      + "' (expected tables-2-3, table-8-model-1, table-8-model-2, table-8-model-3, p20, or a3)");
}

inline std::vector<std::string> preset_names()
{
    return {"tables-2-3", "table-8-model-1", "table-8-model-2", "table-8-model-3", "p20", "a3"};
}

/// Toy preset: p = 10 split after 7.
struct ToyPreset {
    Matrix sigma;
    toy::BlockSpec spec{10, 7};
};

/// dependent = false gives the block-diagonal part of the appendix matrix.
inline ToyPreset a3_preset(bool dependent)
{
    ToyPreset t;
    t.sigma = dependent ? toy::toy_sigma0() : toy::block_diagonal(toy::toy_sigma0(), 7);
    return t;
}

} // namespace pathbf::cli
