#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pathbf/core/errors.hpp"

namespace pathbf {

inline double mean(std::span<const double> x)
{
    if (x.empty())
        return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
inline double variance(std::span<const double> x)
{
    if (x.size() < 2)
        return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x)
        ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

inline void check_unit_grid(std::span<const double> ts)
{
    if (ts.size() < 2)
        throw GridError("grid needs at least two points");
    if (ts.front() != 0.0 || ts.back() != 1.0)
        throw GridError("grid must start at 0 and end at 1");
    for (std::size_t s = 1; s < ts.size(); ++s) {
        if (!(ts[s] > ts[s - 1]))
            throw GridError("grid must be strictly increasing");
    }
}

/// Trapezoid rule over a grid on [0, 1].
inline double trapezoid(std::span<const double> ts, std::span<const double> vals)
{
    check_unit_grid(ts);
    if (vals.size() != ts.size())
        throw GridError("trapezoid: values and grid differ in length");
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < ts.size(); ++s)
        acc += (ts[s + 1] - ts[s]) * (vals[s + 1] + vals[s]);
    return 0.5 * acc;
}

namespace detail {

struct Centered {
    std::vector<double> x;
    double ss = 0.0;
};

inline Centered center(std::span<const double> series)
{
    Centered c;
    const double m = mean(series);
    c.x.reserve(series.size());
    for (double v : series) {
        c.x.push_back(v - m);
        c.ss += (v - m) * (v - m);
    }
    return c;
}

inline double lag_product(const std::vector<double>& x, std::size_t lag)
{
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < x.size(); ++t)
        acc += x[t] * x[t + lag];
    return acc;
}

} // namespace detail

/// Sample autocorrelation at a lag (biased normalisation by the lag-0 sum).
inline double autocorr(std::span<const double> series, std::size_t lag)
{
    if (series.size() <= lag)
        throw DomainError("autocorr: series must be longer than the lag");
    if (lag == 0)
        return 1.0;
    const auto c = detail::center(series);
    if (!(c.ss > 0.0))
        throw DegenerateSeries("autocorr: constant series");
    return detail::lag_product(c.x, lag) / c.ss;
}

/// Effective sample size from Geyer's initial positive sequence.
///
/// Constant series return the nominal length.
inline double effective_sample_size(std::span<const double> series)
{
    const std::size_t n = series.size();
    if (n < 4)
        return static_cast<double>(n);
    const auto c = detail::center(series);
    if (!(c.ss > 0.0))
        return static_cast<double>(n);
    double tau = -1.0;
    for (std::size_t k = 0; 2 * k + 1 < n / 2; ++k) {
        const double pair = detail::lag_product(c.x, 2 * k) / c.ss + detail::lag_product(c.x, 2 * k + 1) / c.ss;
        if (pair <= 0.0)
            break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("linear_fit: need at least two paired points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw DomainError("linear_fit: constant regressor");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

} // namespace pathbf
