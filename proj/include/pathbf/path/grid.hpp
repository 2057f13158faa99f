#pragma once

#include <cmath>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/numerics.hpp"

namespace pathbf::path {

/// Ordered points 0 = t_0 < ... < t_K = 1.
class Grid {
public:
    static Grid uniform(double step)
    {
        if (!(step > 0.0) || step > 1.0)
            throw GridError("grid step must lie in (0, 1]");
        const long intervals = std::lround(1.0 / step);
        if (intervals < 1 || std::abs(static_cast<double>(intervals) * step - 1.0) > 1e-9)
            throw GridError("grid step must divide 1");
        Grid g;
        g.step_ = step;
        g.points_.resize(static_cast<std::size_t>(intervals) + 1);
        for (long s = 0; s <= intervals; ++s)
            g.points_[static_cast<std::size_t>(s)] = static_cast<double>(s) / static_cast<double>(intervals);
        return g;
    }

    static Grid from_points(std::vector<double> pts)
    {
        check_unit_grid(pts);
        Grid g;
        g.points_ = std::move(pts);
        return g;
    }

    const std::vector<double>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }

    /// Uniform step, or 0 for an explicit list.
    double step() const { return step_; }

private:
    std::vector<double> points_;
    double step_ = 0.0;
};

} // namespace pathbf::path
