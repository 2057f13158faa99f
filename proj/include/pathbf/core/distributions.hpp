#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <variant>

#include <boost/math/special_functions/erf.hpp>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/rng.hpp"

namespace pathbf {

struct Normal {
    double mean = 0.0;
    double sd = 1.0;
};

/// Normal restricted to [lower, inf).
struct TruncatedNormal {
    double mean = 0.0;
    double sd = 1.0;
    double lower = 0.0;
};

struct Gamma {
    double shape = 1.0;
    double rate = 1.0;
};

/// Density proportional to x^{-shape-1} exp(-scale / x).
struct InverseGamma {
    double shape = 1.0;
    double scale = 1.0;
};

/// Student t; df = infinity is the normal limit.
struct StudentT {
    double df = 1.0;
    double loc = 0.0;
    double scale = 1.0;
};

struct Wishart {
    double df = 1.0;
    Matrix scale;
};

struct InverseWishart {
    double df = 1.0;
    Matrix scale;
};

using DistSpec = std::variant<Normal, TruncatedNormal, Gamma, InverseGamma, StudentT, Wishart, InverseWishart>;
using Sample = std::variant<double, Matrix>;

namespace detail {

inline void require(bool ok, const char* what)
{
    if (!ok)
        throw DomainError(what);
}

inline void validate_scale_matrix(const Matrix& s, double df)
{
    require(s.rows() == s.cols() && s.rows() > 0, "matrix scale must be square");
    require(df > static_cast<double>(s.rows()) - 1.0, "Wishart-family df must exceed dim - 1");
    (void)chol_decompose(s);
}

} // namespace detail

inline void validate(const DistSpec& spec)
{
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Normal> || std::is_same_v<T, TruncatedNormal>) {
                detail::require(d.sd > 0.0 && std::isfinite(d.mean), "normal sd must be positive");
            } else if constexpr (std::is_same_v<T, Gamma>) {
                detail::require(d.shape > 0.0 && d.rate > 0.0, "gamma parameters must be positive");
            } else if constexpr (std::is_same_v<T, InverseGamma>) {
                detail::require(d.shape > 0.0 && d.scale > 0.0, "inverse-gamma parameters must be positive");
            } else if constexpr (std::is_same_v<T, StudentT>) {
                detail::require(d.df >= 1.0 && d.scale > 0.0, "student-t needs df >= 1 and scale > 0");
            } else {
                detail::validate_scale_matrix(d.scale, d.df);
            }
        },
        spec);
}

inline double draw(const Normal& d, RngStream& rng) { return d.mean + d.sd * rng.normal(); }

/// Inverse-CDF when the bound is within 5 sd of the mean, exponential
/// rejection further out in the tail.
inline double draw(const TruncatedNormal& d, RngStream& rng)
{
    const double alpha = (d.lower - d.mean) / d.sd;
    double z;
    if (alpha < 5.0) {
        const double tail = 0.5 * boost::math::erfc(alpha / std::numbers::sqrt2);
        const double v = rng.uniform() * tail;
        z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * v);
        if (z < alpha)
            z = alpha;
    } else {
        const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
        for (;;) {
            z = alpha - std::log(rng.uniform()) / rate;
            const double e = z - rate;
            if (rng.uniform() <= std::exp(-0.5 * e * e))
                break;
        }
    }
    return d.mean + d.sd * z;
}

inline double draw(const Gamma& d, RngStream& rng) { return rng.gamma(d.shape, d.rate); }

inline double draw(const InverseGamma& d, RngStream& rng) { return 1.0 / rng.gamma(d.shape, d.scale); }

/// Scale mixture of normals: z / sqrt(g / df) with g ~ chi^2_df.
inline double draw(const StudentT& d, RngStream& rng)
{
    const double z = rng.normal();
    if (std::isinf(d.df))
        return d.loc + d.scale * z;
    const double g = rng.chi_squared(d.df);
    return d.loc + d.scale * z / std::sqrt(g / d.df);
}

/// Bartlett decomposition.
inline Matrix draw(const Wishart& d, RngStream& rng)
{
    const Eigen::Index p = d.scale.rows();
    const Matrix l = chol_decompose(d.scale);
    Matrix a = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        a(i, i) = std::sqrt(rng.chi_squared(d.df - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j)
            a(i, j) = rng.normal();
    }
    const Matrix la = l * a;
    Matrix w = la * la.transpose();
    return 0.5 * (w + w.transpose());
}

inline Matrix draw(const InverseWishart& d, RngStream& rng)
{
    const CovMatrix psi(d.scale);
    const Matrix w = draw(Wishart{d.df, psi.inverse()}, rng);
    const Matrix out = CovMatrix(0.5 * (w + w.transpose())).inverse();
    return 0.5 * (out + out.transpose());
}

inline Sample draw(const DistSpec& spec, RngStream& rng)
{
    validate(spec);
    return std::visit([&rng](const auto& d) -> Sample { return draw(d, rng); }, spec);
}

// ---------------------------------------------------------------------------
// log densities

inline double log_pdf(const Normal& d, double x)
{
    const double z = (x - d.mean) / d.sd;
    return -0.5 * (log_two_pi + z * z) - std::log(d.sd);
}

inline double log_pdf(const InverseGamma& d, double x)
{
    if (!(x > 0.0))
        return -std::numeric_limits<double>::infinity();
    return d.shape * std::log(d.scale) - std::lgamma(d.shape) - (d.shape + 1.0) * std::log(x) - d.scale / x;
}

inline double log_pdf(const Gamma& d, double x)
{
    if (!(x > 0.0))
        return -std::numeric_limits<double>::infinity();
    return d.shape * std::log(d.rate) - std::lgamma(d.shape) + (d.shape - 1.0) * std::log(x) - d.rate * x;
}

inline double log_pdf(const StudentT& d, double x)
{
    const double z = (x - d.loc) / d.scale;
    if (std::isinf(d.df))
        return -0.5 * (log_two_pi + z * z) - std::log(d.scale);
    const double v = d.df;
    return std::lgamma(0.5 * (v + 1.0)) - std::lgamma(0.5 * v) - 0.5 * std::log(v * std::numbers::pi)
        - std::log(d.scale) - 0.5 * (v + 1.0) * std::log1p(z * z / v);
}

/// Multivariate t with df, zero location and covariance scale^2 I.
inline double log_pdf_mvt(const Vector& x, double df, double scale)
{
    const double d = static_cast<double>(x.size());
    if (x.size() == 0)
        return 0.0;
    const double r2 = x.squaredNorm() / (scale * scale);
    if (std::isinf(df))
        return -0.5 * d * log_two_pi - d * std::log(scale) - 0.5 * r2;
    return std::lgamma(0.5 * (df + d)) - std::lgamma(0.5 * df) - 0.5 * d * std::log(df * std::numbers::pi)
        - d * std::log(scale) - 0.5 * (df + d) * std::log1p(r2 / df);
}

inline double log_pdf(const InverseWishart& d, const Matrix& sigma)
{
    const double p = static_cast<double>(sigma.rows());
    const CovMatrix s(sigma);
    const CovMatrix psi(d.scale);
    const double tr = (psi.matrix() * s.inverse()).trace();
    return 0.5 * d.df * psi.log_det() - 0.5 * d.df * p * std::numbers::ln2
        - log_multigamma(static_cast<int>(p), 0.5 * d.df) - 0.5 * (d.df + p + 1.0) * s.log_det() - 0.5 * tr;
}

inline double log_pdf(const Wishart& d, const Matrix& w)
{
    const double p = static_cast<double>(w.rows());
    const CovMatrix sw(w);
    const CovMatrix v(d.scale);
    const double tr = (v.inverse() * sw.matrix()).trace();
    return 0.5 * (d.df - p - 1.0) * sw.log_det() - 0.5 * tr - 0.5 * d.df * p * std::numbers::ln2
        - 0.5 * d.df * v.log_det() - log_multigamma(static_cast<int>(p), 0.5 * d.df);
}

} // namespace pathbf
