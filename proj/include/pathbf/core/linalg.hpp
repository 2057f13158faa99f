#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "pathbf/core/errors.hpp"

namespace pathbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double log_two_pi = 1.8378770664093454835606594728112;

/// Lower-triangular Cholesky factor L with M = L L^T.
inline Matrix chol_decompose(const Matrix& m)
{
    if (m.rows() != m.cols())
        throw DomainError("chol_decompose: matrix is not square");
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("chol_decompose: matrix is not positive definite");
    Matrix l = llt.matrixL();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i)))
            throw NotPositiveDefinite("chol_decompose: non-positive pivot at " + std::to_string(i));
    }
    return l;
}

/// Symmetric positive definite matrix with its Cholesky factor cached.
class CovMatrix {
public:
    CovMatrix() = default;

    explicit CovMatrix(Matrix m) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols() || m_.rows() == 0)
            throw DomainError("CovMatrix: must be square and non-empty");
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw DomainError("CovMatrix: matrix is not symmetric");
        l_ = chol_decompose(m_);
    }

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    const Matrix& cholesky() const { return l_; }

    double log_det() const { return 2.0 * l_.diagonal().array().log().sum(); }

    /// x^T M^{-1} x through the cached factor.
    double quad_form(const Vector& x) const
    {
        const Vector z = l_.triangularView<Eigen::Lower>().solve(x);
        return z.squaredNorm();
    }

    Matrix inverse() const
    {
        const Matrix li = l_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
        return li.transpose() * li;
    }

private:
    Matrix m_;
    Matrix l_;
};

inline double mvn_logpdf(const Vector& y, const Vector& mean, const CovMatrix& cov)
{
    if (y.size() != cov.dim() || mean.size() != cov.dim())
        throw DomainError("mvn_logpdf: dimension mismatch");
    const double d = static_cast<double>(y.size());
    return -0.5 * (d * log_two_pi + cov.log_det() + cov.quad_form(y - mean));
}

/// Sum over the rows of Y of log N(y_i; 0, cov), via the scatter matrix.
inline double mvn_loglik_rows(const Matrix& y, const CovMatrix& cov)
{
    const double n = static_cast<double>(y.rows());
    const double d = static_cast<double>(cov.dim());
    const Matrix z = cov.cholesky().triangularView<Eigen::Lower>().solve(y.transpose());
    return -0.5 * (n * (d * log_two_pi + cov.log_det()) + z.squaredNorm());
}

/// log of the multivariate gamma function Gamma_p(a).
inline double log_multigamma(int p, double a)
{
    if (p < 1)
        throw DomainError("log_multigamma: p must be positive");
    if (!(a > 0.5 * (p - 1)))
        throw DomainError("log_multigamma: a must exceed (p-1)/2");
    double out = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
    for (int j = 1; j <= p; ++j)
        out += std::lgamma(a + 0.5 * (1 - j));
    return out;
}

inline double log_sum_exp(const Vector& v)
{
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx))
        return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

inline double log_mean_exp(const Vector& v)
{
    return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

} // namespace pathbf
