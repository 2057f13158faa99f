#pragma once

#include "pathbf/core/linalg.hpp"
#include "pathbf/factor/model.hpp"

namespace pathbf::path {

using factor::TemperedTarget;

/// d/dt of the tempered conditional log-likelihood at a fixed state:
/// sum_i (y_i - Lambda_t eta_i)^T Sigma^{-1} (dLambda_t/dt) eta_i.
inline double score(const Matrix& lambda, const Vector& sigma2, const Matrix& eta, const Matrix& y,
                    const TemperedTarget& target)
{
    if (target.path_kind == factor::PathKind::Gmp)
        return factor::loglik_conditional(y, lambda, sigma2, eta, target);
    const auto pat = factor::LoadingPattern::make(target, lambda.rows(), lambda.cols());
    const Matrix lt = lambda.cwiseProduct(pat.scale);
    const Eigen::Index hc = target.h - 1;
    Matrix dl = Matrix::Zero(lambda.rows(), lambda.cols());
    for (Eigen::Index j = hc; j < lambda.rows(); ++j) {
        if (pat.free(j, hc) && (!target.step_index || j == *target.step_index))
            dl(j, hc) = lambda(j, hc);
    }
    const Matrix resid = y - eta * lt.transpose();
    const Matrix deriv = eta * dl.transpose();
    double out = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        out += resid.col(j).dot(deriv.col(j)) / sigma2(j);
    return out;
}

/// Score on the parametric arithmetic mean path scaling column h by t.
inline double score_pamp(const Matrix& lambda, const Vector& sigma2, const Matrix& eta, const Matrix& y, double t,
                         int h)
{
    return score(lambda, sigma2, eta, y, TemperedTarget::pamp(h, t));
}

/// Score of step i: rows before i of column h held at zero, row i scaled by t.
inline double score_pssc_step(const Matrix& lambda, const Vector& sigma2, const Matrix& eta, const Matrix& y,
                              double t, int h, int i)
{
    return score(lambda, sigma2, eta, y, TemperedTarget::pssc(h, i, t));
}

/// Score on the geometric path: the untempered conditional log-likelihood.
inline double score_gmp(const Matrix& lambda, const Vector& sigma2, const Matrix& eta, const Matrix& y)
{
    return factor::loglik_conditional(y, lambda, sigma2, eta, TemperedTarget::posterior(static_cast<int>(lambda.cols())));
}

} // namespace pathbf::path
