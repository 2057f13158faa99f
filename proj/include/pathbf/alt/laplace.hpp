#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/numerics.hpp"
#include "pathbf/factor/model.hpp"

namespace pathbf::alt {

/// Per-draw log(prior x likelihood) on posterior draws.
struct LogPlSample {
    std::vector<double> values;

    void validate() const
    {
        if (values.size() < 2)
            throw DomainError("LogPlSample: need at least two values");
        for (double v : values)
            if (!std::isfinite(v))
                throw DomainError("LogPlSample: non-finite value");
    }
};

/// log m ~ mean(l) - var(l) (log n - 1).
inline double bicm(const LogPlSample& s, double n)
{
    s.validate();
    if (!(n >= 2.0))
        throw DomainError("bicm: sample size must be at least 2");
    return mean(s.values) - variance(s.values) * (std::log(n) - 1.0);
}

struct MpleResult {
    Vector theta_hat;
    double log_pl_at_max = -std::numeric_limits<double>::infinity();
    Matrix hessian; // observed information, filled by bicim
    bool converged = false;
    int iterations = 0;
};

struct OptimOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;
    double fd_step = 1e-5;
};

namespace detail {

template <class F>
Vector num_gradient(const F& f, const Vector& x, double rel)
{
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index a = 0; a < x.size(); ++a) {
        const double h = rel * (1.0 + std::abs(x(a)));
        xp(a) = x(a) + h;
        const double fp = f(xp);
        xp(a) = x(a) - h;
        const double fm = f(xp);
        xp(a) = x(a);
        g(a) = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace detail

/// Quasi-Newton (BFGS) ascent of f from start with numerical gradients.
/// The returned value is never below f(start).
template <class F>
MpleResult maximize(const F& f, Vector start, const OptimOptions& opt = {})
{
    MpleResult r;
    Vector x = std::move(start);
    double fx = f(x);
    if (!std::isfinite(fx))
        throw DomainError("maximize: objective is not finite at the start");
    const Eigen::Index d = x.size();
    Matrix hinv = Matrix::Identity(d, d);
    Vector g = detail::num_gradient(f, x, opt.fd_step);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (g.norm() <= opt.grad_tol * (1.0 + std::abs(fx))) {
            r.converged = true;
            break;
        }
        Vector dir = hinv * g;
        if (dir.dot(g) <= 0.0) {
            hinv.setIdentity();
            dir = g;
        }
        double step = 1.0;
        Vector xn;
        double fn = -std::numeric_limits<double>::infinity();
        bool ok = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * dir;
            fn = f(xn);
            if (std::isfinite(fn) && fn >= fx + 1e-4 * step * g.dot(dir)) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok)
            break;
        const Vector gn = detail::num_gradient(f, xn, opt.fd_step);
        const Vector s = xn - x;
        const Vector yv = g - gn; // gradient of -f
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            const Vector hy = hinv * yv;
            const double rho = 1.0 / sy;
            hinv += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }
        const bool tiny = std::abs(fn - fx) <= 1e-13 * (1.0 + std::abs(fx));
        x = std::move(xn);
        fx = fn;
        g = gn;
        if (tiny) {
            r.converged = g.norm() <= 1e-3 * (1.0 + std::abs(fx));
            ++it;
            break;
        }
    }
    r.theta_hat = std::move(x);
    r.log_pl_at_max = fx;
    r.iterations = it;
    return r;
}

/// Starts from the best of the candidate points and maximises from there.
template <class F>
MpleResult find_mple(const F& f, const std::vector<Vector>& candidates, const OptimOptions& opt = {})
{
    if (candidates.empty())
        throw DomainError("find_mple: empty chain");
    std::size_t best = 0;
    double fb = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double v = f(candidates[i]);
        if (v > fb) {
            fb = v;
            best = i;
        }
    }
    MpleResult r = maximize(f, candidates[best], opt);
    if (!(r.log_pl_at_max >= fb)) {
        r.theta_hat = candidates[best];
        r.log_pl_at_max = fb;
    }
    return r;
}

/// Negative Hessian of f at theta by central second differences with
/// steps rel * (1 + |theta_a|).
template <class F>
Matrix observed_info(const F& f, const Vector& theta, double rel = 1e-4)
{
    const Eigen::Index d = theta.size();
    Vector h(d);
    for (Eigen::Index a = 0; a < d; ++a)
        h(a) = rel * (1.0 + std::abs(theta(a)));
    const double f0 = f(theta);
    Matrix hess(d, d);
    Vector x = theta;
    for (Eigen::Index a = 0; a < d; ++a) {
        x(a) = theta(a) + h(a);
        const double fp = f(x);
        x(a) = theta(a) - h(a);
        const double fm = f(x);
        x(a) = theta(a);
        hess(a, a) = (fp - 2.0 * f0 + fm) / (h(a) * h(a));
        for (Eigen::Index b = 0; b < a; ++b) {
            x(a) = theta(a) + h(a);
            x(b) = theta(b) + h(b);
            const double fpp = f(x);
            x(b) = theta(b) - h(b);
            const double fpm = f(x);
            x(a) = theta(a) - h(a);
            const double fmm = f(x);
            x(b) = theta(b) + h(b);
            const double fmp = f(x);
            x(a) = theta(a);
            x(b) = theta(b);
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h(a) * h(b));
            hess(a, b) = v;
            hess(b, a) = v;
        }
    }
    Matrix info = -hess;
    info = 0.5 * (info + info.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(info, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() >= 1e-10))
        throw SingularInformation("observed information is not positive definite");
    return info;
}

/// log f(theta) + (q/2) log 2 pi - (1/2) log |H| at the maximiser.
inline double laplace_log_marginal(double log_pl_at_max, const Matrix& info)
{
    const CovMatrix h(info);
    return log_pl_at_max + 0.5 * static_cast<double>(info.rows()) * log_two_pi - 0.5 * h.log_det();
}

/// Maximises f from the best candidate and applies the Laplace approximation
/// with the full observed information.
template <class F>
double bicim(const F& f, const std::vector<Vector>& candidates, MpleResult* out = nullptr,
             const OptimOptions& opt = {})
{
    MpleResult r = find_mple(f, candidates, opt);
    r.hessian = observed_info(f, r.theta_hat);
    const double v = laplace_log_marginal(r.log_pl_at_max, r.hessian);
    if (out)
        *out = std::move(r);
    return v;
}

/// Factor model on (free loadings, log sigma^2) coordinates.
///
/// log_pl includes the log-Jacobian of the variance transform, so its
/// integral over theta is the marginal likelihood.
class FactorLaplaceModel {
public:
    FactorLaplaceModel(const Matrix& y, int k, factor::PriorSpec prior)
        : y_(y), scatter_(y.transpose() * y), k_(k), prior_(prior)
    {
        if (k < 1 || k > y.cols())
            throw DomainError("FactorLaplaceModel: k out of range");
    }

    int p() const { return static_cast<int>(y_.cols()); }
    int k() const { return k_; }
    double n() const { return static_cast<double>(y_.rows()); }
    int dim() const { return factor::num_free_params(p(), k_); }

    Vector pack(const Matrix& lambda, const Vector& sigma2) const
    {
        Vector th(dim());
        Eigen::Index a = 0;
        for (int l = 0; l < k_; ++l)
            for (int j = l; j < p(); ++j)
                th(a++) = lambda(j, l);
        for (int j = 0; j < p(); ++j)
            th(a++) = std::log(sigma2(j));
        return th;
    }

    void unpack(const Vector& th, Matrix& lambda, Vector& sigma2) const
    {
        lambda = Matrix::Zero(p(), k_);
        sigma2.resize(p());
        Eigen::Index a = 0;
        for (int l = 0; l < k_; ++l)
            for (int j = l; j < p(); ++j)
                lambda(j, l) = th(a++);
        for (int j = 0; j < p(); ++j)
            sigma2(j) = std::exp(std::max(th(a++), std::log(1e-8)));
    }

    double loglik(const Vector& th) const
    {
        Matrix lambda;
        Vector sigma2;
        unpack(th, lambda, sigma2);
        return loglik(lambda, sigma2);
    }

    double loglik(const Matrix& lambda, const Vector& sigma2) const
    {
        Matrix omega = lambda * lambda.transpose();
        omega.diagonal() += sigma2;
        Eigen::LLT<Matrix> llt(omega);
        if (llt.info() != Eigen::Success)
            return -std::numeric_limits<double>::infinity();
        const Matrix l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        return -0.5 * (n() * (static_cast<double>(p()) * log_two_pi + logdet) + llt.solve(scatter_).trace());
    }

    double log_pl(const Vector& th) const
    {
        Matrix lambda;
        Vector sigma2;
        unpack(th, lambda, sigma2);
        const double lp = factor::log_prior_loadings(lambda, prior_);
        if (!std::isfinite(lp))
            return -std::numeric_limits<double>::infinity();
        return loglik(lambda, sigma2) + lp + factor::log_prior_variances(sigma2, prior_) + sigma2.array().log().sum();
    }

    double operator()(const Vector& th) const { return log_pl(th); }

private:
    Matrix y_;
    Matrix scatter_;
    int k_;
    factor::PriorSpec prior_;
};

} // namespace pathbf::alt
