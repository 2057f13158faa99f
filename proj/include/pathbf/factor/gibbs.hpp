#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pathbf/core/distributions.hpp"
#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/rng.hpp"
#include "pathbf/factor/model.hpp"

namespace pathbf::factor {

/// Sampler state on the working scale.
///
/// Working loadings carry N(0, s^2) priors, working factors N(0, psi_l) and
/// psi_l ~ IG(df/2, df/2). The model quantities are Lambda = Lambda* diag(sqrt psi)
/// and eta = eta* diag(1/sqrt psi), so Lambda eta^T is unchanged by psi and
/// each column of Lambda has a multivariate t prior over its free entries.
struct FactorState {
    Matrix loadings_star; // p x k
    Matrix factors_star;  // n x k
    Vector psi;           // k
    Vector sigma2;        // p

    Matrix loadings() const { return loadings_star * psi.array().sqrt().matrix().asDiagonal(); }
    Matrix factors() const { return factors_star * psi.array().rsqrt().matrix().asDiagonal(); }
};

/// Main stream for the conjugate blocks and a separate one for the expansion
/// parameters, so chains at different prior df share their other draws.
struct SweepStreams {
    RngStream main;
    RngStream expansion;

    static SweepStreams from(const RngStream& s) { return SweepStreams{s.split(2), s.split(3)}; }
};

/// Quantities of the state after a sweep.
struct SweepStats {
    double score = 0.0;   // d/dt of the tempered conditional log-likelihood
    double loglik = 0.0;  // tempered conditional log-likelihood (power 1)
};

namespace detail {

/// eta*_i ~ N(Q^{-1} tau Lt^T Sigma^{-1} y_i, Q^{-1}), Q = diag(1/psi) + tau Lt^T Sigma^{-1} Lt.
inline Matrix draw_factors_working(const Matrix& lt, const Vector& sigma2, const Vector& psi, double tau,
                                   const Matrix& y, RngStream& rng)
{
    const Eigen::Index n = y.rows();
    const Eigen::Index k = lt.cols();
    const Vector prec = sigma2.cwiseInverse();
    const Matrix ws = prec.asDiagonal() * lt; // Sigma^{-1} Lt
    Matrix q = tau * (lt.transpose() * ws);
    q.diagonal() += psi.cwiseInverse();
    Eigen::LLT<Matrix> llt(q);
    if (llt.info() != Eigen::Success)
        throw NumericalBreakdown("factor conditional precision is not positive definite");
    Matrix rhs(k, n);
    if (n > 0)
        rhs.noalias() = tau * (ws.transpose() * y.transpose());
    const auto l = llt.matrixL();
    l.solveInPlace(rhs);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < k; ++a)
            rhs(a, i) += rng.normal();
    llt.matrixU().solveInPlace(rhs);
    return rhs.transpose();
}

/// One row of working loadings given the factors.
inline void draw_loading_row(Eigen::Index j, Matrix& lstar, const LoadingPattern& pat, const Matrix& g,
                             const Matrix& h, double sigma2_j, double tau, const PriorSpec& prior, RngStream& rng)
{
    const Eigen::Index k = lstar.cols();
    Eigen::Index idx[64];
    Eigen::Index d = 0;
    for (Eigen::Index l = 0; l < k && l <= j; ++l) {
        if (pat.free(j, l))
            idx[d++] = l;
        else
            lstar(j, l) = 0.0;
    }
    for (Eigen::Index l = j + 1; l < k; ++l)
        lstar(j, l) = 0.0;
    if (d == 0)
        return;

    const double w = tau / sigma2_j;
    const double prior_prec = 1.0 / (prior.t_scale * prior.t_scale);
    Matrix p(d, d);
    Vector b(d);
    for (Eigen::Index a = 0; a < d; ++a) {
        const double ca = pat.scale(j, idx[a]);
        b(a) = w * ca * h(idx[a], j);
        for (Eigen::Index c = 0; c <= a; ++c) {
            const double v = w * ca * pat.scale(j, idx[c]) * g(idx[a], idx[c]);
            p(a, c) = v;
            p(c, a) = v;
        }
        p(a, a) += prior_prec;
    }
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success)
        throw NumericalBreakdown("loading conditional precision is not positive definite");
    const Vector mu = llt.solve(b);

    const bool folded = prior.sign_constraint && j < k && idx[d - 1] == j;
    Vector x(d);
    if (!folded) {
        Vector z(d);
        for (Eigen::Index a = 0; a < d; ++a)
            z(a) = rng.normal();
        x = mu + llt.matrixU().solve(z);
    } else {
        // Diagonal from its truncated marginal, then the rest given it.
        const Eigen::Index last = d - 1;
        Vector e = Vector::Zero(d);
        e(last) = 1.0;
        const double v = llt.solve(e)(last);
        x(last) = draw(TruncatedNormal{mu(last), std::sqrt(v), 0.0}, rng);
        if (last > 0) {
            const Matrix paa = p.topLeftCorner(last, last);
            Eigen::LLT<Matrix> llta(paa);
            if (llta.info() != Eigen::Success)
                throw NumericalBreakdown("loading conditional precision is not positive definite");
            const Vector cmean =
                mu.head(last) - llta.solve(p.col(last).head(last)) * (x(last) - mu(last));
            Vector z(last);
            for (Eigen::Index a = 0; a < last; ++a)
                z(a) = rng.normal();
            x.head(last) = cmean + llta.matrixU().solve(z);
        }
    }
    for (Eigen::Index a = 0; a < d; ++a)
        lstar(j, idx[a]) = x(a);
}

} // namespace detail

/// eta | Lambda, Sigma, Y for the untempered model with standard normal factors.
inline Matrix draw_factors(const Matrix& lambda, const Vector& sigma2, const Matrix& y, RngStream& rng)
{
    return detail::draw_factors_working(lambda, sigma2, Vector::Ones(lambda.cols()), 1.0, y, rng);
}

/// sigma_j^2 | Lambda, eta, Y ~ IG(a + n/2, b + RSS_j / 2).
inline Vector draw_precisions(const Matrix& lambda, const Matrix& eta, const Matrix& y, const PriorSpec& prior,
                              RngStream& rng)
{
    const Eigen::Index p = lambda.rows();
    const double n = static_cast<double>(y.rows());
    Vector out(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double ss = y.rows() > 0 ? (y.col(j) - eta * lambda.row(j).transpose()).squaredNorm() : 0.0;
        out(j) = draw(InverseGamma{prior.ig_shape + 0.5 * n, prior.ig_rate + 0.5 * ss}, rng);
    }
    return out;
}

/// Initial state drawn from the prior (structural and held zeros respected).
inline FactorState init_state(Eigen::Index p, Eigen::Index k, Eigen::Index n, const LoadingPattern& pat,
                              const PriorSpec& prior, SweepStreams& rs)
{
    FactorState s;
    s.psi = Vector::Ones(k);
    if (!prior.is_normal()) {
        for (Eigen::Index l = 0; l < k; ++l)
            s.psi(l) = draw(InverseGamma{0.5 * prior.t_df, 0.5 * prior.t_df}, rs.expansion);
    }
    s.loadings_star = Matrix::Zero(p, k);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index l = 0; l < k && l <= j; ++l) {
            if (!pat.free(j, l))
                continue;
            double v = prior.t_scale * rs.main.normal();
            if (prior.sign_constraint && j == l)
                v = std::abs(v);
            s.loadings_star(j, l) = v;
        }
    }
    s.sigma2.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
        s.sigma2(j) = draw(InverseGamma{prior.ig_shape, prior.ig_rate}, rs.main);
    s.factors_star.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index l = 0; l < k; ++l)
            s.factors_star(i, l) = std::sqrt(s.psi(l)) * rs.main.normal();
    return s;
}

/// One parameter-expanded Gibbs sweep under a tempered target.
///
/// Order: factors, loading rows, variances, expansion parameters. Entries
/// whose multiplier is zero are drawn from their prior.
inline SweepStats gibbs_sweep(FactorState& s, const Matrix& y, const TemperedTarget& target, const LoadingPattern& pat,
                              const PriorSpec& prior, SweepStreams& rs)
{
    const Eigen::Index n = y.rows();
    const Eigen::Index p = y.cols();
    const Eigen::Index k = s.loadings_star.cols();
    const double tau = target.likelihood_power();

    Matrix lt = s.loadings_star.cwiseProduct(pat.scale);
    s.factors_star = detail::draw_factors_working(lt, s.sigma2, s.psi, tau, y, rs.main);

    Matrix g = Matrix::Zero(k, k);
    Matrix h = Matrix::Zero(k, p);
    if (n > 0) {
        g.noalias() = s.factors_star.transpose() * s.factors_star;
        h.noalias() = s.factors_star.transpose() * y;
    }
    for (Eigen::Index j = 0; j < p; ++j)
        detail::draw_loading_row(j, s.loadings_star, pat, g, h, s.sigma2(j), tau, prior, rs.main);

    lt = s.loadings_star.cwiseProduct(pat.scale);
    Matrix resid = y;
    if (n > 0)
        resid.noalias() -= s.factors_star * lt.transpose();
    Vector ss(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        ss(j) = resid.col(j).squaredNorm();
        s.sigma2(j) = draw(InverseGamma{prior.ig_shape + 0.5 * tau * static_cast<double>(n),
                                        prior.ig_rate + 0.5 * tau * ss(j)},
                           rs.main);
        if (!(s.sigma2(j) > 0.0) || !std::isfinite(s.sigma2(j)))
            throw NumericalBreakdown("variance draw left the positive reals");
    }

    if (!prior.is_normal()) {
        for (Eigen::Index l = 0; l < k; ++l) {
            const double q = n > 0 ? s.factors_star.col(l).squaredNorm() : 0.0;
            s.psi(l) = draw(InverseGamma{0.5 * (prior.t_df + static_cast<double>(n)), 0.5 * (prior.t_df + q)},
                            rs.expansion);
        }
    }

    SweepStats st;
    const double nn = static_cast<double>(n);
    for (Eigen::Index j = 0; j < p; ++j)
        st.loglik += -0.5 * nn * (log_two_pi + std::log(s.sigma2(j))) - 0.5 * ss(j) / s.sigma2(j);
    if (target.path_kind == PathKind::Gmp) {
        st.score = st.loglik;
    } else if (n > 0) {
        const Eigen::Index hc = target.h - 1;
        const Vector re = resid.transpose() * s.factors_star.col(hc);
        for (Eigen::Index j = hc; j < p; ++j) {
            if (pat.free(j, hc) && (!target.step_index || j == *target.step_index))
                st.score += s.loadings_star(j, hc) * re(j) / s.sigma2(j);
        }
    }
    return st;
}

inline SweepStats gibbs_sweep(FactorState& s, const Matrix& y, const TemperedTarget& target, const PriorSpec& prior,
                              SweepStreams& rs)
{
    return gibbs_sweep(s, y, target, LoadingPattern::make(target, y.cols(), s.loadings_star.cols()), prior, rs);
}

/// Log-likelihood with factors integrated out, at Omega_t = Lambda_t Lambda_t^T + Sigma.
inline double tempered_marginal_loglik(const FactorState& s, const LoadingPattern& pat, const Matrix& scatter,
                                       Eigen::Index n)
{
    const Matrix lt = s.loadings().cwiseProduct(pat.scale);
    Matrix omega = lt * lt.transpose();
    omega.diagonal() += s.sigma2;
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success)
        throw NumericalBreakdown("marginal covariance is not positive definite");
    const Matrix lm = llt.matrixL();
    const double logdet = 2.0 * lm.diagonal().array().log().sum();
    const double tr = llt.solve(scatter).trace();
    const double p = static_cast<double>(omega.rows());
    return -0.5 * (static_cast<double>(n) * (p * log_two_pi + logdet) + tr);
}

struct ChainOptions {
    bool keep_states = false;   // loadings and variances per draw
    bool keep_factors = false;
    bool marginal_loglik = true;
};

/// Retained draws of a chain with per-draw summaries.
struct ChainSamples {
    TemperedTarget target;
    int burnin = 0;
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    std::vector<double> score;
    std::vector<double> loglik;
    std::vector<double> marginal_loglik;
    std::vector<double> monitored; // first free entry of the tempered column

    std::vector<Matrix> loadings;
    std::vector<Vector> sigma2;
    std::vector<Matrix> factors;

    std::size_t size() const { return score.size(); }
};

/// Row of the monitored loading in the tempered column.
inline Eigen::Index monitored_row(const TemperedTarget& target)
{
    return target.step_index ? *target.step_index : target.h - 1;
}

inline ChainSamples run_chain(const TemperedTarget& target, const Matrix& y, int k, const PriorSpec& prior, int m,
                              int burnin, const RngStream& stream, const ChainOptions& opt = {})
{
    if (m < 1)
        throw DomainError("run_chain: m must be at least 1");
    if (burnin < 0)
        throw DomainError("run_chain: burnin must be non-negative");
    const Eigen::Index p = y.cols();
    if (k < 1 || k > p)
        throw DomainError("run_chain: k out of range");
    if (target.h > k)
        throw DomainError("run_chain: tempered column beyond k");
    target.validate(static_cast<int>(p));
    prior.validate();

    const LoadingPattern pat = LoadingPattern::make(target, p, k);
    SweepStreams rs = SweepStreams::from(stream);
    FactorState s = init_state(p, k, y.rows(), pat, prior, rs);
    const Matrix scatter = y.transpose() * y;

    ChainSamples out;
    out.target = target;
    out.burnin = burnin;
    out.master_seed = stream.master_seed();
    out.stream_id = stream.stream_id();
    out.score.reserve(m);
    out.loglik.reserve(m);
    out.monitored.reserve(m);
    if (opt.marginal_loglik)
        out.marginal_loglik.reserve(m);

    const Eigen::Index mon_row = monitored_row(target);
    const Eigen::Index mon_col = target.h - 1;
    for (int it = 0; it < burnin + m; ++it) {
        const SweepStats st = gibbs_sweep(s, y, target, pat, prior, rs);
        if (it < burnin)
            continue;
        out.score.push_back(st.score);
        out.loglik.push_back(st.loglik);
        out.monitored.push_back(s.loadings_star(mon_row, mon_col) * std::sqrt(s.psi(mon_col)));
        if (opt.marginal_loglik)
            out.marginal_loglik.push_back(tempered_marginal_loglik(s, pat, scatter, y.rows()));
        if (opt.keep_states) {
            out.loadings.push_back(s.loadings());
            out.sigma2.push_back(s.sigma2);
        }
        if (opt.keep_factors)
            out.factors.push_back(s.factors());
    }
    return out;
}

} // namespace pathbf::factor
