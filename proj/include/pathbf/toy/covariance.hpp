#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "pathbf/core/distributions.hpp"
#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/numerics.hpp"
#include "pathbf/core/parallel.hpp"
#include "pathbf/core/rng.hpp"
#include "pathbf/alt/importance.hpp"
#include "pathbf/alt/laplace.hpp"
#include "pathbf/path/engine.hpp"
#include "pathbf/path/grid.hpp"

namespace pathbf::toy {

using path::BfEstimate;
using path::Grid;

/// Coordinates [0, m) form block 1, [m, p) block 2.
struct BlockSpec {
    int p = 2;
    int m = 1;

    void validate() const
    {
        if (!(m >= 1 && m < p))
            throw DomainError("BlockSpec: need 1 <= m < p");
    }
    int p1() const { return m; }
    int p2() const { return p - m; }
};

struct IwPrior {
    double df = 3.0;
    Matrix scale;

    /// df = dim + 2 with identity scale.
    static IwPrior standard(int dim) { return IwPrior{static_cast<double>(dim) + 2.0, Matrix::Identity(dim, dim)}; }

    void validate() const { pathbf::validate(DistSpec{InverseWishart{df, scale}}); }
    int dim() const { return static_cast<int>(scale.rows()); }
};

/// log m(Y) for y_i ~ N(0, Sigma), Sigma ~ IW(df, Psi), from the scatter S = sum y_i y_i^T.
inline double iw_log_marginal_scatter(const Matrix& s, double n, const IwPrior& prior)
{
    prior.validate();
    if (n == 0.0)
        return 0.0;
    const double d = static_cast<double>(prior.dim());
    const CovMatrix psi(prior.scale);
    const Matrix post = prior.scale + s;
    const CovMatrix ps(0.5 * (post + post.transpose()));
    return -0.5 * n * d * std::log(std::numbers::pi) + 0.5 * prior.df * psi.log_det()
        - 0.5 * (prior.df + n) * ps.log_det() + log_multigamma(prior.dim(), 0.5 * (prior.df + n))
        - log_multigamma(prior.dim(), 0.5 * prior.df);
}

inline double iw_log_marginal(const Matrix& y, const IwPrior& prior)
{
    if (y.cols() != prior.dim())
        throw DomainError("iw_log_marginal: data and prior dimensions differ");
    return iw_log_marginal_scatter(y.transpose() * y, static_cast<double>(y.rows()), prior);
}

struct ToyMarginals {
    double log_m1 = 0.0;
    double log_m0 = 0.0;
    double log_bf = 0.0; // log m1 - log m0
};

inline ToyMarginals toy_marginals(const Matrix& y, const BlockSpec& spec, const IwPrior& full,
                                  const std::pair<IwPrior, IwPrior>& blocks)
{
    spec.validate();
    if (y.cols() != spec.p || full.dim() != spec.p || blocks.first.dim() != spec.p1()
        || blocks.second.dim() != spec.p2())
        throw DomainError("toy_marginals: dimensions do not match the block split");
    ToyMarginals r;
    r.log_m1 = iw_log_marginal(y, full);
    r.log_m0 = iw_log_marginal(y.leftCols(spec.m), blocks.first) + iw_log_marginal(y.rightCols(spec.p2()), blocks.second);
    r.log_bf = r.log_m1 - r.log_m0;
    return r;
}

/// Exact log BF of the dependent model over the block-independent one.
inline double true_logbf_toy(const Matrix& y, const BlockSpec& spec, const IwPrior& full,
                             const std::pair<IwPrior, IwPrior>& blocks)
{
    return toy_marginals(y, spec, full, blocks).log_bf;
}

/// Sigma_t: off-diagonal blocks of a scaled by t.
inline Matrix path_cov(const Matrix& a, int m, double t)
{
    Matrix s = a;
    const Eigen::Index q = a.rows() - m;
    s.topRightCorner(m, q) *= t;
    s.bottomLeftCorner(q, m) *= t;
    return s;
}

/// d/dt of the log-likelihood at Sigma_t: -(n/2) tr(Sigma_t^{-1} D) + (1/2) tr(Sigma_t^{-1} D Sigma_t^{-1} S).
inline double toy_path_score(const Matrix& a, const Matrix& scatter, double n, int m, double t)
{
    const Matrix st = path_cov(a, m, t);
    Eigen::LLT<Matrix> llt(st);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("toy_path_score: Sigma_t is not positive definite");
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    const Eigen::Index q = a.rows() - m;
    d.topRightCorner(m, q) = a.topRightCorner(m, q);
    d.bottomLeftCorner(q, m) = a.bottomLeftCorner(q, m);
    const Matrix sid = llt.solve(d);       // Sigma_t^{-1} D
    const Matrix sis = llt.solve(scatter); // Sigma_t^{-1} S
    return -0.5 * n * sid.trace() + 0.5 * (sid * sis).trace();
}

inline double toy_path_score_data(const Matrix& a, const Matrix& y, int m, double t)
{
    return toy_path_score(a, y.transpose() * y, static_cast<double>(y.rows()), m, t);
}

/// Zero-mean Gaussian log-likelihood from the scatter matrix.
inline double gaussian_loglik_scatter(const Matrix& sigma, const Matrix& scatter, double n)
{
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        return -std::numeric_limits<double>::infinity();
    const Matrix l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    return -0.5 * (n * (static_cast<double>(sigma.rows()) * log_two_pi + logdet) + llt.solve(scatter).trace());
}

// ---------------------------------------------------------------------------
// Log-Cholesky coordinates

inline int log_chol_dim(int p) { return p * (p + 1) / 2; }

/// theta holds the lower triangle of L row by row, with log on the diagonal.
inline Matrix log_chol_factor(const Vector& theta, int p)
{
    Matrix l = Matrix::Zero(p, p);
    Eigen::Index a = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < i; ++j)
            l(i, j) = theta(a++);
        l(i, i) = std::exp(theta(a++));
    }
    return l;
}

inline Vector log_chol_coords(const Matrix& sigma)
{
    const Matrix l = chol_decompose(sigma);
    const int p = static_cast<int>(sigma.rows());
    Vector th(log_chol_dim(p));
    Eigen::Index a = 0;
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < i; ++j)
            th(a++) = l(i, j);
        th(a++) = std::log(l(i, i));
    }
    return th;
}

/// log |d Sigma / d theta| = p log 2 + sum_i (p - i + 2) theta_ii, i 1-based.
inline double log_chol_log_jacobian(const Vector& theta, int p)
{
    double out = static_cast<double>(p) * std::numbers::ln2;
    Eigen::Index a = 0;
    for (int i = 0; i < p; ++i) {
        a += i;
        out += static_cast<double>(p - i + 1) * theta(a++);
    }
    return out;
}

/// Coordinates of a block covariance: log-Cholesky of A11, log-Cholesky of
/// A22, then X (p1 x p2, column-major) with A12 = L1 R L2^T and
/// R = X (I + X^T X)^{-1/2}.
class BlockCoords {
public:
    explicit BlockCoords(const BlockSpec& spec) : p1_(spec.p1()), p2_(spec.p2()) { spec.validate(); }

    int dim() const { return log_chol_dim(p1_) + log_chol_dim(p2_) + p1_ * p2_; }

    struct Parts {
        Matrix l1, l2, r;
        double log_det_m = 0.0; // log |I + X^T X|
    };

    Parts parts(const Vector& theta) const
    {
        Parts out;
        const int d1 = log_chol_dim(p1_), d2 = log_chol_dim(p2_);
        out.l1 = log_chol_factor(theta.head(d1), p1_);
        out.l2 = log_chol_factor(theta.segment(d1, d2), p2_);
        const Matrix x = Eigen::Map<const Matrix>(theta.data() + d1 + d2, p1_, p2_);
        Matrix mm = x.transpose() * x;
        mm.diagonal().array() += 1.0;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(mm);
        const Vector ev = eig.eigenvalues();
        out.log_det_m = ev.array().log().sum();
        out.r = x * (eig.eigenvectors() * ev.array().rsqrt().matrix().asDiagonal() * eig.eigenvectors().transpose());
        return out;
    }

    Matrix sigma(const Parts& pt, double t = 1.0) const
    {
        const int p = p1_ + p2_;
        Matrix s(p, p);
        s.topLeftCorner(p1_, p1_) = pt.l1 * pt.l1.transpose();
        s.bottomRightCorner(p2_, p2_) = pt.l2 * pt.l2.transpose();
        s.topRightCorner(p1_, p2_) = t * (pt.l1 * pt.r * pt.l2.transpose());
        s.bottomLeftCorner(p2_, p1_) = s.topRightCorner(p1_, p2_).transpose();
        return s;
    }

    Matrix sigma(const Vector& theta, double t = 1.0) const { return sigma(parts(theta), t); }

    /// log |d Sigma / d theta|.
    double log_jacobian(const Vector& theta, const Parts& pt) const
    {
        const int d1 = log_chol_dim(p1_), d2 = log_chol_dim(p2_);
        const double ld1 = pt.l1.diagonal().array().log().sum();
        const double ld2 = pt.l2.diagonal().array().log().sum();
        return log_chol_log_jacobian(theta.head(d1), p1_) + log_chol_log_jacobian(theta.segment(d1, d2), p2_)
            + p2_ * ld1 + p1_ * ld2 - 0.5 * (p1_ + p2_ + 1.0) * pt.log_det_m;
    }

    Vector coords(const Matrix& sigma) const
    {
        const Matrix a11 = sigma.topLeftCorner(p1_, p1_);
        const Matrix a22 = sigma.bottomRightCorner(p2_, p2_);
        const Matrix l1 = chol_decompose(a11), l2 = chol_decompose(a22);
        const Matrix r = l1.triangularView<Eigen::Lower>().solve(
            l2.triangularView<Eigen::Lower>().solve(sigma.bottomLeftCorner(p2_, p1_)).transpose());
        Matrix k = -r.transpose() * r;
        k.diagonal().array() += 1.0; // I - R^T R
        Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
        if (!(eig.eigenvalues().minCoeff() > 0.0))
            throw NotPositiveDefinite("BlockCoords: cross block is not a contraction");
        const Matrix x = r
            * (eig.eigenvectors() * eig.eigenvalues().array().rsqrt().matrix().asDiagonal()
               * eig.eigenvectors().transpose());
        Vector th(dim());
        const int d1 = log_chol_dim(p1_), d2 = log_chol_dim(p2_);
        th.head(d1) = log_chol_coords(a11);
        th.segment(d1, d2) = log_chol_coords(a22);
        th.tail(p1_ * p2_) = Eigen::Map<const Vector>(x.data(), p1_ * p2_);
        return th;
    }

private:
    int p1_, p2_;
};

/// Unnormalised log density of the tempered toy posterior on block coordinates.
class ToyTarget {
public:
    ToyTarget(const Matrix& scatter, double n, const BlockSpec& spec, const IwPrior& prior, double t,
              double power = 1.0)
        : scatter_(scatter), n_(n), spec_(spec), coords_(spec), prior_(prior), t_(t), power_(power)
    {
    }

    int dim() const { return coords_.dim(); }
    double t() const { return t_; }
    const BlockCoords& coords() const { return coords_; }

    double log_prior(const Vector& theta) const { return log_prior(theta, coords_.parts(theta)); }

    double loglik(const Vector& theta) const
    {
        return gaussian_loglik_scatter(coords_.sigma(theta, t_), scatter_, n_);
    }

    double operator()(const Vector& theta) const
    {
        const auto pt = coords_.parts(theta);
        const double lp = log_prior(theta, pt);
        if (!std::isfinite(lp))
            return lp;
        return lp + power_ * gaussian_loglik_scatter(coords_.sigma(pt, t_), scatter_, n_);
    }

    double score(const Vector& theta) const
    {
        return toy_path_score(coords_.sigma(theta), scatter_, n_, spec_.m, t_);
    }

private:
    double log_prior(const Vector& theta, const BlockCoords::Parts& pt) const
    {
        Eigen::LLT<Matrix> llt(coords_.sigma(pt));
        if (llt.info() != Eigen::Success)
            return -std::numeric_limits<double>::infinity();
        const Matrix l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        const double tr = llt.solve(prior_.scale).trace();
        const double p = static_cast<double>(spec_.p);
        return -0.5 * (prior_.df + p + 1.0) * logdet - 0.5 * tr + coords_.log_jacobian(theta, pt);
    }

    const Matrix& scatter_;
    double n_;
    BlockSpec spec_;
    BlockCoords coords_;
    IwPrior prior_;
    double t_;
    double power_;
};

struct MhOptions {
    int m = 20000;
    int burnin = 10000;
    double target_accept = 0.234;
    int prior_weight = 1000;
};

struct MhChain {
    std::vector<double> score;
    std::vector<double> loglik;
    double acceptance = 0.0; // over retained iterations
    Vector last;
    Matrix proposal_chol;
};

/// Adaptive random-walk Metropolis. The proposal covariance and scale adapt
/// during burn-in and are frozen afterwards.
///
/// init_cov seeds both the proposal and the running covariance estimate,
/// which counts it as prior_weight pseudo-draws.
template <class Target>
MhChain run_adaptive_rwm(const Target& target, Vector theta, const MhOptions& opt, RngStream rng,
                         bool record_score = true, const Matrix& init_cov = Matrix())
{
    const Eigen::Index d = theta.size();
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
    Matrix emp_cov = init_cov.size() ? init_cov : Matrix(0.01 * Matrix::Identity(d, d));
    const double prior_weight = init_cov.size() ? static_cast<double>(opt.prior_weight) : 1.0;
    Vector emp_mean = theta;
    Matrix chol = chol_decompose(emp_cov);
    double cur = target(theta);
    if (!std::isfinite(cur))
        throw DomainError("run_adaptive_rwm: start has zero density");

    MhChain out;
    out.score.reserve(static_cast<std::size_t>(opt.m));
    long accepted = 0;
    Vector z(d), prop(d);
    for (int it = 0; it < opt.burnin + opt.m; ++it) {
        for (Eigen::Index a = 0; a < d; ++a)
            z(a) = rng.normal();
        prop = theta + std::exp(log_scale) * (chol * z);
        const double val = target(prop);
        const bool acc = std::isfinite(val) && std::log(rng.uniform()) < val - cur;
        if (acc) {
            theta = prop;
            cur = val;
        }
        if (it < opt.burnin) {
            const double w = 1.0 / (static_cast<double>(it) + 1.0 + prior_weight);
            const Vector dx = theta - emp_mean;
            emp_mean += w * dx;
            emp_cov += w * ((1.0 - w) * dx * dx.transpose() - emp_cov);
            log_scale += (static_cast<double>(acc) - opt.target_accept) * std::min(0.05, 1.0 / std::sqrt(it + 1.0));
            if ((it + 1) % 100 == 0 && it >= 500) {
                Matrix c = emp_cov;
                c.diagonal().array() += 1e-10;
                Eigen::LLT<Matrix> llt(c);
                if (llt.info() == Eigen::Success)
                    chol = llt.matrixL();
            }
            continue;
        }
        accepted += acc ? 1 : 0;
        if (record_score)
            out.score.push_back(target.score(theta));
        out.loglik.push_back(target.loglik(theta));
    }
    out.acceptance = opt.m > 0 ? static_cast<double>(accepted) / opt.m : 0.0;
    out.last = theta;
    out.proposal_chol = std::exp(log_scale) * chol;
    return out;
}

/// Start of every toy chain: the posterior mode of the dependent model.
inline Vector toy_start(const Matrix& scatter, double n, const BlockSpec& spec, const IwPrior& prior)
{
    const double p = static_cast<double>(scatter.rows());
    return BlockCoords(spec).coords((prior.scale + scatter) / (prior.df + n + p + 1.0));
}

/// Mode of the target from start and the inverse observed information
/// there, or a small isotropic covariance where the information is singular.
template <class Target>
std::pair<Vector, Matrix> laplace_start(const Target& target, const Vector& start)
{
    auto f = [&](const Vector& th) { return target(th); };
    const Vector mode = alt::maximize(f, start).theta_hat;
    const Eigen::Index d = mode.size();
    try {
        const Matrix info = alt::observed_info(f, mode);
        return {mode, info.llt().solve(Matrix::Identity(d, d))};
    } catch (const SingularInformation&) {
        return {mode, 0.01 * Matrix::Identity(d, d)};
    }
}

struct ToyPsResult {
    BfEstimate estimate;
    ToyMarginals truth;
    double min_acceptance = 1.0;
    double max_acceptance = 0.0;
    bool acceptance_warning = false; // some point outside [0.1, 0.6]
};

/// Path sampling over the off-diagonal block, with the analytic truth.
inline ToyPsResult run_toy_ps(const Matrix& y, const BlockSpec& spec, const IwPrior& full,
                              const std::pair<IwPrior, IwPrior>& blocks, const Grid& grid, const MhOptions& opt,
                              const RngStream& stream, unsigned workers = 1)
{
    ToyPsResult r;
    r.truth = toy_marginals(y, spec, full, blocks);
    const Matrix scatter = y.transpose() * y;
    const double n = static_cast<double>(y.rows());
    const Vector start = toy_start(scatter, n, spec, full);
    std::vector<double> acc(grid.size());
    r.estimate = path::run_path(grid, workers, [&](std::size_t g) {
        const ToyTarget target(scatter, n, spec, full, grid[g]);
        const auto init = laplace_start(target, start);
        auto chain = run_adaptive_rwm(target, init.first, opt, stream.split(g), true, init.second);
        acc[g] = chain.acceptance;
        return path::summarize(grid[g], chain.score);
    }, "toy-ps");
    for (double a : acc) {
        r.min_acceptance = std::min(r.min_acceptance, a);
        r.max_acceptance = std::max(r.max_acceptance, a);
    }
    r.acceptance_warning = r.min_acceptance < 0.1 || r.max_acceptance > 0.6;
    return r;
}

/// Annealed importance sampling on the same path, from t = 1 down to t = 0,
/// with the proposal adapted at t = 1 reused at every rung.
inline alt::WeightedEstimate run_toy_ais(const Matrix& y, const BlockSpec& spec, const IwPrior& full,
                                         const Grid& grid, int runs, int steps_per_rung, const MhOptions& opt,
                                         const RngStream& stream)
{
    const Matrix scatter = y.transpose() * y;
    const double n = static_cast<double>(y.rows());
    const ToyTarget top(scatter, n, spec, full, 1.0);
    MhOptions o1 = opt;
    o1.m = runs;
    // Starting points: consecutive states of the t = 1 chain.
    std::vector<Vector> starts;
    starts.reserve(static_cast<std::size_t>(runs));
    struct Recorder {
        const ToyTarget& t;
        std::vector<Vector>* out;
        double operator()(const Vector& th) const { return t(th); }
        double score(const Vector& th) const
        {
            out->push_back(th);
            return 0.0;
        }
        double loglik(const Vector&) const { return 0.0; }
    };
    const Recorder rec{top, &starts};
    const auto chain = run_adaptive_rwm(rec, toy_start(scatter, n, spec, full), o1, stream.split(1));
    const Matrix prop = chain.proposal_chol;

    std::vector<double> ladder(grid.points().rbegin(), grid.points().rend());
    std::vector<double> log_w(starts.size());
    for (std::size_t r = 0; r < starts.size(); ++r) {
        RngStream rng = stream.split(2).split(r);
        Vector th = starts[r];
        auto loglik = [&](const Vector& x, double t) { return ToyTarget(scatter, n, spec, full, t).loglik(x); };
        auto transition = [&](Vector& x, double t) {
            const ToyTarget target(scatter, n, spec, full, t);
            double cur = target(x);
            Vector z(x.size());
            for (int s = 0; s < steps_per_rung; ++s) {
                for (Eigen::Index a = 0; a < z.size(); ++a)
                    z(a) = rng.normal();
                const Vector pr = x + prop * z;
                const double val = target(pr);
                if (std::isfinite(val) && std::log(rng.uniform()) < val - cur) {
                    x = pr;
                    cur = val;
                }
            }
        };
        log_w[r] = alt::anneal_log_weight(ladder, th, loglik, transition);
    }
    return alt::weighted_log_bf(std::move(log_w), "toy-ais");
}

/// Grid with points (g / K)^4, dense near the prior end.
inline Grid power_grid(int intervals, double exponent = 4.0)
{
    std::vector<double> pts(static_cast<std::size_t>(intervals) + 1);
    for (int g = 0; g <= intervals; ++g)
        pts[static_cast<std::size_t>(g)] = std::pow(static_cast<double>(g) / intervals, exponent);
    pts.back() = 1.0;
    return Grid::from_points(std::move(pts));
}

/// log normaliser of the t = 0 end of the path, i.e. the block-diagonal
/// likelihood under the prior induced by the joint inverse-Wishart.
///
/// Estimated on the geometric path from that prior to the t = 0 posterior.
inline BfEstimate induced_t0_log_marginal(const Matrix& y, const BlockSpec& spec, const IwPrior& full,
                                          const Grid& grid, const MhOptions& opt, const RngStream& stream,
                                          unsigned workers = 1)
{
    const Matrix scatter = y.transpose() * y;
    const double n = static_cast<double>(y.rows());
    const Vector start = toy_start(scatter, n, spec, full);
    struct PowerTarget {
        ToyTarget base;
        double operator()(const Vector& th) const { return base(th); }
        double score(const Vector& th) const { return base.loglik(th); }
        double loglik(const Vector& th) const { return base.loglik(th); }
    };
    auto est = path::run_path(grid, workers, [&](std::size_t g) {
        const PowerTarget target{ToyTarget(scatter, n, spec, full, 0.0, grid[g])};
        const auto init = laplace_start(target, start);
        auto chain = run_adaptive_rwm(target, init.first, opt, stream.split(g), true, init.second);
        return path::summarize(grid[g], chain.score);
    }, "toy-induced-t0");
    return est;
}

/// Appendix covariance of the toy example, p = 10 split after 7.
inline Matrix toy_sigma0()
{
    Matrix s(10, 10);
    s << 128.35, 52.69, -19.25, -11.86, 24.34, 8.80, 10.63, 13.75, -7.40, -29.80,
        52.69, 73.37, -21.04, -37.85, 12.29, 8.74, 15.60, 12.09, -14.08, -17.27,
        -19.25, -21.04, 30.86, 8.63, -1.41, -13.58, -3.03, -11.64, 21.28, 22.05,
        -11.86, -37.85, 8.63, 80.49, 4.66, 3.26, -49.24, -9.68, 22.18, 8.52,
        24.34, 12.29, -1.41, 4.66, 15.45, 2.58, 2.05, 3.72, -1.31, -7.87,
        8.80, 8.74, -13.58, 3.26, 2.58, 31.37, 11.62, -4.85, -16.89, -20.10,
        10.63, 15.60, -3.03, -49.24, 2.05, 11.62, 58.09, 7.00, -19.58, 5.16,
        13.75, 12.09, -11.64, -9.68, 3.72, -4.85, 7.00, 26.59, -3.04, 11.17,
        -7.40, -14.08, 21.28, 22.18, -1.31, -16.89, -19.58, -3.04, 31.81, 22.86,
        -29.80, -17.27, 22.05, 8.52, -7.87, -20.10, 5.16, 11.17, 22.86, 64.68;
    return s;
}

/// Block-diagonal part of a covariance.
inline Matrix block_diagonal(const Matrix& a, int m) { return path_cov(a, m, 0.0); }

/// n rows from N(0, sigma).
inline Matrix simulate_gaussian(const Matrix& sigma, Eigen::Index n, RngStream& rng)
{
    const Matrix l = chol_decompose(sigma);
    Matrix z(n, sigma.rows());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < sigma.rows(); ++j)
            z(i, j) = rng.normal();
    return z * l.transpose();
}

} // namespace pathbf::toy
