#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "pathbf/core/distributions.hpp"
#include "pathbf/core/errors.hpp"
#include "pathbf/core/linalg.hpp"
#include "pathbf/core/rng.hpp"

namespace pathbf::factor {

inline constexpr double infinite_df = std::numeric_limits<double>::infinity();

/// Prior on loadings (t or folded-t per column through parameter expansion)
/// and on the idiosyncratic variances (inverse-gamma).
struct PriorSpec {
    double t_df = 10.0;
    double t_scale = 1.0;
    double ig_shape = 1.0;
    double ig_rate = 0.2;
    bool sign_constraint = false;
    /// Path runners refuse df < 5 unless this is set.
    bool allow_low_df = false;

    bool is_normal() const { return std::isinf(t_df); }

    void validate() const
    {
        if (!(t_df >= 1.0))
            throw DomainError("prior: t_df must be >= 1");
        if (!(t_scale > 0.0) || !(ig_shape > 0.0) || !(ig_rate > 0.0))
            throw DomainError("prior: scales and inverse-gamma parameters must be positive");
    }

    void validate_for_path() const
    {
        validate();
        if (t_df < 5.0 && !allow_low_df)
            throw DomainError("prior: path sampling needs t_df >= 5 (score integrability); "
                              "set allow_low_df to override");
    }
};

/// q = p(k+1) - k(k-1)/2 free parameters in (Lambda, Sigma).
inline int num_free_params(int p, int k)
{
    if (p < 1 || k < 1)
        throw DomainError("num_free_params: p and k must be positive");
    const int q = p * (k + 1) - k * (k - 1) / 2;
    if (q > p * (p + 1) / 2)
        throw OverparameterizedModel("model with p=" + std::to_string(p) + ", k=" + std::to_string(k)
                                     + " has more free parameters than a covariance matrix");
    return q;
}

struct FactorModelSpec {
    int p = 1;
    int k = 1;
    PriorSpec prior;

    int free_params() const { return num_free_params(p, k); }
};

/// Entry (row, col) of a loading matrix lies in the lower-triangular pattern.
inline bool in_loading_pattern(Eigen::Index row, Eigen::Index col) { return row >= col; }

/// p x k loading matrix with zeros above the diagonal of the leading block.
class LoadingMatrix {
public:
    LoadingMatrix() = default;

    explicit LoadingMatrix(Matrix m, bool sign_constraint = false) : m_(std::move(m))
    {
        if (m_.cols() > m_.rows())
            throw DomainError("LoadingMatrix: more factors than observed dimensions");
        for (Eigen::Index j = 0; j < m_.rows(); ++j) {
            for (Eigen::Index l = 0; l < m_.cols(); ++l) {
                if (!std::isfinite(m_(j, l)))
                    throw DomainError("LoadingMatrix: non-finite entry");
                if (!in_loading_pattern(j, l) && m_(j, l) != 0.0)
                    throw DomainError("LoadingMatrix: entry above the diagonal must be zero");
            }
        }
        if (sign_constraint) {
            for (Eigen::Index l = 0; l < m_.cols(); ++l) {
                if (m_(l, l) < 0.0)
                    throw DomainError("LoadingMatrix: negative diagonal under sign constraint");
            }
        }
    }

    const Matrix& matrix() const { return m_; }
    Eigen::Index p() const { return m_.rows(); }
    Eigen::Index k() const { return m_.cols(); }

    bool full_column_rank() const
    {
        if (m_.cols() == 0)
            return true;
        Eigen::ColPivHouseholderQR<Matrix> qr(m_);
        qr.setThreshold(1e-12);
        return qr.rank() == m_.cols();
    }

private:
    Matrix m_;
};

/// Diagonal of Sigma.
class Precisions {
public:
    Precisions() = default;

    explicit Precisions(Vector sigma2) : s_(std::move(sigma2))
    {
        for (Eigen::Index j = 0; j < s_.size(); ++j) {
            if (!(s_(j) > 0.0) || !std::isfinite(s_(j)))
                throw DomainError("Precisions: variances must be positive and finite");
        }
    }

    const Vector& sigma2() const { return s_; }

private:
    Vector s_;
};

/// Omega = Lambda Lambda^T + diag(sigma2).
inline Matrix marginal_cov(const Matrix& lambda, const Vector& sigma2)
{
    if (lambda.rows() != sigma2.size())
        throw DomainError("marginal_cov: dimension mismatch");
    Matrix omega = lambda * lambda.transpose();
    omega.diagonal() += sigma2;
    return omega;
}

/// log N(Y; 0, Lambda Lambda^T + Sigma) with the factors integrated out.
inline double marginal_loglik(const Matrix& y, const Matrix& lambda, const Vector& sigma2)
{
    return mvn_loglik_rows(y, CovMatrix(marginal_cov(lambda, sigma2)));
}

// ---------------------------------------------------------------------------
// Paths

enum class PathKind { Pamp, Gmp };

/// An unnormalised density on a path.
///
/// PAMP scales column h of the loadings by t (or, with step_index i, only
/// entry i+1 of that column, rows 1..i being held at zero). GMP raises the
/// whole likelihood to the power t.
struct TemperedTarget {
    PathKind path_kind = PathKind::Pamp;
    double t = 1.0;
    int h = 1;
    std::optional<int> step_index;

    static TemperedTarget posterior(int k) { return TemperedTarget{PathKind::Pamp, 1.0, k, std::nullopt}; }

    static TemperedTarget pamp(int h, double t) { return TemperedTarget{PathKind::Pamp, t, h, std::nullopt}; }

    static TemperedTarget pssc(int h, int step, double t) { return TemperedTarget{PathKind::Pamp, t, h, step}; }

    static TemperedTarget gmp(int k, double t) { return TemperedTarget{PathKind::Gmp, t, k, std::nullopt}; }

    /// Exponent on the likelihood (1 except on the geometric path).
    double likelihood_power() const { return path_kind == PathKind::Gmp ? t : 1.0; }

    void validate(int p) const
    {
        if (!(t >= 0.0 && t <= 1.0))
            throw DomainError("TemperedTarget: t must lie in [0, 1]");
        if (h < 1 || h > p)
            throw DomainError("TemperedTarget: h out of range");
        if (step_index) {
            if (path_kind != PathKind::Pamp)
                throw DomainError("TemperedTarget: step index only applies to PAMP");
            if (*step_index < 1 || *step_index > p - 1)
                throw DomainError("TemperedTarget: step index must lie in [1, p-1]");
            if (*step_index < h - 1)
                throw DomainError("TemperedTarget: step tempers a structural zero of column h");
        }
    }
};

/// Per-entry multipliers applied to the loadings by a target, with structural
/// and step-held zeros marked as not free.
struct LoadingPattern {
    Matrix scale;                    // 1, t, or 0
    Eigen::Matrix<bool, -1, -1> free;

    static LoadingPattern make(const TemperedTarget& target, Eigen::Index p, Eigen::Index k)
    {
        LoadingPattern pat;
        pat.scale = Matrix::Zero(p, k);
        pat.free.setConstant(p, k, false);
        const Eigen::Index hc = target.h - 1;
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index l = 0; l < k; ++l) {
                if (!in_loading_pattern(j, l))
                    continue;
                double c = 1.0;
                bool free = true;
                if (target.path_kind == PathKind::Pamp && l == hc) {
                    if (target.step_index) {
                        const Eigen::Index i = *target.step_index;
                        if (j < i)
                            free = false;
                        else if (j == i)
                            c = target.t;
                    } else {
                        c = target.t;
                    }
                }
                pat.free(j, l) = free;
                pat.scale(j, l) = free ? c : 0.0;
            }
        }
        return pat;
    }
};

/// Lambda_t: the loadings as seen by the likelihood under a target.
inline Matrix tempered_loadings(const Matrix& lambda, const TemperedTarget& target)
{
    const LoadingPattern pat = LoadingPattern::make(target, lambda.rows(), lambda.cols());
    return lambda.cwiseProduct(pat.scale);
}

/// Sum_i log N(y_i; Lambda_t eta_i, diag(sigma2)).
///
/// On the geometric path Lambda_t = Lambda and the untempered value is returned.
inline double loglik_conditional(const Matrix& y, const Matrix& lambda, const Vector& sigma2, const Matrix& eta,
                                 const TemperedTarget& target)
{
    const Matrix lt = tempered_loadings(lambda, target);
    const Matrix resid = y - eta * lt.transpose();
    const double n = static_cast<double>(y.rows());
    double out = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        out += -0.5 * n * (log_two_pi + std::log(sigma2(j))) - 0.5 * resid.col(j).squaredNorm() / sigma2(j);
    return out;
}

// ---------------------------------------------------------------------------
// Data-level quantities

struct GlobalMaxCov {
    Matrix omega_hat;          // centred sample covariance, 1/(n-1) scaling
    double loglik_bound = 0.0; // sup over PD Omega of the zero-mean Gaussian log-likelihood
    bool degenerate = false;
};

/// Unrestricted covariance estimate and the global likelihood bound.
///
/// The bound is attained at Y^T Y / n because the model has zero mean; it is
/// +inf when that matrix is singular, in which case `degenerate` is set.
inline GlobalMaxCov global_max_cov(const Matrix& y)
{
    const Eigen::Index n = y.rows();
    if (n < 2)
        throw DomainError("global_max_cov: need at least two observations");
    GlobalMaxCov g;
    const Eigen::RowVectorXd ybar = y.colwise().mean();
    const Matrix centred = y.rowwise() - ybar;
    g.omega_hat = centred.transpose() * centred / static_cast<double>(n - 1);

    const Matrix mle = y.transpose() * y / static_cast<double>(n);
    const double scale = std::max(1e-300, mle.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> eig_hat(g.omega_hat, Eigen::EigenvaluesOnly);
    g.degenerate = !(eig_hat.eigenvalues().minCoeff() > 1e-12 * scale);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(mle, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * scale)) {
        g.loglik_bound = std::numeric_limits<double>::infinity();
        return g;
    }
    const double logdet = eig.eigenvalues().array().log().sum();
    g.loglik_bound = -0.5 * static_cast<double>(n) * (static_cast<double>(y.cols()) * (log_two_pi + 1.0) + logdet);
    return g;
}

/// n i.i.d. rows from N_p(0, Lambda Lambda^T + Sigma), generated through the
/// factor representation.
inline Matrix simulate(const Matrix& lambda, const Vector& sigma2, Eigen::Index n, RngStream& rng)
{
    const Eigen::Index p = lambda.rows();
    const Eigen::Index k = lambda.cols();
    Matrix y(n, p);
    Vector eta(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < k; ++l)
            eta(l) = rng.normal();
        for (Eigen::Index j = 0; j < p; ++j)
            y(i, j) = lambda.row(j).dot(eta) + std::sqrt(sigma2(j)) * rng.normal();
    }
    return y;
}

// ---------------------------------------------------------------------------
// Prior densities on the original parameterisation

/// log pi(Lambda): independent multivariate t per column over its free
/// entries (folded on the diagonal when the sign constraint is on).
inline double log_prior_loadings(const Matrix& lambda, const PriorSpec& prior)
{
    double out = 0.0;
    for (Eigen::Index l = 0; l < lambda.cols(); ++l) {
        const Eigen::Index d = lambda.rows() - l;
        const Vector col = lambda.col(l).tail(d);
        out += log_pdf_mvt(col, prior.t_df, prior.t_scale);
        if (prior.sign_constraint) {
            if (col(0) < 0.0)
                return -std::numeric_limits<double>::infinity();
            out += std::log(2.0);
        }
    }
    return out;
}

inline double log_prior_variances(const Vector& sigma2, const PriorSpec& prior)
{
    double out = 0.0;
    const InverseGamma ig{prior.ig_shape, prior.ig_rate};
    for (Eigen::Index j = 0; j < sigma2.size(); ++j)
        out += log_pdf(ig, sigma2(j));
    return out;
}

/// Exact log marginal of the model without factors: independent columns
/// with inverse-gamma variances.
inline double zero_factor_log_marginal(const Matrix& y, const PriorSpec& prior)
{
    const double n = static_cast<double>(y.rows());
    const double a = prior.ig_shape, b = prior.ig_rate;
    double out = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double ss = y.col(j).squaredNorm();
        out += -0.5 * n * log_two_pi + a * std::log(b) + std::lgamma(a + 0.5 * n) - std::lgamma(a)
            - (a + 0.5 * n) * std::log(b + 0.5 * ss);
    }
    return out;
}

} // namespace pathbf::factor
