#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pathbf/cli/presets.hpp"
#include "pathbf/factor/gibbs.hpp"
#include "pathbf/factor/model.hpp"

using namespace pathbf;
using namespace pathbf::factor;
using Catch::Approx;

namespace {

Matrix table_loadings() { return cli::table2_loadings(); }
Vector table_sigma2() { return cli::table3_sigma2(); }

struct Moment {
    double mean = 0.0;
    double se = 0.0;
};

Moment iid_moment(const std::vector<double>& v)
{
    return {pathbf::mean(v), pathbf::stddev(v) / std::sqrt(static_cast<double>(v.size()))};
}

Moment chain_moment(const std::vector<double>& v)
{
    return {pathbf::mean(v), pathbf::stddev(v) / std::sqrt(effective_sample_size(v))};
}

double z_score(const Moment& a, const Moment& b) { return (a.mean - b.mean) / std::hypot(a.se, b.se); }

} // namespace

TEST_CASE("free parameter count", "[factor]")
{
    CHECK(num_free_params(7, 2) == 20);
    CHECK(num_free_params(7, 1) == 14);
    CHECK(num_free_params(26, 5) == 146);
    CHECK_THROWS_AS(num_free_params(3, 3), OverparameterizedModel);
    CHECK_THROWS_AS(num_free_params(0, 1), DomainError);
}

TEST_CASE("loading matrix pattern", "[factor]")
{
    Matrix ok(3, 2);
    ok << 1, 0, 2, 3, 4, 5;
    CHECK_NOTHROW(LoadingMatrix(ok));
    CHECK(LoadingMatrix(ok).full_column_rank());
    Matrix bad = ok;
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(LoadingMatrix(bad), DomainError);
    Matrix neg = ok;
    neg(0, 0) = -1.0;
    CHECK_THROWS_AS(LoadingMatrix(neg, true), DomainError);
    CHECK_THROWS_AS(Precisions(Vector::Constant(2, -1.0)), DomainError);
}

TEST_CASE("marginal covariance", "[factor]")
{
    Vector s(3);
    s << 0.5, 1.0, 2.0;
    CHECK(marginal_cov(Matrix::Zero(3, 2), s).isApprox(Matrix(s.asDiagonal())));
    CHECK(marginal_cov(Matrix::Ones(1, 1), Vector::Ones(1))(0, 0) == 2.0);
    const Matrix omega = marginal_cov(table_loadings(), table_sigma2());
    CHECK(omega.rows() == 7);
    CHECK_NOTHROW(chol_decompose(omega));
    CHECK(omega(0, 0) == Approx(0.89 * 0.89 + 0.2079));
    CHECK(omega(2, 4) == Approx(0.25 * 0.8));
}

TEST_CASE("conditional log-likelihood endpoints and hand value", "[factor]")
{
    const Matrix y = Matrix::Constant(1, 1, 2.0);
    const Matrix lam = Matrix::Ones(1, 1), eta = Matrix::Ones(1, 1);
    const Vector s2 = Vector::Ones(1);
    const double v = loglik_conditional(y, lam, s2, eta, TemperedTarget::pamp(1, 0.5));
    CHECK(v == Approx(mvn_logpdf(Vector::Constant(1, 2.0), Vector::Constant(1, 0.5), CovMatrix(Matrix::Ones(1, 1)))));
    CHECK(v == Approx(-2.0439).margin(1e-4));

    RngStream rng(1, 1);
    Matrix l = table_loadings();
    const Matrix yy = simulate(l, table_sigma2(), 20, rng);
    Matrix e(20, 2);
    for (int i = 0; i < 20; ++i)
        e(i, 0) = rng.normal(), e(i, 1) = rng.normal();
    const double full = loglik_conditional(yy, l, table_sigma2(), e, TemperedTarget::posterior(2));
    CHECK(loglik_conditional(yy, l, table_sigma2(), e, TemperedTarget::pamp(2, 1.0)) == Approx(full));
    const double at0 = loglik_conditional(yy, l, table_sigma2(), e, TemperedTarget::pamp(2, 0.0));
    CHECK(at0 == Approx(loglik_conditional(yy, l.leftCols(1), table_sigma2(), e.leftCols(1),
                                           TemperedTarget::posterior(1))));
}

TEST_CASE("tempered targets validate", "[factor]")
{
    CHECK_THROWS_AS(TemperedTarget::pamp(2, 1.5).validate(7), DomainError);
    CHECK_THROWS_AS(TemperedTarget::pamp(8, 0.5).validate(7), DomainError);
    CHECK_THROWS_AS(TemperedTarget::pssc(3, 1, 0.5).validate(7), DomainError);
    CHECK_THROWS_AS(TemperedTarget::pssc(2, 7, 0.5).validate(7), DomainError);
    CHECK_NOTHROW(TemperedTarget::pssc(3, 2, 0.5).validate(7));
}

TEST_CASE("step pattern holds earlier rows at zero", "[factor]")
{
    const auto pat = LoadingPattern::make(TemperedTarget::pssc(2, 3, 0.4), 7, 2);
    CHECK(pat.scale(1, 1) == 0.0);
    CHECK(pat.scale(2, 1) == 0.0);
    CHECK(pat.scale(3, 1) == Approx(0.4));
    CHECK(pat.scale(4, 1) == 1.0);
    CHECK(pat.scale(5, 1) == 1.0);
    CHECK_FALSE(pat.free(0, 1));
    CHECK_FALSE(pat.free(2, 1));
    CHECK(pat.free(3, 1));
    CHECK(pat.free(4, 1));
    CHECK(pat.scale(6, 0) == 1.0);
}

TEST_CASE("global maximum covariance", "[factor]")
{
    Matrix y(2, 1);
    y << 0, 2;
    CHECK(global_max_cov(y).omega_hat(0, 0) == Approx(2.0));
    const auto deg = global_max_cov(Matrix::Ones(4, 2));
    CHECK(deg.degenerate);
    CHECK(deg.omega_hat.cwiseAbs().maxCoeff() == 0.0);

    RngStream rng(2, 1);
    const Matrix yy = simulate(table_loadings(), table_sigma2(), 100, rng);
    const auto g = global_max_cov(yy);
    CHECK((g.omega_hat - marginal_cov(table_loadings(), table_sigma2())).cwiseAbs().maxCoeff() < 0.35);
    CHECK(marginal_loglik(yy, table_loadings(), table_sigma2()) <= g.loglik_bound);
    const Matrix mle = yy.transpose() * yy / 100.0;
    CHECK(mvn_loglik_rows(yy, CovMatrix(mle)) == Approx(g.loglik_bound).epsilon(1e-12));
}

TEST_CASE("simulation reproduces the model covariance", "[factor]")
{
    RngStream rng(3, 1);
    const Matrix noise = simulate(Matrix::Zero(4, 2), Vector::Ones(4), 100000, rng);
    const Matrix c = noise.transpose() * noise / 1e5;
    CHECK((c - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.02);

    const Matrix y = simulate(table_loadings(), table_sigma2(), 100000, rng);
    const Matrix s = y.transpose() * y / 1e5;
    const Matrix omega = marginal_cov(table_loadings(), table_sigma2());
    CHECK((s - omega).cwiseAbs().maxCoeff() < 0.02 * omega.cwiseAbs().maxCoeff());

    RngStream a(4, 1), b(4, 1);
    CHECK(simulate(table_loadings(), table_sigma2(), 50, a) == simulate(table_loadings(), table_sigma2(), 50, b));
}

TEST_CASE("factor full conditional", "[factor]")
{
    RngStream rng(5, 1);
    const int n = 100000;
    const Matrix zero = draw_factors(Matrix::Zero(3, 2), Vector::Ones(3), Matrix::Zero(n, 3), rng);
    const Matrix c = zero.transpose() * zero / n;
    CHECK((c - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
    CHECK(zero.colwise().mean().cwiseAbs().maxCoeff() < 0.02);

    const Matrix eta = draw_factors(Matrix::Ones(1, 1), Vector::Ones(1), Matrix::Constant(n, 1, 2.0), rng);
    std::vector<double> v(eta.data(), eta.data() + n);
    CHECK(pathbf::mean(v) == Approx(1.0).margin(5 * std::sqrt(0.5 / n)));
    CHECK(pathbf::variance(v) == Approx(0.5).epsilon(0.02));
}

TEST_CASE("variance full conditional", "[factor]")
{
    RngStream rng(6, 1);
    PriorSpec prior;
    prior.ig_shape = 3.0;
    prior.ig_rate = 2.0;
    std::vector<double> empty, zero_resid;
    for (int i = 0; i < 100000; ++i) {
        empty.push_back(draw_precisions(Matrix::Zero(1, 1), Matrix::Zero(0, 1), Matrix::Zero(0, 1), prior, rng)(0));
        zero_resid.push_back(
            draw_precisions(Matrix::Zero(1, 1), Matrix::Zero(10, 1), Matrix::Zero(10, 1), prior, rng)(0));
    }
    CHECK(pathbf::mean(empty) == Approx(1.0).margin(0.02));
    CHECK(pathbf::variance(empty) == Approx(1.0).epsilon(0.15));
    CHECK(pathbf::mean(zero_resid) == Approx(2.0 / 7.0).margin(0.003));
}

TEST_CASE("sweeps without data sample the prior", "[factor][property]")
{
    PriorSpec prior;
    prior.t_df = 10.0;
    prior.ig_shape = 3.0;
    prior.ig_rate = 2.0;
    ChainOptions opt;
    opt.keep_states = true;
    opt.marginal_loglik = false;
    const int m = 100000;
    const auto chain = run_chain(TemperedTarget::posterior(2), Matrix::Zero(0, 3), 2, prior, m, 100, RngStream(7, 1), opt);
    const double t_var = prior.t_df / (prior.t_df - 2.0);
    for (int j = 0; j < 3; ++j) {
        for (int l = 0; l <= std::min(j, 1); ++l) {
            std::vector<double> x, x2;
            for (const auto& lam : chain.loadings) {
                x.push_back(lam(j, l));
                x2.push_back(lam(j, l) * lam(j, l));
            }
            const auto mx = chain_moment(x);
            CHECK(std::abs(mx.mean) < 5 * mx.se);
            const auto mx2 = chain_moment(x2);
            CHECK(std::abs(mx2.mean - t_var) < 5 * mx2.se);
        }
        std::vector<double> s;
        for (const auto& v : chain.sigma2)
            s.push_back(v(j));
        const auto ms = chain_moment(s);
        CHECK(std::abs(ms.mean - 1.0) < 5 * ms.se);
    }
}

TEST_CASE("sweep passes the joint distribution test", "[factor][property]")
{
    // Successive-conditional chain over (parameters, data) against
    // independent draws from the joint, p = 3, k = 1, n = 5.
    const int p = 3, k = 1, n = 5, m = 100000;
    PriorSpec prior;
    prior.t_df = 10.0;
    prior.ig_shape = 4.0;
    prior.ig_rate = 3.0;
    const auto target = TemperedTarget::posterior(k);
    const auto pat = LoadingPattern::make(target, p, k);

    auto stats = [&](const Matrix& lam, const Vector& s2, const Matrix& y) {
        return std::vector<double>{lam(0, 0), lam(1, 0) * lam(1, 0), lam(2, 0), s2(0), s2(2), y(0, 0) * y(0, 1),
                                   y.col(2).squaredNorm()};
    };
    const std::size_t ns = 7;

    RngStream ind(8, 1);
    std::vector<std::vector<double>> a(ns), b(ns);
    for (int i = 0; i < m; ++i) {
        const double psi = draw(InverseGamma{0.5 * prior.t_df, 0.5 * prior.t_df}, ind);
        Matrix lam(p, k);
        for (int j = 0; j < p; ++j)
            lam(j, 0) = std::sqrt(psi) * ind.normal();
        Vector s2(p);
        for (int j = 0; j < p; ++j)
            s2(j) = draw(InverseGamma{prior.ig_shape, prior.ig_rate}, ind);
        const Matrix y = simulate(lam, s2, n, ind);
        const auto v = stats(lam, s2, y);
        for (std::size_t q = 0; q < ns; ++q)
            a[q].push_back(v[q]);
    }

    auto rs = SweepStreams::from(RngStream(8, 2));
    RngStream data_rng(8, 3);
    FactorState s = init_state(p, k, n, pat, prior, rs);
    auto draw_y = [&] {
        Matrix y = s.factors() * s.loadings().transpose();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                y(i, j) += std::sqrt(s.sigma2(j)) * data_rng.normal();
        return y;
    };
    Matrix y = draw_y();
    for (int i = 0; i < m; ++i) {
        gibbs_sweep(s, y, target, pat, prior, rs);
        y = draw_y();
        const auto v = stats(s.loadings(), s.sigma2, y);
        for (std::size_t q = 0; q < ns; ++q)
            b[q].push_back(v[q]);
    }
    for (std::size_t q = 0; q < ns; ++q) {
        INFO("statistic " << q);
        CHECK(std::abs(z_score(iid_moment(a[q]), chain_moment(b[q]))) < 4.0);
    }
}

TEST_CASE("posterior mean covariance is near the sample covariance", "[factor]")
{
    RngStream rng(9, 1);
    const Matrix y = simulate(table_loadings(), table_sigma2(), 100, rng);
    ChainOptions opt;
    opt.keep_states = true;
    opt.marginal_loglik = false;
    const auto chain = run_chain(TemperedTarget::posterior(2), y, 2, PriorSpec{}, 6000, 1000, RngStream(9, 2), opt);
    Matrix sum = Matrix::Zero(7, 7), sq = Matrix::Zero(7, 7);
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const Matrix o = marginal_cov(chain.loadings[i], chain.sigma2[i]);
        sum += o;
        sq += o.cwiseProduct(o);
    }
    const double m = static_cast<double>(chain.size());
    const Matrix mean = sum / m;
    const Matrix sd = (sq / m - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    const Matrix hat = global_max_cov(y).omega_hat;
    CHECK(((mean - hat).cwiseAbs().array() <= 3.0 * sd.array()).all());
}

TEST_CASE("chains are deterministic and minimal runs work", "[factor][property]")
{
    RngStream rng(10, 1);
    const Matrix y = simulate(table_loadings(), table_sigma2(), 30, rng);
    ChainOptions opt;
    opt.keep_states = true;
    const auto a = run_chain(TemperedTarget::pamp(2, 0.3), y, 2, PriorSpec{}, 200, 50, RngStream(10, 2), opt);
    const auto b = run_chain(TemperedTarget::pamp(2, 0.3), y, 2, PriorSpec{}, 200, 50, RngStream(10, 2), opt);
    CHECK(a.score == b.score);
    CHECK(a.loglik == b.loglik);
    CHECK(a.marginal_loglik == b.marginal_loglik);
    CHECK(a.monitored == b.monitored);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.loadings[i] == b.loadings[i]);
        CHECK(a.sigma2[i] == b.sigma2[i]);
    }
    const auto one = run_chain(TemperedTarget::posterior(1), y, 1, PriorSpec{}, 1, 0, RngStream(10, 3));
    CHECK(one.size() == 1);
    CHECK_THROWS_AS(run_chain(TemperedTarget::posterior(1), y, 1, PriorSpec{}, 0, 0, RngStream(10, 3)), DomainError);
}

TEST_CASE("held entries stay at zero and loadings respect the pattern", "[factor][property]")
{
    RngStream rng(11, 1);
    const Matrix y = simulate(table_loadings(), table_sigma2(), 40, rng);
    ChainOptions opt;
    opt.keep_states = true;
    const auto c = run_chain(TemperedTarget::pssc(2, 3, 0.5), y, 2, PriorSpec{}, 100, 10, RngStream(11, 2), opt);
    for (const auto& lam : c.loadings) {
        CHECK(lam(0, 1) == 0.0);
        CHECK(lam(1, 1) == 0.0);
        CHECK(lam(2, 1) == 0.0);
        CHECK(lam.col(1).tail(3).cwiseAbs().maxCoeff() > 0.0);
    }
    PriorSpec signed_prior;
    signed_prior.sign_constraint = true;
    const auto d = run_chain(TemperedTarget::posterior(2), y, 2, signed_prior, 200, 10, RngStream(11, 3), opt);
    for (const auto& lam : d.loadings) {
        CHECK(lam(0, 0) >= 0.0);
        CHECK(lam(1, 1) >= 0.0);
    }
}

TEST_CASE("zero-factor marginal agrees with quadrature", "[factor]")
{
    RngStream rng(12, 1);
    Matrix y(6, 2);
    for (int i = 0; i < 6; ++i)
        y(i, 0) = rng.normal(), y(i, 1) = 0.5 * rng.normal();
    PriorSpec prior;
    prior.ig_shape = 2.0;
    prior.ig_rate = 0.7;
    double total = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double ss = y.col(j).squaredNorm();
        // integrate over u = log sigma^2
        auto f = [&](double u) {
            const double s2 = std::exp(u);
            return std::exp(-3.0 * (log_two_pi + u) - 0.5 * ss / s2 + log_pdf(InverseGamma{2.0, 0.7}, s2) + u);
        };
        const int steps = 400000;
        const double lo = -30.0, hi = 30.0, h = (hi - lo) / steps;
        double s = 0.5 * (f(lo) + f(hi));
        for (int i = 1; i < steps; ++i)
            s += f(lo + i * h);
        total += std::log(s * h);
    }
    CHECK(zero_factor_log_marginal(y, prior) == Approx(total).epsilon(1e-8));
}

TEST_CASE("prior validation", "[factor]")
{
    PriorSpec p;
    p.t_df = 0.5;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p.t_df = 3.0;
    CHECK_NOTHROW(p.validate());
    CHECK_THROWS_AS(p.validate_for_path(), DomainError);
    p.allow_low_df = true;
    CHECK_NOTHROW(p.validate_for_path());
    p.t_df = infinite_df;
    CHECK(p.is_normal());
}
