#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pathbf/alt/factor_laplace.hpp"
#include "pathbf/alt/gap.hpp"
#include "pathbf/alt/importance.hpp"
#include "pathbf/alt/laplace.hpp"
#include "pathbf/cli/presets.hpp"
#include "pathbf/path/normal_mean.hpp"

using namespace pathbf;
using namespace pathbf::alt;
using Catch::Approx;

namespace {

path::NormalMeanModel normal_data(std::uint64_t seed, int n, double prior_sd = 1.0)
{
    path::NormalMeanModel m;
    m.prior_sd = prior_sd;
    RngStream rng(seed, 1);
    for (int i = 0; i < n; ++i)
        m.y.push_back(0.4 + rng.normal());
    return m;
}

Matrix factor_data(std::uint64_t seed, int truth, int n = 100)
{
    const auto gen = cli::factor_preset("tables-2-3").truncated(truth);
    RngStream rng(seed, 1);
    return factor::simulate(gen.lambda, gen.sigma2, n, rng);
}

} // namespace

TEST_CASE("bicm hand values", "[alt]")
{
    CHECK(bicm(LogPlSample{{-5.0, -5.0, -5.0}}, 50.0) == -5.0);
    CHECK(bicm(LogPlSample{{-101.0, -99.0}}, 100.0) == Approx(-107.2103).margin(1e-4));
    CHECK_THROWS_AS(bicm(LogPlSample{{1.0}}, 10.0), DomainError);
    CHECK_THROWS_AS(bicm(LogPlSample{{1.0, std::nan("")}}, 10.0), DomainError);
}

TEST_CASE("maximiser of a quadratic", "[alt]")
{
    Matrix a(3, 3);
    a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    Vector c(3);
    c << 1.0, -2.0, 0.5;
    auto f = [&](const Vector& x) { return -0.5 * (x - c).dot(a * (x - c)) + 3.0; };
    const auto r = maximize(f, Vector::Zero(3));
    CHECK((r.theta_hat - c).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.log_pl_at_max == Approx(3.0).margin(1e-10));

    const auto same = find_mple(f, {Vector::Zero(3), c});
    CHECK((same.theta_hat - c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(same.log_pl_at_max == 3.0);

    const Matrix info = observed_info(f, c);
    CHECK((info - a).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("observed information of the normal mean", "[alt]")
{
    const auto m = normal_data(2, 100);
    auto ll = [&](const Vector& x) { return m.loglik(x(0)); };
    const Matrix info = observed_info(ll, Vector::Constant(1, m.sum() / m.n()));
    CHECK(info(0, 0) == Approx(100.0).epsilon(1e-6));
    auto flat = [](const Vector&) { return 0.0; };
    CHECK_THROWS_AS(observed_info(flat, Vector::Zero(2)), SingularInformation);
}

TEST_CASE("Laplace estimators on the conjugate normal mean", "[alt]")
{
    const auto m = normal_data(3, 100);
    RngStream rng(3, 2);
    LogPlSample lp;
    std::vector<Vector> cands;
    for (int i = 0; i < 100000; ++i) {
        const double mu = m.draw_power_posterior(1.0, rng);
        lp.values.push_back(m.log_pl(mu));
        if (i < 200)
            cands.push_back(Vector::Constant(1, mu));
    }
    auto f = [&](const Vector& x) { return m.log_pl(x(0)); };
    const double truth = m.log_marginal();
    CHECK(std::abs(bicm(lp, m.n()) - truth) < 1.0);
    CHECK(std::abs(bicim(f, cands) - truth) < 0.5);
    // Laplace is exact for a Gaussian posterior.
    CHECK(bicim(f, cands) == Approx(truth).margin(1e-5));
}

TEST_CASE("weighted estimates", "[alt]")
{
    const auto flat = weighted_log_bf({0.0, 0.0, 0.0}, "is");
    CHECK(flat.estimate.log_bf == 0.0);
    CHECK(flat.max_normalized_weight == Approx(1.0 / 3.0));
    const auto c = weighted_log_bf({std::log(2.0), std::log(2.0)}, "is");
    CHECK(c.estimate.log_bf == Approx(-std::log(2.0)));
    const auto deg = weighted_log_bf({0.0, -50.0, -60.0}, "is");
    CHECK(deg.weight_degeneracy);
    CHECK_THROWS_AS(weighted_log_bf({}, "is"), DomainError);
}

TEST_CASE("importance sampling between identical models gives zero", "[alt]")
{
    const auto y = factor_data(4, 1, 40);
    const auto r = run_is(y, 2, factor::PriorSpec{}, 50, 10, RngStream(4, 2), false);
    CHECK(r.estimate.log_bf == 0.0);
}

TEST_CASE("annealing with constant increments", "[alt]")
{
    const auto grid = path::Grid::uniform(0.1);
    std::vector<double> ladder(grid.points().rbegin(), grid.points().rend());
    const double log_c = 0.3;
    int state = 0;
    auto ll = [&](const int&, double t) { return (1.0 - t) * 10.0 * log_c; };
    auto move = [](int& s, double) { ++s; };
    CHECK(anneal_log_weight(ladder, state, ll, move) == Approx(10 * log_c).epsilon(1e-12));
    CHECK(state == 9);
}

TEST_CASE("annealing with exact transitions recovers a conjugate evidence", "[alt]")
{
    const auto m = normal_data(5, 50, 2.0);
    std::vector<double> pts;
    for (int g = 0; g <= 200; ++g)
        pts.push_back(std::pow(g / 200.0, 3.0));
    std::vector<double> ladder(pts.rbegin(), pts.rend());
    RngStream rng(5, 2);
    std::vector<double> log_w;
    for (int r = 0; r < 400; ++r) {
        double mu = m.draw_power_posterior(1.0, rng);
        auto ll = [&](const double& x, double t) { return t * m.loglik(x); };
        auto move = [&](double& x, double t) { x = m.draw_power_posterior(t, rng); };
        log_w.push_back(anneal_log_weight(ladder, mu, ll, move));
    }
    // The weights estimate z_0 / z_1 = 1 / m(y).
    const auto est = weighted_log_bf(log_w, "ais");
    CHECK(est.estimate.log_bf == Approx(m.log_marginal()).margin(0.1));
}

TEST_CASE("factor Laplace coordinates", "[alt]")
{
    const auto y = factor_data(6, 2, 50);
    const FactorLaplaceModel model(y, 2, factor::PriorSpec{});
    CHECK(model.dim() == 20);
    Matrix lam = cli::table2_loadings();
    const Vector s2 = cli::table3_sigma2();
    const Vector th = model.pack(lam, s2);
    Matrix l2;
    Vector s22;
    model.unpack(th, l2, s22);
    CHECK(l2.isApprox(lam));
    CHECK(s22.isApprox(s2));
    CHECK(model.loglik(th) == Approx(factor::marginal_loglik(y, lam, s2)).epsilon(1e-12));
    const double direct = factor::marginal_loglik(y, lam, s2) + factor::log_prior_loadings(lam, factor::PriorSpec{})
        + factor::log_prior_variances(s2, factor::PriorSpec{}) + s2.array().log().sum();
    CHECK(model.log_pl(th) == Approx(direct).epsilon(1e-12));
    CHECK_THROWS_AS(FactorLaplaceModel(y, 8, factor::PriorSpec{}), DomainError);
}

TEST_CASE("factor Laplace estimates are ordered sensibly", "[alt]")
{
    const auto y = factor_data(7, 2);
    const auto e = factor_laplace(y, 2, factor::PriorSpec{}, 1500, 300, RngStream(7, 2));
    REQUIRE(e.bicim.has_value());
    CHECK(std::isfinite(e.bicm));
    CHECK(e.mple.log_pl_at_max >= e.chain_max);
    CHECK(e.bicm < e.chain_max);
}

TEST_CASE("likelihood gap", "[alt]")
{
    const auto y = factor_data(8, 2, 80);
    const auto same = loglik_gap_report(y, 2, 2, factor::PriorSpec{}, 300, 100, RngStream(8, 2));
    CHECK(same.gap == 0.0);
    const auto r = loglik_gap_report(y, 1, 2, factor::PriorSpec{}, 1000, 200, RngStream(8, 3));
    CHECK(r.gap >= 0.0);
    CHECK(r.gap_per_n == Approx(r.gap / 80.0));
    CHECK(r.max_loglik_big <= factor::global_max_cov(y).loglik_bound);
    CHECK_THROWS_AS(loglik_gap_report(y, 2, 1, factor::PriorSpec{}, 10, 0, RngStream(8, 4)), DomainError);
}
