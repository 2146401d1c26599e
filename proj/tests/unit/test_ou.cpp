#include <doctest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "rfl/ou.hpp"
#include "rfl/path.hpp"

using namespace rfl;

namespace {

// var1, var2, var3, cov12, cov13, cov23, frozen from an independent evaluation
struct FrozenRow {
    double theta;
    std::array<double, 6> v;
};
const FrozenRow frozen[] = {
    {0.5, {0.63212055882855768, 0.24582086256022127, 0.16170777535958098, 0.32248431533620673, 0.21756726477124982,
           0.19229609937068749}},
    {1.0, {0.43233235838169365, 0.2008471982125439, 0.14164229287567468, 0.23254415793482963, 0.16166179190846827,
           0.16272078967414815}},
    {2.0, {0.24542109027781645, 0.15369891555254654, 0.11721514756968618, 0.15196545622587786, 0.11355272569454114,
           0.12991364056469464}},
    {5.0, {0.099995460007023752, 0.088640305322026407, 0.073963388932718159, 0.080264069888391921,
           0.067993280810395152, 0.078790823434820042}},
    {10.0, {0.049999999896942319, 0.048500998673754981, 0.043353333179942281, 0.045000453885934176,
            0.040999999874269629, 0.044900553740839694}},
    {100.0, {0.005, 0.0049985, 0.0049333335333333333, 0.00495, 0.004901, 0.00494999}},
};

std::array<double, 6> entries(const CovarianceTable& c)
{
    return {c.var1, c.var2, c.var3, c.cov12, c.cov13, c.cov23};
}

Eigen::Matrix3d g132(const CovarianceTable& c) { return c.gram_order_matrix(); }

ObservationPath random_block(double tau, std::uint64_t seed)
{
    ModelConfig m;
    m.tau = tau;
    m.steps_per_block = 256;
    return simulate_paths(m, tau, seed);
}

}  // namespace

TEST_CASE("covariance table matches frozen values and the quadrature route")
{
    for (const auto& row : frozen) {
        CAPTURE(row.theta);
        const auto closed = entries(covariance_table(row.theta));
        const auto quad = entries(covariance_table_quadrature(row.theta));
        for (std::size_t i = 0; i < 6; ++i) {
            CAPTURE(i);
            CHECK(std::abs(closed[i] - row.v[i]) <= 1e-13 * row.v[i]);
            CHECK(std::abs(quad[i] - closed[i]) <= 1e-9 * closed[i]);
        }
    }
}

TEST_CASE("first variance at theta 1 and its large-theta limit")
{
    CHECK(covariance_table(1.0).var1 == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-15));
    for (double t : {1e3, 1e4}) CHECK(covariance_table(t).var1 * 2.0 * t == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("(G1, G3, G2) covariance is positive definite")
{
    for (double t : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 1e2, 1e3, 1e4}) {
        CAPTURE(t);
        Eigen::LLT<Eigen::Matrix3d> llt(g132(covariance_table(t)));
        CHECK(llt.info() == Eigen::Success);
    }
    CHECK_THROWS_WITH(covariance_table(0.0), doctest::Contains("theta"));
    CHECK_THROWS_WITH(covariance_table(-1.0), doctest::Contains("theta"));
}

TEST_CASE("kernel transform of polynomials")
{
    auto one = [](double) { return 1.0; };
    CHECK(ou_kernel_transform(one, 1.0, 1.0, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    auto sq = [](double u) { return u * u; };
    CHECK(ou_kernel_transform(sq, 3.0, 1.0, 1.0) == 1.0);

    const double theta = 2.0, s = 0.5, t = 1.0;
    const double closed = (t * t + 2.0 * t / theta + 2.0 / (theta * theta)) * std::exp(theta * (s - t)) -
                          (2.0 * s / theta + 2.0 / (theta * theta));
    CHECK(std::abs(ou_kernel_transform(sq, theta, t, s) - closed) <= 1e-12);

    // sampled version is exact for piecewise-linear g
    const std::size_t n = 40;
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g[i] = 1.5 * static_cast<double>(i) / static_cast<double>(n);
    const auto out = ou_kernel_transform(g, 7.0, 1.5);
    for (std::size_t i = 0; i <= n; ++i) {
        const double u = 1.5 * static_cast<double>(i) / static_cast<double>(n);
        CHECK(std::abs(out[i] - ((1.5 + 1.0 / 7.0) * std::exp(7.0 * (u - 1.5)) - 1.0 / 7.0)) <= 1e-12);
    }
    CHECK(out[n] == g[n]);
    // no overflow at large theta
    for (double v : ou_kernel_transform(g, 1e4, 1.5)) CHECK(std::isfinite(v));
}

TEST_CASE("observation covariances of a flat block vanish")
{
    std::vector<double> y(257, 0.0);
    const ObservationPath flat(2.0 / 256.0, 2.0, y);
    const auto c = observation_covariances(flat, 2.0, 1.0);
    CHECK(c.cov14 == 0.0);
    CHECK(c.cov24 == 0.0);
    CHECK(c.cov34 == 0.0);
    CHECK(c.var4 == 0.0);
}

TEST_CASE("discretized ramp at theta 2 against an mpmath quadrature oracle")
{
    const std::size_t n = 128;
    std::vector<double> y(n + 1);
    for (std::size_t i = 0; i <= n; ++i) y[i] = static_cast<double>(i) / static_cast<double>(n);
    const ObservationPath ramp(2.0 / static_cast<double>(n), 2.0, y);
    const auto c = kernel_covariances(centred_observation(ramp), 2.0);
    CHECK(c.cov14 == doctest::Approx(0.029253009734963967894).epsilon(1e-12));
    CHECK(c.cov24 == doctest::Approx(0.077711136464459501556).epsilon(1e-12));
    CHECK(c.cov34 == doctest::Approx(0.073132524337409919736).epsilon(1e-12));
    CHECK(c.var4 == doctest::Approx(0.063085617476078144628).epsilon(1e-12));
    CHECK(cov14_stieltjes(ramp, 2.0) == doctest::Approx(c.cov14).epsilon(1e-12));
}

TEST_CASE("Stieltjes and canonical routes agree on random blocks")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        for (double tau : {2.0, 8.0}) {
            const auto b = random_block(tau, seed);
            const double canon = kernel_covariances(centred_observation(b), tau).cov14;
            CHECK(std::abs(cov14_stieltjes(b, tau) - canon) <= 1e-8 * std::max(1.0, std::abs(canon)));
        }
    CHECK_THROWS_AS(observation_covariances(random_block(2.0, 1), 3.0, 1.0), std::invalid_argument);
}

TEST_CASE("Cov(G3, G4): the form without remainder is the canonical value")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto b = random_block(2.0, seed);
        const auto f = cov34_forms(b, 2.0, 1.0);
        CHECK(std::abs(f.plain - f.canonical) <= 1e-10 * std::max(1.0, std::abs(f.canonical)));
        CHECK(std::abs(f.with_remainder - f.canonical) > 1e-6);
    }
}

TEST_CASE("Gram decomposition reconstructs the covariance")
{
    for (double t : {0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
        CAPTURE(t);
        const auto table = covariance_table(t);
        const auto d = gram_decompose(table, {});
        const Eigen::Matrix3d l = d.triangular_map();
        CHECK((l * l.transpose() - g132(table)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(d.alpha > 0.0);
        CHECK(d.gamma > 0.0);
        CHECK(d.c > 0.0);
    }
    CHECK(gram_decompose(covariance_table(100.0), {}).alpha ==
          doctest::Approx(1.0 / std::sqrt(200.0)).epsilon(0.01));
}

TEST_CASE("lambdas agree with a dense solve and are linear in the observation")
{
    const auto table = covariance_table(2.0);
    // Var(G4) = 20 leaves lambda4^2 < 0 against this table; 400 keeps the
    // synthetic covariance admissible and does not enter the lambdas
    ObservationCovariances obs{1.0, 2.0, 3.0, 400.0};
    const auto d = gram_decompose(table, obs);
    const Eigen::Vector3d rhs(obs.cov14, obs.cov34, obs.cov24);
    const Eigen::Vector3d lam = d.triangular_map().partialPivLu().solve(rhs);
    CHECK(std::abs(lam(0) - d.lambda1) <= 1e-12);
    CHECK(std::abs(lam(1) - d.lambda2) <= 1e-12);
    CHECK(std::abs(lam(2) - d.lambda3) <= 1e-12);
    CHECK(d.lambda4sq == doctest::Approx(400.0 - lam.squaredNorm()).epsilon(1e-12));

    const auto ga = centred_observation(random_block(2.0, 3));
    const auto gb = centred_observation(random_block(2.0, 4));
    std::vector<double> gs(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) gs[i] = ga[i] + gb[i];
    const auto la = gram_decompose(table, kernel_covariances(ga, 2.0));
    const auto lb = gram_decompose(table, kernel_covariances(gb, 2.0));
    const auto ls = gram_decompose(table, kernel_covariances(gs, 2.0));
    CHECK(std::abs(ls.lambda1 - la.lambda1 - lb.lambda1) <= 1e-12);
    CHECK(std::abs(ls.lambda2 - la.lambda2 - lb.lambda2) <= 1e-12);
    CHECK(std::abs(ls.lambda3 - la.lambda3 - lb.lambda3) <= 1e-12);
}

TEST_CASE("degenerate Gram input names theta")
{
    auto table = covariance_table(2.0);
    table.var3 = table.cov13 * table.cov13 / table.var1 - 1e-6;
    CHECK_THROWS_WITH_AS(gram_decompose(table, {}), doctest::Contains("theta=2"), std::domain_error);
}

TEST_CASE("large-theta expansions at theta 1000")
{
    const double t = 1e3;
    const auto table = covariance_table(t);
    const auto d = gram_decompose(table, {});
    const auto s = series_expansions(t);
    auto close = [&](double series, double exact) { return std::abs(series - exact) <= 10.0 / t * std::abs(exact); };
    CHECK(close(s.alpha, d.alpha));
    CHECK(close(s.cov13, table.cov13));
    CHECK(close(s.beta, d.beta));
    CHECK(close(s.beta2, d.beta * d.beta));
    CHECK(close(s.var3, table.var3));
    CHECK(close(s.gamma, d.gamma));
    CHECK(close(s.cov12, table.cov12));
    CHECK(close(s.a, d.a));
    CHECK(close(s.var2, table.var2));
    CHECK(close(s.b, d.b));
    CHECK(close(s.c2, d.c * d.c));
}
