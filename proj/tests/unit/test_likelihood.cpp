#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "rfl/likelihood.hpp"
#include "rfl/path.hpp"

using namespace rfl;

namespace {

// 128 increments of a tau = 2 block (numpy seed 1: randn * sqrt(tau/N) + 0.3 tau/N)
const std::vector<double> frozen_dy{0.20773067045790522,-0.07178205170625943,-0.061333969032931965,-0.1294335777695213,0.11286345366558481,-0.2830048371100353,0.22278897052706,-0.09046336261188785,0.04456738700713732,-0.02648379693467626,0.18745099213062177,-0.25283008868720674,-0.03561465050168844,-0.04331929433355196,0.1464086802919297,-0.13279890841425385,-0.01686602594380447,-0.10504480224017147,0.009964218339449105,0.07753940171447778,-0.13288989715161514,0.14777796372995178,0.11738634007409944,0.06749929236273353,0.11729449365805147,-0.08077848239679164,-0.01067377818983102,-0.1122836792823836,-0.028798509953251988,0.07098193334227325,-0.08177009396566363,-0.044906690856997174,-0.08120908751494993,-0.10096320518733995,-0.07921826635460238,0.0031044251351373298,-0.1349762935794097,0.033989462227136516,0.21216277213873383,0.09744302007216694,-0.019291944045201865,-0.10626612051060454,-0.08870728671885471,0.21624432512846833,0.01103846934700362,-0.07493695582116917,0.028551935583433254,0.2672193920598553,0.019707369060203643,0.0818378887134274,0.042208789994478434,-0.039343730811689834,-0.1381272747527675,-0.03898034030160969,-0.021424279171847263,0.0780153988977747,0.10956042673431311,0.12107526016294466,0.040385915656782345,0.11533014553384101,-0.0896122426245816,0.161296019404161,0.0688037275522511,-0.03257410438783946,0.06575226831718713,-0.004758964127631966,0.14614117343142838,0.19466460205277486,0.2778844258166452,-0.1698745419360172,-0.17582672567869867,-0.05837073286830641,0.02469213368097881,0.11420861513952811,0.04414186840520065,-0.24808765197800037,-0.03358800157854648,0.10818433032590577,0.03344934192054792,0.09993889753900309,-0.023103517826294908,-0.02040725861624968,0.02800767387353554,0.05594395590103204,0.02947496501584622,0.019563580725932353,-0.07914528578612882,0.051882973290114924,0.019915158873929615,0.14587298848898997,0.15455223498768839,0.02783205218549298,-0.04222311876126428,-0.0751538009317778,0.05762429425801411,0.014355008543569928,-0.03829420944638445,0.010137107104280868,-0.07281260549351616,0.09194150425902736,-0.05120357059824978,0.15775096310068737,0.055123955223849996,0.07888481540463337,-0.13217648071763022,0.025860304132333513,0.09725705638703434,-0.11452507522599183,-0.028589813250452758,0.00876431833666982,-0.16695216503084445,0.04408242400528647,0.11045758094812917,-0.1027519926039983,0.04850574733301342,-0.15934792640467896,-0.0001494386582563895,-0.19728404433791183,0.144864713529458,0.05580006724210347,0.0016103805155277054,-0.09220770239614495,0.1639069912698471,0.25057521865684185,-0.227560233055844,0.15920800380660255,0.2081438441436133,0.04693896207180947};

ObservationPath frozen_block()
{
    std::vector<double> y{0.0};
    for (double d : frozen_dy) y.push_back(y.back() + d);
    return ObservationPath(2.0 / static_cast<double>(frozen_dy.size()), 2.0, y);
}

ObservationPath random_block(double tau, std::uint64_t seed, int steps = 256)
{
    ModelConfig m;
    m.tau = tau;
    m.steps_per_block = steps;
    return simulate_paths(m, tau, seed);
}

}  // namespace

TEST_CASE("closed form against an exact discretized-bridge Gaussian oracle")
{
    const auto c = block_coefficients(frozen_block(), 1.0, 2.0);
    struct Point {
        double x, z, log_psi;
    };
    const Point pts[] = {{0.3, -0.7, -0.6373993614931681}, {1.0, 2.0, 0.24076675771219133}, {0.0, 0.0, 0.007413032899722986}};
    for (const auto& p : pts) {
        CAPTURE(p.x);
        CHECK(std::abs(psi_hat_eval(c, p.x, p.z) - p.log_psi) <= 1e-9);
        CHECK(std::abs(log_psi_direct(c, p.x, p.z) - p.log_psi) <= 1e-9);
    }
}

TEST_CASE("flat block")
{
    std::vector<double> y(257, 0.0);
    const ObservationPath flat(2.0 / 256.0, 2.0, y);
    const auto c = block_coefficients(flat, 1.0, 2.0);
    CHECK(c.A1 == 0.0);
    CHECK(c.B1 == 0.0);
    CHECK(psi_hat_eval(c, 0.0, 0.0) == doctest::Approx(0.5 * std::log(c.sigma1sq * c.sigma2sq) - 1.0).epsilon(1e-14));
    CHECK(psi_hat_eval(c, 0.0, 0.0, PsiMode::relative) == 0.0);
}

TEST_CASE("the two assembly routes agree")
{
    Stream rng = make_stream(5, 0, 0);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    const auto shape = shape_coefficients(1.0, 2.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = block_coefficients(random_block(2.0, seed), shape);
        double worst = 0.0;
        for (int j = 0; j < 100; ++j) {
            const double x = u(rng), z = u(rng);
            worst = std::max(worst, std::abs(log_psi_direct(c, x, z) - psi_hat_eval(c, x, z)));
        }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("only the quadratic form carries the z dependence")
{
    const auto c = block_coefficients(random_block(2.0, 3), 1.0, 2.0);
    const double x = 0.4, z = -1.1, z2 = 0.8;
    const double lhs = psi_hat_eval(c, x, z) - psi_hat_eval(c, x, z2);
    const double rhs = -c.B2 * (z * z - z2 * z2) + c.B1 * (z - z2) + c.C1 * x * (z - z2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK_THROWS_AS(psi_hat_eval(BlockCoefficients::quadratic(0.5, 0.5, 0.0, 0.0, 0.0), 0.0, 0.0), std::logic_error);
}

TEST_CASE("quadratic coefficients against an independent evaluation")
{
    struct Row {
        double tau, A2, C1;
    };
    const Row rows[] = {{2.0, 0.2686573603637733, -0.22427943522821775}, {4.0, 0.3753355752, -0.213356},
                        {8.0, 0.4375001125, -0.124329}};
    for (const auto& r : rows) {
        CAPTURE(r.tau);
        const auto c = shape_coefficients(1.0, r.tau);
        CHECK(c.A2 == doctest::Approx(r.A2).epsilon(1e-9));
        CHECK(c.B2 == doctest::Approx(r.A2).epsilon(1e-9));
        CHECK(c.C1 == doctest::Approx(r.C1).epsilon(1e-5));
        CHECK(4.0 * c.A2 * c.B2 - c.C1 * c.C1 > 0.0);
        CHECK(c.sigma1sq > 0.0);
        CHECK(c.sigma2sq > 0.0);
    }
}

TEST_CASE("large-theta behaviour of A2, B2 and C1")
{
    double prev = 1.0;
    for (double t : {10.0, 100.0, 1000.0}) {
        const auto c = shape_coefficients(1.0, t);
        const double gap = std::max(std::abs(c.A2 - 0.5), std::abs(c.B2 - 0.5));
        CHECK(gap < prev);
        prev = gap;
    }
    const auto c = shape_coefficients(1.0, 1000.0);
    CHECK(std::abs(c.A2 - 0.5) <= 0.01);
    CHECK(std::abs(c.B2 - 0.5) <= 0.01);
    // theta * C1 tends to -h here; a 3h/2 limit is not what the exact coefficient does
    CHECK(1000.0 * c.C1 == doctest::Approx(-1.0).epsilon(1e-3));
    const auto c2 = shape_coefficients(2.0, 500.0);
    CHECK(1000.0 * c2.C1 == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("bridge Monte Carlo oracle")
{
    std::vector<double> y(129, 0.0);
    const ObservationPath flat(2.0 / 128.0, 2.0, y);
    const auto cf = block_coefficients(flat, 1.0, 2.0);
    const auto ef = psi_hat_mc_oracle(flat, 1.0, 0.0, 0.0, 20000, 1);
    CHECK(std::abs(ef.value - psi_hat_eval(cf, 0.0, 0.0)) <= 3.0 * ef.se);

    const auto block = frozen_block();
    const auto c = block_coefficients(block, 1.0, 2.0);
    for (std::uint64_t seed : {1u, 2u}) {
        const auto e = psi_hat_mc_oracle(block, 1.0, 0.3, -0.7, 20000, seed);
        CHECK(std::abs(e.value - psi_hat_eval(c, 0.3, -0.7)) <= 3.0 * e.se);
    }

    double ratio = 0.0;
    for (std::uint64_t r = 0; r < 10; ++r) {
        const auto a = psi_hat_mc_oracle(block, 1.0, 1.0, 2.0, 2000, 100 + r);
        const auto b = psi_hat_mc_oracle(block, 1.0, 1.0, 2.0, 4000, 200 + r);
        ratio += b.se / a.se / 10.0;
    }
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
    CHECK_THROWS_AS(psi_hat_mc_oracle(block, 1.0, 0.0, 0.0, 999, 1), std::invalid_argument);
}

TEST_CASE("transition density")
{
    const auto zero = TransitionSpec::for_drift(DriftSpec::zero(), 1.0);
    const auto d = transition_density(zero, 0.0, 0.0, 1);
    CHECK(d.value == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
    CHECK(d.se == 0.0);

    TransitionSpec bad = TransitionSpec::for_drift(DriftSpec::scaled_tanh(0.3), 2.0);
    bad.mode = TransitionMode::exact_gaussian;
    CHECK_THROWS_AS(transition_density(bad, 0.0, 0.0, 1), std::invalid_argument);

    const auto spec = TransitionSpec::for_drift(DriftSpec::scaled_tanh(0.3), 2.0, 4000);
    for (int i = 0; i < 5; ++i) {
        const double y = -3.0 + 1.5 * i;
        const auto e = transition_density(spec, 0.0, y, static_cast<std::uint64_t>(i));
        const auto b = transition_log_bounds(0.3, 2.0, 0.0, y);
        const double g = std::exp(-y * y / 4.0) / std::sqrt(4.0 * std::numbers::pi);
        CHECK(e.value >= g * std::exp(b.lo) - 3.0 * e.se);
        CHECK(e.value <= g * std::exp(b.hi) + 3.0 * e.se);
    }
}

TEST_CASE("transition density against a histogram of Euler endpoints")
{
    const double tau = 2.0, M = 0.3, x0 = 0.5;
    const auto drift = DriftSpec::scaled_tanh(M);
    const int paths = 200000, steps = 400;
    const double dt = tau / steps, width = 0.25, lo = -2.5;
    const int bins = 24;
    std::vector<double> counts(bins, 0.0);
    for (int p = 0; p < paths; ++p) {
        Stream rng = make_stream(77, 0, static_cast<std::uint64_t>(p));
        std::normal_distribution<double> n;
        double x = x0;
        for (int i = 0; i < steps; ++i) x += drift.f(x) * dt + std::sqrt(dt) * n(rng);
        const int b = static_cast<int>(std::floor((x - lo) / width));
        if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const auto spec = TransitionSpec::for_drift(drift, tau, 4000);
    double worst = 0.0;
    for (int b = 0; b < bins; ++b) {
        // Simpson average of the density over the bin
        const double a = lo + b * width;
        const auto f0 = transition_density(spec, x0, a, 1000 + 3 * static_cast<std::uint64_t>(b));
        const auto f1 = transition_density(spec, x0, a + width / 2, 1001 + 3 * static_cast<std::uint64_t>(b));
        const auto f2 = transition_density(spec, x0, a + width, 1002 + 3 * static_cast<std::uint64_t>(b));
        const double mc = (f0.value + 4.0 * f1.value + f2.value) / 6.0;
        const double mc_se = std::sqrt(f0.se * f0.se + 16.0 * f1.se * f1.se + f2.se * f2.se) / 6.0;
        const double p = counts[static_cast<std::size_t>(b)] / paths;
        const double hist = p / width;
        const double binom_se = std::sqrt(p * (1.0 - p) / paths) / width;
        worst = std::max(worst, std::abs(hist - mc) / std::sqrt(binom_se * binom_se + mc_se * mc_se));
    }
    // the 3-sigma two-sided level, shared over all bins
    const double crit = boost::math::quantile(boost::math::normal(), 1.0 - 0.0027 / (2.0 * bins));
    CHECK(worst <= crit);
}

TEST_CASE("likelihood estimate stays inside its sandwich")
{
    const auto block = random_block(2.0, 4, 128);
    const auto c = block_coefficients(block, 1.0, 2.0);
    const auto exact = psi_estimate(block, 1.0, 0.2, -0.4, TransitionSpec::for_drift(DriftSpec::zero(), 2.0), 2000, 1);
    CHECK(exact.log_psi == exact.log_psi_hat);
    CHECK(exact.log_psi == doctest::Approx(psi_hat_eval(c, 0.2, -0.4)).epsilon(1e-14));

    for (double M : {0.1, 0.3}) {
        const auto spec = TransitionSpec::for_drift(DriftSpec::scaled_tanh(M), 2.0);
        const auto e = psi_estimate(block, 1.0, 0.2, -0.4, spec, 20000, 2);
        CHECK(e.inside_sandwich);
        const auto b = likelihood_log_bounds(M, 2.0, 0.2, -0.4);
        CHECK(e.log_psi - e.log_psi_hat >= b.lo - 3.0 * e.se);
        CHECK(e.log_psi - e.log_psi_hat <= b.hi + 3.0 * e.se);

        const auto h1 = psi_estimate(block, 1.0, 0.2, -0.4, spec, 10000, 3);
        const auto h2 = psi_estimate(block, 1.0, 0.2, -0.4, spec, 10000, 4);
        CHECK(std::abs(h1.log_psi - h2.log_psi) <= 3.0 * std::sqrt(h1.se * h1.se + h2.se * h2.se));
    }
}
