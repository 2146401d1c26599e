#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <sstream>
#include <vector>

#include "rfl/path.hpp"

using namespace rfl;

namespace {

ModelConfig small_model(double tau, DriftSpec drift = DriftSpec::zero(), int steps = 128)
{
    ModelConfig m;
    m.h = 1.0;
    m.tau = tau;
    m.drift = drift;
    m.steps_per_block = steps;
    return m;
}

ObservationPath ramp(double tau, std::size_t n)
{
    std::vector<double> y(n + 1);
    for (std::size_t i = 0; i <= n; ++i) y[i] = static_cast<double>(i) / static_cast<double>(n);
    return ObservationPath(tau / static_cast<double>(n), tau, y);
}

}  // namespace

TEST_CASE("zero dynamics with the noise switched off give a flat observation")
{
    const auto p = simulate_paths(small_model(2.0), 6.0, 1, {false, false});
    for (double y : p.y()) CHECK(y == 0.0);
    CHECK(p.blocks() == 3);
}

TEST_CASE("Brownian marginal variance at tau")
{
    const double tau = 2.0;
    const int runs = 10000;
    std::vector<double> sq;
    for (int s = 0; s < runs; ++s) {
        const auto p = simulate_paths(small_model(tau, DriftSpec::zero(), 100), tau, static_cast<std::uint64_t>(s) + 1);
        sq.push_back(p.x().back() * p.x().back());
    }
    double mean = 0.0, m2 = 0.0;
    for (double v : sq) mean += v;
    mean /= runs;
    for (double v : sq) m2 += (v - mean) * (v - mean);
    const double se = std::sqrt(m2 / (runs - 1) / runs);
    CHECK(std::abs(mean - tau) <= 3.0 * se);
}

TEST_CASE("tanh drift increments agree with a ten times finer run")
{
    const double tau = 1.0;
    auto moment = [&](int steps) {
        double sum = 0.0;
        int count = 0;
        for (int s = 0; s < 4000; ++s) {
            const auto p = simulate_paths(small_model(tau, DriftSpec::scaled_tanh(0.5), steps), 10.0 * tau,
                                          static_cast<std::uint64_t>(s) + 100);
            const auto x = p.x();
            for (std::size_t k = 1; k <= p.blocks(); ++k) {
                sum += std::abs(x[k * static_cast<std::size_t>(steps)] - x[(k - 1) * static_cast<std::size_t>(steps)]);
                ++count;
            }
        }
        return sum / count;
    };
    const double coarse = moment(100), fine = moment(1000);
    CHECK(std::abs(coarse / fine - 1.0) <= 0.02);
}

TEST_CASE("horizon must be a multiple of the block length")
{
    CHECK_THROWS_WITH_AS(simulate_paths(small_model(2.0), 5.0, 1), doctest::Contains("multiple"), std::invalid_argument);
}

TEST_CASE("identical seeds give bit-identical paths")
{
    const auto a = simulate_paths(small_model(2.0, DriftSpec::scaled_sine(0.4)), 4.0, 9);
    const auto b = simulate_paths(small_model(2.0, DriftSpec::scaled_sine(0.4)), 4.0, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.y()[i] == b.y()[i]);
        CHECK(a.x()[i] == b.x()[i]);
    }
}

TEST_CASE("bridge endpoints are exact and the midpoint has the bridge law")
{
    const auto flat = sample_bridge(0.0, 0.0, 2.0, 8, 1, false);
    for (double v : flat.values) CHECK(v == 0.0);

    const double x = 1.0, z = 3.0, tau = 2.0;
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto b = sample_bridge(x, z, tau, 4, static_cast<std::uint64_t>(s));
        CHECK_FALSE(b.values.front() != x);
        CHECK_FALSE(b.values.back() != z);
        sum += b.values[2];
        sum2 += b.values[2] * b.values[2];
    }
    const double mean = sum / n, var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 2.0) <= 3.0 * std::sqrt(var / n));
    // variance of the sample variance of a normal is 2 var^2 / (n - 1)
    CHECK(std::abs(var - tau / 4.0) <= 3.0 * std::sqrt(2.0 / (n - 1)) * tau / 4.0);
}

TEST_CASE("Stieltjes sums")
{
    const auto p = simulate_paths(small_model(2.0), 4.0, 3);
    const auto y = p.y();
    const std::size_t n = p.steps_per_block();
    CHECK(stieltjes_integral(p, 2, [](double) { return 1.0; }) == doctest::Approx(y[2 * n] - y[n]).epsilon(1e-13));

    for (std::size_t cells : {256u, 512u}) {
        const double v = stieltjes_integral(ramp(2.0, cells), 1, [](double s) { return s; });
        // left-point sum of s ds is 1/2 - 1/(2N)
        CHECK(v == doctest::Approx(0.5 - 0.5 / static_cast<double>(cells)).epsilon(1e-13));
    }

    auto f = [](double s) { return std::sin(3.0 * s); };
    auto g = [](double s) { return s * s; };
    const double a = 1.7, b = -0.4;
    const double lhs = stieltjes_integral(p, 1, [&](double s) { return a * f(s) + b * g(s); });
    const double rhs = a * stieltjes_integral(p, 1, f) + b * stieltjes_integral(p, 1, g);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
}

TEST_CASE("sinh kernel integrand matches quad precision at theta 50")
{
    using quad = boost::multiprecision::cpp_bin_float_quad;
    const double theta = 50.0;
    const auto p = simulate_paths(small_model(2.0), 2.0, 5);
    const auto d = p.block_increments(1);
    const std::size_t n = d.size();
    quad ref = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const quad s = quad(i) / quad(n);
        const quad t = quad(theta);
        ref += exp(-t) * sinh(t * s) / t * quad(d[i]);
    }
    const double v = stieltjes_integral(p, 1, [&](double s) { return sinh_kernel(theta, s); });
    CHECK(std::abs(v - static_cast<double>(ref)) <= 1e-10 * std::abs(static_cast<double>(ref)));

    for (double big : {1e3, 1e4})
        for (double s : {0.0, 0.5, 1.0}) CHECK(std::isfinite(sinh_kernel(big, s)));
}

TEST_CASE("blocks are re-based slices that reassemble the increments")
{
    const auto p = simulate_paths(small_model(2.0), 6.0, 11);
    const std::size_t n = p.steps_per_block();
    const auto b1 = extract_block(p, 1);
    for (std::size_t i = 0; i <= n; ++i) CHECK(b1.y()[i] == p.y()[i]);

    std::vector<double> all;
    for (std::size_t k = 1; k <= p.blocks(); ++k) {
        const auto b = extract_block(p, k);
        CHECK(b.y().front() == 0.0);
        const auto inc = b.block_increments(1);
        all.insert(all.end(), inc.begin(), inc.end());
        double slice_mean = 0.0, block_mean = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            slice_mean += p.y()[(k - 1) * n + i] - p.y()[(k - 1) * n];
            block_mean += b.y()[i];
        }
        CHECK(block_mean == doctest::Approx(slice_mean).epsilon(1e-12));
    }
    REQUIRE(all.size() == p.size() - 1);
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == doctest::Approx(p.y()[i + 1] - p.y()[i]).epsilon(1e-12));
    CHECK_THROWS_AS(extract_block(p, 0), std::out_of_range);
    CHECK_THROWS_AS(extract_block(p, 4), std::out_of_range);
}

TEST_CASE("path csv round trip is exact")
{
    const auto p = simulate_paths(small_model(2.0), 4.0, 2);
    std::stringstream ss;
    write_path_csv(p, ss);
    const auto q = read_path_csv(ss, 2.0);
    REQUIRE(q.size() == p.size());
    CHECK(q.steps_per_block() == p.steps_per_block());
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(q.y()[i] == p.y()[i]);
        CHECK(q.x()[i] == p.x()[i]);
    }
}
