#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "rfl/experiments.hpp"
#include "rfl/fk.hpp"
#include "rfl/ou.hpp"

using namespace rfl;

namespace {

namespace tol {
constexpr double covariance_rel = 1e-8;
constexpr double gram_abs = 1e-10;
constexpr double dual_route = 1e-9;
constexpr double mc_se = 3.0;
constexpr double asym_half = 0.01;   // in units of h
constexpr double asym_c1_rel = 0.05;
constexpr double sandwich_z = 2.576; // two-sided 99%
constexpr double pf_tv = 0.05;
constexpr double mixing_slack = 1e-12;
constexpr double representation = 1e-9;
constexpr double bootstrap_level = 0.95;
constexpr double sweep_r2 = 0.8;
constexpr double stability_ratio = 5.0;
}  // namespace tol

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double seconds;  // runtime limit, infinity when none is stated
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::vector<double> thetas{0.5, 1.0, 2.0, 5.0, 10.0, 100.0};

Outcome covariances()
{
    double worst = 0.0;
    for (double t : thetas) {
        const auto c = covariance_table(t), q = covariance_table_quadrature(t);
        const double a[] = {c.var1, c.var2, c.var3, c.cov12, c.cov13, c.cov23};
        const double b[] = {q.var1, q.var2, q.var3, q.cov12, q.cov13, q.cov23};
        for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(b[i]));
    }
    return {worst <= tol::covariance_rel, fmt("worst relative error %.2e <= %.0e", worst, tol::covariance_rel)};
}

Outcome gram()
{
    double worst = 0.0;
    for (double t : thetas) {
        const auto table = covariance_table(t);
        const Eigen::Matrix3d l = gram_decompose(table, {}).triangular_map();
        worst = std::max(worst, (l * l.transpose() - table.gram_order_matrix()).cwiseAbs().maxCoeff());
    }
    return {worst <= tol::gram_abs, fmt("max abs error %.2e <= %.0e", worst, tol::gram_abs)};
}

Outcome dual_route()
{
    ExperimentConfig cfg;
    const auto run = simulate_run(cfg, 101, 20);
    Stream rng = make_stream(101, 0, 7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    double worst = 0.0;
    for (const auto& c : run.coeffs)
        for (int j = 0; j < 100; ++j) {
            const double x = u(rng), z = u(rng);
            worst = std::max(worst, std::abs(log_psi_direct(c, x, z) - psi_hat_eval(c, x, z)));
        }
    return {worst <= tol::dual_route, fmt("20 blocks x 100 points, max |diff| %.2e <= %.0e", worst, tol::dual_route)};
}

Outcome psi_mc()
{
    ExperimentConfig cfg;
    cfg.model.steps_per_block = 128;
    const auto run = simulate_run(cfg, 202, 10);
    Stream rng = make_stream(202, 0, 9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 10; ++k) {
        const auto block = extract_block(run.path, k);
        const double x = u(rng), z = u(rng);
        const auto e = psi_hat_mc_oracle(block, 1.0, x, z, 200000, 202 + k);
        worst = std::max(worst, std::abs(e.value - psi_hat_eval(run.coeffs[k - 1], x, z)) / e.se);
    }
    return {worst <= tol::mc_se, fmt("10 triples, 2e5 bridges each, worst |diff|/se %.2f <= %.0f", worst, tol::mc_se)};
}

Outcome asymptotics()
{
    const double h = 1.0;
    const auto c = shape_coefficients(h, 1000.0);
    const double ea = std::abs(c.A2 - h / 2.0), eb = std::abs(c.B2 - h / 2.0);
    const double c1 = std::abs(1000.0 * c.C1), target = 1.5 * h;
    const bool a_ok = ea <= tol::asym_half * h, b_ok = eb <= tol::asym_half * h;
    const bool c_ok = std::abs(c1 - target) <= tol::asym_c1_rel * target;
    return {a_ok && b_ok && c_ok,
            fmt("|A2-h/2| %.2e, |B2-h/2| %.2e (<= %.2f h); |1000 C1| %.4f vs 3h/2 = %.2f (5%%): %s", ea, eb,
                tol::asym_half, c1, target, c_ok ? "ok" : "off")};
}

Outcome transition()
{
    const double M = 0.3, tau = 2.0;
    const auto spec = TransitionSpec::for_drift(DriftSpec::scaled_tanh(M), tau, 20000);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double y = -4.0 + 8.0 * i / 19.0;
        const auto est = transition_density(spec, 0.0, y, 300 + static_cast<std::uint64_t>(i));
        const auto b = transition_log_bounds(M, tau, 0.0, y);
        const double g = std::exp(-y * y / (2.0 * tau)) / std::sqrt(2.0 * std::numbers::pi * tau);
        const double excess = std::max({0.0, g * std::exp(b.lo) - est.value, est.value - g * std::exp(b.hi)}) / est.se;
        worst = std::max(worst, excess);
    }
    return {worst <= tol::sandwich_z, fmt("20 points, worst excess %.2f se <= %.3f", worst, tol::sandwich_z)};
}

Outcome particle()
{
    ExperimentConfig cfg;
    const std::uint64_t seed = 404;
    const auto run = simulate_run(cfg, seed, 10);
    const auto geo = truncation_geometry(run.coeffs, truncation_params(cfg, cfg.truncation.delta), 0.0);
    const auto grid = covering_grid(geo, 400, 4.0 * std::sqrt(cfg.model.tau));
    const auto log_q = log_transition_kernel(grid, grid_transition(cfg), KernelScale::density, seed);
    const auto post = run_filter(gaussian_on_grid(grid, 0.0, 1.0), run.coeffs, log_q);
    const auto pf = particle_filter(run.coeffs, cfg.model.tau, 0.0, 1.0, 100000, seed);
    const double tv = distances(post.back(), histogram_on_grid(grid, pf)).tv;
    return {tv <= tol::pf_tv, fmt("final TV %.4f <= %.2f", tv, tol::pf_tv)};
}

Outcome mixing()
{
    ExperimentConfig cfg;
    const std::uint64_t seed = 505;
    const auto run = simulate_run(cfg, seed, 6);
    const auto geo = truncation_geometry(run.coeffs, truncation_params(cfg, cfg.truncation.delta), 0.0);
    double lo = geo.lower(0), hi = geo.upper(0);
    for (std::size_t k = 1; k <= 6; ++k) {
        lo = std::min(lo, geo.lower(k));
        hi = std::max(hi, geo.upper(k));
    }
    PairModel model;
    model.grid = uniform_grid(lo - 1.0, hi + 1.0, max_pair_grid);
    model.q = linear_kernel(log_transition_kernel(model.grid, grid_transition(cfg), KernelScale::density, seed));
    model.geometry = &geo;
    model.coeffs = run.coeffs;
    double worst = 0.0;
    bool pass = true;
    for (std::size_t k = 2; k <= 6; ++k) {
        const auto s = mixing_sandwich_check(model, k);
        worst = std::max({worst, s.worst_lower, s.worst_upper});
        pass = pass && s.worst_lower <= tol::mixing_slack && s.worst_upper <= tol::mixing_slack;
    }
    return {pass, fmt("5 blocks on %zu points, worst relative violation %.2e <= %.0e", max_pair_grid, worst,
                      tol::mixing_slack)};
}

Outcome representation()
{
    ExperimentConfig cfg;
    double worst = 0.0;
    for (std::size_t g : {std::size_t{9}, max_pair_grid})
        for (std::uint64_t seed = 1; seed <= 3; ++seed)
            for (std::size_t n = 1; n <= 4; ++n) {
                const auto inst = random_pair_instance(cfg, seed, n, 2.0);
                PairModel model;
                model.grid = uniform_grid(-5.0, 5.0, g);
                model.q = linear_kernel(log_transition_kernel(model.grid, grid_transition(cfg), KernelScale::stochastic));
                model.geometry = &inst.geometry;
                model.coeffs = inst.coeffs;
                const auto r = representation_check(model, gaussian_on_grid(model.grid, 0.0, 1.5), n);
                worst = std::max(worst, r.max_diff);
            }
    return {worst <= tol::representation,
            fmt("n = 1..4, grids 9 and %zu, 3 seeds, max diff %.2e <= %.0e", max_pair_grid, worst, tol::representation)};
}

Outcome contraction()
{
    ExperimentConfig cfg;
    cfg.model.tau = 8.0;
    cfg.model.steps_per_block = 256;
    const std::size_t k = 0, n = 12, seeds = 50;
    std::vector<double> log_gap(seeds);  // log(1 - prod tau_{2i}) per seed
    double log_bound_gap = 0.0;          // log(1 - B)
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto run = simulate_run(cfg, 1000 + s, 2 * n);
        const auto geo = truncation_geometry(run.coeffs, truncation_params(cfg, cfg.truncation.delta), 0.0);
        const auto led = u_chain_contraction(geo, cfg.truncation.C);
        log_gap[s] = led.log_product_complement(k, n);
        log_bound_gap = log1m_exp_neg_exp(led.log_neg_log_bound(k, n));
    }
    // E prod <= B  <=>  mean(1 - prod) >= 1 - B, compared in logs
    Stream rng = make_stream(1000, 0, 17);
    std::uniform_int_distribution<std::size_t> pick(0, seeds - 1);
    const int resamples = 2000;
    int hits = 0;
    std::vector<double> draw(seeds);
    for (int r = 0; r < resamples; ++r) {
        for (auto& v : draw) v = log_gap[pick(rng)];
        if (log_sum_exp(draw) - std::log(static_cast<double>(seeds)) >= log_bound_gap) ++hits;
    }
    const double frac = static_cast<double>(hits) / resamples;
    const double log_mean = log_sum_exp(log_gap) - std::log(static_cast<double>(seeds));
    return {frac >= tol::bootstrap_level,
            fmt("theta 8, n-k 12, 50 seeds: log(1-E prod) %.1f vs log(1-bound) %.1f, %.1f%% of resamples >= %.0f%%",
                log_mean, log_bound_gap, 100.0 * frac, 100.0 * tol::bootstrap_level)};
}

Outcome sweep()
{
    ExperimentConfig cfg;
    cfg.model.tau = 4.0;
    cfg.truncation.delta_sweep = {2.0, 3.0, 4.0, 5.0};
    cfg.run.blocks = 50;
    cfg.run.seeds = 10;
    const auto s = run_truncation_sweep(cfg);
    std::size_t underflow = 0;
    for (const auto& r : s.rows) underflow += r.underflow_runs;
    const bool pass = s.fit.slope < 0.0 && s.fit.r2 >= tol::sweep_r2 && underflow == 0;
    return {pass, fmt("Delta in {2,3,4,5}: slope %.4f < 0, R^2 %.4f >= %.1f, underflow runs %zu", s.fit.slope,
                      s.fit.r2, tol::sweep_r2, underflow)};
}

Outcome stability()
{
    ExperimentConfig cfg;
    cfg.model.tau = 4.0;
    cfg.run.blocks = 200;
    cfg.run.seeds = 20;
    const auto r = run_stability(cfg);
    const bool slope_ok = r.median_slope < 0.0;
    const bool decay_ok = r.median_log_final_tv < r.median_log_first_tv - std::log(tol::stability_ratio);
    const bool pass = slope_ok && decay_ok && r.hilbert_nonincreasing && r.hilbert_below_initial;
    return {pass, fmt("median slope %.2f < 0; median log TV first %.2f, final %.1f; Hilbert non-increasing: %s", r.median_slope,
                      r.median_log_first_tv, r.median_log_final_tv, r.hilbert_nonincreasing ? "yes" : "no")};
}

Outcome distance_bound()
{
    Stream rng = make_stream(1313, 0, 13);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> size(2, 60);
    const double factor = 2.0 / std::log(3.0);
    double worst = -std::numeric_limits<double>::infinity();
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto n = static_cast<std::size_t>(size(rng));
        const double scale = std::exp(2.0 * normal(rng));
        std::vector<double> a(n), b(n);
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = scale * normal(rng);
            b[j] = scale * normal(rng);
        }
        const auto grid = uniform_grid(0.0, 1.0, n);
        const auto d = distances(GridMeasure::from_log_weights(grid, a), GridMeasure::from_log_weights(grid, b));
        if (!(d.tv <= factor * d.hilbert)) ++violations;
        worst = std::max(worst, d.tv / (factor * d.hilbert));
    }
    return {violations == 0, fmt("1000 pairs, violations %d, max TV / ((2/log 3) H) %.4f", violations, worst)};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    std::vector<int> expect_red, only;
    app.add_option("--expect-red", expect_red, "criteria whose failure is known and documented");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<Criterion> criteria{
        {1, "covariance exactness", 1.0, covariances},
        {2, "Gram reconstruction", inf, gram},
        {3, "likelihood dual route", 10.0, dual_route},
        {4, "psi_hat vs bridge Monte Carlo", 60.0, psi_mc},
        {5, "large-theta asymptotics", inf, asymptotics},
        {6, "transition sandwich", 60.0, transition},
        {7, "grid vs particle filter", 120.0, particle},
        {8, "mixing sandwich", inf, mixing},
        {9, "Feynman-Kac representation", inf, representation},
        {10, "contraction bound", inf, contraction},
        {11, "truncation sweep", 600.0, sweep},
        {12, "stability", 900.0, stability},
        {13, "TV vs Hilbert", inf, distance_bound},
    };

    const std::set<int> red(expect_red.begin(), expect_red.end()), pick(only.begin(), only.end());
    int unexpected = 0;
    for (const auto& c : criteria) {
        if (!pick.empty() && !pick.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.seconds;
        const bool pass = o.pass && in_time;
        const bool known = red.count(c.id) > 0;
        std::string timing = fmt("%.2f s", secs);
        if (std::isfinite(c.seconds)) timing += fmt(" < %.0f s%s", c.seconds, in_time ? "" : " EXCEEDED");
        std::printf("%s %2d %s: %s [%s]%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str(),
                    !pass && known ? " (expected)" : pass && known ? " (expected red, now passing)" : "");
        std::fflush(stdout);
        if (!pass && !known) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
