#include "rfl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "rfl/fk.hpp"
#include "rfl/grid.hpp"
#include "rfl/ou.hpp"

namespace rfl {

namespace {

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Covering grid of the compacts, widened to hold both priors.
std::vector<double> run_grid(const ExperimentConfig& cfg, const TruncationGeometry& geo)
{
    const double pad = cfg.run.padding_sd * std::sqrt(cfg.model.tau);
    const auto base = covering_grid(geo, 2, pad);
    const double lo = std::min({base.front(), cfg.run.prior_mean - 6.0 * cfg.run.prior_sd,
                                cfg.run.alt_prior_mean - 6.0 * cfg.run.alt_prior_sd});
    const double hi = std::max({base.back(), cfg.run.prior_mean + 6.0 * cfg.run.prior_sd,
                                cfg.run.alt_prior_mean + 6.0 * cfg.run.alt_prior_sd});
    return uniform_grid(lo, hi, cfg.run.grid_points);
}

void require_hypotheses(const ExperimentConfig& cfg, const TruncationGeometry& geo)
{
    const auto rep = validate_hypotheses(geo.shape(), geo.params(), geo.center(0));
    if (!rep.all_pass() && !cfg.truncation.force)
        throw std::runtime_error("hypotheses fail at Delta = " + num(geo.params().delta) + ": " + rep.failures()
                                 + "set truncation.force = true to run anyway");
}

// Both filters run jointly; kernel(k) gives the log kernel of block k.
template <class KernelFn>
std::vector<DistanceRow> pair_run(const GridMeasure& a, const GridMeasure& b, std::size_t blocks, double tau,
                                  std::uint64_t seed, KernelFn kernel, std::vector<GridMeasure>* firsts)
{
    FilterPair pair(a, b);
    std::vector<DistanceRow> rows;
    for (std::size_t k = 0; k <= blocks; ++k) {
        if (k > 0) pair.step(kernel(k));
        if (firsts) firsts->push_back(pair.first());
        const double ltv = pair.log_tv(), lh = pair.log_hilbert();
        rows.push_back({k, static_cast<double>(k) * tau, std::exp(ltv), std::exp(lh), 0.0, seed, ltv, lh});
    }
    return rows;
}

}  // namespace

ModelConfig model_config(const ExperimentConfig& cfg)
{
    ModelConfig m;
    m.h = cfg.model.h;
    m.tau = cfg.model.tau;
    m.drift = DriftSpec::make(cfg.model.drift, cfg.model.M);
    m.x0 = cfg.model.x0;
    m.steps_per_block = cfg.model.steps_per_block;
    return m;
}

TransitionSpec grid_transition(const ExperimentConfig& cfg)
{
    auto spec = TransitionSpec::for_drift(DriftSpec::make(cfg.model.drift, cfg.model.M), cfg.model.tau,
                                          cfg.run.kernel_samples);
    spec.bridge_steps = cfg.run.kernel_bridge_steps;
    return spec;
}

TruncationParams truncation_params(const ExperimentConfig& cfg, double delta)
{
    TruncationParams p;
    p.delta = delta;
    p.iota = cfg.truncation.iota;
    p.C = cfg.truncation.C;
    p.C1prime = cfg.truncation.C1prime;
    p.M = cfg.model.M;
    return p;
}

std::vector<BlockCoefficients> run_coefficients(const ObservationPath& path, double h, double tau)
{
    const auto shape = shape_coefficients(h, tau);
    std::vector<BlockCoefficients> out;
    out.reserve(path.blocks());
    for (std::size_t k = 1; k <= path.blocks(); ++k) out.push_back(block_coefficients(extract_block(path, k), shape));
    return out;
}

SimulatedRun simulate_run(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t blocks)
{
    auto path = simulate_paths(model_config(cfg), cfg.model.tau * static_cast<double>(blocks), seed);
    auto coeffs = run_coefficients(path, cfg.model.h, cfg.model.tau);
    return {std::move(path), std::move(coeffs)};
}

double default_nu(const QuadraticShape& s, double epsilon)
{
    const double q = 1.0 + s.p21;
    const double sum = 1.0 / (s.tau * s.B2 * s.B2 * q * q) + s.p21 * s.p21 / (s.B2 * q * q) + s.p21 / q;
    return (1.0 - epsilon) / sum;
}

StabilityResult run_stability(const ExperimentConfig& cfg)
{
    StabilityResult res;
    const auto seeds = cfg.seed_list();
    const auto spec = grid_transition(cfg);
    const std::size_t n = cfg.run.blocks;
    std::vector<double> first, final;
    for (auto seed : seeds) {
        const auto run = simulate_run(cfg, seed, n);
        const auto probe = uniform_grid(cfg.run.prior_mean - 8.0 * cfg.run.prior_sd,
                                        cfg.run.prior_mean + 8.0 * cfg.run.prior_sd, 4001);
        const double m0 = gaussian_on_grid(probe, cfg.run.prior_mean, cfg.run.prior_sd).median();
        const auto geo = truncation_geometry(run.coeffs, truncation_params(cfg, cfg.truncation.delta), m0);
        const auto grid = run_grid(cfg, geo);
        const auto prior = gaussian_on_grid(grid, cfg.run.prior_mean, cfg.run.prior_sd);
        const auto alt = gaussian_on_grid(grid, cfg.run.alt_prior_mean, cfg.run.alt_prior_sd);
        if (!std::isfinite(distances(prior, alt).hilbert)) throw std::runtime_error("priors are not comparable on the grid");
        const auto log_q = log_transition_kernel(grid, spec, KernelScale::density, seed);

        std::vector<GridMeasure> a;
        auto rows = pair_run(
            prior, alt, n, cfg.model.tau, seed,
            [&](std::size_t k) { return log_block_kernel(grid, log_q, run.coeffs[k - 1]); }, &a);
        const auto esc = escape_mass(a, geo);
        for (auto& r : rows) r.escape_mass = esc[r.k];
        std::vector<double> lt, ltv;
        for (const auto& r : rows) {
            if (r.k >= 1) {
                if (r.log_hilbert > rows.front().log_hilbert) res.hilbert_below_initial = false;
                const double rise = r.log_hilbert - rows[r.k - 1].log_hilbert;
                if (std::isfinite(r.log_hilbert))
                    res.worst_hilbert_log_increase = std::max(res.worst_hilbert_log_increase, rise);
                if (rise > 0.0) res.hilbert_nonincreasing = false;
            }
            if (r.k > cfg.run.burn_in && std::isfinite(r.log_tv)) {
                lt.push_back(std::log(r.t));
                ltv.push_back(r.log_tv);
            }
        }
        res.slopes.push_back(lt.size() >= 2 ? ols(lt, ltv).slope : std::numeric_limits<double>::quiet_NaN());
        first.push_back(rows.size() > 1 ? rows[1].log_tv : rows[0].log_tv);
        final.push_back(rows.back().log_tv);
        res.rows.insert(res.rows.end(), rows.begin(), rows.end());

        const double nu = cfg.truncation.nu > 0.0 ? cfg.truncation.nu : default_nu(geo.shape(), cfg.truncation.nu_epsilon);
        res.delta_n = std::sqrt(nu * std::log(static_cast<double>(std::max<std::size_t>(n, 2))));
        const auto geo_n = truncation_geometry(run.coeffs, truncation_params(cfg, res.delta_n), m0);
        if (validate_hypotheses(geo_n.shape(), geo_n.params(), m0).all_pass() || cfg.truncation.force) {
            std::vector<GridMeasure> ta;
            auto trows = pair_run(
                prior, alt, n, cfg.model.tau, seed,
                [&](std::size_t k) { return log_truncated_kernel(grid, log_q, geo_n, k, run.coeffs[k - 1]); }, &ta);
            const auto tesc = escape_mass(ta, geo_n);
            for (auto& r : trows) r.escape_mass = tesc[r.k];
            res.truncated_rows.insert(res.truncated_rows.end(), trows.begin(), trows.end());
            res.truncated_ran = true;
        }
    }
    res.median_slope = median(res.slopes);
    res.median_log_first_tv = median(first);
    res.median_log_final_tv = median(final);
    return res;
}

SweepResult run_truncation_sweep(const ExperimentConfig& cfg)
{
    const auto& deltas = cfg.truncation.delta_sweep;
    if (deltas.size() < 4) throw std::runtime_error("truncation sweep needs at least four Delta values");
    const auto seeds = cfg.seed_list();
    const auto spec = grid_transition(cfg);
    const std::size_t n = cfg.run.blocks;
    SweepResult res;
    // sum over seeds of TV per (Delta, block)
    std::vector<std::vector<double>> tv_sum(deltas.size(), std::vector<double>(n + 1, 0.0));
    std::vector<std::vector<double>> esc_sum(deltas.size(), std::vector<double>(n + 1, 0.0));
    std::vector<std::size_t> used(deltas.size(), 0), underflow(deltas.size(), 0);
    std::vector<double> log_T(deltas.size());
    for (auto seed : seeds) {
        const auto run = simulate_run(cfg, seed, n);
        std::vector<TruncationGeometry> geos;
        for (double d : deltas) {
            geos.push_back(truncation_geometry(run.coeffs, truncation_params(cfg, d), cfg.run.prior_mean));
            require_hypotheses(cfg, geos.back());
        }
        const auto grid = run_grid(cfg, geos.back());
        const auto prior = gaussian_on_grid(grid, cfg.run.prior_mean, cfg.run.prior_sd);
        const auto log_q = log_transition_kernel(grid, spec, KernelScale::density, seed);
        std::vector<GridMeasure> exact;
        try {
            exact = run_filter(prior, run.coeffs, log_q);
        } catch (const std::runtime_error&) {
            for (auto& u : underflow) ++u;
            continue;
        }
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            log_T[i] = geos[i].log_T_delta();
            std::vector<GridMeasure> trunc;
            try {
                trunc = run_truncated_filter(prior, geos[i], run.coeffs, log_q);
            } catch (const std::runtime_error&) {
                ++underflow[i];
                continue;
            }
            ++used[i];
            const auto esc = escape_mass(exact, geos[i]);
            for (std::size_t k = 0; k <= n; ++k) {
                tv_sum[i][k] += distances(exact[k], trunc[k]).tv;
                esc_sum[i][k] += esc[k];
                res.escape.push_back({deltas[i], seed, k, esc[k]});
            }
        }
    }
    std::vector<double> x, y, ex, ey;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        SweepRow row;
        row.delta = deltas[i];
        row.log_T = log_T[i];
        row.underflow_runs = underflow[i];
        if (used[i] > 0) {
            const double m = static_cast<double>(used[i]);
            for (std::size_t k = 1; k <= n; ++k) {
                row.sup_mean_tv = std::max(row.sup_mean_tv, tv_sum[i][k] / m);
                row.mean_escape += esc_sum[i][k] / m;
            }
            row.mean_escape /= static_cast<double>(n);
        }
        res.rows.push_back(row);
        if (row.sup_mean_tv > 0.0) {
            x.push_back(deltas[i] * deltas[i] / cfg.model.h);
            y.push_back(std::log(row.sup_mean_tv));
        }
        if (row.mean_escape > 0.0) {
            ex.push_back(deltas[i] * deltas[i]);
            ey.push_back(std::log(row.mean_escape));
        }
    }
    if (x.size() >= 2) res.fit = ols(x, y);
    if (ex.size() >= 2) res.escape_fit = ols(ex, ey);
    const auto shape = QuadraticShape::from(shape_coefficients(cfg.model.h, cfg.model.tau));
    const double lift = std::pow(shape.theta, 1.0 - cfg.truncation.iota);
    const double g = 1.0 / (1.0 + shape.p21) - 6.0 * shape.B2 * shape.p21 * lift;
    res.predicted_escape_slope = -g * g / (4.0 * shape.B2);
    return res;
}

bool VerifyReport::pass() const
{
    return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.pass; });
}

void VerifyReport::write_csv(std::ostream& out) const
{
    if (suite == "representation" || suite == "mixing") {
        out << "n,grid,seed,max_diff,pass\n";
        for (const auto& r : rows) out << r.n << "," << r.grid << "," << r.seed << "," << num(r.value) << "," << r.pass << "\n";
        return;
    }
    out << "check,value,limit,pass\n";
    for (const auto& r : rows) out << r.check << "," << num(r.value) << "," << num(r.limit) << "," << r.pass << "\n";
}

const std::vector<std::string>& verify_suites()
{
    static const std::vector<std::string> names{"covariances", "psi",   "transition", "representation",
                                                "mixing",      "hypotheses", "distances"};
    return names;
}

PairInstance random_pair_instance(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t blocks, double delta)
{
    const auto shape = shape_coefficients(cfg.model.h, cfg.model.tau);
    const auto qs = QuadraticShape::from(shape);
    Stream rng = make_stream(seed, 0, 11);
    std::uniform_real_distribution<double> centre(-2.0, 2.0);
    std::normal_distribution<double> normal;
    std::vector<BlockCoefficients> coeffs;
    for (std::size_t k = 0; k < blocks; ++k) {
        const double b1 = centre(rng) * 2.0 * shape.B2 * (1.0 + qs.p21);
        auto c = shape;
        c.A1 = normal(rng);
        c.B1 = b1;
        coeffs.push_back(c);
    }
    auto geo = truncation_geometry(coeffs, truncation_params(cfg, delta), 0.0);
    return {std::move(coeffs), std::move(geo)};
}

namespace {

VerifyReport verify_covariances()
{
    VerifyReport rep{"covariances", {}};
    for (double theta : {0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
        const auto c = covariance_table(theta);
        const auto q = covariance_table_quadrature(theta);
        const double a[] = {c.var1, c.var2, c.var3, c.cov12, c.cov13, c.cov23};
        const double b[] = {q.var1, q.var2, q.var3, q.cov12, q.cov13, q.cov23};
        const char* names[] = {"var1", "var2", "var3", "cov12", "cov13", "cov23"};
        for (int i = 0; i < 6; ++i)
            rep.rows.push_back({std::string(names[i]) + "@theta=" + num(theta), 0, 0, 0,
                                std::abs(a[i] - b[i]) / std::abs(b[i]), 1e-8, std::abs(a[i] - b[i]) <= 1e-8 * std::abs(b[i])});
    }
    return rep;
}

VerifyReport verify_psi(const ExperimentConfig& cfg)
{
    VerifyReport rep{"psi", {}};
    const auto run = simulate_run(cfg, cfg.run.seed, 20);
    Stream rng = make_stream(cfg.run.seed, 0, 7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (std::size_t k = 0; k < run.coeffs.size(); ++k) {
        double worst = 0.0;
        for (int j = 0; j < 100; ++j) {
            const double x = u(rng), z = u(rng);
            worst = std::max(worst, std::abs(log_psi_direct(run.coeffs[k], x, z) - psi_hat_eval(run.coeffs[k], x, z)));
        }
        rep.rows.push_back({"block " + std::to_string(k + 1), k + 1, 0, cfg.run.seed, worst, 1e-9, worst <= 1e-9});
    }
    return rep;
}

VerifyReport verify_transition(const ExperimentConfig& cfg)
{
    VerifyReport rep{"transition", {}};
    const double M = cfg.model.M > 0.0 ? cfg.model.M : 0.3;
    const auto family = cfg.model.drift == DriftFamily::zero ? DriftFamily::scaled_tanh : cfg.model.drift;
    auto spec = TransitionSpec::for_drift(DriftSpec::make(family, M), cfg.model.tau, cfg.run.mc_samples);
    spec.bridge_steps = cfg.run.bridge_steps;
    const double x = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double y = -4.0 + 8.0 * i / 19.0;
        const auto est = transition_density(spec, x, y, cfg.run.seed + static_cast<std::uint64_t>(i));
        const auto b = transition_log_bounds(M, spec.tau, x, y);
        const double gauss = std::exp(-(y - x) * (y - x) / (2.0 * spec.tau)) / std::sqrt(2.0 * std::numbers::pi * spec.tau);
        const double lo = gauss * std::exp(b.lo), hi = gauss * std::exp(b.hi);
        // distance outside the band in standard errors; 2.576 is the two-sided 99% point
        const double excess = std::max({0.0, lo - est.value, est.value - hi}) / std::max(est.se, 1e-300);
        rep.rows.push_back({"y=" + num(y), 0, 0, cfg.run.seed, excess, 2.576, excess <= 2.576});
    }
    return rep;
}

VerifyReport verify_representation(const ExperimentConfig& cfg)
{
    VerifyReport rep{"representation", {}};
    const std::size_t g = std::min(cfg.run.pair_grid, max_pair_grid);
    auto spec = grid_transition(cfg);
    for (auto seed : cfg.seed_list())
        for (std::size_t n = 1; n <= 4; ++n) {
            auto inst = random_pair_instance(cfg, seed, n, 2.0);
            PairModel model;
            model.grid = uniform_grid(-5.0, 5.0, g);
            model.q = linear_kernel(log_transition_kernel(model.grid, spec, KernelScale::stochastic, seed));
            model.geometry = &inst.geometry;
            model.coeffs = inst.coeffs;
            const auto mu = gaussian_on_grid(model.grid, cfg.run.prior_mean, 1.5 * cfg.run.prior_sd);
            const auto r = representation_check(model, mu, n);
            rep.rows.push_back({"representation", n, g, seed, r.max_diff, 1e-9, r.max_diff <= 1e-9});
        }
    return rep;
}

VerifyReport verify_mixing(const ExperimentConfig& cfg)
{
    VerifyReport rep{"mixing", {}};
    const std::size_t g = max_pair_grid;
    auto spec = grid_transition(cfg);
    for (auto seed : cfg.seed_list()) {
        const auto run = simulate_run(cfg, seed, 3);
        const auto geo = truncation_geometry(run.coeffs, truncation_params(cfg, cfg.truncation.delta), cfg.run.prior_mean);
        double lo = geo.lower(1), hi = geo.upper(1);
        for (std::size_t k = 0; k <= 3; ++k) {
            lo = std::min(lo, geo.lower(k));
            hi = std::max(hi, geo.upper(k));
        }
        PairModel model;
        model.grid = uniform_grid(lo - 1.0, hi + 1.0, g);
        model.q = linear_kernel(log_transition_kernel(model.grid, spec, KernelScale::density, seed));
        model.geometry = &geo;
        model.coeffs = run.coeffs;
        const auto s = mixing_sandwich_check(model, 3);
        rep.rows.push_back({"sandwich", 3, g, seed, std::max(s.worst_lower, s.worst_upper), 1e-12, s.pass});
    }
    return rep;
}

VerifyReport verify_hypotheses(const ExperimentConfig& cfg)
{
    VerifyReport rep{"hypotheses", {}};
    const auto shape = QuadraticShape::from(shape_coefficients(cfg.model.h, cfg.model.tau));
    const auto r = validate_hypotheses(shape, truncation_params(cfg, cfg.truncation.delta), cfg.run.prior_mean);
    for (const auto& c : r.checks) rep.rows.push_back({c.name, 0, 0, 0, c.margin, 0.0, c.pass});
    return rep;
}

VerifyReport verify_distances(const ExperimentConfig& cfg)
{
    VerifyReport rep{"distances", {}};
    Stream rng = make_stream(cfg.run.seed, 0, 13);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> size(2, 60);
    const double factor = 2.0 / std::log(3.0);
    double worst = -std::numeric_limits<double>::infinity();
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
        worst = std::max(worst, d.tv - factor * d.hilbert);
    }
    rep.rows.push_back({"tv - (2/log 3) hilbert", 0, 0, cfg.run.seed, worst, 0.0, worst <= 0.0});
    const auto grid = uniform_grid(0.0, 1.0, 2);
    const double w1[] = {0.7, 0.3}, w2[] = {0.3, 0.7};
    const auto d = distances(GridMeasure(grid, w1), GridMeasure(grid, w2));
    rep.rows.push_back({"two-bin tv", 0, 0, 0, std::abs(d.tv - 0.4), 1e-15, std::abs(d.tv - 0.4) <= 1e-15});
    const double h = std::log((0.7 / 0.3) / (0.3 / 0.7));
    rep.rows.push_back({"two-bin hilbert", 0, 0, 0, std::abs(d.hilbert - h), 1e-14, std::abs(d.hilbert - h) <= 1e-14});
    return rep;
}

}  // namespace

VerifyReport verify(const std::string& suite, const ExperimentConfig& cfg)
{
    if (suite == "covariances") return verify_covariances();
    if (suite == "psi") return verify_psi(cfg);
    if (suite == "transition") return verify_transition(cfg);
    if (suite == "representation") return verify_representation(cfg);
    if (suite == "mixing") return verify_mixing(cfg);
    if (suite == "hypotheses") return verify_hypotheses(cfg);
    if (suite == "distances") return verify_distances(cfg);
    throw std::invalid_argument("unknown verify suite '" + suite + "'");
}

void write_distance_csv(const std::vector<DistanceRow>& rows, std::ostream& out)
{
    out << "k,t,tv,hilbert,escape_mass,seed\n";
    for (const auto& r : rows)
        out << r.k << "," << num(r.t) << "," << num(r.tv) << "," << num(r.hilbert) << "," << num(r.escape_mass) << ","
            << r.seed << "\n";
}

void write_log_distance_csv(const std::vector<DistanceRow>& rows, std::ostream& out)
{
    out << "k,seed,log_tv,log_hilbert\n";
    for (const auto& r : rows) out << r.k << "," << r.seed << "," << num(r.log_tv) << "," << num(r.log_hilbert) << "\n";
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out)
{
    out << "delta,sup_mean_tv,mean_escape,log_T,underflow_runs\n";
    for (const auto& r : sweep.rows)
        out << num(r.delta) << "," << num(r.sup_mean_tv) << "," << num(r.mean_escape) << "," << num(r.log_T) << ","
            << r.underflow_runs << "\n";
}

void write_escape_csv(const std::vector<EscapeRow>& rows, std::ostream& out)
{
    out << "delta,seed,k,escape_mass\n";
    for (const auto& r : rows) out << num(r.delta) << "," << r.seed << "," << r.k << "," << num(r.escape_mass) << "\n";
}

void write_coefficients_csv(const std::vector<BlockCoefficients>& coeffs, const TruncationGeometry& geometry,
                            std::ostream& out)
{
    out << "k,A2,B2,C1,A1,B1,m_k,D_k\n";
    for (std::size_t k = 1; k <= coeffs.size(); ++k) {
        const auto& c = coeffs[k - 1];
        out << k << "," << num(c.A2) << "," << num(c.B2) << "," << num(c.C1) << "," << num(c.A1) << "," << num(c.B1) << ","
            << num(geometry.center(k)) << "," << num(geometry.separation(k)) << "\n";
    }
}

void write_filter_csv(const std::vector<GridMeasure>& run, std::ostream& out)
{
    out << "k,grid_index,x,weight\n";
    for (std::size_t k = 0; k < run.size(); ++k) {
        const auto p = run[k].probabilities();
        for (std::size_t i = 0; i < p.size(); ++i)
            out << k << "," << i << "," << num(run[k].grid()[i]) << "," << num(p[i]) << "\n";
    }
}

}  // namespace rfl
