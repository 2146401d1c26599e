#include "rfl/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rfl/numerics.hpp"
#include "rfl/path.hpp"

namespace rfl {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double grid_spacing(std::span<const double> grid)
{
    if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
    return grid[1] - grid[0];
}

void require_same_size(std::span<const double> grid, const LogKernel& k)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (k.rows() != n || k.cols() != n) throw std::invalid_argument("kernel and grid sizes differ");
}

void normalize_rows(LogKernel& k)
{
    std::vector<double> row(static_cast<std::size_t>(k.cols()));
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) row[static_cast<std::size_t>(j)] = k(i, j);
        const double lz = log_sum_exp(row);
        if (!std::isfinite(lz)) throw std::runtime_error("transition row " + std::to_string(i) + " has no mass");
        k.row(i).array() -= lz;
    }
}

}  // namespace

LogKernel log_transition_kernel(std::span<const double> grid, const TransitionSpec& spec, KernelScale scale,
                                std::uint64_t seed)
{
    spec.validate();
    const auto n = static_cast<Eigen::Index>(grid.size());
    const double dx = grid_spacing(grid);
    const double tau = spec.tau;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * tau) + std::log(dx);
    LogKernel k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = grid[static_cast<std::size_t>(j)] - grid[static_cast<std::size_t>(i)];
            k(i, j) = log_norm - d * d / (2.0 * tau);
        }

    if (spec.mode == TransitionMode::mc_bridge) {
        const auto& f = spec.drift;
        const auto steps = static_cast<std::size_t>(spec.bridge_steps);
        std::vector<std::vector<double>> bridges(spec.samples, std::vector<double>(steps + 1));
        for (std::size_t s = 0; s < spec.samples; ++s) {
            Stream rng = make_stream(seed, 4, s);
            fill_standard_bridge(rng, bridges[s]);
        }
        std::vector<double> F(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) F[i] = f.primitive(grid[i]);
        const double scale_b = std::sqrt(tau);
        std::vector<double> inner(steps + 1), logw(spec.samples);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const double x = grid[static_cast<std::size_t>(i)], y = grid[static_cast<std::size_t>(j)];
                for (std::size_t s = 0; s < spec.samples; ++s) {
                    for (std::size_t t = 0; t <= steps; ++t) {
                        const double u = static_cast<double>(t) / static_cast<double>(steps);
                        const double xs = x * (1.0 - u) + y * u + scale_b * bridges[s][t];
                        const double fv = f.f(xs);
                        inner[t] = f.fprime(xs) + fv * fv;
                    }
                    logw[s] = -0.5 * tau * trapezoid_unit(inner);
                }
                k(i, j) += F[static_cast<std::size_t>(j)] - F[static_cast<std::size_t>(i)] + log_sum_exp(logw)
                           - std::log(static_cast<double>(spec.samples));
            }
    }
    if (scale == KernelScale::stochastic) normalize_rows(k);
    return k;
}

LogKernel log_block_kernel(std::span<const double> grid, const LogKernel& log_q, const BlockCoefficients& coeffs)
{
    require_same_size(grid, log_q);
    LogKernel k = log_q;
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j)
            k(i, j) += psi_hat_eval(coeffs, grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)],
                                    PsiMode::relative);
    return k;
}

GridMeasure propagate(const GridMeasure& mu, const LogKernel& log_k)
{
    require_same_size(mu.grid(), log_k);
    const auto lw = mu.log_weights();
    const auto n = static_cast<Eigen::Index>(lw.size());
    std::vector<double> out(lw.size(), neg_inf), terms(lw.size());
    double ceiling = neg_inf;
    const double top_w = *std::max_element(lw.begin(), lw.end());
    if (!std::isfinite(top_w)) throw std::runtime_error("cannot propagate a measure with no mass");
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto col = log_k.col(j);
        for (Eigen::Index i = 0; i < n; ++i) terms[static_cast<std::size_t>(i)] = lw[static_cast<std::size_t>(i)] + col(i);
        out[static_cast<std::size_t>(j)] = log_sum_exp(terms);
        ceiling = std::max(ceiling, top_w + col.maxCoeff());
    }
    const double top_out = *std::max_element(out.begin(), out.end());
    if (!std::isfinite(top_out) || top_out - ceiling < -700.0)
        throw std::runtime_error("filter mass underflow: widen the grid or shorten the block length");
    return GridMeasure::from_log_weights(std::vector<double>(mu.grid().begin(), mu.grid().end()), std::move(out));
}

GridMeasure filter_step(const GridMeasure& pi, const BlockCoefficients& coeffs, const LogKernel& log_q)
{
    return propagate(pi, log_block_kernel(pi.grid(), log_q, coeffs)).normalized();
}

GridMeasure filter_step(const GridMeasure& pi, const BlockCoefficients& coeffs, const TransitionSpec& spec)
{
    return filter_step(pi, coeffs, log_transition_kernel(pi.grid(), spec, KernelScale::density));
}

LogKernel log_truncated_kernel(std::span<const double> grid, const LogKernel& log_q, const TruncationGeometry& geometry,
                               std::size_t k, const BlockCoefficients& coeffs)
{
    require_same_size(grid, log_q);
    if (k < 1 || k > geometry.blocks()) throw std::out_of_range("block index outside the geometry");
    const double flat = geometry.xi(k).log_xi1 + std::log(grid_spacing(grid));
    bool any_target = false;
    LogKernel out(log_q.rows(), log_q.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double xj = grid[static_cast<std::size_t>(j)];
        const bool target = geometry.contains(k, xj);
        any_target = any_target || target;
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const double xi = grid[static_cast<std::size_t>(i)];
            if (!target) {
                out(i, j) = neg_inf;
                continue;
            }
            const double move = geometry.contains(k - 1, xi) ? log_q(i, j) : flat;
            out(i, j) = move + psi_hat_eval(coeffs, xi, xj, PsiMode::relative);
        }
    }
    if (!any_target) throw std::runtime_error("compact C_" + std::to_string(k) + " contains no grid point");
    return out;
}

GridMeasure truncated_step(const GridMeasure& pi, const TruncationGeometry& geometry, std::size_t k,
                           const BlockCoefficients& coeffs, const LogKernel& log_q)
{
    return propagate(pi, log_truncated_kernel(pi.grid(), log_q, geometry, k, coeffs)).normalized();
}

std::vector<GridMeasure> run_filter(const GridMeasure& prior, const std::vector<BlockCoefficients>& coeffs,
                                    const LogKernel& log_q)
{
    std::vector<GridMeasure> run{prior.normalized()};
    run.reserve(coeffs.size() + 1);
    for (const auto& c : coeffs) run.push_back(filter_step(run.back(), c, log_q));
    return run;
}

std::vector<GridMeasure> run_truncated_filter(const GridMeasure& prior, const TruncationGeometry& geometry,
                                              const std::vector<BlockCoefficients>& coeffs, const LogKernel& log_q)
{
    if (coeffs.size() > geometry.blocks()) throw std::invalid_argument("more blocks than the geometry covers");
    std::vector<GridMeasure> run{prior.normalized()};
    run.reserve(coeffs.size() + 1);
    for (std::size_t k = 1; k <= coeffs.size(); ++k)
        run.push_back(truncated_step(run.back(), geometry, k, coeffs[k - 1], log_q));
    return run;
}

std::vector<double> escape_mass(const std::vector<GridMeasure>& run, const TruncationGeometry& geometry)
{
    if (run.size() > geometry.blocks() + 1) throw std::invalid_argument("run is longer than the geometry");
    std::vector<double> out;
    out.reserve(run.size());
    for (std::size_t k = 0; k < run.size(); ++k) {
        const auto p = run[k].probabilities();
        const auto g = run[k].grid();
        std::vector<double> outside;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!geometry.contains(k, g[i])) outside.push_back(p[i]);
        out.push_back(pairwise_sum(outside));
    }
    return out;
}

std::vector<double> covering_grid(const TruncationGeometry& geometry, std::size_t points, double padding)
{
    double lo = geometry.lower(0), hi = geometry.upper(0);
    for (std::size_t k = 1; k <= geometry.blocks(); ++k) {
        lo = std::min(lo, geometry.lower(k));
        hi = std::max(hi, geometry.upper(k));
    }
    return uniform_grid(lo - padding, hi + padding, points);
}

FilterPair::FilterPair(const GridMeasure& first, const GridMeasure& second)
    : grid_(first.grid().begin(), first.grid().end())
{
    if (first.size() != second.size()) throw std::invalid_argument("filter pair needs a common grid");
    const auto a = first.normalized(), b = second.normalized();
    lw_.assign(a.log_weights().begin(), a.log_weights().end());
    rho_.assign(lw_.size(), 0.0);
    for (std::size_t i = 0; i < lw_.size(); ++i) {
        const bool in_a = std::isfinite(lw_[i]), in_b = std::isfinite(b.log_weights()[i]);
        if (in_a != in_b) throw std::invalid_argument("filter pair needs comparable measures (same support)");
        if (in_a) rho_[i] = b.log_weights()[i] - lw_[i];
    }
    log_sigma_ = 0.0;
    rescale();
}

void FilterPair::rescale()
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < rho_.size(); ++i)
        if (std::isfinite(lw_[i])) {
            lo = std::min(lo, rho_[i]);
            hi = std::max(hi, rho_[i]);
        }
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (double& r : rho_) r -= mid;
    if (half > 0.0) {
        for (double& r : rho_) r /= half;
        log_sigma_ += std::log(half);
    } else {
        std::fill(rho_.begin(), rho_.end(), 0.0);
        log_sigma_ = neg_inf;
    }
}

void FilterPair::step(const LogKernel& log_k)
{
    require_same_size(grid_, log_k);
    const std::size_t n = lw_.size();
    const double sigma = std::exp(log_sigma_);
    // below this scale the log-ratio update is done with series in sigma
    const bool small = sigma < 1e-3;
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rho_[i];
        g[i] = small ? r + sigma * r * r / 2.0 + sigma * sigma * r * r * r / 6.0 : sigma * r;
    }
    std::vector<double> new_lw(n, neg_inf), new_rho(n, 0.0), t(n), e(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto col = log_k.col(static_cast<Eigen::Index>(j));
        double top = neg_inf;
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = lw_[i] + col(static_cast<Eigen::Index>(i));
            top = std::max(top, t[i]);
        }
        if (!std::isfinite(top)) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            e[i] = std::isfinite(t[i]) ? std::exp(t[i] - top) : 0.0;
            sum += e[i];
        }
        new_lw[j] = top + std::log(sum);
        if (small) {
            double x = 0.0;
            for (std::size_t i = 0; i < n; ++i) x += e[i] * g[i];
            x /= sum;
            new_rho[j] = x - sigma * x * x / 2.0 + sigma * sigma * x * x * x / 3.0;
        } else {
            double top_r = neg_inf;
            for (std::size_t i = 0; i < n; ++i)
                if (e[i] > 0.0) top_r = std::max(top_r, t[i] + g[i]);
            double sr = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (e[i] > 0.0) sr += std::exp(t[i] + g[i] - top_r);
            new_rho[j] = (top_r + std::log(sr) - new_lw[j]) / sigma;
        }
    }
    const double lz = log_sum_exp(new_lw);
    if (!std::isfinite(lz)) throw std::runtime_error("filter mass underflow: widen the grid or shorten the block length");
    for (double& v : new_lw) v -= lz;
    lw_ = std::move(new_lw);
    rho_ = std::move(new_rho);
    if (std::isfinite(log_sigma_)) rescale();
}

GridMeasure FilterPair::first() const { return GridMeasure::from_log_weights(grid_, lw_); }

GridMeasure FilterPair::second() const
{
    const double sigma = std::exp(log_sigma_);
    std::vector<double> lw(lw_);
    for (std::size_t i = 0; i < lw.size(); ++i)
        if (std::isfinite(lw[i]) && std::isfinite(log_sigma_)) lw[i] += sigma * rho_[i];
    return GridMeasure::from_log_weights(grid_, std::move(lw)).normalized();
}

double FilterPair::log_hilbert() const
{
    // rho spans [-1, 1] after rescaling
    return std::isfinite(log_sigma_) ? log_sigma_ + std::log(2.0) : neg_inf;
}

double FilterPair::log_tv() const
{
    if (!std::isfinite(log_sigma_)) return neg_inf;
    const double sigma = std::exp(log_sigma_);
    std::vector<double> p(lw_.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        if (std::isfinite(lw_[i])) p[i] = std::exp(lw_[i]);
    if (sigma > 1e-8) {
        // pi'_i = pi_i exp(s_i) with s normalized against pi
        std::vector<double> terms;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] > 0.0) terms.push_back(std::log(p[i]) + sigma * rho_[i]);
        const double lz = log_sum_exp(terms);
        std::vector<double> d;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] > 0.0) d.push_back(p[i] * std::abs(std::expm1(sigma * rho_[i] - lz)));
        return std::log(0.5 * pairwise_sum(d));
    }
    std::vector<double> pr(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) pr[i] = p[i] * rho_[i];
    const double mean = pairwise_sum(pr);
    std::vector<double> d(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = p[i] * std::abs(rho_[i] - mean);
    return log_sigma_ + std::log(0.5 * pairwise_sum(d));
}

GridMeasure gaussian_on_grid(std::span<const double> grid, double mean, double sd)
{
    if (!(sd > 0.0)) throw std::invalid_argument("gaussian_on_grid needs sd > 0");
    std::vector<double> lw(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double u = (grid[i] - mean) / sd;
        lw[i] = -0.5 * u * u;
    }
    return GridMeasure::from_log_weights(std::vector<double>(grid.begin(), grid.end()), std::move(lw)).normalized();
}

std::vector<double> particle_filter(const std::vector<BlockCoefficients>& coeffs, double tau, double prior_mean,
                                    double prior_sd, std::size_t particles, std::uint64_t seed)
{
    if (particles < 2) throw std::invalid_argument("particle filter needs at least two particles");
    std::normal_distribution<double> normal;
    Stream init = make_stream(seed, 0, 0);
    std::vector<double> x(particles), moved(particles), logw(particles), w(particles);
    for (double& v : x) v = prior_mean + prior_sd * normal(init);
    const double step = std::sqrt(tau);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        Stream rng = make_stream(seed, k + 1, 0);
        for (std::size_t p = 0; p < particles; ++p) {
            moved[p] = x[p] + step * normal(rng);
            logw[p] = psi_hat_eval(coeffs[k], x[p], moved[p], PsiMode::relative);
        }
        const double lz = log_sum_exp(logw);
        for (std::size_t p = 0; p < particles; ++p) w[p] = std::exp(logw[p] - lz);
        // systematic resampling
        std::uniform_real_distribution<double> unif(0.0, 1.0 / static_cast<double>(particles));
        double u = unif(rng), cum = w[0];
        std::size_t src = 0;
        for (std::size_t p = 0; p < particles; ++p) {
            const double target = u + static_cast<double>(p) / static_cast<double>(particles);
            while (cum < target && src + 1 < particles) cum += w[++src];
            x[p] = moved[src];
        }
    }
    return x;
}

GridMeasure histogram_on_grid(std::span<const double> grid, std::span<const double> samples)
{
    const double dx = grid_spacing(grid);
    std::vector<double> counts(grid.size(), 0.0);
    for (double s : samples) {
        const double pos = std::round((s - grid.front()) / dx);
        if (pos < 0.0 || pos >= static_cast<double>(grid.size())) continue;
        counts[static_cast<std::size_t>(pos)] += 1.0;
    }
    return GridMeasure(std::vector<double>(grid.begin(), grid.end()), counts);
}

}  // namespace rfl
