#include "rfl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfl/numerics.hpp"

namespace rfl {

std::vector<double> uniform_grid(double lo, double hi, std::size_t n)
{
    if (n < 2 || !(hi > lo)) throw std::invalid_argument("uniform_grid needs n >= 2 and hi > lo");
    std::vector<double> g(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    return g;
}

GridMeasure::GridMeasure(std::vector<double> grid, std::span<const double> weights) : grid_(std::move(grid))
{
    if (weights.size() != grid_.size()) throw std::invalid_argument("grid and weights differ in length");
    logw_.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw std::invalid_argument("grid weights must be finite and nonnegative");
        logw_[i] = weights[i] > 0.0 ? std::log(weights[i]) : -std::numeric_limits<double>::infinity();
    }
    check();
}

GridMeasure GridMeasure::from_log_weights(std::vector<double> grid, std::vector<double> log_weights)
{
    if (log_weights.size() != grid.size()) throw std::invalid_argument("grid and weights differ in length");
    for (double v : log_weights)
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw std::invalid_argument("log-weights must be finite or -inf");
    GridMeasure m;
    m.grid_ = std::move(grid);
    m.logw_ = std::move(log_weights);
    m.check();
    return m;
}

void GridMeasure::check() const
{
    if (grid_.size() < 2) throw std::invalid_argument("grid needs at least two points");
    for (std::size_t i = 1; i < grid_.size(); ++i)
        if (!(grid_[i] > grid_[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
}

double GridMeasure::spacing() const { return grid_[1] - grid_[0]; }

double GridMeasure::log_total_mass() const { return log_sum_exp(logw_); }

double GridMeasure::total_mass() const { return std::exp(log_total_mass()); }

std::vector<double> GridMeasure::probabilities() const
{
    const double lz = log_total_mass();
    if (!std::isfinite(lz)) throw std::runtime_error("grid measure has no mass");
    std::vector<double> p(logw_.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logw_[i] - lz);
    return p;
}

GridMeasure GridMeasure::normalized() const
{
    const double lz = log_total_mass();
    if (!std::isfinite(lz)) throw std::runtime_error("grid measure has no mass");
    std::vector<double> lw(logw_);
    for (double& v : lw) v -= lz;
    return from_log_weights(grid_, std::move(lw));
}

double GridMeasure::mass_in(double lo, double hi) const
{
    const auto p = probabilities();
    std::vector<double> in;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (grid_[i] >= lo && grid_[i] <= hi) in.push_back(p[i]);
    return pairwise_sum(in);
}

double GridMeasure::median() const
{
    const auto p = probabilities();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (acc >= 0.5) return grid_[i];
    }
    return grid_.back();
}

Distances distances(const GridMeasure& mu, const GridMeasure& nu)
{
    if (mu.size() != nu.size()) throw std::invalid_argument("distances: grids differ");
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu.grid()[i] != nu.grid()[i]) throw std::invalid_argument("distances: grids differ");
    const auto p = mu.probabilities();
    const auto q = nu.probabilities();
    const double lzm = mu.log_total_mass(), lzn = nu.log_total_mass();
    std::vector<double> diff(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = mu.log_weights()[i] - lzm, b = nu.log_weights()[i] - lzn;
        // relative form keeps nearly equal measures accurate
        diff[i] = std::isfinite(a) && std::isfinite(b) ? p[i] * std::abs(std::expm1(b - a)) : std::abs(p[i] - q[i]);
    }
    Distances d;
    d.tv = std::min(1.0, 0.5 * pairwise_sum(diff));

    const auto lm = mu.log_weights();
    const auto ln = nu.log_weights();
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lm.size(); ++i) {
        const bool in_m = std::isfinite(lm[i]);
        const bool in_n = std::isfinite(ln[i]);
        if (in_m != in_n) {
            d.hilbert = std::numeric_limits<double>::infinity();
            return d;
        }
        if (!in_n) continue;
        const double r = lm[i] - ln[i];
        hi = std::max(hi, r);
        lo = std::min(lo, r);
    }
    d.hilbert = hi >= lo ? hi - lo : 0.0;
    return d;
}

}  // namespace rfl
