#include "rfl/numerics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rfl {

Stream make_stream(std::uint64_t seed, std::uint64_t block, std::uint64_t replicate)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                      static_cast<std::uint32_t>(replicate),
                      static_cast<std::uint32_t>(replicate >> 32), 0x5eedu};
    return Stream(seq);
}

double pairwise_sum(std::span<const double> v)
{
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double log_sum_exp(std::span<const double> v)
{
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    std::vector<double> shifted(v.size());
    std::transform(v.begin(), v.end(), shifted.begin(), [top](double x) { return std::exp(x - top); });
    return top + std::log(pairwise_sum(shifted));
}

double trapezoid_unit(std::span<const double> v)
{
    if (v.size() < 2) throw std::invalid_argument("trapezoid_unit: need two or more samples");
    const std::size_t n = v.size() - 1;
    return (pairwise_sum(v.subspan(1, n - 1)) + 0.5 * (v.front() + v.back())) / static_cast<double>(n);
}

LinearFit ols(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols: need two or more paired points");
    const double n = static_cast<double>(x.size());
    const double mx = pairwise_sum(x) / n;
    const double my = pairwise_sum(y) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

double median(std::vector<double> v)
{
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

const UnitRule& gauss_legendre_12()
{
    static const UnitRule rule = [] {
        using G = boost::math::quadrature::gauss<double, 12>;
        UnitRule r;
        const auto& x = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < x.size(); ++i) {
            r.nodes.push_back(0.5 * (1.0 - x[i]));
            r.weights.push_back(0.5 * w[i]);
            r.nodes.push_back(0.5 * (1.0 + x[i]));
            r.weights.push_back(0.5 * w[i]);
        }
        return r;
    }();
    return rule;
}

double composite_gauss(const std::function<double(double)>& f, double a, double b, std::size_t panels)
{
    if (panels == 0) throw std::invalid_argument("composite_gauss needs at least one panel");
    double acc = 0.0;
    const double w = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + w * static_cast<double>(p);
        acc += boost::math::quadrature::gauss<double, 30>::integrate(f, lo, lo + w);
    }
    return acc;
}

}  // namespace rfl
