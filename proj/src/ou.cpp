#include "rfl/ou.hpp"

#include "rfl/numerics.hpp"
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rfl {

namespace {

void require_theta(double theta)
{
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        std::ostringstream msg;
        msg << "theta must be positive and finite, got " << theta;
        throw std::domain_error(msg.str());
    }
}

[[noreturn]] void degenerate(const char* what, double value, double theta)
{
    std::ostringstream msg;
    msg.precision(17);
    msg << "degenerate Gram decomposition at theta=" << theta << ": " << what << " = " << value;
    throw std::domain_error(msg.str());
}

const ObservationPath& single_block(const ObservationPath& block)
{
    if (block.blocks() != 1) throw std::invalid_argument("expected a single block (see extract_block)");
    return block;
}

}  // namespace

Eigen::Matrix3d CovarianceTable::gram_order_matrix() const
{
    Eigen::Matrix3d m;
    m << var1, cov13, cov12, cov13, var3, cov23, cov12, cov23, var2;
    return m;
}

CovarianceTable covariance_table(double theta)
{
    require_theta(theta);
    const double t = theta;
    const double e2 = -std::expm1(-2.0 * t);
    const double e1 = -std::expm1(-t);
    const double p = 1.0 + 2.0 / t + 2.0 / (t * t);
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    CovarianceTable c;
    c.theta = t;
    c.var1 = e2 / (2.0 * t);
    c.var2 = (1.0 + 1.0 / t) * (1.0 + 1.0 / t) * e2 / (2.0 * t) + 1.0 / t2 - (2.0 / t2 + 2.0 / t3) * e1;
    const double q = 2.0 / t + 2.0 / t2;
    c.var3 = p * p * e2 / (2.0 * t) + q * q * q * t / 6.0 - 8.0 / (6.0 * t5) - 4.0 * p / t2;
    c.cov12 = (1.0 / (2.0 * t) + 1.0 / (2.0 * t2)) * e2 - e1 / t2;
    c.cov13 = (1.0 / (2.0 * t) + 1.0 / t2 + 1.0 / t3) * e2 - 2.0 / t2;
    c.cov23 = (1.0 + 1.0 / t) * (1.0 / (2.0 * t) + 1.0 / t2 + 1.0 / t3) * e2 - (1.0 / t2 + 2.0 / t3 + 2.0 / t4) * e1
              - 1.0 / t2;
    return c;
}

double ou_kernel_transform(const std::function<double(double)>& g, double theta, double t, double s)
{
    require_theta(theta);
    if (s > t) throw std::invalid_argument("ou_kernel_transform: s must not exceed t");
    if (s == t) return g(t);
    auto inner = [&](double v) { return theta * std::exp(-theta * v) * g(s + v); };
    // the weight decays on the scale 1/theta; resolve that stretch with its own panels
    const double span = t - s;
    const double knee = std::min(span, 30.0 / theta);
    double acc = composite_gauss(inner, 0.0, knee, 6);
    if (knee < span) acc += composite_gauss(inner, knee, span, 2);
    return g(s) - acc;
}

std::vector<double> ou_kernel_transform(std::span<const double> g, double theta, double t)
{
    require_theta(theta);
    if (g.size() < 2) throw std::invalid_argument("ou_kernel_transform needs >= 2 samples");
    for (double v : g)
        if (!std::isfinite(v)) throw std::invalid_argument("ou_kernel_transform: non-finite sample");
    const std::size_t n = g.size() - 1;
    const double h = t / static_cast<double>(n);
    const double e = -std::expm1(-theta * h);
    const double slope_weight = e / theta - h * (1.0 - e);
    std::vector<double> out(g.size());
    double acc = 0.0;
    out[n] = g[n];
    for (std::size_t i = n; i-- > 0;) {
        acc = (1.0 - e) * acc + g[i] * e + (g[i + 1] - g[i]) / h * slope_weight;
        out[i] = g[i] - acc;
    }
    return out;
}

CovarianceTable covariance_table_quadrature(double theta)
{
    require_theta(theta);
    auto f1 = [theta](double s) { return ou_kernel_transform([](double) { return 1.0; }, theta, 1.0, s); };
    auto f2 = [theta](double s) { return ou_kernel_transform([](double u) { return u; }, theta, 1.0, s); };
    auto f3 = [theta](double s) { return ou_kernel_transform([](double u) { return u * u; }, theta, 1.0, s); };
    auto moment = [theta](auto fa, auto fb) {
        auto prod = [&](double s) { return fa(s) * fb(s); };
        // transforms of polynomials change fastest within 1/theta of s = 1
        const double knee = std::max(0.0, 1.0 - 30.0 / theta);
        double acc = composite_gauss(prod, knee, 1.0, 6);
        if (knee > 0.0) acc += composite_gauss(prod, 0.0, knee, 2);
        return acc;
    };
    CovarianceTable c;
    c.theta = theta;
    c.var1 = moment(f1, f1);
    c.var2 = moment(f2, f2);
    c.var3 = moment(f3, f3);
    c.cov12 = moment(f1, f2);
    c.cov13 = moment(f1, f3);
    c.cov23 = moment(f2, f3);
    return c;
}

ObservationCovariances kernel_covariances(std::span<const double> g, double theta)
{
    require_theta(theta);
    const std::size_t n = g.size();
    if (n == 0) throw std::invalid_argument("kernel_covariances: empty observation functional");
    const double ds = 1.0 / static_cast<double>(n);
    const double e = -std::expm1(-theta * ds);
    const double p = 1.0 + 2.0 / theta + 2.0 / (theta * theta);
    const auto& rule = gauss_legendre_12();

    std::vector<double> r(n);
    double tail = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        r[i] = g[i] - tail;
        tail = g[i] * e + (1.0 - e) * tail;
    }
    std::vector<double> t14(n), t24(n), t34(n), t44(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double left = static_cast<double>(i) * ds;
        double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double u = left + rule.nodes[q] * ds;
            const double w = rule.weights[q] * ds;
            const double f4 = r[i] * std::exp(-theta * (1.0 - rule.nodes[q]) * ds);
            const double f1 = std::exp(theta * (u - 1.0));
            const double f2 = (1.0 + 1.0 / theta) * f1 - 1.0 / theta;
            const double f3 = p * f1 - (2.0 * u / theta + 2.0 / (theta * theta));
            a1 += w * f1 * f4;
            a2 += w * f2 * f4;
            a3 += w * f3 * f4;
            a4 += w * f4 * f4;
        }
        t14[i] = a1;
        t24[i] = a2;
        t34[i] = a3;
        t44[i] = a4;
    }
    return {pairwise_sum(t14), pairwise_sum(t24), pairwise_sum(t34), pairwise_sum(t44)};
}

std::vector<double> centred_observation(const ObservationPath& block)
{
    single_block(block);
    const auto y = block.y();
    const std::size_t n = block.steps_per_block();
    std::vector<double> g(y.begin() + 1, y.end());
    const double mean = pairwise_sum(g) / static_cast<double>(n);
    for (double& v : g) v -= mean;
    return g;
}

double cov14_stieltjes(const ObservationPath& block, double theta)
{
    require_theta(theta);
    single_block(block);
    const auto d = block.block_increments(1);
    const std::size_t n = d.size();
    std::vector<double> s_terms(n), k_terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n);
        s_terms[i] = s * d[i];
        k_terms[i] = sinh_kernel(theta, s) * d[i];
    }
    return pairwise_sum(s_terms) * sinh_kernel(theta, 1.0) - pairwise_sum(k_terms);
}

namespace {
void require_consistent(const ObservationPath& block, double theta, double h)
{
    require_theta(theta);
    if (std::abs(theta - h * block.tau()) > 1e-12 * theta) {
        std::ostringstream msg;
        msg << "theta=" << theta << " does not match h*tau=" << h * block.tau();
        throw std::invalid_argument(msg.str());
    }
}
}  // namespace

ObservationCovariances observation_covariances(const ObservationPath& block, double theta, double h)
{
    require_consistent(block, theta, h);
    ObservationCovariances c = kernel_covariances(centred_observation(block), theta);
    c.cov14 = cov14_stieltjes(block, theta);
    return c;
}

Cov34Forms cov34_forms(const ObservationPath& block, double theta, double h)
{
    require_consistent(block, theta, h);
    const auto g = centred_observation(block);
    const auto canonical = kernel_covariances(g, theta);
    const double p = 1.0 + 2.0 / theta + 2.0 / (theta * theta);
    const std::size_t n = g.size();
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) / static_cast<double>(n);
        const double b = static_cast<double>(i + 1) / static_cast<double>(n);
        terms[i] = g[i] * (std::exp(-theta * a) - std::exp(-theta * b)) / theta;
    }
    Cov34Forms out;
    out.canonical = canonical.cov34;
    out.plain = p * canonical.cov14;
    out.with_remainder = out.plain - 2.0 / (theta * theta) * pairwise_sum(terms);
    return out;
}

Eigen::Matrix3d GramDecomposition::triangular_map() const
{
    Eigen::Matrix3d l;
    l << alpha, 0.0, 0.0, beta, gamma, 0.0, a, b, c;
    return l;
}

GramDecomposition gram_decompose(const CovarianceTable& table, const ObservationCovariances& obs)
{
    const double theta = table.theta;
    constexpr double clip = 1e-9;
    GramDecomposition d;
    d.theta = theta;
    d.obs = obs;
    if (!(table.var1 > 0.0)) degenerate("Var(G1)", table.var1, theta);
    d.alpha = std::sqrt(table.var1);
    d.beta = table.cov13 / d.alpha;
    const double gamma2 = table.var3 - d.beta * d.beta;
    if (!(gamma2 > 0.0)) degenerate("gamma^2", gamma2, theta);
    d.gamma = std::sqrt(gamma2);
    d.a = table.cov12 / d.alpha;
    d.b = (table.cov23 - d.a * d.beta) / d.gamma;
    const double c2 = table.var2 - d.a * d.a - d.b * d.b;
    if (!(c2 > 0.0)) degenerate("c^2", c2, theta);
    d.c = std::sqrt(c2);

    d.lambda1 = obs.cov14 / d.alpha;
    d.lambda2 = (obs.cov34 - d.beta * d.lambda1) / d.gamma;
    d.lambda3 = (obs.cov24 - d.a * d.lambda1 - d.b * d.lambda2) / d.c;
    const double l4 = obs.var4 - d.lambda1 * d.lambda1 - d.lambda2 * d.lambda2 - d.lambda3 * d.lambda3;
    if (l4 < -clip) degenerate("lambda4^2", l4, theta);
    d.lambda4sq = std::max(l4, 0.0);
    return d;
}

SeriesExpansions series_expansions(double t)
{
    require_theta(t);
    const double r2 = std::sqrt(2.0), r3 = std::sqrt(3.0);
    SeriesExpansions s{};
    s.alpha = 1.0 / std::sqrt(2.0 * t);
    s.cov13 = 1.0 / (2.0 * t) - 1.0 / (t * t) + 1.0 / (t * t * t);
    s.beta = 1.0 / std::sqrt(2.0 * t) - r2 / std::pow(t, 1.5) + r2 / std::pow(t, 2.5);
    s.beta2 = 1.0 / (2.0 * t) - 2.0 / (t * t) + 4.0 / std::pow(t, 3) - 4.0 / std::pow(t, 4);
    s.var3 = 1.0 / (2.0 * t) - 2.0 / (3.0 * t * t);
    s.gamma = 2.0 / (t * r3) - r3 / (t * t) + r3 / (4.0 * std::pow(t, 3)) + 3.0 * r3 / (8.0 * std::pow(t, 4));
    s.cov12 = 1.0 / (2.0 * t) - 1.0 / (2.0 * t * t);
    s.sigma1sq = 6.0 / t + 18.0 / (t * t) + 18.0 / std::pow(t, 3) - 54.0 / std::pow(t, 4);
    s.a = 1.0 / std::sqrt(2.0 * t) - 1.0 / (std::pow(t, 1.5) * r2);
    s.var2 = 1.0 / (2.0 * t) - 3.0 / (2.0 * std::pow(t, 3));
    s.b = r3 / (2.0 * t) - r3 / (4.0 * t * t) - 9.0 * r3 / (16.0 * std::pow(t, 3));
    s.c2 = 1.0 / (4.0 * t * t) - 5.0 / (4.0 * std::pow(t, 3));
    s.sigma2sq = 1.0 / (3.0 * t * t) - 1.0 / t + 2.0;
    return s;
}

}  // namespace rfl
