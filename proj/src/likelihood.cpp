#include "rfl/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rfl {

namespace {

struct Mixing {
    double u, v, q;
};

Mixing mixing_terms(const GramDecomposition& g, double theta)
{
    return {-g.alpha / 3.0 - g.beta / 2.0 + g.a, -g.alpha / 6.0 + g.beta / 2.0,
            theta * theta * g.alpha * g.gamma / 2.0};
}

// Fills sigma's, the (x,z) parts of m1/m2 and A2, B2, C1.
void fill_shape(BlockCoefficients& c)
{
    const double t = c.theta, h = c.h;
    const auto& g = c.gram;
    const double k = h * h * std::pow(c.tau, 1.5);
    c.sigma1sq = 1.0 / (2.0 * (-(t * t / 3.0 + t / 2.0) * g.alpha * g.alpha + t * t * g.alpha * g.beta / 2.0 + 0.5));
    c.sigma2sq = 1.0 / (2.0 * (-c.sigma1sq * std::pow(t, 4) * g.alpha * g.alpha * g.gamma * g.gamma / 8.0 + 0.5));
    if (!(c.sigma1sq > 0.0) || !(c.sigma2sq > 0.0) || !std::isfinite(c.sigma1sq) || !std::isfinite(c.sigma2sq)) {
        std::ostringstream msg;
        msg << "sigma1^2=" << c.sigma1sq << ", sigma2^2=" << c.sigma2sq << " not positive at theta=" << t;
        throw std::domain_error(msg.str());
    }
    const Mixing mx = mixing_terms(g, t);
    c.m1.x = c.sigma1sq * k * mx.u;
    c.m1.z = c.sigma1sq * k * mx.v;
    c.m2.x = c.sigma2sq * (k * g.b - k * g.gamma / 2.0 - mx.q * c.m1.x);
    c.m2.z = c.sigma2sq * (k * g.gamma / 2.0 - mx.q * c.m1.z);

    const double t3 = t * t * t;
    const double w1 = g.b - g.gamma / 2.0 - mx.q * c.sigma1sq * mx.u;
    const double w2 = g.gamma / 2.0 - mx.q * c.sigma1sq * mx.v;
    c.A2 = h * t / 6.0 - c.sigma1sq / 2.0 * h * t3 * mx.u * mx.u - c.sigma2sq / 2.0 * h * t3 * w1 * w1
           - 0.5 * h * t3 * g.c * g.c;
    c.B2 = h * t / 6.0 - c.sigma1sq / 2.0 * h * t3 * mx.v * mx.v - c.sigma2sq / 2.0 * h * t3 * w2 * w2;
    c.C1 = -h * t / 6.0 + c.sigma1sq * h * t3 * mx.u * mx.v + c.sigma2sq * h * t3 * w1 * w2;
    c.log_prefactor = 0.5 * std::log(c.sigma1sq * c.sigma2sq);
}

}  // namespace

BlockCoefficients BlockCoefficients::quadratic(double A2, double B2, double C1, double A1, double B1)
{
    BlockCoefficients c;
    c.A2 = A2;
    c.B2 = B2;
    c.C1 = C1;
    c.A1 = A1;
    c.B1 = B1;
    return c;
}

BlockCoefficients shape_coefficients(double h, double tau)
{
    if (!(h > 0.0) || !(tau > 0.0)) throw std::invalid_argument("h and tau must be positive");
    BlockCoefficients c;
    c.h = h;
    c.tau = tau;
    c.theta = h * tau;
    c.table = covariance_table(c.theta);
    c.gram = gram_decompose(c.table, ObservationCovariances{});
    fill_shape(c);
    return c;
}

BlockCoefficients block_coefficients(const ObservationPath& block, const BlockCoefficients& shape)
{
    if (std::abs(block.tau() - shape.tau) > 1e-12 * shape.tau)
        throw std::invalid_argument("block length does not match the coefficient shape");
    BlockCoefficients c = shape;
    const double t = c.theta, h = c.h;
    const double hs = h * std::sqrt(c.tau);
    c.gram = gram_decompose(c.table, observation_covariances(block, t, h));
    const auto& g = c.gram;

    const auto d = block.block_increments(1);
    const std::size_t n = d.size();
    std::vector<double> s_terms(n), r_terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(n);
        s_terms[i] = s * d[i];
        r_terms[i] = (1.0 - s) * d[i];
    }
    c.int_s_dy = pairwise_sum(s_terms);
    c.int_one_minus_s_dy = pairwise_sum(r_terms);

    const Mixing mx = mixing_terms(g, t);
    c.m1.constant = -c.sigma1sq * hs * g.lambda1;
    c.m2.constant = c.sigma2sq * (-hs * g.lambda2 - mx.q * c.m1.constant);

    const double t2 = t * t;
    const double w1 = g.b - g.gamma / 2.0 - mx.q * c.sigma1sq * mx.u;
    const double w2 = g.gamma / 2.0 - mx.q * c.sigma1sq * mx.v;
    const double ell = -g.lambda2 + mx.q * c.sigma1sq * g.lambda1;
    c.A1 = h * c.int_one_minus_s_dy - c.sigma1sq * h * t2 * mx.u * g.lambda1 + c.sigma2sq * h * t2 * w1 * ell
           - h * t2 * g.c * g.lambda3;
    c.B1 = h * c.int_s_dy - c.sigma1sq * h * t2 * mx.v * g.lambda1 + c.sigma2sq * h * t2 * w2 * ell;
    c.C0 = c.sigma1sq / 2.0 * h * t * g.lambda1 * g.lambda1 + c.sigma2sq / 2.0 * h * t * ell * ell
           + 0.5 * h * t * g.lambda3 * g.lambda3 + 0.5 * h * t * g.lambda4sq - t / 2.0;
    return c;
}

BlockCoefficients block_coefficients(const ObservationPath& block, double h, double tau)
{
    return block_coefficients(block, shape_coefficients(h, tau));
}

double log_psi_direct(const BlockCoefficients& c, double x, double z)
{
    const double h = c.h, tau = c.tau;
    const double k = h * h * std::pow(tau, 1.5);
    const double hs = h * std::sqrt(tau);
    const auto& g = c.gram;
    const double m1 = c.m1(x, z);
    const double m2 = c.m2(x, z);
    const double third = -k * g.c * x + hs * g.lambda3;
    return h * (x * c.int_one_minus_s_dy + z * c.int_s_dy) - h * h * tau / 2.0 * (x * x + x * z + z * z) / 3.0
           + 0.5 * std::log(c.sigma1sq * c.sigma2sq) + m1 * m1 / (2.0 * c.sigma1sq) + m2 * m2 / (2.0 * c.sigma2sq)
           + 0.5 * third * third + 0.5 * hs * hs * g.lambda4sq - c.theta / 2.0;
}

double psi_hat_eval(const BlockCoefficients& c, double x, double z, PsiMode mode)
{
    const double rel = -c.A2 * x * x - c.B2 * z * z + c.A1 * x + c.B1 * z + c.C1 * x * z;
    if (mode == PsiMode::relative) return rel;
    if (!c.C0) throw std::logic_error("absolute log psi_hat requested but the (x,z)-free constant is unavailable");
    return rel + c.log_prefactor + *c.C0;
}

namespace {

McEstimate aggregate_log(const std::vector<double>& logw)
{
    const double n = static_cast<double>(logw.size());
    const double top = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(top)) throw std::runtime_error("all Monte Carlo weights underflowed or overflowed");
    std::vector<double> e(logw.size()), e2(logw.size());
    for (std::size_t j = 0; j < logw.size(); ++j) {
        e[j] = std::exp(logw[j] - top);
        e2[j] = e[j] * e[j];
    }
    const double mean = pairwise_sum(e) / n;
    const double var = std::max(0.0, pairwise_sum(e2) / n - mean * mean) * n / (n - 1.0);
    return {top + std::log(mean), std::sqrt(var / n) / mean};
}

}  // namespace

McEstimate psi_hat_mc_oracle(const ObservationPath& block, double h, double x, double z, std::size_t n,
                             std::uint64_t seed)
{
    if (n < 1000) throw std::invalid_argument("psi_hat_mc_oracle needs n >= 1000");
    if (block.blocks() != 1) throw std::invalid_argument("expected a single block (see extract_block)");
    const double tau = block.tau();
    const auto d = block.block_increments(1);
    const std::size_t cells = d.size();
    const double scale = std::sqrt(tau);
    std::vector<double> b(cells + 1), sq(cells + 1), logw(n);
    for (std::size_t j = 0; j < n; ++j) {
        Stream rng = make_stream(seed, 0, j);
        fill_standard_bridge(rng, b);
        double lin = 0.0;
        for (std::size_t i = 0; i <= cells; ++i) {
            const double s = static_cast<double>(i) / static_cast<double>(cells);
            const double xs = x * (1.0 - s) + z * s + scale * b[i];
            if (i < cells) lin += xs * d[i];
            sq[i] = xs * xs;
        }
        logw[j] = h * lin - h * h * tau / 2.0 * trapezoid_unit(sq);
    }
    return aggregate_log(logw);
}

void TransitionSpec::validate() const
{
    if (!(tau > 0.0)) throw std::invalid_argument("transition tau must be positive");
    if (mode == TransitionMode::exact_gaussian && drift.family() != DriftFamily::zero && drift.bound() > 0.0)
        throw std::invalid_argument("exact-gaussian transition requires M = 0");
    if (mode == TransitionMode::mc_bridge && (samples < 1 || bridge_steps < 2))
        throw std::invalid_argument("mc-bridge transition needs samples >= 1 and bridge_steps >= 2");
}

TransitionSpec TransitionSpec::for_drift(const DriftSpec& drift, double tau, std::size_t samples)
{
    TransitionSpec s;
    s.drift = drift;
    s.tau = tau;
    s.samples = samples;
    s.mode = (drift.family() == DriftFamily::zero || drift.bound() == 0.0) ? TransitionMode::exact_gaussian
                                                                          : TransitionMode::mc_bridge;
    return s;
}

McEstimate transition_density(const TransitionSpec& spec, double x, double y, std::uint64_t seed)
{
    spec.validate();
    const double tau = spec.tau;
    const double gauss = std::exp(-(y - x) * (y - x) / (2.0 * tau)) / std::sqrt(2.0 * std::numbers::pi * tau);
    if (spec.mode == TransitionMode::exact_gaussian) return {gauss, 0.0};
    const auto& f = spec.drift;
    const double end_terms = f.primitive(y) - f.primitive(x);
    const auto steps = static_cast<std::size_t>(spec.bridge_steps);
    std::vector<double> b(steps + 1), inner(steps + 1), w(spec.samples), w2(spec.samples);
    const double scale = std::sqrt(tau);
    for (std::size_t j = 0; j < spec.samples; ++j) {
        Stream rng = make_stream(seed, 2, j);
        fill_standard_bridge(rng, b);
        for (std::size_t i = 0; i <= steps; ++i) {
            const double s = static_cast<double>(i) / static_cast<double>(steps);
            const double xs = x * (1.0 - s) + y * s + scale * b[i];
            const double fv = f.f(xs);
            inner[i] = f.fprime(xs) + fv * fv;
        }
        w[j] = std::exp(end_terms - 0.5 * tau * trapezoid_unit(inner));
        w2[j] = w[j] * w[j];
    }
    const double n = static_cast<double>(spec.samples);
    const double mean = pairwise_sum(w) / n;
    const double var = n > 1 ? std::max(0.0, pairwise_sum(w2) / n - mean * mean) * n / (n - 1.0) : 0.0;
    return {gauss * mean, gauss * std::sqrt(var / n)};
}

LogBounds transition_log_bounds(double M, double tau, double x, double y)
{
    const double d = std::abs(y - x);
    return {-M * d - tau * (M / 2.0 + M * M / 2.0), M * d + M * tau / 2.0};
}

LogBounds likelihood_log_bounds(double M, double tau, double x, double z)
{
    const double r = 2.0 * M * std::abs(z - x) + tau * (M + M * M / 2.0);
    return {-r, r};
}

PsiEstimate psi_estimate(const ObservationPath& block, double h, double x, double z, const TransitionSpec& spec,
                         std::size_t n, std::uint64_t seed)
{
    spec.validate();
    if (n < 1000) throw std::invalid_argument("psi_estimate needs n >= 1000");
    const BlockCoefficients coeffs = block_coefficients(block, h, block.tau());
    PsiEstimate out;
    out.log_psi_hat = psi_hat_eval(coeffs, x, z);
    const double M = spec.drift.family() == DriftFamily::zero ? 0.0 : spec.drift.bound();
    if (M == 0.0) {
        out.log_psi = out.log_psi_hat;
        return out;
    }
    const double tau = block.tau();
    const auto d = block.block_increments(1);
    const std::size_t cells = d.size();
    const double scale = std::sqrt(tau);
    const auto& f = spec.drift;
    const double end_terms = f.primitive(z) - f.primitive(x);
    std::vector<double> b(cells + 1), sq(cells + 1), inner(cells + 1), joint(n), girsanov(n);
    for (std::size_t j = 0; j < n; ++j) {
        Stream rng = make_stream(seed, 3, j);
        fill_standard_bridge(rng, b);
        double lin = 0.0;
        for (std::size_t i = 0; i <= cells; ++i) {
            const double s = static_cast<double>(i) / static_cast<double>(cells);
            const double xs = x * (1.0 - s) + z * s + scale * b[i];
            if (i < cells) lin += xs * d[i];
            sq[i] = xs * xs;
            const double fv = f.f(xs);
            inner[i] = f.fprime(xs) + fv * fv;
        }
        girsanov[j] = end_terms - 0.5 * tau * trapezoid_unit(inner);
        joint[j] = girsanov[j] + h * lin - h * h * tau / 2.0 * trapezoid_unit(sq);
    }
    const double top_a = *std::max_element(joint.begin(), joint.end());
    const double top_b = *std::max_element(girsanov.begin(), girsanov.end());
    std::vector<double> a(n), bb(n), aa(n), bq(n), ab(n);
    for (std::size_t j = 0; j < n; ++j) {
        a[j] = std::exp(joint[j] - top_a);
        bb[j] = std::exp(girsanov[j] - top_b);
        aa[j] = a[j] * a[j];
        bq[j] = bb[j] * bb[j];
        ab[j] = a[j] * bb[j];
    }
    const double nn = static_cast<double>(n);
    const double ma = pairwise_sum(a) / nn, mb = pairwise_sum(bb) / nn;
    const double va = pairwise_sum(aa) / nn - ma * ma;
    const double vb = pairwise_sum(bq) / nn - mb * mb;
    const double cab = pairwise_sum(ab) / nn - ma * mb;
    out.log_psi = top_a + std::log(ma) - top_b - std::log(mb);
    out.se = std::sqrt(std::max(0.0, va / (ma * ma) + vb / (mb * mb) - 2.0 * cab / (ma * mb)) / (nn - 1.0));
    const LogBounds bounds = likelihood_log_bounds(M, tau, x, z);
    const double gap = out.log_psi - out.log_psi_hat;
    out.inside_sandwich = gap >= bounds.lo - 3.0 * out.se && gap <= bounds.hi + 3.0 * out.se;
    return out;
}

}  // namespace rfl
