#include "rfl/truncation.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rfl {

QuadraticShape QuadraticShape::from(const BlockCoefficients& c)
{
    QuadraticShape s;
    s.h = c.h;
    s.tau = c.tau;
    s.theta = c.theta;
    s.A2 = c.A2;
    s.B2 = c.B2;
    s.C1 = c.C1;
    s.p21 = -c.C1 / (2.0 * c.B2);
    s.p11 = std::sqrt(std::max(0.0, 1.0 - c.C1 * c.C1 / (4.0 * c.A2 * c.B2)));
    s.sigma1 = std::sqrt(c.sigma1sq);
    s.sigma2 = std::sqrt(c.sigma2sq);
    return s;
}

Eigen::Matrix2d QuadraticShape::kappa() const
{
    Eigen::Matrix2d k;
    k << A2, -C1 / 2.0, -C1 / 2.0, B2;
    return k;
}

Eigen::Matrix2d QuadraticShape::P() const
{
    Eigen::Matrix2d p;
    p << p11, 0.0, p21, 1.0;
    return p;
}

bool HypothesisReport::all_pass() const
{
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string HypothesisReport::failures() const
{
    std::ostringstream out;
    for (const auto& c : checks)
        if (!c.pass) out << c.name << " (margin " << c.margin << "); ";
    return out.str();
}

HypothesisReport validate_hypotheses(const QuadraticShape& s, const TruncationParams& p, double m0)
{
    HypothesisReport r;
    auto at_least = [&r](std::string name, double margin) { r.checks.push_back({std::move(name), margin >= 0.0, margin}); };
    auto strictly = [&r](std::string name, double margin) { r.checks.push_back({std::move(name), margin > 0.0, margin}); };
    const double lift = std::pow(s.theta, 1.0 - p.iota);
    const double shrink = 1.0 / (1.0 + s.p21) - 6.0 * s.B2 * s.p21 * lift;
    at_least("h >= 1", s.h - 1.0);
    strictly("tau > 1", s.tau - 1.0);
    strictly("iota in (1/2, 1)", std::min(p.iota - 0.5, 1.0 - p.iota));
    at_least("A2 >= h/4", s.A2 - s.h / 4.0);
    at_least("B2 >= h/4", s.B2 - s.h / 4.0);
    at_least("C1 <= h/8", s.h / 8.0 - s.C1);
    strictly("1/(1+p21) - 6 B2 p21 theta^(1-iota) > 0", shrink);
    strictly("p11 > 1/2", s.p11 - 0.5);
    at_least("|p21| <= 1/2", 0.5 - std::abs(s.p21));
    strictly("theta^(1-iota) Delta > 3|m0| + 3 C M tau^2",
             lift * p.delta - 3.0 * std::abs(m0) - 3.0 * p.C * p.M * s.tau * s.tau);
    strictly("d(Delta) > 0", p.delta / (1.0 + s.p21) - 6.0 * s.B2 * s.p21 * lift * p.delta - 4.0 * p.M);
    return r;
}

XiTerms xi_terms(double D, double delta, double B2, double p21, double tau, double M)
{
    const double w = delta / (B2 * (1.0 + p21));
    const double far = D + w;
    const double near = std::max(0.0, D - w);
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * tau);
    XiTerms x;
    x.log_xi1 = log_norm - far * far / (2.0 * tau) - M * far - (tau / 2.0 + tau * tau / 2.0) * M;
    x.log_xi2 = log_norm - near * near / (2.0 * tau) + M * far + tau / 2.0 * M;
    x.log_eps = x.log_xi1 - x.log_xi2;
    x.log_eps_prime = -0.5 * B2 * p21 * p21 * far * far - B2 * delta * p21 * far - 2.0 * M * far
                      - tau * (M + M * M / 2.0);
    return x;
}

TruncationGeometry::TruncationGeometry(const QuadraticShape& shape, const TruncationParams& params, double m0,
                                       std::span<const double> b1_per_block)
    : shape_(shape), params_(params)
{
    if (!(params.delta > 0.0)) throw std::invalid_argument("truncation level Delta must be positive");
    centers_.push_back(m0);
    const double denom = 2.0 * shape.B2 * (1.0 + shape.p21);
    for (double b1 : b1_per_block) centers_.push_back(b1 / denom);
}

double TruncationGeometry::half_width() const
{
    return params_.delta / (2.0 * shape_.B2 * (1.0 + shape_.p21));
}

double TruncationGeometry::separation(std::size_t k) const
{
    if (k < 1 || k >= centers_.size()) throw std::out_of_range("separation index outside 1..n");
    return std::abs(centers_[k] - centers_[k - 1]);
}

XiTerms TruncationGeometry::xi_at(double D) const
{
    return xi_terms(D, params_.delta, shape_.B2, shape_.p21, shape_.tau, params_.M);
}

XiTerms TruncationGeometry::xi(std::size_t k) const { return xi_at(separation(k)); }

double TruncationGeometry::d_delta() const
{
    const double lift = std::pow(shape_.theta, 1.0 - params_.iota);
    return params_.delta / (1.0 + shape_.p21) - 6.0 * shape_.B2 * shape_.p21 * lift * params_.delta - 4.0 * params_.M;
}

double TruncationGeometry::log_T_delta() const
{
    const auto& s = shape_;
    const auto& p = params_;
    const double lift = std::pow(s.theta, 1.0 - p.iota) * p.delta;
    const double scale = 6.0 * p.C * std::sqrt(2.0 * s.tau);
    const double first = std::log(p.C * std::sqrt(s.tau) / lift) - 0.5 * (lift / scale) * (lift / scale);
    const double d = d_delta();
    if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
    const double M = p.M;
    const double second = std::log((M * (1.0 + s.p21) / s.p11 + std::sqrt(s.A2)) * p.C1prime * s.sigma1 * s.sigma2
                                   * s.p11 * s.B2 / d)
                          + 63.0 * M * s.tau + 4.5 * s.tau * M + 640.0 * M * M - d * d / (4.0 * s.B2);
    const double hi = std::max(first, second);
    return hi + std::log1p(std::exp(std::min(first, second) - hi));
}

TruncationGeometry truncation_geometry(const std::vector<BlockCoefficients>& coeffs, const TruncationParams& params,
                                       double m0)
{
    if (coeffs.empty()) throw std::invalid_argument("truncation_geometry needs at least one block");
    std::vector<double> b1;
    b1.reserve(coeffs.size());
    for (const auto& c : coeffs) b1.push_back(c.B1);
    return TruncationGeometry(QuadraticShape::from(coeffs.front()), params, m0, b1);
}

}  // namespace rfl
