#include "rfl/drift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rfl/numerics.hpp"

namespace rfl {

DriftFamily parse_drift_family(const std::string& name)
{
    if (name == "zero") return DriftFamily::zero;
    if (name == "scaled-tanh" || name == "tanh") return DriftFamily::scaled_tanh;
    if (name == "scaled-sine" || name == "sine") return DriftFamily::scaled_sine;
    if (name == "tabulated") return DriftFamily::tabulated;
    throw std::invalid_argument("unknown drift family '" + name + "'");
}

std::string to_string(DriftFamily family)
{
    switch (family) {
    case DriftFamily::zero: return "zero";
    case DriftFamily::scaled_tanh: return "scaled-tanh";
    case DriftFamily::scaled_sine: return "scaled-sine";
    case DriftFamily::tabulated: return "tabulated";
    }
    return "?";
}

DriftSpec DriftSpec::zero() { return DriftSpec{}; }

DriftSpec DriftSpec::scaled_tanh(double bound)
{
    if (!(bound >= 0.0)) throw std::invalid_argument("drift bound must be >= 0");
    DriftSpec d;
    d.family_ = DriftFamily::scaled_tanh;
    d.bound_ = bound;
    return d;
}

DriftSpec DriftSpec::scaled_sine(double bound)
{
    if (!(bound >= 0.0)) throw std::invalid_argument("drift bound must be >= 0");
    DriftSpec d;
    d.family_ = DriftFamily::scaled_sine;
    d.bound_ = bound;
    return d;
}

DriftSpec DriftSpec::tabulated(double x0, double dx, std::vector<double> f, std::vector<double> fprime,
                               double bound)
{
    if (f.size() < 2 || f.size() != fprime.size() || !(dx > 0.0))
        throw std::invalid_argument("tabulated drift needs matching f/f' tables of length >= 2 and dx > 0");
    DriftSpec d;
    d.family_ = DriftFamily::tabulated;
    d.bound_ = bound;
    d.x0_ = x0;
    d.dx_ = dx;
    d.f_ = std::move(f);
    d.fprime_ = std::move(fprime);
    // exact for the piecewise-linear interpolant
    d.cumulative_.assign(d.f_.size(), 0.0);
    for (std::size_t i = 1; i < d.f_.size(); ++i)
        d.cumulative_[i] = d.cumulative_[i - 1] + 0.5 * dx * (d.f_[i - 1] + d.f_[i]);
    return d;
}

DriftSpec DriftSpec::make(DriftFamily family, double bound)
{
    switch (family) {
    case DriftFamily::zero: return zero();
    case DriftFamily::scaled_tanh: return scaled_tanh(bound);
    case DriftFamily::scaled_sine: return scaled_sine(bound);
    case DriftFamily::tabulated: break;
    }
    throw std::invalid_argument("tabulated drift needs a table");
}

double DriftSpec::interp(const std::vector<double>& table, double x) const
{
    const double u = (x - x0_) / dx_;
    if (u <= 0.0) return table.front();
    const double last = static_cast<double>(table.size() - 1);
    if (u >= last) return table.back();
    const auto i = static_cast<std::size_t>(u);
    const double r = u - static_cast<double>(i);
    return (1.0 - r) * table[i] + r * table[i + 1];
}

double DriftSpec::f(double x) const
{
    switch (family_) {
    case DriftFamily::zero: return 0.0;
    case DriftFamily::scaled_tanh: return bound_ * std::tanh(x);
    case DriftFamily::scaled_sine: return bound_ * std::sin(x);
    case DriftFamily::tabulated: return interp(f_, x);
    }
    return 0.0;
}

double DriftSpec::fprime(double x) const
{
    switch (family_) {
    case DriftFamily::zero: return 0.0;
    case DriftFamily::scaled_tanh: {
        const double c = std::cosh(x);
        return std::isfinite(c) ? bound_ / (c * c) : 0.0;
    }
    case DriftFamily::scaled_sine: return bound_ * std::cos(x);
    case DriftFamily::tabulated: return interp(fprime_, x);
    }
    return 0.0;
}

double DriftSpec::primitive(double x) const
{
    if (family_ == DriftFamily::zero || x == 0.0) return 0.0;
    if (family_ == DriftFamily::tabulated) {
        auto at = [this](double y) {
            const double u = (y - x0_) / dx_;
            const double last = static_cast<double>(f_.size() - 1);
            if (u <= 0.0) return f_.front() * (y - x0_);
            if (u >= last) return cumulative_.back() + f_.back() * (y - x0_ - last * dx_);
            const auto i = static_cast<std::size_t>(u);
            const double r = (u - static_cast<double>(i)) * dx_;
            const double fi = f_[i];
            const double slope = (f_[i + 1] - fi) / dx_;
            return cumulative_[i] + fi * r + 0.5 * slope * r * r;
        };
        return at(x) - at(0.0);
    }
    auto g = [this](double y) { return f(y); };
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(x))));
    const double acc = composite_gauss(g, 0.0, x, panels);
    return acc;
}

void DriftSpec::validate() const
{
    const double lo = family_ == DriftFamily::tabulated ? x0_ - dx_ : -20.0;
    const double hi = family_ == DriftFamily::tabulated ? x0_ + dx_ * static_cast<double>(f_.size()) : 20.0;
    const double tol = bound_ * (1.0 + 1e-12);
    for (int i = 0; i < 10000; ++i) {
        const double x = lo + (hi - lo) * i / 9999.0;
        const double v = f(x), d = fprime(x);
        if (!std::isfinite(v) || !std::isfinite(d) || std::abs(v) > tol || std::abs(d) > tol) {
            std::ostringstream msg;
            msg << "drift " << to_string(family_) << " violates |f|,|f'| <= " << bound_ << " at x=" << x
                << " (f=" << v << ", f'=" << d << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

}  // namespace rfl
