#pragma once

#include <string>
#include <vector>

namespace rfl {

enum class DriftFamily { zero, scaled_tanh, scaled_sine, tabulated };

DriftFamily parse_drift_family(const std::string& name);
std::string to_string(DriftFamily family);

// Signal drift f with sup|f| and sup|f'| bounded by M.
class DriftSpec {
public:
    DriftSpec() = default;
    static DriftSpec zero();
    static DriftSpec scaled_tanh(double bound);
    static DriftSpec scaled_sine(double bound);
    // f and f' sampled on x0 + i*dx, held constant beyond the table.
    static DriftSpec tabulated(double x0, double dx, std::vector<double> f, std::vector<double> fprime,
                               double bound);
    static DriftSpec make(DriftFamily family, double bound);

    DriftFamily family() const { return family_; }
    double bound() const { return bound_; }

    double f(double x) const;
    double fprime(double x) const;
    // F(x) = int_0^x f, by quadrature.
    double primitive(double x) const;

    // Samples 10^4 points and throws if f or f' exceeds the bound.
    void validate() const;

private:
    DriftFamily family_ = DriftFamily::zero;
    double bound_ = 0.0;
    double x0_ = 0.0;
    double dx_ = 1.0;
    std::vector<double> f_;
    std::vector<double> fprime_;
    std::vector<double> cumulative_;
    double interp(const std::vector<double>& table, double x) const;
};

}  // namespace rfl
