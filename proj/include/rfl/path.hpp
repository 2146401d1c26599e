#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rfl/drift.hpp"
#include "rfl/numerics.hpp"

namespace rfl {

struct ModelConfig {
    double h = 1.0;
    double tau = 2.0;
    DriftSpec drift;
    double x0 = 0.0;
    int steps_per_block = 2048;
    double theta() const { return h * tau; }
};

// Observation trajectory on a uniform grid 0, dt, ..., T. Y starts at 0.
class ObservationPath {
public:
    ObservationPath(double dt, double tau, std::vector<double> y, std::vector<double> x = {},
                    std::vector<double> w = {});

    double dt() const { return dt_; }
    double tau() const { return tau_; }
    std::size_t steps_per_block() const { return steps_per_block_; }
    std::size_t size() const { return y_.size(); }
    std::size_t blocks() const { return (y_.size() - 1) / steps_per_block_; }
    double time(std::size_t i) const { return static_cast<double>(i) * dt_; }
    double horizon() const { return time(y_.size() - 1); }

    std::span<const double> y() const { return y_; }
    std::span<const double> x() const { return x_; }
    std::span<const double> w() const { return w_; }
    bool has_x() const { return !x_.empty(); }
    bool has_w() const { return !w_.empty(); }

    // Y increments of block k (1-based), one per cell.
    std::vector<double> block_increments(std::size_t k) const;

private:
    double dt_;
    double tau_;
    std::size_t steps_per_block_;
    std::vector<double> y_, x_, w_;
};

struct NoiseSwitch {
    bool signal = true;
    bool observation = true;
};

// Euler-Maruyama for X, Y_{t+dt} = Y_t + h X_t dt + dW.
ObservationPath simulate_paths(const ModelConfig& model, double horizon, std::uint64_t seed,
                               NoiseSwitch noise = {});

struct BridgeSample {
    double x = 0.0;
    double z = 0.0;
    double tau = 0.0;
    std::vector<double> values;
};

BridgeSample sample_bridge(double x, double z, double tau, int n_steps, std::uint64_t seed, bool noise = true);

// Standard Brownian bridge on the uniform grid of [0,1] with out.size() nodes.
void fill_standard_bridge(Stream& rng, std::span<double> out);

// Left-point sum  sum_i phi(s_i) (Y(s_{i+1}) - Y(s_i))  over block k, s_i = i/N.
double stieltjes_integral(const ObservationPath& path, std::size_t block, std::span<const double> phi);
double stieltjes_integral(const ObservationPath& path, std::size_t block,
                          const std::function<double(double)>& phi);

// e^{-theta} sinh(theta s) / theta in overflow-free form.
double sinh_kernel(double theta, double s);

ObservationPath extract_block(const ObservationPath& path, std::size_t k);

void write_path_csv(const ObservationPath& path, std::ostream& out);
ObservationPath read_path_csv(std::istream& in, double tau);

}  // namespace rfl
