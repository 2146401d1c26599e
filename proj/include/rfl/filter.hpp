#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "rfl/grid.hpp"
#include "rfl/likelihood.hpp"
#include "rfl/truncation.hpp"

namespace rfl {

// Discrete kernel on a grid, held as log K[i][j] = log mass sent from bin i to bin j.
using LogKernel = Eigen::MatrixXd;

enum class KernelScale {
    density,     // Q(x_i, x_j) * dx
    stochastic,  // rows renormalized to sum to one
};

// Signal transition over one block. M = 0 is exact; otherwise the Girsanov
// weight is averaged over one shared set of bridges for every (i, j).
LogKernel log_transition_kernel(std::span<const double> grid, const TransitionSpec& spec, KernelScale scale,
                                std::uint64_t seed = 0);

// log Q_ij + log psi_hat relative.
LogKernel log_block_kernel(std::span<const double> grid, const LogKernel& log_q, const BlockCoefficients& coeffs);

// Unnormalized mu K. Throws when every target mass is more than 700 e-folds
// below the largest source-kernel product.
GridMeasure propagate(const GridMeasure& mu, const LogKernel& log_k);

GridMeasure filter_step(const GridMeasure& pi, const BlockCoefficients& coeffs, const LogKernel& log_q);
GridMeasure filter_step(const GridMeasure& pi, const BlockCoefficients& coeffs, const TransitionSpec& spec);

// Truncated one-block kernel for block k: Q on rows inside C_{k-1}, the flat
// xi_1(D_k) branch elsewhere, and targets restricted to C_k.
LogKernel log_truncated_kernel(std::span<const double> grid, const LogKernel& log_q, const TruncationGeometry& geometry,
                               std::size_t k, const BlockCoefficients& coeffs);

GridMeasure truncated_step(const GridMeasure& pi, const TruncationGeometry& geometry, std::size_t k,
                           const BlockCoefficients& coeffs, const LogKernel& log_q);

// Posteriors pi_0, ..., pi_n.
std::vector<GridMeasure> run_filter(const GridMeasure& prior, const std::vector<BlockCoefficients>& coeffs,
                                    const LogKernel& log_q);
std::vector<GridMeasure> run_truncated_filter(const GridMeasure& prior, const TruncationGeometry& geometry,
                                              const std::vector<BlockCoefficients>& coeffs, const LogKernel& log_q);

// pi_k(C_k^c) for each entry of the run (k = 0 is the prior).
std::vector<double> escape_mass(const std::vector<GridMeasure>& run, const TruncationGeometry& geometry);

// Uniform grid spanning all compacts plus padding on each side.
std::vector<double> covering_grid(const TruncationGeometry& geometry, std::size_t points, double padding);

// Two filters fed the same kernels. The second is held as r = log(pi' / pi)
// = sigma * rho with log(sigma) tracked apart, so TV and Hilbert distances keep
// full relative precision long after the measures agree to machine accuracy.
class FilterPair {
public:
    FilterPair(const GridMeasure& first, const GridMeasure& second);

    void step(const LogKernel& log_k);

    GridMeasure first() const;
    GridMeasure second() const;
    // log of the TV and Hilbert distances; -inf when the filters coincide.
    double log_tv() const;
    double log_hilbert() const;

private:
    std::vector<double> grid_;
    std::vector<double> lw_;   // normalized log-weights of the first filter
    std::vector<double> rho_;  // direction of the log-ratio, max |rho| = 1 on the support
    double log_sigma_ = 0.0;
    void rescale();
};

GridMeasure gaussian_on_grid(std::span<const double> grid, double mean, double sd);

// Bootstrap particle filter for f = 0 with N(mean, sd^2) prior.
std::vector<double> particle_filter(const std::vector<BlockCoefficients>& coeffs, double tau, double prior_mean,
                                    double prior_sd, std::size_t particles, std::uint64_t seed);

// Nearest-bin histogram; samples outside the grid are dropped.
GridMeasure histogram_on_grid(std::span<const double> grid, std::span<const double> samples);

}  // namespace rfl
