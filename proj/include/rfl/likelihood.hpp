#pragma once

#include <cstdint>
#include <optional>

#include "rfl/drift.hpp"
#include "rfl/ou.hpp"
#include "rfl/path.hpp"

namespace rfl {

struct AffineForm {
    double constant = 0.0, x = 0.0, z = 0.0;
    double operator()(double xv, double zv) const { return constant + x * xv + z * zv; }
};

// log psi_hat(x, z) = log(sigma1 sigma2) - A2 x^2 - B2 z^2 + A1 x + B1 z + C1 x z + C0.
struct BlockCoefficients {
    double theta = 0.0, h = 0.0, tau = 0.0;
    CovarianceTable table;
    GramDecomposition gram;
    double sigma1sq = 0.0, sigma2sq = 0.0;
    AffineForm m1, m2;
    double A2 = 0.0, B2 = 0.0, C1 = 0.0, A1 = 0.0, B1 = 0.0;
    std::optional<double> C0;
    double log_prefactor = 0.0;
    double int_s_dy = 0.0;
    double int_one_minus_s_dy = 0.0;

    // Coefficients without an observation block, e.g. for synthetic tests.
    static BlockCoefficients quadratic(double A2, double B2, double C1, double A1, double B1);
};

// Observation-free parts: covariance table, Gram basis, sigma's, A2, B2, C1.
BlockCoefficients shape_coefficients(double h, double tau);

BlockCoefficients block_coefficients(const ObservationPath& block, double h, double tau);
// Reuses the observation-free parts (identical for every block of a run).
BlockCoefficients block_coefficients(const ObservationPath& block, const BlockCoefficients& shape);

// Direct assembly from sigma's, m1, m2 and the lambda's.
double log_psi_direct(const BlockCoefficients& c, double x, double z);

enum class PsiMode { relative, absolute };
double psi_hat_eval(const BlockCoefficients& c, double x, double z, PsiMode mode = PsiMode::absolute);

struct McEstimate {
    double value = 0.0;  // log-estimate for the psi oracles, plain value for densities
    double se = 0.0;
};

// Bridge Monte Carlo of log psi_hat; se is the delta-method error of the log.
McEstimate psi_hat_mc_oracle(const ObservationPath& block, double h, double x, double z, std::size_t n,
                             std::uint64_t seed);

enum class TransitionMode { exact_gaussian, mc_bridge };

struct TransitionSpec {
    DriftSpec drift;
    double tau = 1.0;
    TransitionMode mode = TransitionMode::exact_gaussian;
    std::size_t samples = 20000;
    int bridge_steps = 256;

    void validate() const;
    static TransitionSpec for_drift(const DriftSpec& drift, double tau, std::size_t samples = 20000);
};

// Density of X_tau at y given X_0 = x.
McEstimate transition_density(const TransitionSpec& spec, double x, double y, std::uint64_t seed);

// log of the Girsanov factor bounds: Q(x,y) / N(y; x, tau) lies in [exp(lo), exp(hi)].
struct LogBounds {
    double lo = 0.0, hi = 0.0;
};
LogBounds transition_log_bounds(double M, double tau, double x, double y);
// log psi - log psi_hat lies in [lo, hi].
LogBounds likelihood_log_bounds(double M, double tau, double x, double z);

struct PsiEstimate {
    double log_psi = 0.0;
    double se = 0.0;
    double log_psi_hat = 0.0;
    bool inside_sandwich = true;
};

PsiEstimate psi_estimate(const ObservationPath& block, double h, double x, double z, const TransitionSpec& spec,
                         std::size_t n, std::uint64_t seed);

}  // namespace rfl
