#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "rfl/grid.hpp"
#include "rfl/likelihood.hpp"
#include "rfl/truncation.hpp"

namespace rfl {

// Pair-space objects on a small grid, with state (x1, x2) at index i1 * g + i2.
constexpr std::size_t max_pair_grid = 25;

// Everything needed to build the one- and two-block kernels on one grid.
// q is the linear one-step signal kernel (density * dx or row-stochastic);
// coeffs[k - 1] belongs to block k.
struct PairModel {
    std::vector<double> grid;
    Eigen::MatrixXd q;
    const TruncationGeometry* geometry = nullptr;
    std::vector<BlockCoefficients> coeffs;

    std::size_t size() const { return grid.size(); }
    double spacing() const { return grid[1] - grid[0]; }
    void validate() const;
    // exp(log psi_hat relative - block max) on the grid, without indicators.
    Eigen::MatrixXd psi(std::size_t k) const;
};

Eigen::MatrixXd linear_kernel(const Eigen::MatrixXd& log_kernel);

// One-block truncated kernel R^Delta_k on the grid.
Eigen::MatrixXd one_step_kernel(const PairModel& model, std::size_t k);

// How the fallback branch of the pair kernel moves the second coordinate:
// through Q (so that the pair chain reproduces two truncated blocks) or
// flat in both coordinates as printed.
enum class PairForm { chained, printed };

// R~^Delta_k, k >= 2. With unit_potential the factor psi^Delta_k (indicator
// included) is replaced by one.
Eigen::MatrixXd two_step_kernel(const PairModel& model, std::size_t k, PairForm form = PairForm::chained,
                                bool unit_potential = false);

// Reference measure lambda_k over pair states (mass per state).
Eigen::VectorXd lambda_measure(const PairModel& model, std::size_t k, PairForm form = PairForm::chained);

struct SandwichReport {
    double worst_lower = 0.0;  // max of (xi1 lambda - R~) / (xi1 lambda) over entries
    double worst_upper = 0.0;  // max of (R~ - xi2 lambda) / (xi2 lambda)
    bool pass = false;
};
SandwichReport mixing_sandwich_check(const PairModel& model, std::size_t k, PairForm form = PairForm::chained,
                                     double slack = 1e-12);

// potentials[j] = psi_{2m|2j} for j = 0..m from kernels R~_{2}, R~_{4}, ..., R~_{2m}.
std::vector<Eigen::VectorXd> backward_potentials(const std::vector<Eigen::MatrixXd>& kernels);

// S_{2m|2j} = diag(1/psi_{2m|2j}) R~_{2j+2} diag(psi_{2m|2j+2}).
std::vector<Eigen::MatrixXd> s_kernels(const std::vector<Eigen::MatrixXd>& kernels,
                                       const std::vector<Eigen::VectorXd>& potentials);

// Largest relative spread of a pair vector across first-coordinate slices.
double first_coordinate_spread(const Eigen::VectorXd& v, std::size_t g);

// Max over row pairs of the TV distance between rows; rows flagged false are skipped.
double dobrushin(const Eigen::MatrixXd& kernel, const std::vector<bool>& rows = {});

// Kernel of U_{2j-1} = (z_{2j-2}^(2), z_{2j}^(1)) -> U_{2j+1}, from S_{2m|2j-2} and S_{2m|2j}.
struct UChainKernel {
    Eigen::MatrixXd kernel;
    std::vector<bool> reachable;
};
UChainKernel u_chain_kernel(const Eigen::MatrixXd& s_prev, const Eigen::MatrixXd& s_next, std::size_t g);

struct RepresentationResult {
    std::vector<double> feynman_kac;
    std::vector<double> recursion;
    double max_diff = 0.0;
};
// Both sides of the U-chain representation after n blocks; odd n uses the
// unit-potential variant and reads the first coordinate.
RepresentationResult representation_check(const PairModel& model, const GridMeasure& mu, std::size_t n,
                                          PairForm form = PairForm::chained);

struct SeparationBounds {
    double lower = 0.0, value = 0.0, upper = 0.0;
    // relative slack absorbs rounding when both preconditions are tight
    bool holds(double rel = 1e-12) const { return lower <= value * (1.0 + rel) && value <= upper * (1.0 + rel); }
};
// Two-sided bound on exp(-(t2 - 2 B2 (p21 x + z))^2 / (4 B2)) given
// |x - z| <= D and |2 B2 (1 + p21) z - t2| <= Delta.
SeparationBounds separation_bound_check(double t2, double x, double z, double D, double delta, double B2, double p21);

struct LocalErrorBound {
    double lhs = 0.0, rhs = 0.0;
    bool holds() const { return lhs <= rhs; }
};
// || Psi.eta - Psi.eta' || against 2 min(1, ||Psi|| / <eta, Psi> ||eta - eta'||), TV norms.
LocalErrorBound local_error_check(std::span<const double> potential, std::span<const double> eta,
                                  std::span<const double> eta_prime);

// log(-log(1 - exp(la))) for la < 0, accurate when exp(la) is tiny.
double log_neg_log1m_exp(double la);
// log(1 - exp(-exp(lc))), accurate when exp(lc) is tiny.
double log1m_exp_neg_exp(double lc);

double alpha_tilde(double L, double tau, double C);
// Smallest L with alpha_tilde(L) <= 1/4 and L >= 3|m0| + 3 C M tau^2.
double minimal_L(double tau, double C, double M, double m0);

// Contraction coefficients along one observation path, all in log form.
// log_mix[k] = log (eps'_k eps_{k-1})^2 = log(1 - tau_k), k >= 2.
struct ContractionLedger {
    std::vector<double> log_eps, log_eps_prime, log_mix;
    double L = 0.0;
    double alpha = 0.0;
    double log_mix_L = 0.0;          // log (eps(L) eps'(L))^2 = log(1 - tau(L))
    double log_one_minus_rho = 0.0;  // log(1 - rho)
    double tau_k(std::size_t k) const { return -std::expm1(log_mix.at(k)); }
    // log(1 - prod_{i=j+1..n} tau_{2i})
    double log_product_complement(std::size_t j, std::size_t n) const;
    // log(-log B) for B = (1 - (eps(L) eps'(L))^2 / 2)^{n-j-2}; -inf when the exponent is <= 0.
    double log_neg_log_bound(std::size_t j, std::size_t n) const;
};
ContractionLedger u_chain_contraction(const TruncationGeometry& geometry, double C);

}  // namespace rfl
