#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "rfl/path.hpp"

namespace rfl {

// Second moments of (G1, G2, G3).
struct CovarianceTable {
    double theta = 0.0;
    double var1 = 0.0, var2 = 0.0, var3 = 0.0;
    double cov12 = 0.0, cov13 = 0.0, cov23 = 0.0;

    // Rows/columns in the order G1, G3, G2.
    Eigen::Matrix3d gram_order_matrix() const;
};

CovarianceTable covariance_table(double theta);
// Same entries from int_0^1 f_i f_j with f_i the kernel transforms of 1, u, u^2,
// evaluated by composite Gauss-Legendre quadrature.
CovarianceTable covariance_table_quadrature(double theta);

// s -> g(s) - theta e^{theta s} int_s^t e^{-theta u} g(u) du.
// Samples g at t*i/(n-1), treats g as piecewise linear.
std::vector<double> ou_kernel_transform(std::span<const double> g, double theta, double t);
double ou_kernel_transform(const std::function<double(double)>& g, double theta, double t, double s);

struct ObservationCovariances {
    double cov14 = 0.0, cov24 = 0.0, cov34 = 0.0, var4 = 0.0;
};

// Covariances of G4 with a centred observation functional g (one value per cell
// of the uniform grid on [0,1]; g is the left-continuous step function taking
// g[i] on (s_i, s_{i+1}]).
ObservationCovariances kernel_covariances(std::span<const double> g, double theta);

// Y(tau s) - int_0^1 Y(tau u) du as a step function on the block grid.
std::vector<double> centred_observation(const ObservationPath& block);

// cov14 through the sinh-kernel Stieltjes sum.
double cov14_stieltjes(const ObservationPath& block, double theta);

ObservationCovariances observation_covariances(const ObservationPath& block, double theta, double h);

// The two printed closed forms for Cov(G3,G4): P*Cov(G1,G4) and
// P*Cov(G1,G4) - (2/theta^2) int g e^{-theta u} du.
struct Cov34Forms {
    double canonical = 0.0, plain = 0.0, with_remainder = 0.0;
};
Cov34Forms cov34_forms(const ObservationPath& block, double theta, double h);

struct GramDecomposition {
    double theta = 0.0;
    double alpha = 0.0, beta = 0.0, gamma = 0.0, a = 0.0, b = 0.0, c = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, lambda4sq = 0.0;
    ObservationCovariances obs;

    // Lower-triangular map from independent unit normals to (G1, G3, G2).
    Eigen::Matrix3d triangular_map() const;
};

GramDecomposition gram_decompose(const CovarianceTable& table, const ObservationCovariances& obs);

// Large-theta expansions, truncated where printed.
struct SeriesExpansions {
    double alpha, cov13, beta, beta2, var3, gamma, cov12, sigma1sq, a, var2, b, c2, sigma2sq;
};
SeriesExpansions series_expansions(double theta);

}  // namespace rfl
