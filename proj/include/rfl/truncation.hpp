#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "rfl/likelihood.hpp"

namespace rfl {

struct TruncationParams {
    double delta = 5.0;
    double iota = 0.9;
    double C = 1.0;
    double C1prime = 1.0;
    double M = 0.0;
};

// Observation-free quadratic part of log psi_hat and its factorization
// kappa = P^T diag(A2, B2) P with P = [[p11, 0], [p21, 1]].
struct QuadraticShape {
    double h = 1.0, tau = 1.0, theta = 1.0;
    double A2 = 0.0, B2 = 0.0, C1 = 0.0;
    double p11 = 0.0, p21 = 0.0;
    double sigma1 = 1.0, sigma2 = 1.0;

    static QuadraticShape from(const BlockCoefficients& c);
    Eigen::Matrix2d kappa() const;
    Eigen::Matrix2d P() const;
};

struct HypothesisCheck {
    std::string name;
    bool pass = false;
    double margin = 0.0;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    bool all_pass() const;
    std::string failures() const;
};

HypothesisReport validate_hypotheses(const QuadraticShape& shape, const TruncationParams& params, double m0);

// Log-space xi_1, xi_2, epsilon = xi_1/xi_2 and epsilon' at separation D.
struct XiTerms {
    double log_xi1 = 0.0, log_xi2 = 0.0, log_eps = 0.0, log_eps_prime = 0.0;
};
XiTerms xi_terms(double D, double delta, double B2, double p21, double tau, double M);

class TruncationGeometry {
public:
    TruncationGeometry(const QuadraticShape& shape, const TruncationParams& params, double m0,
                       std::span<const double> b1_per_block);

    const QuadraticShape& shape() const { return shape_; }
    const TruncationParams& params() const { return params_; }
    std::size_t blocks() const { return centers_.size() - 1; }

    // k = 0 is the initial centre m0.
    double center(std::size_t k) const { return centers_.at(k); }
    double half_width() const;
    // Delta / (B2 (1 + p21)): full width of a compact.
    double width() const { return 2.0 * half_width(); }
    double lower(std::size_t k) const { return center(k) - half_width(); }
    double upper(std::size_t k) const { return center(k) + half_width(); }
    bool contains(std::size_t k, double x) const { return x >= lower(k) && x <= upper(k); }

    // |m_k - m_{k-1}|, k >= 1.
    double separation(std::size_t k) const;
    XiTerms xi(std::size_t k) const;
    XiTerms xi_at(double D) const;

    double d_delta() const;
    double log_T_delta() const;

private:
    QuadraticShape shape_;
    TruncationParams params_;
    std::vector<double> centers_;
};

TruncationGeometry truncation_geometry(const std::vector<BlockCoefficients>& coeffs, const TruncationParams& params,
                                       double m0);

}  // namespace rfl
