#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace rfl {

// Independent stream for each (seed, block, replicate) key, so a batch can be
// cut into pieces in any order and still reproduce the same draws.
using Stream = std::mt19937_64;
Stream make_stream(std::uint64_t seed, std::uint64_t block, std::uint64_t replicate);

double pairwise_sum(std::span<const double> v);
double log_sum_exp(std::span<const double> v);
// Trapezoid rule for samples on a uniform grid of [0, 1].
double trapezoid_unit(std::span<const double> v);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit ols(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> v);

// 12-point Gauss-Legendre rule on [0, 1].
struct UnitRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const UnitRule& gauss_legendre_12();

// 30-point Gauss-Legendre on each of `panels` equal pieces of [a, b].
double composite_gauss(const std::function<double(double)>& f, double a, double b, std::size_t panels);

}  // namespace rfl
