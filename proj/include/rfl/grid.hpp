#pragma once

#include <span>
#include <vector>

namespace rfl {

std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

// Nonnegative measure on a uniform 1-D grid, held as log-weights so that
// far-tail bins stay comparable (-inf marks an empty bin).
class GridMeasure {
public:
    GridMeasure(std::vector<double> grid, std::span<const double> weights);
    static GridMeasure from_log_weights(std::vector<double> grid, std::vector<double> log_weights);

    std::span<const double> grid() const { return grid_; }
    std::span<const double> log_weights() const { return logw_; }
    std::size_t size() const { return grid_.size(); }
    double spacing() const;

    double log_total_mass() const;
    double total_mass() const;
    // Probabilities summing to one.
    std::vector<double> probabilities() const;
    GridMeasure normalized() const;

    double mass_in(double lo, double hi) const;
    double median() const;

private:
    GridMeasure() = default;
    std::vector<double> grid_;
    std::vector<double> logw_;
    void check() const;
};

struct Distances {
    double tv = 0.0;
    double hilbert = 0.0;
};

// TV of the normalized measures; Hilbert metric over the bins where nu > 0,
// infinite when the supports differ.
Distances distances(const GridMeasure& mu, const GridMeasure& nu);

}  // namespace rfl
