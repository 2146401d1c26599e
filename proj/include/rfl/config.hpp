#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfl/drift.hpp"

namespace rfl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    struct Model {
        double h = 1.0;
        double tau = 2.0;
        DriftFamily drift = DriftFamily::zero;
        double M = 0.0;
        double x0 = 0.0;
        int steps_per_block = 2048;
    } model;

    struct Truncation {
        double delta = 5.0;
        std::vector<double> delta_sweep{2.0, 3.0, 4.0, 5.0};
        double iota = 0.9;
        double L = 0.0;  // 0 selects the smallest admissible value
        double C = 1.0;
        double C1prime = 1.0;
        double nu = 0.0;  // 0 selects the default schedule exponent
        double nu_epsilon = 0.5;
        bool force = false;
    } truncation;

    struct Run {
        std::size_t blocks = 10;
        std::size_t seeds = 1;
        std::uint64_t seed = 1;
        std::size_t grid_points = 400;
        double padding_sd = 4.0;  // grid padding in units of sqrt(tau)
        std::size_t particles = 100000;
        std::size_t mc_samples = 20000;
        int bridge_steps = 256;
        std::size_t kernel_samples = 64;
        int kernel_bridge_steps = 32;
        std::size_t burn_in = 10;
        double prior_mean = 0.0;
        double prior_sd = 1.0;
        double alt_prior_mean = 3.0;
        double alt_prior_sd = 1.0;
        std::size_t pair_grid = 9;
    } run;

    struct Output {
        std::filesystem::path dir = "out";
    } output;

    // Flat `section.key = value` text; '#' starts a comment; unknown keys are errors.
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value);

    void validate() const;
    // Fully resolved configuration in the same format `parse` reads.
    std::string echo() const;
    std::vector<std::uint64_t> seed_list() const;
};

}  // namespace rfl
