#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <limits>
#include <vector>

#include "rfl/config.hpp"
#include "rfl/filter.hpp"
#include "rfl/likelihood.hpp"
#include "rfl/numerics.hpp"
#include "rfl/path.hpp"
#include "rfl/truncation.hpp"

namespace rfl {

ModelConfig model_config(const ExperimentConfig& cfg);
// Transition used to build grid kernels (exact for M = 0).
TransitionSpec grid_transition(const ExperimentConfig& cfg);
TruncationParams truncation_params(const ExperimentConfig& cfg, double delta);

struct SimulatedRun {
    ObservationPath path;
    std::vector<BlockCoefficients> coeffs;  // coeffs[k - 1] for block k
};
SimulatedRun simulate_run(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t blocks);
std::vector<BlockCoefficients> run_coefficients(const ObservationPath& path, double h, double tau);

// Schedule exponent nu with b1 = 1 and the given epsilon in (0, 1).
double default_nu(const QuadraticShape& shape, double epsilon);

struct DistanceRow {
    std::size_t k = 0;
    double t = 0.0, tv = 0.0, hilbert = 0.0, escape_mass = 0.0;
    std::uint64_t seed = 0;
    double log_tv = 0.0, log_hilbert = 0.0;
};

struct StabilityResult {
    std::vector<DistanceRow> rows;            // exact filters from both priors
    std::vector<DistanceRow> truncated_rows;  // truncated pair at Delta_n
    std::vector<double> slopes;               // log TV vs log t, one per seed
    double median_slope = 0.0;
    double median_log_first_tv = 0.0;  // log TV at block 1
    double median_log_final_tv = 0.0;
    bool hilbert_below_initial = true;     // h_k <= h_0 exactly
    bool hilbert_nonincreasing = true;     // h_k <= h_{k-1} exactly
    double worst_hilbert_log_increase = -std::numeric_limits<double>::infinity();
    double delta_n = 0.0;
    bool truncated_ran = false;
};
StabilityResult run_stability(const ExperimentConfig& cfg);

struct SweepRow {
    double delta = 0.0;
    double sup_mean_tv = 0.0;
    double mean_escape = 0.0;
    double log_T = 0.0;
    std::size_t underflow_runs = 0;
};
struct EscapeRow {
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    double escape_mass = 0.0;
};
struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<EscapeRow> escape;
    LinearFit fit;             // log(sup mean TV) against Delta^2 / h
    LinearFit escape_fit;      // log(mean escape) against Delta^2
    double predicted_escape_slope = 0.0;
};
SweepResult run_truncation_sweep(const ExperimentConfig& cfg);

// Synthetic blocks sharing the observation-free shape of (h, tau), with random
// A1 and centres m_k uniform on [-2, 2]; m0 = 0.
struct PairInstance {
    std::vector<BlockCoefficients> coeffs;
    TruncationGeometry geometry;
};
PairInstance random_pair_instance(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t blocks, double delta);

struct VerifyRow {
    std::string check;
    std::size_t n = 0, grid = 0;
    std::uint64_t seed = 0;
    double value = 0.0, limit = 0.0;
    bool pass = false;
};
struct VerifyReport {
    std::string suite;
    std::vector<VerifyRow> rows;
    bool pass() const;
    void write_csv(std::ostream& out) const;
};
const std::vector<std::string>& verify_suites();
VerifyReport verify(const std::string& suite, const ExperimentConfig& cfg);

void write_distance_csv(const std::vector<DistanceRow>& rows, std::ostream& out);
// distances far below double range stay visible here
void write_log_distance_csv(const std::vector<DistanceRow>& rows, std::ostream& out);
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);
void write_escape_csv(const std::vector<EscapeRow>& rows, std::ostream& out);
void write_coefficients_csv(const std::vector<BlockCoefficients>& coeffs, const TruncationGeometry& geometry,
                            std::ostream& out);
void write_filter_csv(const std::vector<GridMeasure>& run, std::ostream& out);

}  // namespace rfl
