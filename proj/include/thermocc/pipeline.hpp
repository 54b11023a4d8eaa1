#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thermocc/core_model.hpp"
#include "thermocc/estimator.hpp"
#include "thermocc/mobility_metrics.hpp"
#include "thermocc/simulator.hpp"

namespace thermocc {

/// Estimator options matching a scenario: true head count and mean power.
EstimatorOptions default_options(const ScenarioConfig& cfg, double lambda = 0.1, double eps = 0.2);

struct PipelineResult {
  SimulationTrace truth;
  SensorTrace sensors;
  EstimationResult estimate;
  MobilityMap inferred;
  ReconstructionScore score;
};

/// simulate -> add noise -> assemble -> solve -> mobility map -> score, all
/// from one engine seeded with `seed`. Noise uses cfg.noise_std.
PipelineResult run_pipeline(const ScenarioConfig& cfg, const EstimatorOptions& opts, std::uint64_t seed,
                            const SolveSettings& settings = {});

enum class SweepParameter { NoiseStd, Epsilon, Lambda };

std::string_view to_string(SweepParameter p);
SweepParameter parse_sweep_parameter(std::string_view s);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::NoiseStd;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  ScenarioConfig base;
  EstimatorOptions opts;  // base values; the swept one is overwritten per cell

  void validate() const;
};

/// [sweep] section: config, parameter, values, seeds and optional base
/// values lambda, eps (or eps1/eps2), noise_std, n_guess.
SweepSpec parse_sweep_spec(std::string_view text, const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct SweepRow {
  SweepParameter parameter = SweepParameter::NoiseStd;
  double value = 0.0;
  std::uint64_t seed = 0;
  double tre = 0.0;
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double omega_hat = 0.0;
  double wall_time_s = 0.0;
  double kkt_residual = 0.0;
  double max_constraint_violation = 0.0;
  std::string status;  // "ok", "not_converged" or "error: ..."

  bool ok() const { return status == "ok"; }
};

struct SweepSummaryRow {
  double value = 0.0;
  int runs = 0;  // cells with a finite TRE
  double tre_mean = 0.0;
  double tre_std = 0.0;
  double alpha_mean = 0.0;
  double beta_mean = 0.0;
  double omega_mean = 0.0;
};

/// Runs every (value, seed) cell on up to `jobs` threads. Rows come back
/// ordered by value, then seed. A failing cell is recorded and skipped.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs = 1, const SolveSettings& settings = {});

std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows);

// sweep.csv: parameter,value,seed,tre,alpha_hat,beta_hat,omega_hat,wall_time_s,
//            kkt_residual,max_constraint_violation,status
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
// sweep_summary.csv: parameter,value,runs,tre_mean,tre_std,alpha_mean,beta_mean,omega_mean
void write_sweep_summary_csv(SweepParameter parameter, const std::vector<SweepSummaryRow>& rows,
                             const std::filesystem::path& path);

}  // namespace thermocc
