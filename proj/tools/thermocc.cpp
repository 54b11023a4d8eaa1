#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"
#include "thermocc/estimator.hpp"
#include "thermocc/ingest.hpp"
#include "thermocc/log.hpp"
#include "thermocc/mobility_metrics.hpp"
#include "thermocc/pipeline.hpp"
#include "thermocc/simulator.hpp"
#include "thermocc/trace_io.hpp"

namespace fs = std::filesystem;
using namespace thermocc;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

fs::path prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  const fs::path probe = dir / ".thermocc_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError(fmt::format("output directory '{}' is not writable", dir.string()));
  }
  fs::remove(probe, ec);
  return dir;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("error writing '{}'", path.string()));
}

void write_estimate_csv(const EstimationResult& r, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const auto k = r.mob_heat_hat.rows();
  out << "step,alpha_hat,beta_hat,omega_hat";
  for (Eigen::Index i = 0; i < k; ++i) out << ",mobheat_hat_" << i + 1 << "_W";
  out << '\n';
  for (Eigen::Index t = 0; t < r.mob_heat_hat.cols(); ++t) {
    out << t << ',' << config_values::format_real(r.alpha_hat) << ',' << config_values::format_real(r.beta_hat)
        << ',' << config_values::format_real(r.omega_hat);
    for (Eigen::Index i = 0; i < k; ++i) out << ',' << config_values::format_real(r.mob_heat_hat(i, t));
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("error writing '{}'", path.string()));
}

nlohmann::json stats_json(const EstimationResult& r) {
  const auto& s = r.stats;
  return {{"status", s.status},
          {"converged", s.converged},
          {"objective", r.objective},
          {"iterations", s.iterations},
          {"kkt_residual", s.kkt_residual},
          {"max_constraint_violation", s.max_constraint_violation},
          {"wall_time_s", s.wall_time_s},
          {"polished", s.polished},
          {"alpha_hat", r.alpha_hat},
          {"beta_hat", r.beta_hat},
          {"omega_hat", r.omega_hat}};
}

struct EstimatorFlags {
  std::optional<double> lambda, eps, eps1, eps2, n_guess, q_avg;

  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "Smoothness weight on consecutive mob-heat differences");
    auto* e = app->add_option("--eps", eps, "Relative occupancy band, both sides");
    app->add_option("--eps1", eps1, "Upper band relaxation")->excludes(e);
    app->add_option("--eps2", eps2, "Lower band relaxation (above 1 drops the lower bound)")->excludes(e);
    app->add_option("--n-guess", n_guess, "Assumed number of people (default: config n_people)");
    app->add_option("--q-avg", q_avg, "Average power per person in W (default: config q_mean)");
  }

  EstimatorOptions resolve(const ScenarioConfig& cfg) const {
    EstimatorOptions o = default_options(cfg);
    if (lambda) o.lambda = *lambda;
    if (eps) o.eps1 = o.eps2 = *eps;
    if (eps1) o.eps1 = *eps1;
    if (eps2) o.eps2 = *eps2;
    if (n_guess) o.n_guess = *n_guess;
    if (q_avg) o.q_avg_w = *q_avg;
    o.validate();
    return o;
  }
};

int cmd_simulate(const fs::path& config, std::optional<std::uint64_t> seed, std::optional<double> noise_std,
                 const fs::path& out_dir) {
  ScenarioConfig cfg = load_scenario(config);
  if (noise_std) cfg.noise_std = *noise_std;
  cfg.validate();
  prepare_out_dir(out_dir);
  Rng rng(seed.value_or(cfg.seed));
  const auto truth = simulate(cfg, rng);
  const auto sensors = add_sensor_noise(truth, cfg.noise_std, rng);
  write_sensors_csv(sensors, out_dir / "sensors.csv");
  write_truth_csv(truth, out_dir / "truth.csv");
  fmt::print("k={} z={} N={} T range [{:.2f}, {:.2f}] K, noise_std={} K\n", truth.rooms(), truth.steps(),
             cfg.n_people, truth.temps.minCoeff(), truth.temps.maxCoeff(), cfg.noise_std);
  return kOk;
}

int cmd_reconstruct(const fs::path& sensors_path, const fs::path& config, const EstimatorFlags& flags,
                    std::optional<int> tr_steps, const fs::path& out_dir) {
  const ScenarioConfig cfg = load_scenario(config);
  const EstimatorOptions opts = flags.resolve(cfg);
  const int tr = tr_steps.value_or(cfg.time_range_steps);
  if (tr < 1) throw ValidationError("--tr-steps must be >= 1");
  const SensorTrace sensors = read_sensors_csv(sensors_path, cfg.layout);
  prepare_out_dir(out_dir);

  const auto problem = assemble(sensors, cfg.layout, KnownConstants{cfg.params.gamma, cfg.params.phi}, opts);
  EstimationResult result;
  try {
    result = solve(problem);
  } catch (const SolverError& e) {
    write_json({{"status", "failed"}, {"message", e.what()}}, out_dir / "solver_stats.json");
    throw;
  }
  write_json(stats_json(result), out_dir / "solver_stats.json");
  write_estimate_csv(result, out_dir / "estimate.csv");

  const MobilityMap inferred = to_mobility_map(result.mob_heat_hat, opts.q_avg_w, tr);
  std::optional<MobilityMap> truth;
  const fs::path truth_path = sensors_path.parent_path() / "truth.csv";
  if (fs::exists(truth_path)) truth = truth_map(read_truth_csv(truth_path).counts, tr);
  write_mobility_map_csv(inferred, truth, out_dir / "mobility_map.csv");

  fmt::print("alpha_hat={:.5g} beta_hat={:.5g} omega_hat={:.5g} iterations={} kkt={:.2e} time={:.2f}s\n",
             result.alpha_hat, result.beta_hat, result.omega_hat, result.stats.iterations,
             result.stats.kkt_residual, result.stats.wall_time_s);
  if (truth) {
    const auto s = score(*truth, inferred);
    write_score_json(s, out_dir / "score.json");
    fmt::print("TRE={:.4f}\n", s.tre);
  }
  if (!result.stats.converged) {
    log::error("solver stopped before convergence ({})", result.stats.status);
    return kSolver;
  }
  return kOk;
}

int cmd_sweep(const fs::path& spec_path, int jobs, const fs::path& out_dir) {
  const SweepSpec spec = load_sweep_spec(spec_path);
  prepare_out_dir(out_dir);
  const auto rows = run_sweep(spec, jobs);
  write_sweep_csv(rows, out_dir / "sweep.csv");
  const auto summary = summarize(rows);
  write_sweep_summary_csv(spec.parameter, summary, out_dir / "sweep_summary.csv");
  fmt::print("{:>12} {:>5} {:>10} {:>10}\n", to_string(spec.parameter), "runs", "tre_mean", "tre_std");
  for (const auto& s : summary) fmt::print("{:>12g} {:>5} {:>10.4f} {:>10.4f}\n", s.value, s.runs, s.tre_mean, s.tre_std);
  return kOk;
}

int cmd_ingest(const fs::path& csv_path, const fs::path& columns_path, const fs::path& policy_path,
               const fs::path& config, std::optional<double> delta_t, const fs::path& out_dir) {
  ScenarioConfig cfg = load_scenario(config);
  const ColumnMap columns = load_column_map(columns_path);
  const ImputationPolicy policy = load_policy(policy_path);
  const double dt = delta_t ? *delta_t : policy.delta_t.value_or(cfg.params.delta_t);
  const SensorTrace trace = ingest_csv(csv_path, columns, policy, dt, cfg.layout);
  prepare_out_dir(out_dir);
  write_sensors_csv(trace, out_dir / "sensors.csv");

  // Scenario matching the ingested trace, usable by `reconstruct`.
  std::vector<double> t_hvac;
  for (int i : kept_rooms(columns, policy, cfg.layout)) t_hvac.push_back(cfg.params.t_hvac[i]);
  const fs::path ambient_path = fs::absolute(out_dir / "ambient.csv");
  {
    std::ofstream out(ambient_path);
    if (!out) throw IoError(fmt::format("cannot write '{}'", ambient_path.string()));
    out << "T_ext_K\n";
    for (Eigen::Index t = 0; t < trace.ambient_meas.size(); ++t)
      out << config_values::format_real(trace.ambient_meas[t]) << '\n';
  }
  cfg.layout = trace.layout;
  cfg.params.t_hvac = t_hvac;
  cfg.params.delta_t = dt;
  cfg.horizon_steps = trace.steps();
  cfg.time_range_steps = std::min(cfg.time_range_steps, trace.steps());
  cfg.ambient_profile = AmbientFile{ambient_path};
  save_scenario(cfg, out_dir / "scenario.cfg");
  fmt::print("k={} z={} delta_t={:g} h\n", trace.rooms(), trace.steps(), dt);
  return kOk;
}

int cmd_score(const fs::path& map_path, const fs::path& truth_path, int tr_steps, const fs::path& out_dir) {
  if (tr_steps < 1) throw ValidationError("--tr-steps must be >= 1");
  const MobilityMap inferred = read_mobility_map_csv(map_path, tr_steps);
  const MobilityMap truth = truth_map(read_truth_csv(truth_path).counts, tr_steps);
  const auto s = score(truth, inferred);
  prepare_out_dir(out_dir);
  write_score_json(s, out_dir / "score.json");
  fmt::print("TRE={:.4f}\n", s.tre);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Building thermal simulation and occupancy reconstruction"};
  app.require_subcommand(1);

  fs::path config, out_dir = ".", sensors, spec, csv, columns, policy, map, truth;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_std, delta_t;
  std::optional<int> tr_steps;
  int jobs = 1;
  int score_tr = 60;
  EstimatorFlags flags;

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write sensors.csv and truth.csv");
  sim->add_option("--config", config, "Scenario file")->required();
  sim->add_option("--seed", seed, "RNG seed (default: config seed)");
  sim->add_option("--noise-std", noise_std, "Sensor noise std in K (default: config noise_std)");
  sim->add_option("--out", out_dir, "Output directory");

  auto* rec = app.add_subcommand("reconstruct", "Estimate parameters and occupancy from sensors.csv");
  rec->add_option("--sensors", sensors, "sensors.csv")->required();
  rec->add_option("--config", config, "Scenario file providing layout and known constants")->required();
  rec->add_option("--tr-steps", tr_steps, "Steps per reporting window (default: config)");
  rec->add_option("--out", out_dir, "Output directory");
  flags.add(rec);

  auto* swp = app.add_subcommand("sweep", "Run a parameter sweep");
  swp->add_option("spec", spec, "Sweep file")->required();
  swp->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  swp->add_option("--out", out_dir, "Output directory");

  auto* ing = app.add_subcommand("ingest", "Convert a raw sensor CSV to sensors.csv");
  ing->add_option("--csv", csv, "Raw CSV")->required();
  ing->add_option("--columns", columns, "Column map")->required();
  ing->add_option("--policy", policy, "Imputation policy")->required();
  ing->add_option("--config", config, "Scenario file providing layout and constants")->required();
  ing->add_option("--delta-t", delta_t, "Grid step in hours (default: policy, then config)");
  ing->add_option("--out", out_dir, "Output directory");

  auto* scr = app.add_subcommand("score", "Score a mobility map against truth.csv");
  scr->add_option("--map", map, "mobility_map.csv")->required();
  scr->add_option("--truth", truth, "truth.csv")->required();
  scr->add_option("--tr-steps", score_tr, "Steps per reporting window");
  scr->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config, seed, noise_std, out_dir);
    if (rec->parsed()) return cmd_reconstruct(sensors, config, flags, tr_steps, out_dir);
    if (swp->parsed()) return cmd_sweep(spec, jobs, out_dir);
    if (ing->parsed()) return cmd_ingest(csv, columns, policy, config, delta_t, out_dir);
    if (scr->parsed()) return cmd_score(map, truth, score_tr, out_dir);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidation;
  } catch (const SolverError& e) {
    fmt::print(stderr, "solver error: {}\n", e.what());
    return kSolver;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return kSolver;
  } catch (const IoError& e) {
    fmt::print(stderr, "I/O error: {}\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kValidation;
  }
  return kValidation;
}
