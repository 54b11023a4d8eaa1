#include "thermocc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "thermocc/config_io.hpp"
#include "thermocc/errors.hpp"
#include "thermocc/log.hpp"

namespace thermocc {

using namespace config_values;

EstimatorOptions default_options(const ScenarioConfig& cfg, double lambda, double eps) {
  EstimatorOptions o;
  o.lambda = lambda;
  o.eps1 = eps;
  o.eps2 = eps;
  o.n_guess = cfg.n_people;
  o.q_avg_w = cfg.params.q_mean;
  return o;
}

PipelineResult run_pipeline(const ScenarioConfig& cfg, const EstimatorOptions& opts, std::uint64_t seed,
                            const SolveSettings& settings) {
  Rng rng(seed);
  PipelineResult r;
  r.truth = simulate(cfg, rng);
  r.sensors = add_sensor_noise(r.truth, cfg.noise_std, rng);
  const auto problem =
      assemble(r.sensors, cfg.layout, KnownConstants{cfg.params.gamma, cfg.params.phi}, opts);
  r.estimate = solve(problem, settings);
  r.inferred = to_mobility_map(r.estimate.mob_heat_hat, opts.q_avg_w, cfg.time_range_steps);
  r.score = score(r.truth.schedule, r.inferred);
  return r;
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::NoiseStd: return "noise_std";
    case SweepParameter::Epsilon: return "epsilon";
    case SweepParameter::Lambda: return "lambda";
  }
  return "?";
}

SweepParameter parse_sweep_parameter(std::string_view s) {
  if (s == "noise_std") return SweepParameter::NoiseStd;
  if (s == "epsilon") return SweepParameter::Epsilon;
  if (s == "lambda") return SweepParameter::Lambda;
  throw ValidationError(fmt::format("sweep: unknown parameter '{}' (noise_std, epsilon or lambda)", s));
}

void SweepSpec::validate() const {
  if (values.empty()) throw ValidationError("sweep: values must not be empty");
  if (seeds.empty()) throw ValidationError("sweep: seeds must not be empty");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("sweep: values must be finite");
    if (parameter != SweepParameter::Epsilon && v < 0.0)
      throw ValidationError(fmt::format("sweep: {} values must be >= 0", to_string(parameter)));
  }
  base.validate();
  opts.validate();
}

SweepSpec parse_sweep_spec(std::string_view text, const std::filesystem::path& base_dir) {
  using boost::property_tree::ptree;
  ptree root;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(fmt::format("sweep spec parse error: {}", e.what()));
  }
  for (const auto& [name, tree] : root)
    if (name != "sweep") throw ValidationError(fmt::format("sweep spec: unknown section [{}]", name));
  const auto section = root.get_child_optional("sweep");
  if (!section) throw ValidationError("sweep spec: missing [sweep] section");

  std::map<std::string, std::string> kv;
  for (const auto& [key, node] : *section) kv[key] = trim(node.data());
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto need = [&](const std::string& key) {
    if (auto v = take(key)) return *v;
    throw ValidationError(fmt::format("sweep spec: missing key '{}'", key));
  };

  SweepSpec spec;
  const std::filesystem::path cfg_path = need("config");
  spec.base = load_scenario(cfg_path.is_absolute() ? cfg_path : base_dir / cfg_path);
  spec.parameter = parse_sweep_parameter(need("parameter"));
  spec.values = parse_real_list(need("values"), "sweep.values");
  for (int s : parse_int_list(need("seeds"), "sweep.seeds")) {
    if (s < 0) throw ValidationError("sweep.seeds: seeds must be >= 0");
    spec.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  spec.opts = default_options(spec.base);
  if (auto v = take("lambda")) spec.opts.lambda = parse_real(*v, "sweep.lambda");
  if (auto v = take("eps")) spec.opts.eps1 = spec.opts.eps2 = parse_real(*v, "sweep.eps");
  if (auto v = take("eps1")) spec.opts.eps1 = parse_real(*v, "sweep.eps1");
  if (auto v = take("eps2")) spec.opts.eps2 = parse_real(*v, "sweep.eps2");
  if (auto v = take("n_guess")) spec.opts.n_guess = parse_real(*v, "sweep.n_guess");
  if (auto v = take("noise_std")) spec.base.noise_std = parse_real(*v, "sweep.noise_std");
  if (!kv.empty()) throw ValidationError(fmt::format("sweep spec: unknown key '{}'", kv.begin()->first));
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep_spec(buf.str(), path.parent_path());
}

namespace {

SweepRow run_cell(const SweepSpec& spec, double value, std::uint64_t seed, const SolveSettings& settings) {
  SweepRow row;
  row.parameter = spec.parameter;
  row.value = value;
  row.seed = seed;
  ScenarioConfig cfg = spec.base;
  EstimatorOptions opts = spec.opts;
  switch (spec.parameter) {
    case SweepParameter::NoiseStd: cfg.noise_std = value; break;
    case SweepParameter::Epsilon: opts.eps1 = opts.eps2 = value; break;
    case SweepParameter::Lambda: opts.lambda = value; break;
  }
  try {
    const auto r = run_pipeline(cfg, opts, seed, settings);
    row.tre = r.score.tre;
    row.alpha_hat = r.estimate.alpha_hat;
    row.beta_hat = r.estimate.beta_hat;
    row.omega_hat = r.estimate.omega_hat;
    row.wall_time_s = r.estimate.stats.wall_time_s;
    row.kkt_residual = r.estimate.stats.kkt_residual;
    row.max_constraint_violation = r.estimate.stats.max_constraint_violation;
    row.status = r.estimate.stats.converged ? "ok" : "not_converged";
  } catch (const std::exception& e) {
    const double nan = std::nan("");
    row.tre = row.alpha_hat = row.beta_hat = row.omega_hat = nan;
    row.kkt_residual = row.max_constraint_violation = nan;
    row.status = fmt::format("error: {}", e.what());
    log::warn("sweep cell {}={} seed {} failed: {}", to_string(spec.parameter), value, seed, e.what());
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs, const SolveSettings& settings) {
  spec.validate();
  std::vector<double> values = spec.values;
  std::sort(values.begin(), values.end());
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());

  std::vector<SweepRow> rows(values.size() * seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < rows.size(); c = next++)
      rows[c] = run_cell(spec, values[c / seeds.size()], seeds[c % seeds.size()], settings);
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(rows.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return rows;
}

std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::map<double, std::vector<const SweepRow*>> by_value;
  for (const auto& r : rows) by_value[r.value].push_back(&r);
  std::vector<SweepSummaryRow> out;
  for (const auto& [value, cells] : by_value) {
    SweepSummaryRow s;
    s.value = value;
    for (const auto* c : cells) {
      if (!std::isfinite(c->tre)) continue;
      ++s.runs;
      s.tre_mean += c->tre;
      s.alpha_mean += c->alpha_hat;
      s.beta_mean += c->beta_hat;
      s.omega_mean += c->omega_hat;
    }
    if (s.runs == 0) {
      s.tre_mean = s.tre_std = s.alpha_mean = s.beta_mean = s.omega_mean = std::nan("");
    } else {
      s.tre_mean /= s.runs;
      s.alpha_mean /= s.runs;
      s.beta_mean /= s.runs;
      s.omega_mean /= s.runs;
      double ss = 0.0;
      for (const auto* c : cells)
        if (std::isfinite(c->tre)) ss += (c->tre - s.tre_mean) * (c->tre - s.tre_mean);
      s.tre_std = s.runs > 1 ? std::sqrt(ss / (s.runs - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "parameter,value,seed,tre,alpha_hat,beta_hat,omega_hat,wall_time_s,kkt_residual,"
         "max_constraint_violation,status\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{:.3f},{:.3e},{:.3e},{}\n", to_string(r.parameter),
                       format_real(r.value), r.seed, format_real(r.tre), format_real(r.alpha_hat),
                       format_real(r.beta_hat), format_real(r.omega_hat), r.wall_time_s, r.kkt_residual,
                       r.max_constraint_violation, csv_field(r.status));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void write_sweep_summary_csv(SweepParameter parameter, const std::vector<SweepSummaryRow>& rows,
                             const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "parameter,value,runs,tre_mean,tre_std,alpha_mean,beta_mean,omega_mean\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{}\n", to_string(parameter), format_real(r.value), r.runs,
                       format_real(r.tre_mean), format_real(r.tre_std), format_real(r.alpha_mean),
                       format_real(r.beta_mean), format_real(r.omega_mean));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace thermocc
