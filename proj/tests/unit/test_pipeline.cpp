#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "thermocc/errors.hpp"
#include "thermocc/pipeline.hpp"

using namespace thermocc;
using doctest::Approx;

namespace {

SweepSpec small_sweep(SweepParameter p, std::vector<double> values) {
  SweepSpec s;
  s.parameter = p;
  s.values = std::move(values);
  s.seeds = {3, 1, 2};
  s.base = testing::small_scenario(2, 2, 10, 60, 20);
  s.base.noise_std = 0.05;
  s.opts = default_options(s.base);
  return s;
}

}  // namespace

TEST_CASE("default estimator options follow the scenario") {
  const auto cfg = default_reference_scenario();
  const auto o = default_options(cfg);
  CHECK(o.lambda == 0.1);
  CHECK(o.eps1 == 0.2);
  CHECK(o.eps2 == 0.2);
  CHECK(o.n_guess == 45);
  CHECK(o.q_avg_w == 110.0);
}

TEST_CASE("pipeline is a pure function of its seed") {
  const auto cfg = testing::small_scenario(2, 2, 10, 60, 20);
  const auto a = run_pipeline(cfg, default_options(cfg), 9);
  const auto b = run_pipeline(cfg, default_options(cfg), 9);
  CHECK(a.sensors.temps_meas == b.sensors.temps_meas);
  CHECK(a.estimate.unknowns == b.estimate.unknowns);
  CHECK(a.score.tre == b.score.tre);
  CHECK(a.inferred.windows() == 3);
  const auto c = run_pipeline(cfg, default_options(cfg), 10);
  CHECK(c.sensors.temps_meas != a.sensors.temps_meas);
}

TEST_CASE("sweep specs") {
  const auto dir = testing::scratch_dir("sweep_spec");
  std::filesystem::copy_file(testing::data_dir() / "reference.cfg", dir / "reference.cfg");

  const auto s = parse_sweep_spec(
      "[sweep]\nconfig = reference.cfg\nparameter = epsilon\nvalues = 0, 0.5, 2\nseeds = 4, 5\nlambda = 0.3\n"
      "noise_std = 0.2\n",
      dir);
  CHECK(s.parameter == SweepParameter::Epsilon);
  CHECK(s.values == std::vector<double>{0, 0.5, 2});
  CHECK(s.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(s.opts.lambda == 0.3);
  CHECK(s.opts.eps1 == 0.2);
  CHECK(s.base.noise_std == 0.2);
  CHECK(s.base.layout.k == 16);

  for (const char* name : {"noise.sweep", "epsilon.sweep", "lambda.sweep"}) {
    CAPTURE(name);
    const auto spec = load_sweep_spec(testing::data_dir() / name);
    CHECK(spec.seeds.size() == 10);
    CHECK(spec.base.layout.k == 16);
    CHECK(spec.base.n_people == 45);
    CHECK(spec.base.horizon_steps == 600);
  }
  const auto f4 = load_sweep_spec(testing::data_dir() / "noise.sweep");
  CHECK(f4.parameter == SweepParameter::NoiseStd);
  CHECK(f4.values == std::vector<double>{0.01, 0.1, 1, 10});
  CHECK(f4.opts.lambda == 0.1);
  CHECK(f4.opts.eps1 == 0.2);

  CHECK(parse_sweep_parameter("lambda") == SweepParameter::Lambda);
  CHECK(to_string(SweepParameter::NoiseStd) == "noise_std");
  CHECK_THROWS_AS(parse_sweep_parameter("alpha"), ValidationError);
  const std::string head = "[sweep]\nconfig = reference.cfg\nparameter = lambda\n";
  CHECK_THROWS_AS(parse_sweep_spec(head + "values =\nseeds = 1\n", dir), ValidationError);
  CHECK_THROWS_AS(parse_sweep_spec(head + "values = 1, nan\nseeds = 1\n", dir), ValidationError);
  CHECK_THROWS_AS(parse_sweep_spec(head + "values = 1\n", dir), ValidationError);
  CHECK_THROWS_AS(parse_sweep_spec(head + "values = -1\nseeds = 1\n", dir), ValidationError);
  CHECK_THROWS_AS(parse_sweep_spec(head + "values = 1\nseeds = 1\nbogus = 2\n", dir), ValidationError);
  CHECK_THROWS_AS(parse_sweep_spec("[sweep]\nconfig = nope.cfg\nparameter = lambda\nvalues = 1\nseeds = 1\n", dir),
                  IoError);
}

TEST_CASE("sweep rows, ordering and threading") {
  auto spec = small_sweep(SweepParameter::Lambda, {1.0, 0.01, 0.1});
  const auto rows = run_sweep(spec, 1);
  REQUIRE(rows.size() == 9);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const bool ordered = rows[r - 1].value < rows[r].value ||
                         (rows[r - 1].value == rows[r].value && rows[r - 1].seed < rows[r].seed);
    CHECK(ordered);
  }
  for (const auto& row : rows) {
    CHECK(row.ok());
    CHECK(row.parameter == SweepParameter::Lambda);
    CHECK(row.kkt_residual <= 1e-6);
    CHECK(row.max_constraint_violation <= 1e-8);
  }

  // Each cell matches a direct pipeline run with the swept value applied.
  auto opts = spec.opts;
  opts.lambda = 0.1;
  const auto direct = run_pipeline(spec.base, opts, 2);
  CHECK(rows[4].value == 0.1);
  CHECK(rows[4].seed == 2);
  CHECK(rows[4].tre == direct.score.tre);
  CHECK(rows[4].alpha_hat == direct.estimate.alpha_hat);

  const auto threaded = run_sweep(spec, 4);
  REQUIRE(threaded.size() == rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CHECK(threaded[r].seed == rows[r].seed);
    CHECK(threaded[r].tre == rows[r].tre);
    CHECK(threaded[r].omega_hat == rows[r].omega_hat);
  }

  const auto summary = summarize(rows);
  REQUIRE(summary.size() == 3);
  CHECK(summary[0].value == 0.01);
  CHECK(summary[0].runs == 3);
  const double mean = (rows[0].tre + rows[1].tre + rows[2].tre) / 3.0;
  CHECK(summary[0].tre_mean == Approx(mean));
  double var = 0.0;
  for (int r = 0; r < 3; ++r) var += (rows[r].tre - mean) * (rows[r].tre - mean);
  CHECK(summary[0].tre_std == Approx(std::sqrt(var / 2.0)));
}

TEST_CASE("swept noise and band reach the cells") {
  auto spec = small_sweep(SweepParameter::NoiseStd, {0.0, 0.5});
  spec.seeds = {1};
  const auto rows = run_sweep(spec, 2);
  auto cfg = spec.base;
  cfg.noise_std = 0.5;
  CHECK(rows[1].tre == run_pipeline(cfg, spec.opts, 1).score.tre);

  auto eps = small_sweep(SweepParameter::Epsilon, {0.0, 1.5});
  eps.seeds = {1};
  const auto er = run_sweep(eps, 1);
  auto o = eps.opts;
  o.eps1 = o.eps2 = 1.5;
  CHECK(er[1].tre == run_pipeline(eps.base, o, 1).score.tre);
}

TEST_CASE("failing cells are recorded and the sweep continues") {
  auto spec = small_sweep(SweepParameter::Epsilon, {-0.5, 0.2});
  spec.seeds = {1};
  const auto rows = run_sweep(spec, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status.rfind("error:", 0) == 0);
  CHECK(std::isnan(rows[0].tre));
  CHECK(rows[1].ok());
  const auto summary = summarize(rows);
  CHECK(summary[0].runs == 0);
  CHECK(summary[1].runs == 1);

  const auto dir = testing::scratch_dir("sweep_out");
  write_sweep_csv(rows, dir / "sweep.csv");
  write_sweep_summary_csv(spec.parameter, summary, dir / "summary.csv");
  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "parameter,value,seed,tre,alpha_hat,beta_hat,omega_hat,wall_time_s,kkt_residual,max_constraint_violation,status");
  std::ifstream sin(dir / "summary.csv");
  std::getline(sin, header);
  CHECK(header == "parameter,value,runs,tre_mean,tre_std,alpha_mean,beta_mean,omega_mean");
}
