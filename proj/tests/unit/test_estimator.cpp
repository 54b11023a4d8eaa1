#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracle.hpp"
#include "thermocc/errors.hpp"
#include "thermocc/estimator.hpp"
#include "thermocc/mobility_metrics.hpp"
#include "thermocc/pipeline.hpp"
#include "thermocc/simulator.hpp"

using namespace thermocc;
using doctest::Approx;
using Eigen::VectorXd;

namespace {

struct Instance {
  ScenarioConfig cfg;
  SimulationTrace truth;
  SensorTrace sensors;
};

Instance make_instance(ScenarioConfig cfg, std::uint64_t seed, double eta) {
  Instance in{cfg, {}, {}};
  Rng rng(seed);
  in.truth = simulate(in.cfg, rng);
  in.sensors = add_sensor_noise(in.truth, eta, rng);
  return in;
}

KnownConstants known(const ScenarioConfig& c) { return {c.params.gamma, c.params.phi}; }

EstimatorOptions exact_options(const ScenarioConfig& c) {
  EstimatorOptions o = default_options(c, 0.0, 0.0);
  return o;
}

ScenarioConfig tiny() {
  auto c = testing::small_scenario(1, 2, 20, 5, 1);
  c.params.q_std = 0.0;
  c.noise_std = 0.0;
  return c;
}

}  // namespace

TEST_CASE("problem shape") {
  const auto in = make_instance(default_reference_scenario(), 1, 0.1);
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), default_options(in.cfg));
  CHECK(pb.residual_count == 16 * 599);
  CHECK(pb.unknown_count() == 9603);
  CHECK(pb.regularization_count == 16 * 599);
  CHECK(pb.design.rows() == 2 * 16 * 599);
  CHECK(pb.design.cols() == 9603);
  // Band in K/h: (1 +- 0.2) * 45 * 110 W * 1e-6 K/J * 3600 s/h.
  CHECK(pb.sum_upper == Approx(1.2 * 45 * 110 * 3.6e-3));
  REQUIRE(pb.sum_lower);
  CHECK(*pb.sum_lower == Approx(0.8 * 45 * 110 * 3.6e-3));
}

TEST_CASE("option-dependent structure") {
  const auto in = make_instance(tiny(), 3, 0.0);
  auto o = default_options(in.cfg);
  SUBCASE("zero band is an equality") {
    o.eps1 = o.eps2 = 0.0;
    const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
    CHECK(pb.equality_constrained());
    CHECK(pb.sum_upper == Approx(20 * 110 * 3.6e-3));
  }
  SUBCASE("wide lower relaxation drops the lower bound") {
    o.eps2 = 3.0;
    const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
    CHECK_FALSE(pb.sum_lower.has_value());
  }
  SUBCASE("no smoothing rows without smoothing") {
    o.lambda = 0.0;
    const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
    CHECK(pb.regularization_count == 0);
    CHECK(pb.design.rows() == pb.residual_count);
  }
  SUBCASE("bad inputs") {
    auto s = in.sensors;
    s.temps_meas(0, 2) = std::nan("");
    CHECK_THROWS_AS(assemble(s, in.cfg.layout, known(in.cfg), o), ValidationError);
    s = in.sensors;
    s.temps_meas = s.temps_meas.leftCols(1).eval();
    s.ambient_meas = s.ambient_meas.head(1).eval();
    s.hvac_temp_meas = s.hvac_temp_meas.leftCols(1).eval();
    s.hvac_state = s.hvac_state.leftCols(1).eval();
    CHECK_THROWS_AS(assemble(s, in.cfg.layout, known(in.cfg), o), ValidationError);
    CHECK_THROWS_AS(assemble(in.sensors, BuildingLayout::grid(1, 3), known(in.cfg), o), ValidationError);
    o.lambda = -1.0;
    CHECK_THROWS_AS(assemble(in.sensors, in.cfg.layout, known(in.cfg), o), ValidationError);
  }
}

TEST_CASE("sparse assembly agrees with the dense reference") {
  const auto in = make_instance(testing::small_scenario(2, 3, 9, 12, 4), 8, 0.3);
  const auto o = default_options(in.cfg, 0.25, 0.2);
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
  const auto dense = testing::dense_fit(in.sensors, in.cfg.layout, in.cfg.params.phi, 0.25);
  CHECK((Eigen::MatrixXd(pb.design) - dense.design).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pb.target - dense.target).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("tiny noiseless instance matches the dense KKT solution") {
  const auto in = make_instance(tiny(), 5, 0.0);
  const auto o = exact_options(in.cfg);
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
  const auto res = solve(pb);
  REQUIRE(res.stats.converged);

  const auto dense = testing::dense_fit(in.sensors, in.cfg.layout, in.cfg.params.phi, 0.0);
  const VectorXd ref = testing::dense_kkt_solve(dense, pb.sum_upper);
  // The reference ignores m >= 0; it must be strictly inside for the
  // comparison to mean anything.
  REQUIRE(ref.tail(pb.rooms * pb.steps).minCoeff() > 0.0);
  for (int j = 0; j < pb.unknown_count(); ++j) {
    CAPTURE(j);
    CHECK(std::abs(res.unknowns[j] - ref[j]) <= 1e-6);
  }

  // Quantities the data pin down match the simulation itself. The split of
  // conduction between beta and the occupancy terms is not identifiable with
  // a fixed per-step total, so beta is not among them.
  CHECK(res.alpha_hat == Approx(in.cfg.params.alpha).epsilon(1e-6));
  CHECK(res.omega_hat == Approx(in.cfg.params.omega).epsilon(1e-6));
  const auto report = residual_report(pb, res);
  CHECK(report.max_abs <= 1e-6);
  CHECK(report.residuals.rows() == 2);
  CHECK(report.residuals.cols() == 4);
}

TEST_CASE("noiseless fit reaches the zero objective") {
  auto c = testing::small_scenario(3, 3, 20, 60, 20);
  c.params.q_std = 0.0;
  const auto in = make_instance(c, 2, 0.0);
  const auto pb = assemble(in.sensors, c.layout, known(c), exact_options(c));
  const auto res = solve(pb);
  const VectorXd truth = pack_unknowns(pb, c.params.alpha, c.params.beta, c.params.omega, in.truth.mob_heat);
  CHECK(pb.objective(truth) < 1e-18 * pb.residual_count + 1e-16);
  CHECK(res.objective <= pb.objective(truth) + 1e-12);
  CHECK(residual_report(pb, res).max_abs <= 1e-6);
  CHECK(res.alpha_hat == Approx(c.params.alpha).epsilon(1e-6));
  CHECK(res.omega_hat == Approx(c.params.omega).epsilon(1e-6));
}

TEST_CASE("certificates and dominance on random instances") {
  std::mt19937_64 meta(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    CAPTURE(trial);
    auto c = testing::random_scenario(meta);
    c.n_people = std::max(c.n_people, 1);
    const double eta = trial % 3 == 0 ? 0.0 : std::pow(10.0, -2.0 + 2.0 * u(meta));
    const auto in = make_instance(c, meta(), eta);
    auto o = default_options(c, trial % 4 == 0 ? 0.0 : std::pow(10.0, -2.0 + 3.0 * u(meta)), 2.0 * u(meta));
    const auto pb = assemble(in.sensors, c.layout, known(c), o);
    const auto res = solve(pb);
    REQUIRE(res.stats.converged);
    CHECK(res.stats.kkt_residual <= 1e-6);
    CHECK(res.stats.max_constraint_violation <= 1e-8);
    CHECK(projected_gradient_residual(pb, res.unknowns) == Approx(res.stats.kkt_residual));
    CHECK(res.mob_heat_hat.minCoeff() >= -1e-8);

    // Nothing feasible does better: ground truth (when inside the band) and
    // projected random points.
    const VectorXd truth = pack_unknowns(pb, c.params.alpha, c.params.beta, c.params.omega, in.truth.mob_heat);
    if (max_constraint_violation(pb, truth) <= 1e-12) CHECK(res.objective <= pb.objective(truth) * (1 + 1e-9) + 1e-12);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int r = 0; r < 5; ++r) {
      VectorXd x = res.unknowns;
      for (int j = 0; j < x.size(); ++j) x[j] += g(meta) * (r + 1) * 0.1;
      x = project_feasible(pb, x);
      CHECK(max_constraint_violation(pb, x) <= 1e-10);
      CHECK(res.objective <= pb.objective(x) * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST_CASE("band projection") {
  const auto in = make_instance(testing::small_scenario(2, 2, 10, 6, 3), 4, 0.0);
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), default_options(in.cfg, 0.1, 0.1));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd x(pb.unknown_count());
    for (int j = 0; j < x.size(); ++j) x[j] = g(rng);
    const VectorXd p = project_feasible(pb, x);
    CHECK(max_constraint_violation(pb, p) <= 1e-12);
    CHECK((project_feasible(pb, p) - p).cwiseAbs().maxCoeff() <= 1e-12);
    for (int j = 0; j < 3; ++j) CHECK(p[j] == x[j]);
    // Obtuse-angle property of a projection onto a convex set.
    for (int r = 0; r < 3; ++r) {
      VectorXd y(pb.unknown_count());
      for (int j = 0; j < y.size(); ++j) y[j] = g(rng);
      y = project_feasible(pb, y);
      CHECK((x - p).dot(y - p) <= 1e-9);
    }
  }
}

TEST_CASE("residuals grow with sensor noise") {
  auto c = testing::small_scenario(4, 4, 45, 120, 60);
  double prev = 0.0;
  for (double eta : {0.01, 0.1, 1.0}) {
    const auto in = make_instance(c, 6, eta);
    const auto pb = assemble(in.sensors, c.layout, known(c), default_options(c));
    const auto rms = residual_report(pb, solve(pb)).rms;
    CHECK(rms > prev);
    prev = rms;
  }
}

TEST_CASE("heat capacity scaling cancels in the counts") {
  // gamma / s with q_avg * s describes the same problem in K/h.
  auto c = testing::small_scenario(2, 2, 12, 60, 20);
  const auto in = make_instance(c, 10, 0.05);
  const auto o = default_options(c);
  const auto base = solve(assemble(in.sensors, c.layout, known(c), o));
  const double s = 4.0;
  auto o2 = o;
  o2.q_avg_w *= s;
  const auto scaled = solve(assemble(in.sensors, c.layout, {c.params.gamma / s, c.params.phi}, o2));
  CHECK(scaled.alpha_hat == Approx(base.alpha_hat).epsilon(1e-6));
  const auto m1 = to_mobility_map(base.mob_heat_hat, o.q_avg_w, 20);
  const auto m2 = to_mobility_map(scaled.mob_heat_hat, o2.q_avg_w, 20);
  CHECK(m1.counts == m2.counts);
}

TEST_CASE("repeat solves are identical") {
  const auto in = make_instance(testing::small_scenario(3, 3, 20, 60, 20), 12, 0.1);
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), default_options(in.cfg));
  const auto a = solve(pb), b = solve(pb);
  CHECK(a.unknowns == b.unknowns);
}

TEST_CASE("infeasible band and iteration limit") {
  const auto in = make_instance(testing::small_scenario(2, 2, 10, 30, 10), 2, 0.1);
  auto o = default_options(in.cfg);
  o.eps1 = -0.5;
  o.eps2 = -0.5;
  const auto pb = assemble(in.sensors, in.cfg.layout, known(in.cfg), o);
  try {
    solve(pb);
    FAIL("expected infeasibility");
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("lower bound") != std::string::npos);
  }
  o.eps1 = -1.5;
  o.eps2 = 3.0;
  CHECK_THROWS_AS(solve(assemble(in.sensors, in.cfg.layout, known(in.cfg), o)), InfeasibleError);

  const auto ok = assemble(in.sensors, in.cfg.layout, known(in.cfg), default_options(in.cfg));
  SolveSettings st;
  st.max_iterations = 2;
  const auto res = solve(ok, st);
  CHECK_FALSE(res.stats.converged);
  CHECK(res.stats.status == "iteration_limit");
  CHECK(res.unknowns.size() == ok.unknown_count());
}
