#include "thermocc/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "thermocc/errors.hpp"
#include "thermocc/qp.hpp"

namespace thermocc {

namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

// Projection of y onto {v >= 0, lo <= sum v <= hi}: v = max(y - tau, 0).
void project_band(Eigen::Ref<VectorXd> y, std::optional<double> lo, double hi) {
  auto clipped_sum = [&](double tau) { return (y.array() - tau).max(0.0).sum(); };
  const double s0 = clipped_sum(0.0);
  double target;
  if (s0 > hi) {
    target = hi;
  } else if (lo && s0 < *lo) {
    target = *lo;
  } else {
    y = y.array().max(0.0).matrix();
    return;
  }
  // Piecewise-linear decreasing function of tau: walk the sorted breakpoints.
  std::vector<double> v(y.data(), y.data() + y.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    prefix += v[j];
    tau = (prefix - target) / static_cast<double>(j + 1);
    if (j + 1 == v.size() || v[j + 1] <= tau) break;
  }
  y = (y.array() - tau).max(0.0).matrix();
}

}  // namespace

void EstimatorOptions::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("estimator: lambda must be >= 0");
  if (!std::isfinite(eps1) || !std::isfinite(eps2)) throw ValidationError("estimator: eps must be finite");
  if (!(n_guess >= 0.0) || !std::isfinite(n_guess)) throw ValidationError("estimator: n_guess must be >= 0");
  if (!(q_avg_w > 0.0) || !std::isfinite(q_avg_w)) throw ValidationError("estimator: q_avg must be > 0");
}

double EstimationProblem::objective(const VectorXd& x) const {
  return (design * x - target).squaredNorm();
}

VectorXd EstimationProblem::gradient(const VectorXd& x) const {
  return 2.0 * (design.transpose() * (design * x - target));
}

EstimationProblem assemble(const SensorTrace& trace, const BuildingLayout& layout,
                           const KnownConstants& known, const EstimatorOptions& opts) {
  opts.validate();
  if (!(known.gamma > 0.0) || !(known.phi >= 0.0))
    throw ValidationError("estimator: gamma must be > 0 and phi >= 0");
  if (trace.rooms() != layout.k)
    throw ValidationError(fmt::format("estimator: trace has {} rooms, layout has {}", trace.rooms(), layout.k));
  if (trace.steps() < 2) throw ValidationError("estimator: need at least 2 steps");
  trace.validate();
  layout.validate();

  const int k = layout.k;
  const int z = trace.steps();
  const double dt = trace.delta_t;
  const auto neighbors = layout.neighbors();

  EstimationProblem pb;
  pb.rooms = k;
  pb.steps = z;
  pb.delta_t = dt;
  pb.known = known;
  pb.opts = opts;
  pb.residual_count = k * (z - 1);
  pb.regularization_count = opts.lambda > 0.0 ? k * (z - 1) : 0;

  const int rows = pb.residual_count + pb.regularization_count;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(pb.residual_count) * 4 + pb.regularization_count * 2);
  pb.target = VectorXd::Zero(rows);

  const auto& T = trace.temps_meas;
  for (int i = 0; i < k; ++i) {
    for (int t = 0; t + 1 < z; ++t) {
      const int row = i * (z - 1) + t;
      const double ti = T(i, t);
      double conduction = 0.0;
      for (int j : neighbors[i]) conduction += T(j, t) - ti;
      double known_rate = 0.0;
      if (trace.hvac_state(i, t)) known_rate = known.phi * (trace.hvac_temp_meas(i, t) - ti);
      pb.target[row] = (T(i, t + 1) - ti) / dt - known_rate;
      if (layout.ambient_exposed[i])
        trips.emplace_back(row, EstimationProblem::kAlpha, trace.ambient_meas[t] - ti);
      if (!neighbors[i].empty()) trips.emplace_back(row, EstimationProblem::kBeta, conduction);
      trips.emplace_back(row, EstimationProblem::kOmega, 1.0);
      trips.emplace_back(row, pb.mob_index(i, t), 1.0);
    }
  }
  if (pb.regularization_count > 0) {
    const double w = std::sqrt(opts.lambda);
    for (int i = 0; i < k; ++i) {
      for (int t = 0; t + 1 < z; ++t) {
        const int row = pb.residual_count + i * (z - 1) + t;
        trips.emplace_back(row, pb.mob_index(i, t + 1), w);
        trips.emplace_back(row, pb.mob_index(i, t), -w);
      }
    }
  }
  pb.design.resize(rows, pb.unknown_count());
  pb.design.setFromTriplets(trips.begin(), trips.end());
  pb.design.makeCompressed();
  if (!pb.target.allFinite()) throw ValidationError("estimator: non-finite measurement");

  const double total = opts.n_guess * opts.q_avg_w * pb.watts_to_unknown();
  pb.sum_upper = (1.0 + opts.eps1) * total;
  if (opts.eps2 <= 1.0) pb.sum_lower = (1.0 - opts.eps2) * total;
  return pb;
}

VectorXd pack_unknowns(const EstimationProblem& pb, double alpha, double beta, double omega,
                       const Eigen::MatrixXd& mob_heat_w) {
  if (mob_heat_w.rows() != pb.rooms || mob_heat_w.cols() != pb.steps)
    throw ValidationError("pack_unknowns: mob heat has wrong shape");
  VectorXd x(pb.unknown_count());
  x[EstimationProblem::kAlpha] = alpha;
  x[EstimationProblem::kBeta] = beta;
  x[EstimationProblem::kOmega] = omega;
  for (int i = 0; i < pb.rooms; ++i)
    for (int t = 0; t < pb.steps; ++t) x[pb.mob_index(i, t)] = mob_heat_w(i, t) * pb.watts_to_unknown();
  return x;
}

VectorXd project_feasible(const EstimationProblem& pb, const VectorXd& x) {
  VectorXd out = x;
  VectorXd col(pb.rooms);
  for (int t = 0; t < pb.steps; ++t) {
    for (int i = 0; i < pb.rooms; ++i) col[i] = x[pb.mob_index(i, t)];
    project_band(col, pb.sum_lower, pb.sum_upper);
    for (int i = 0; i < pb.rooms; ++i) out[pb.mob_index(i, t)] = col[i];
  }
  return out;
}

double projected_gradient_residual(const EstimationProblem& pb, const VectorXd& x) {
  const VectorXd g = pb.gradient(x);
  const VectorXd step = x - project_feasible(pb, x - g);
  return step.lpNorm<Eigen::Infinity>() / (1.0 + g.lpNorm<Eigen::Infinity>());
}

double max_constraint_violation(const EstimationProblem& pb, const VectorXd& x) {
  double worst = 0.0;
  for (int t = 0; t < pb.steps; ++t) {
    double sum = 0.0;
    for (int i = 0; i < pb.rooms; ++i) {
      const double m = x[pb.mob_index(i, t)];
      worst = std::max(worst, -m);
      sum += m;
    }
    worst = std::max(worst, sum - pb.sum_upper);
    if (pb.sum_lower) worst = std::max(worst, *pb.sum_lower - sum);
  }
  return worst;
}

EstimationResult solve(const EstimationProblem& pb, const SolveSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  if (pb.sum_upper < 0.0)
    throw InfeasibleError(fmt::format(
        "occupancy upper bound (1+eps1)*N*q = {:.6g} K/h is negative; no non-negative mob heat satisfies it",
        pb.sum_upper));
  if (pb.sum_lower && *pb.sum_lower > pb.sum_upper)
    throw InfeasibleError(fmt::format(
        "occupancy lower bound (1-eps2)*N*q = {:.6g} K/h exceeds upper bound (1+eps1)*N*q = {:.6g} K/h",
        *pb.sum_lower, pb.sum_upper));

  const int n_mob = pb.rooms * pb.steps;
  const int n_theta = EstimationProblem::kScalarCount;
  const bool equality = pb.equality_constrained();
  const int n_slack = equality ? 0 : pb.steps;
  const int n = n_theta + n_mob + n_slack;
  const double inf = std::numeric_limits<double>::infinity();

  // QP in (theta, m, s): 1/2 x'Px + q'x with P = D'D, q = -D't.
  qp::Problem qp;
  const Eigen::SparseMatrix<double> D = pb.design;
  Eigen::SparseMatrix<double> P = (D.transpose() * D).pruned();
  VectorXd qv = -(D.transpose() * pb.target);
  P.conservativeResize(n, n);
  qp.P = P;
  qp.q = VectorXd::Zero(n);
  qp.q.head(pb.unknown_count()) = qv;

  std::vector<Triplet> trips;
  for (int t = 0; t < pb.steps; ++t) {
    for (int i = 0; i < pb.rooms; ++i) trips.emplace_back(t, pb.mob_index(i, t), 1.0);
    if (!equality) trips.emplace_back(t, pb.unknown_count() + t, -1.0);
  }
  qp.A.resize(pb.steps, n);
  qp.A.setFromTriplets(trips.begin(), trips.end());
  qp.b = equality ? VectorXd::Constant(pb.steps, pb.sum_upper) : VectorXd::Zero(pb.steps);

  qp.lower = VectorXd::Constant(n, -inf);
  qp.upper = VectorXd::Constant(n, inf);
  qp.lower.segment(n_theta, n_mob).setZero();
  if (!equality) {
    qp.lower.tail(n_slack).setConstant(pb.sum_lower ? *pb.sum_lower : -inf);
    qp.upper.tail(n_slack).setConstant(pb.sum_upper);
  }

  // Start from zero scalars and an even spread of the assumed occupancy.
  VectorXd x0 = VectorXd::Zero(n);
  const double even = pb.opts.n_guess * pb.opts.q_avg_w * pb.watts_to_unknown() / pb.rooms;
  x0.segment(n_theta, n_mob).setConstant(even);
  if (!equality) x0.tail(n_slack).setConstant(even * pb.rooms);

  qp::Settings qs;
  qs.max_iterations = settings.max_iterations;
  qs.tolerance = settings.tolerance;
  const qp::Solution sol = qp::solve(qp, qs, &x0);
  if (sol.status == qp::Status::NumericalFailure)
    throw SolverError("estimator: KKT factorisation failed");

  EstimationResult res;
  res.unknowns = sol.x.head(pb.unknown_count());
  res.alpha_hat = res.unknowns[EstimationProblem::kAlpha];
  res.beta_hat = res.unknowns[EstimationProblem::kBeta];
  res.omega_hat = res.unknowns[EstimationProblem::kOmega];
  res.mob_heat_hat.resize(pb.rooms, pb.steps);
  for (int i = 0; i < pb.rooms; ++i)
    for (int t = 0; t < pb.steps; ++t)
      res.mob_heat_hat(i, t) = res.unknowns[pb.mob_index(i, t)] / pb.watts_to_unknown();
  res.objective = pb.objective(res.unknowns);

  res.stats.iterations = sol.iterations;
  res.stats.polished = sol.polished;
  res.stats.converged = sol.status == qp::Status::Solved;
  res.stats.status = qp::to_string(sol.status);
  res.stats.kkt_residual = projected_gradient_residual(pb, res.unknowns);
  res.stats.max_constraint_violation = max_constraint_violation(pb, res.unknowns);
  res.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

ResidualReport residual_report(const EstimationProblem& pb, const EstimationResult& result) {
  const VectorXd r = pb.target.head(pb.residual_count) -
                     (pb.design * result.unknowns).head(pb.residual_count);
  ResidualReport rep;
  rep.residuals = Eigen::Map<const Eigen::MatrixXd>(r.data(), pb.steps - 1, pb.rooms).transpose();
  rep.max_abs = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  rep.rms = r.size() ? std::sqrt(r.squaredNorm() / static_cast<double>(r.size())) : 0.0;
  return rep;
}

}  // namespace thermocc
