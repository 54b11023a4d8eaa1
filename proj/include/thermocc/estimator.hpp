#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "thermocc/core_model.hpp"
#include "thermocc/simulator.hpp"

namespace thermocc {

struct KnownConstants {
  double gamma = 0.0;  // K/J
  double phi = 0.0;    // 1/h
};

struct EstimatorOptions {
  double lambda = 0.1;
  double eps1 = 0.2;     // upper relaxation of the occupancy total
  double eps2 = 0.2;     // lower relaxation; above 1 the lower bound is dropped
  double n_guess = 45.0; // assumed number of people in the building
  double q_avg_w = 110.0;

  void validate() const;
};

/// Least-squares fit of the discretised heat balance.
///
/// Unknowns, in order: alpha, beta, omega, then m_i(t) = gamma * M_i(t) in
/// K/h for every room i and step t (room-major). One residual row per room and
/// step t < z-1:
///
///   (T_i(t+1) - T_i(t)) / dt - [alpha a_i (T_ext - T_i) + beta sum_j (T_j - T_i)
///                               + omega + m_i(t) + phi (T_hvac,i - T_i) u_i]
///
/// with a_i the ambient-exposure indicator. The objective is
/// ||residual||^2 + lambda * sum (m_i(t+1) - m_i(t))^2, subject to m >= 0 and
/// sum_lower <= sum_i m_i(t) <= sum_upper at every step.
struct EstimationProblem {
  int rooms = 0;
  int steps = 0;
  double delta_t = 0.0;
  KnownConstants known;
  EstimatorOptions opts;

  // Residual rows followed by regularisation rows; objective ||design x - target||^2.
  Eigen::SparseMatrix<double, Eigen::RowMajor> design;
  Eigen::VectorXd target;
  int residual_count = 0;
  int regularization_count = 0;

  double sum_upper = 0.0;              // K/h
  std::optional<double> sum_lower;     // K/h; absent when eps2 > 1

  static constexpr int kAlpha = 0;
  static constexpr int kBeta = 1;
  static constexpr int kOmega = 2;
  static constexpr int kScalarCount = 3;

  int unknown_count() const { return kScalarCount + rooms * steps; }
  int mob_index(int room, int step) const { return kScalarCount + room * steps + step; }
  bool equality_constrained() const { return sum_lower && *sum_lower == sum_upper; }

  // gamma * J/h per watt: converts W to the K/h scale of the unknowns.
  double watts_to_unknown() const { return known.gamma * 3600.0; }

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
};

struct SolverStats {
  int iterations = 0;
  double kkt_residual = 0.0;              // projected-gradient norm, relative
  double max_constraint_violation = 0.0;  // K/h
  double wall_time_s = 0.0;
  bool converged = false;
  bool polished = false;
  std::string status;
};

struct EstimationResult {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  double omega_hat = 0.0;
  Eigen::MatrixXd mob_heat_hat;  // W, rooms x steps
  Eigen::VectorXd unknowns;
  double objective = 0.0;
  SolverStats stats;
};

struct SolveSettings {
  int max_iterations = 200;
  double tolerance = 1e-11;
};

EstimationProblem assemble(const SensorTrace& trace, const BuildingLayout& layout,
                           const KnownConstants& known, const EstimatorOptions& opts);

/// Throws InfeasibleError when the occupancy band is empty or excludes every
/// non-negative solution. Hitting the iteration limit is not an error: the
/// last iterate is returned with stats.converged == false.
EstimationResult solve(const EstimationProblem& problem, const SolveSettings& settings = {});

struct ResidualReport {
  Eigen::MatrixXd residuals;  // K/h, rooms x (steps - 1)
  double max_abs = 0.0;
  double rms = 0.0;
};

ResidualReport residual_report(const EstimationProblem& problem, const EstimationResult& result);

/// Unknown vector for given scalars and mob heat (W, rooms x steps).
Eigen::VectorXd pack_unknowns(const EstimationProblem& problem, double alpha, double beta,
                              double omega, const Eigen::MatrixXd& mob_heat_w);

/// Euclidean projection onto the feasible set (scalars free, per-step band
/// on the non-negative mob unknowns).
Eigen::VectorXd project_feasible(const EstimationProblem& problem, const Eigen::VectorXd& x);

/// ||x - P(x - grad f(x))||_inf / (1 + ||grad f(x)||_inf).
double projected_gradient_residual(const EstimationProblem& problem, const Eigen::VectorXd& x);

double max_constraint_violation(const EstimationProblem& problem, const Eigen::VectorXd& x);

}  // namespace thermocc
