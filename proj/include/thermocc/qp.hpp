#pragma once

#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace thermocc::qp {

/// Convex quadratic program with linear equalities and variable bounds:
///
///   minimize    1/2 x'Px + q'x
///   subject to  A x = b,  lower <= x <= upper
///
/// P must be symmetric positive semidefinite (both triangles stored).
/// Infinite bounds are allowed; lower[j] < upper[j] is required.
struct Problem {
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index variables() const { return q.size(); }
  Eigen::Index equalities() const { return b.size(); }
  void validate() const;
};

struct Settings {
  int max_iterations = 200;
  // Relative tolerances on primal residual, dual residual and average
  // complementarity.
  double tolerance = 1e-11;
  // Static regularisation of the KKT factorisation; removed again by
  // iterative refinement.
  double regularization = 1e-10;
  int refinement_steps = 3;
  // Re-solve on the detected active set for an exact-bound solution.
  bool polish = true;
};

enum class Status { Solved, IterationLimit, NumericalFailure };

std::string to_string(Status s);

struct Solution {
  Status status = Status::NumericalFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd y;        // equality multipliers (Px + q = A'y + z_lower - z_upper)
  Eigen::VectorXd z_lower;  // >= 0
  Eigen::VectorXd z_upper;  // >= 0
  int iterations = 0;
  bool polished = false;
  double primal_residual = 0.0;  // ||Ax - b||_inf
  double dual_residual = 0.0;    // ||Px + q - A'y - z_l + z_u||_inf
  double complementarity = 0.0;  // mean of slack * multiplier
  double objective = 0.0;        // 1/2 x'Px + q'x
};

/// Mehrotra predictor-corrector interior-point method on the sparse KKT
/// system, followed by an optional active-set polish. `x0` is a starting
/// guess (it is moved strictly inside the bounds).
Solution solve(const Problem& problem, const Settings& settings = {},
               const Eigen::VectorXd* x0 = nullptr);

}  // namespace thermocc::qp
