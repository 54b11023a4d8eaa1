#include "thermocc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "thermocc/errors.hpp"
#include "thermocc/log.hpp"

namespace thermocc::qp {

namespace {

using Eigen::Index;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Lower triangle of [[P + D, A'], [A, -delta I]] with every diagonal entry
// present, so diagonal updates never change the sparsity pattern.
struct KktMatrix {
  SpMat lower;
  std::vector<double*> diag;  // n + m diagonal value pointers

  KktMatrix(const SpMat& P, const SpMat& A) {
    const Index n = P.rows();
    const Index m = A.rows();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(P.nonZeros() + A.nonZeros() + n + m));
    for (Index c = 0; c < P.outerSize(); ++c)
      for (SpMat::InnerIterator it(P, c); it; ++it)
        if (it.row() > it.col()) trips.emplace_back(it.row(), it.col(), it.value());
    for (Index c = 0; c < A.outerSize(); ++c)
      for (SpMat::InnerIterator it(A, c); it; ++it) trips.emplace_back(n + it.row(), it.col(), it.value());
    for (Index i = 0; i < n + m; ++i) trips.emplace_back(i, i, 0.0);
    lower.resize(n + m, n + m);
    lower.setFromTriplets(trips.begin(), trips.end());
    lower.makeCompressed();
    diag.resize(static_cast<std::size_t>(n + m));
    for (Index c = 0; c < lower.outerSize(); ++c)
      for (SpMat::InnerIterator it(lower, c); it; ++it)
        if (it.row() == c) diag[static_cast<std::size_t>(c)] = &it.valueRef();
  }

  void set_diagonal(const VectorXd& top, double bottom) {
    const auto n = static_cast<std::size_t>(top.size());
    for (std::size_t i = 0; i < n; ++i) *diag[i] = top[static_cast<Index>(i)];
    for (std::size_t i = n; i < diag.size(); ++i) *diag[i] = bottom;
  }
};

// Solves [[H, A'], [A, -delta]] [dx; w] = [r1; r2] with the factorised
// regularised matrix, refining against the exact operator
// [[P + sigma, A'], [A, 0]].
class KktSolver {
 public:
  KktSolver(const SpMat& P, const SpMat& A) : P_(P), A_(A), At_(A.transpose()), kkt_(P, A) {}

  bool factorize(const VectorXd& exact_diag_extra, double primal_reg, double dual_reg) {
    extra_ = exact_diag_extra;
    VectorXd top = P_.diagonal() + extra_ + VectorXd::Constant(extra_.size(), primal_reg);
    kkt_.set_diagonal(top, -dual_reg);
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt_.lower);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt_.lower);
    return ldlt_.info() == Eigen::Success;
  }

  // Pivoted LU instead of LDLT; slower, but stable when the diagonal has
  // entries many orders of magnitude apart.
  bool factorize_pivoted(const VectorXd& exact_diag_extra, double dual_reg) {
    extra_ = exact_diag_extra;
    pivoted_ = true;
    kkt_.set_diagonal(P_.diagonal() + extra_, -dual_reg);
    const SpMat strict = kkt_.lower.triangularView<Eigen::StrictlyLower>();
    SpMat full = kkt_.lower + SpMat(strict.transpose());
    full.makeCompressed();
    lu_.compute(full);
    return lu_.info() == Eigen::Success;
  }

  bool pivoted() const { return pivoted_; }

  // Infinity norm of the residual against the exact operator.
  double residual(const VectorXd& r1, const VectorXd& r2, const VectorXd& dx, const VectorXd& w) const {
    const double top = inf_norm(r1 - (P_ * dx + extra_.cwiseProduct(dx) + At_ * w));
    return std::max(top, inf_norm(r2 - A_ * dx));
  }

  void solve(const VectorXd& r1, const VectorXd& r2, int refinement, VectorXd& dx, VectorXd& w) const {
    const Index n = r1.size();
    const Index m = r2.size();
    VectorXd rhs(n + m);
    rhs << r1, r2;
    auto apply = [&](const VectorXd& v) -> VectorXd { return pivoted_ ? VectorXd(lu_.solve(v)) : VectorXd(ldlt_.solve(v)); };
    VectorXd sol = apply(rhs);
    for (int it = 0; it < refinement; ++it) {
      VectorXd res(n + m);
      const auto x = sol.head(n);
      const auto v = sol.tail(m);
      res.head(n) = r1 - (P_ * x + extra_.cwiseProduct(x) + At_ * v);
      res.tail(m) = r2 - A_ * x;
      sol += apply(res);
    }
    dx = sol.head(n);
    w = sol.tail(m);
  }

 private:
  const SpMat& P_;
  const SpMat& A_;
  SpMat At_;
  KktMatrix kkt_;
  Ldlt ldlt_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
  bool pivoted_ = false;
  VectorXd extra_;
};

struct BoundSets {
  std::vector<Index> lower;
  std::vector<Index> upper;
};

double max_step(const VectorXd& v, const VectorXd& dv, const std::vector<Index>& idx, double sign) {
  double alpha = 1.0;
  for (Index j : idx) {
    const double d = sign * dv[j];
    if (d < 0.0) alpha = std::min(alpha, -v[j] / d);
  }
  return alpha;
}

struct Residuals {
  VectorXd dual;
  VectorXd primal;
  double mu = 0.0;
};

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::IterationLimit: return "iteration_limit";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void Problem::validate() const {
  const Index n = q.size();
  if (P.rows() != n || P.cols() != n) throw ValidationError("qp: P has wrong shape");
  if (A.cols() != n || A.rows() != b.size()) throw ValidationError("qp: A has wrong shape");
  if (lower.size() != n || upper.size() != n) throw ValidationError("qp: bounds have wrong length");
  for (Index j = 0; j < n; ++j) {
    if (!(lower[j] < upper[j]))
      throw ValidationError(fmt::format("qp: variable {} has empty interior (lower >= upper)", j));
  }
  if (!q.allFinite() || !b.allFinite()) throw ValidationError("qp: non-finite problem data");
}

namespace {

// Re-solve with the active bounds fixed, then adjust the active set a few
// times: free variables that cross a bound get fixed there, fixed variables
// with a wrong-signed multiplier are released. Returns true and overwrites
// `sol` when the result is feasible, dual feasible and at least as accurate.
bool polish(const Problem& pb, const Settings& settings, Solution& sol) {
  const Index n = pb.variables();
  const Index m = pb.equalities();
  // -1 fixed at lower, +1 fixed at upper, 0 free.
  std::vector<int> fixed(static_cast<std::size_t>(n), 0);
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(pb.lower[j]) && sol.x[j] - pb.lower[j] < sol.z_lower[j]) fixed[j] = -1;
    else if (std::isfinite(pb.upper[j]) && pb.upper[j] - sol.x[j] < sol.z_upper[j]) fixed[j] = 1;
  }
  const double scale = std::max(1.0, pb.P.diagonal().cwiseAbs().maxCoeff());
  const double prox = 1e-9 * scale;
  const double dual_tol = std::max(sol.dual_residual, settings.tolerance * (1.0 + inf_norm(pb.q)));
  const double primal_tol = std::max(sol.primal_residual, settings.tolerance * (1.0 + inf_norm(pb.b)));

  std::vector<char> released(static_cast<std::size_t>(n), 0);
  for (int round = 0; round < 8; ++round) {
    VectorXd x_fix = VectorXd::Zero(n);
    VectorXd unit = VectorXd::Zero(n);
    for (Index j = 0; j < n; ++j) {
      if (fixed[j] < 0) x_fix[j] = pb.lower[j];
      if (fixed[j] > 0) x_fix[j] = pb.upper[j];
      if (fixed[j]) unit[j] = 1.0;
    }
    // Reduced operators: fixed columns move to the right-hand side, fixed
    // rows become identity rows.
    std::vector<Triplet> pt, at;
    for (Index c = 0; c < pb.P.outerSize(); ++c)
      for (SpMat::InnerIterator it(pb.P, c); it; ++it)
        if (!fixed[it.row()] && !fixed[it.col()]) pt.emplace_back(it.row(), it.col(), it.value());
    for (Index c = 0; c < pb.A.outerSize(); ++c)
      for (SpMat::InnerIterator it(pb.A, c); it; ++it)
        if (!fixed[it.col()]) at.emplace_back(it.row(), it.col(), it.value());
    SpMat Pr(n, n), Ar(m, n);
    Pr.setFromTriplets(pt.begin(), pt.end());
    Ar.setFromTriplets(at.begin(), at.end());
    const VectorXd q_eff = pb.q + pb.P * x_fix;
    const VectorXd b_eff = pb.b - pb.A * x_fix;

    KktSolver kkt(Pr, Ar);
    const VectorXd extra = unit + VectorXd::Constant(n, prox);
    if (!kkt.factorize(extra, 0.0, settings.regularization) &&
        !kkt.factorize_pivoted(extra, settings.regularization))
      return false;

    // Proximal-point iterations keep the anchor's component along flat
    // directions. Anchored at zero they converge to the minimum-norm minimiser
    // on this active set; if that is not accurate enough (directions barely
    // above the proximal weight), anchor at the interior-point iterate.
    auto prox_solve = [&](VectorXd x, int iterations, VectorXd& w) {
      for (Index j = 0; j < n; ++j)
        if (fixed[j]) x[j] = x_fix[j];
      for (int it = 0; it < iterations; ++it) {
        VectorXd r1 = -q_eff + prox * x;
        for (Index j = 0; j < n; ++j)
          if (fixed[j]) r1[j] = 0.0;
        VectorXd dx;
        kkt.solve(r1, b_eff, settings.refinement_steps + 2, dx, w);
        // The tiny proximal weight can defeat the unpivoted factorisation.
        if (!kkt.pivoted() &&
            kkt.residual(r1, b_eff, dx, w) > 1e-10 * (1.0 + inf_norm(r1) + inf_norm(b_eff))) {
          log::debug("qp polish: switching to pivoted factorisation");
          if (!kkt.factorize_pivoted(extra, settings.regularization)) return std::optional<VectorXd>{};
          kkt.solve(r1, b_eff, settings.refinement_steps + 2, dx, w);
        }
        x = dx;
      }
      for (Index j = 0; j < n; ++j)
        if (fixed[j]) x[j] = x_fix[j];
      return std::optional<VectorXd>(std::move(x));
    };
    auto stationarity = [&](const VectorXd& x, const VectorXd& w) {
      VectorXd g = pb.P * x + pb.q + pb.A.transpose() * w;
      for (Index j = 0; j < n; ++j)
        if (fixed[j]) g[j] = 0.0;
      return inf_norm(g);
    };
    VectorXd w = VectorXd::Zero(m);
    auto first = prox_solve(VectorXd::Zero(n), 12, w);
    if (!first) return false;
    VectorXd x = std::move(*first);
    if (stationarity(x, w) > dual_tol) {
      auto second = prox_solve(sol.x, 6, w);
      if (!second) return false;
      x = std::move(*second);
    }

    const VectorXd y = -w;
    const VectorXd g = pb.P * x + pb.q - pb.A.transpose() * y;
    int changes = 0;
    for (Index j = 0; j < n; ++j) {
      // A bound held with a negligible multiplier is released once, so the
      // tie-break can move off it; if it is crossed again it stays fixed.
      const double release = released[j] ? -dual_tol : dual_tol;
      if (fixed[j] < 0 && g[j] < release) {
        fixed[j] = 0;
        released[j] = 1;
        ++changes;
      } else if (fixed[j] > 0 && -g[j] < release) {
        fixed[j] = 0;
        released[j] = 1;
        ++changes;
      } else if (!fixed[j]) {
        const double tol_l = 1e-12 * (1.0 + std::abs(pb.lower[j]));
        const double tol_u = 1e-12 * (1.0 + std::abs(pb.upper[j]));
        if (x[j] < pb.lower[j] - tol_l) {
          fixed[j] = -1;
          ++changes;
        } else if (x[j] > pb.upper[j] + tol_u) {
          fixed[j] = 1;
          ++changes;
        }
      }
    }
    if (changes > 0) {
      log::debug("qp polish round {}: {} active-set changes", round, changes);
      continue;
    }

    VectorXd zl = VectorXd::Zero(n), zu = VectorXd::Zero(n);
    for (Index j = 0; j < n; ++j) {
      if (fixed[j] < 0) zl[j] = std::max(g[j], 0.0);
      if (fixed[j] > 0) zu[j] = std::max(-g[j], 0.0);
      if (!fixed[j]) x[j] = std::clamp(x[j], pb.lower[j], pb.upper[j]);
    }
    const double primal = inf_norm(pb.A * x - pb.b);
    const double dual = inf_norm(g - zl + zu);
    if (primal > primal_tol || dual > dual_tol) {
      log::debug("qp polish rejected: residuals primal {:.3e} dual {:.3e}", primal, dual);
      return false;
    }
    sol.x = x;
    sol.y = y;
    sol.z_lower = zl;
    sol.z_upper = zu;
    sol.primal_residual = primal;
    sol.dual_residual = dual;
    sol.complementarity = 0.0;
    sol.polished = true;
    return true;
  }
  log::debug("qp polish rejected: active set did not settle");
  return false;
}

}  // namespace

Solution solve(const Problem& pb, const Settings& settings, const VectorXd* x0) {
  pb.validate();
  const Index n = pb.variables();
  const Index m = pb.equalities();

  BoundSets sets;
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(pb.lower[j])) sets.lower.push_back(j);
    if (std::isfinite(pb.upper[j])) sets.upper.push_back(j);
  }
  const auto n_comp = static_cast<double>(sets.lower.size() + sets.upper.size());

  // Strictly interior starting point.
  VectorXd x = x0 ? *x0 : VectorXd::Zero(n);
  if (x.size() != n) throw ValidationError("qp: starting point has wrong length");
  for (Index j = 0; j < n; ++j) {
    const double l = pb.lower[j], u = pb.upper[j];
    if (std::isfinite(l) && std::isfinite(u)) {
      const double margin = std::min(1.0, 0.25 * (u - l));
      x[j] = std::clamp(x[j], l + margin, u - margin);
    } else if (std::isfinite(l)) {
      x[j] = std::max(x[j], l + 1.0);
    } else if (std::isfinite(u)) {
      x[j] = std::min(x[j], u - 1.0);
    }
  }
  VectorXd y = VectorXd::Zero(m);
  VectorXd zl = VectorXd::Zero(n), zu = VectorXd::Zero(n);
  VectorXd sl = VectorXd::Zero(n), su = VectorXd::Zero(n);
  for (Index j : sets.lower) zl[j] = 1.0;
  for (Index j : sets.upper) zu[j] = 1.0;

  const SpMat At = pb.A.transpose();
  const double b_scale = 1.0 + inf_norm(pb.b);
  const double q_scale = 1.0 + inf_norm(pb.q);
  const double p_scale = std::max(1.0, pb.P.diagonal().cwiseAbs().maxCoeff());

  auto compute = [&](Residuals& r) {
    for (Index j : sets.lower) sl[j] = x[j] - pb.lower[j];
    for (Index j : sets.upper) su[j] = pb.upper[j] - x[j];
    r.dual = pb.P * x + pb.q - At * y - zl + zu;
    r.primal = pb.A * x - pb.b;
    r.mu = n_comp > 0 ? (sl.dot(zl) + su.dot(zu)) / n_comp : 0.0;
  };

  Solution out;
  KktSolver kkt(pb.P, pb.A);
  double reg = settings.regularization;
  Residuals r;
  VectorXd dx, w, dzl(n), dzu(n);

  auto finalize = [&](Status status, int iterations) {
    compute(r);
    out.status = status;
    out.x = x;
    out.y = y;
    out.z_lower = zl;
    out.z_upper = zu;
    out.iterations = iterations;
    out.primal_residual = inf_norm(r.primal);
    out.dual_residual = inf_norm(r.dual);
    out.complementarity = r.mu;
    if (status == Status::Solved && settings.polish && n_comp > 0) polish(pb, settings, out);
    out.objective = 0.5 * out.x.dot(pb.P * out.x) + pb.q.dot(out.x);
    return out;
  };

  // A failed polish usually means the active set is not settled yet; the
  // interior iteration then continues with a tighter tolerance.
  double tol = settings.tolerance;
  int polish_attempts = 0;
  std::optional<Solution> converged;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    compute(r);
    const VectorXd Px = pb.P * x;
    const double dual_scale = std::max({q_scale, inf_norm(Px), inf_norm(At * y)});
    log::debug("qp iter {:3d} primal {:.2e} dual {:.2e} (scale {:.2e}) mu {:.2e}", iter, inf_norm(r.primal),
               inf_norm(r.dual), dual_scale, r.mu);
    if (inf_norm(r.primal) <= tol * b_scale && inf_norm(r.dual) <= tol * dual_scale &&
        r.mu * n_comp <= tol * (1.0 + x.dot(Px))) {
      converged = finalize(Status::Solved, iter);
      if (converged->polished || !settings.polish || n_comp == 0 || ++polish_attempts > 3) return *converged;
      tol *= 1e-2;
    }

    VectorXd sigma_diag = VectorXd::Zero(n);
    // Capped: past this the iterate is converged to working precision and
    // the factorisation would only lose accuracy.
    const double sigma_cap = 1e16 * p_scale;
    for (Index j : sets.lower) sigma_diag[j] += std::min(zl[j] / sl[j], sigma_cap);
    for (Index j : sets.upper) sigma_diag[j] += std::min(zu[j] / su[j], sigma_cap);

    bool factored = false;
    for (int attempt = 0; attempt < 6 && !factored; ++attempt) {
      factored = kkt.factorize(sigma_diag, reg, reg);
      if (!factored) reg *= 100.0;
    }
    if (!factored) return converged ? *converged : finalize(Status::NumericalFailure, iter);

    // Newton direction for complementarity targets tau_l, tau_u.
    auto direction = [&](const VectorXd& tau_l, const VectorXd& tau_u) {
      VectorXd r1 = -r.dual;
      for (Index j : sets.lower) r1[j] += tau_l[j] / sl[j] - zl[j];
      for (Index j : sets.upper) r1[j] -= tau_u[j] / su[j] - zu[j];
      kkt.solve(r1, -r.primal, settings.refinement_steps, dx, w);
      dzl.setZero();
      dzu.setZero();
      for (Index j : sets.lower) dzl[j] = (tau_l[j] - sl[j] * zl[j] - zl[j] * dx[j]) / sl[j];
      for (Index j : sets.upper) dzu[j] = (tau_u[j] - su[j] * zu[j] + zu[j] * dx[j]) / su[j];
    };
    auto step_limit = [&]() {
      double a = 1.0;
      a = std::min(a, max_step(sl, dx, sets.lower, 1.0));
      a = std::min(a, max_step(su, dx, sets.upper, -1.0));
      a = std::min(a, max_step(zl, dzl, sets.lower, 1.0));
      a = std::min(a, max_step(zu, dzu, sets.upper, 1.0));
      return a;
    };

    // Predictor.
    const VectorXd zero = VectorXd::Zero(n);
    direction(zero, zero);
    const double a_aff = step_limit();
    double mu_aff = 0.0;
    for (Index j : sets.lower) mu_aff += (sl[j] + a_aff * dx[j]) * (zl[j] + a_aff * dzl[j]);
    for (Index j : sets.upper) mu_aff += (su[j] - a_aff * dx[j]) * (zu[j] + a_aff * dzu[j]);
    mu_aff = n_comp > 0 ? mu_aff / n_comp : 0.0;
    const double sigma = r.mu > 0 ? std::pow(std::clamp(mu_aff / r.mu, 0.0, 1.0), 3) : 0.0;

    // Corrector.
    VectorXd tau_l = VectorXd::Zero(n), tau_u = VectorXd::Zero(n);
    for (Index j : sets.lower) tau_l[j] = sigma * r.mu - dx[j] * dzl[j];
    for (Index j : sets.upper) tau_u[j] = sigma * r.mu + dx[j] * dzu[j];
    direction(tau_l, tau_u);
    const double alpha = std::min(1.0, 0.995 * step_limit());

    x += alpha * dx;
    y -= alpha * w;
    zl += alpha * dzl;
    zu += alpha * dzu;
    if (!x.allFinite() || !y.allFinite()) return converged ? *converged : finalize(Status::NumericalFailure, iter + 1);
  }
  if (converged) return *converged;
  return finalize(Status::IterationLimit, settings.max_iterations);
}

}  // namespace thermocc::qp
