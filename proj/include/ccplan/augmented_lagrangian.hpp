#pragma once

#include <chrono>
#include <functional>
#include <optional>

#include "ccplan/linalg.hpp"

namespace ccplan {

/// Smooth NLP  min f(x)  s.t.  c(x) = 0,  g(x) >= 0.
/// Constraint callbacks fill the value vector and, when the Jacobian pointer
/// is non-null, the dense Jacobian (rows = constraints). The Jacobian
/// arrives sized but uninitialised, so every entry must be written.
struct NlpProblem {
  int num_vars = 0;
  int num_eq = 0;
  int num_ineq = 0;
  std::function<double(const Vec& x, Vec* grad)> objective;
  std::function<void(const Vec& x, Vec& c, Mat* jac)> equalities;
  std::function<void(const Vec& x, Vec& g, Mat* jac)> inequalities;
  /// Optional constant curvature of f; seeds the quasi-Newton matrix
  /// together with the Gauss-Newton curvature of the penalty terms.
  std::optional<Mat> objective_hessian;
};

struct NlpOptions {
  int max_outer = 30;
  int max_inner = 300;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e10;
  double inner_grad_tol = 1e-8;  ///< on the augmented-Lagrangian gradient (inf-norm)
  double feas_tol = 1e-6;        ///< max constraint violation accepted as feasible
  double opt_tol = 1e-5;         ///< stationarity accepted at a feasible outer iterate
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct NlpResult {
  Vec x;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  bool converged = false;
  bool timed_out = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int evaluations = 0;
};

/// Max of |c_i| and max(0, -g_j).
double max_violation(const NlpProblem& p, const Vec& x);

/// Powell-Hestenes-Rockafellar augmented Lagrangian with a BFGS inner
/// minimiser and strong-Wolfe line search. Multipliers start at zero.
/// When the iteration cap or deadline is hit, the best iterate seen is
/// returned (feasible ones ranked by objective, others by violation) with
/// converged = false.
NlpResult solve_augmented_lagrangian(const NlpProblem& p, const Vec& x0,
                                     const NlpOptions& opt = {});

}  // namespace ccplan
