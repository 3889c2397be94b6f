#include "ccplan/augmented_lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>

#include "ccplan/error.hpp"

namespace ccplan {

namespace {

struct Point {
  Vec x;
  double f = 0.0;
  Vec grad_f;
  Vec c, g;
  Mat jc, jg;
  double value = 0.0;  // augmented Lagrangian
  Vec grad;            // its gradient
};

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NlpProblem& p, int& evals) : p_(p), evals_(evals) {
    lambda_ = Vec::Zero(p.num_eq);
    mu_ = Vec::Zero(p.num_ineq);
  }

  double rho = 10.0;

  Point evaluate(const Vec& x) const {
    ++evals_;
    Point pt;
    pt.x = x;
    pt.grad_f = Vec::Zero(p_.num_vars);
    pt.f = p_.objective(x, &pt.grad_f);
    pt.c = Vec::Zero(p_.num_eq);
    pt.g = Vec::Zero(p_.num_ineq);
    // Sized but not cleared: callbacks write every entry.
    pt.jc.resize(p_.num_eq, p_.num_vars);
    pt.jg.resize(p_.num_ineq, p_.num_vars);
    if (p_.num_eq > 0) p_.equalities(x, pt.c, &pt.jc);
    if (p_.num_ineq > 0) p_.inequalities(x, pt.g, &pt.jg);
    rescore(pt);
    return pt;
  }

  // Recomputes value and gradient for the current multipliers and penalty.
  void rescore(Point& pt) const {
    const Vec shifted = (mu_ - rho * pt.g).cwiseMax(0.0);
    pt.value = pt.f + lambda_.dot(pt.c) + 0.5 * rho * pt.c.squaredNorm() +
               (shifted.squaredNorm() - mu_.squaredNorm()) / (2.0 * rho);
    pt.grad = pt.grad_f;
    if (p_.num_eq > 0) pt.grad.noalias() += pt.jc.transpose() * (lambda_ + rho * pt.c);
    if (p_.num_ineq > 0) pt.grad.noalias() -= pt.jg.transpose() * shifted;
    if (!std::isfinite(pt.value) || !pt.grad.allFinite()) {
      pt.value = std::numeric_limits<double>::infinity();
    }
  }

  void update_multipliers(const Point& pt) {
    lambda_ += rho * pt.c;
    mu_ = (mu_ - rho * pt.g).cwiseMax(0.0);
  }

  // Gauss-Newton curvature of the penalty terms plus the objective hint,
  // inverted. Falls back to a scaled identity if the factorisation fails.
  Mat initial_inverse(const Point& pt) const {
    const int n = p_.num_vars;
    Mat b = p_.objective_hessian ? *p_.objective_hessian : Mat::Identity(n, n);
    // Transcription Jacobians are mostly zeros; the sparse product keeps
    // this step cheap next to the factorisation.
    if (p_.num_eq > 0) {
      const Eigen::SparseMatrix<double> jc = pt.jc.sparseView();
      b += rho * Mat(jc.transpose() * jc);
    }
    if (p_.num_ineq > 0) {
      Mat active(p_.num_ineq, n);
      int rows = 0;
      for (int j = 0; j < p_.num_ineq; ++j) {
        if (mu_(j) - rho * pt.g(j) > 0.0) active.row(rows++) = pt.jg.row(j);
      }
      if (rows > 0) {
        const Eigen::SparseMatrix<double> ja = active.topRows(rows).sparseView();
        b += rho * Mat(ja.transpose() * ja);
      }
    }
    const double reg = 1e-8 * std::max(1.0, b.diagonal().cwiseAbs().maxCoeff());
    b.diagonal().array() += reg;
    Eigen::LLT<Mat> llt(b);
    if (llt.info() != Eigen::Success) return Mat::Identity(n, n);
    Mat inv = Mat::Identity(n, n);
    llt.solveInPlace(inv);
    return 0.5 * (inv + inv.transpose());
  }

 private:
  const NlpProblem& p_;
  int& evals_;
  Vec lambda_;
  Vec mu_;
};

double violation_of(const Point& pt) {
  double v = 0.0;
  if (pt.c.size() > 0) v = std::max(v, pt.c.cwiseAbs().maxCoeff());
  if (pt.g.size() > 0) v = std::max(v, (-pt.g).cwiseMax(0.0).maxCoeff());
  return v;
}

// Strong-Wolfe line search (bracketing + zoom with safeguarded cubic
// interpolation). Returns false when no acceptable step is found; `out` then
// holds the best sufficient-decrease point, if any.
bool wolfe_search(const AugmentedLagrangian& al, const Point& x0, const Vec& dir, Point& out) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  constexpr int kMaxEvals = 30;
  const double phi0 = x0.value;
  const double dphi0 = x0.grad.dot(dir);
  if (!(dphi0 < 0.0)) return false;

  auto at = [&](double a) { return al.evaluate(x0.x + a * dir); };
  auto armijo = [&](const Point& p, double a) { return p.value <= phi0 + c1 * a * dphi0; };
  bool have_armijo = false;
  auto remember = [&](const Point& p, double a) {
    if (armijo(p, a) && (!have_armijo || p.value < out.value)) {
      out = p;
      have_armijo = true;
    }
  };

  int evals = 0;
  auto zoom = [&](double lo, Point plo, double hi, Point phi_pt) -> bool {
    while (evals < kMaxEvals) {
      const double dlo = plo.grad.dot(dir), dhi = phi_pt.grad.dot(dir);
      // Cubic interpolation through (lo, hi); bisection when it misbehaves.
      double a = 0.5 * (lo + hi);
      const double d1 = dlo + dhi - 3.0 * (plo.value - phi_pt.value) / (lo - hi);
      const double disc = d1 * d1 - dlo * dhi;
      if (disc >= 0.0 && std::isfinite(phi_pt.value)) {
        const double d2 = std::copysign(std::sqrt(disc), hi - lo);
        const double cand = hi - (hi - lo) * (dhi + d2 - d1) / (dhi - dlo + 2.0 * d2);
        const double lo_b = std::min(lo, hi), hi_b = std::max(lo, hi);
        const double margin = 0.1 * (hi_b - lo_b);
        if (std::isfinite(cand) && cand > lo_b + margin && cand < hi_b - margin) a = cand;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) return false;
      Point pa = at(a);
      ++evals;
      remember(pa, a);
      if (!armijo(pa, a) || pa.value >= plo.value) {
        hi = a;
        phi_pt = std::move(pa);
      } else {
        const double da = pa.grad.dot(dir);
        if (std::abs(da) <= -c2 * dphi0) {
          out = std::move(pa);
          return true;
        }
        if (da * (hi - lo) >= 0.0) {
          hi = lo;
          phi_pt = plo;
        }
        lo = a;
        plo = std::move(pa);
      }
    }
    return false;
  };

  double a_prev = 0.0;
  Point p_prev = x0;
  double a = 1.0;
  for (int i = 0; evals < kMaxEvals; ++i) {
    Point pa = at(a);
    ++evals;
    remember(pa, a);
    if (!armijo(pa, a) || (i > 0 && pa.value >= p_prev.value)) {
      return zoom(a_prev, std::move(p_prev), a, std::move(pa)) || have_armijo;
    }
    const double da = pa.grad.dot(dir);
    if (std::abs(da) <= -c2 * dphi0) {
      out = std::move(pa);
      return true;
    }
    if (da >= 0.0) return zoom(a, std::move(pa), a_prev, std::move(p_prev)) || have_armijo;
    a_prev = a;
    p_prev = std::move(pa);
    a *= 2.0;
  }
  return have_armijo;
}

struct InnerStats {
  int iterations = 0;
  bool converged = false;
  bool timed_out = false;
};

InnerStats minimize_inner(const AugmentedLagrangian& al, Point& x, const NlpOptions& opt) {
  InnerStats st;
  Mat h = al.initial_inverse(x);
  bool fresh = true;
  for (; st.iterations < opt.max_inner; ++st.iterations) {
    const double gnorm = x.grad.cwiseAbs().maxCoeff();
    if (gnorm <= opt.inner_grad_tol * std::max(1.0, std::abs(x.f))) {
      st.converged = true;
      break;
    }
    if (opt.deadline && std::chrono::steady_clock::now() > *opt.deadline) {
      st.timed_out = true;
      break;
    }
    Vec dir = -(h * x.grad);
    if (!(dir.dot(x.grad) < 0.0)) {
      h = al.initial_inverse(x);
      fresh = true;
      dir = -(h * x.grad);
    }
    Point next;
    if (!wolfe_search(al, x, dir, next)) {
      if (fresh) break;  // even a freshly seeded direction made no progress
      h = al.initial_inverse(x);
      fresh = true;
      continue;
    }
    const Vec s = next.x - x.x;
    const Vec y = next.grad - x.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Vec hy = h * y;
      const double yhy = y.dot(hy);
      h.noalias() += ((sy + yhy) / (sy * sy)) * (s * s.transpose());
      h.noalias() -= (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    fresh = false;
    const double change = std::abs(x.value - next.value);
    x = std::move(next);
    if (change <= 1e-15 * std::max(1.0, std::abs(x.value)) && s.norm() <= 1e-14 * (1.0 + x.x.norm())) {
      break;  // stalled at rounding level
    }
  }
  return st;
}

}  // namespace

double max_violation(const NlpProblem& p, const Vec& x) {
  Vec c = Vec::Zero(p.num_eq), g = Vec::Zero(p.num_ineq);
  if (p.num_eq > 0) p.equalities(x, c, nullptr);
  if (p.num_ineq > 0) p.inequalities(x, g, nullptr);
  double v = 0.0;
  if (p.num_eq > 0) v = std::max(v, c.cwiseAbs().maxCoeff());
  if (p.num_ineq > 0) v = std::max(v, (-g).cwiseMax(0.0).maxCoeff());
  return v;
}

NlpResult solve_augmented_lagrangian(const NlpProblem& p, const Vec& x0, const NlpOptions& opt) {
  if (x0.size() != p.num_vars) throw Error(ErrorKind::kDimensionMismatch, "initial point size");
  if (!p.objective) throw Error(ErrorKind::kInvalidInput, "NLP objective missing");
  if ((p.num_eq > 0 && !p.equalities) || (p.num_ineq > 0 && !p.inequalities)) {
    throw Error(ErrorKind::kInvalidInput, "NLP constraint callback missing");
  }
  if (!x0.allFinite()) throw Error(ErrorKind::kInvalidInput, "initial point not finite");

  NlpResult res;
  AugmentedLagrangian al(p, res.evaluations);
  al.rho = opt.penalty_init;
  Point x = al.evaluate(x0);
  if (!std::isfinite(x.value)) throw Error(ErrorKind::kInvalidInput, "NLP not finite at the initial point");

  // Best iterate: feasible ones by objective, otherwise by violation.
  Point best = x;
  double best_viol = violation_of(x);
  auto consider = [&](const Point& pt) {
    const double v = violation_of(pt);
    const bool feas = v <= opt.feas_tol, best_feas = best_viol <= opt.feas_tol;
    if ((feas && (!best_feas || pt.f < best.f)) || (!feas && !best_feas && v < best_viol)) {
      best = pt;
      best_viol = v;
    }
  };

  double prev_viol = std::numeric_limits<double>::infinity();
  for (res.outer_iterations = 0; res.outer_iterations < opt.max_outer;) {
    const InnerStats st = minimize_inner(al, x, opt);
    ++res.outer_iterations;
    res.inner_iterations += st.iterations;
    const double viol = violation_of(x);
    consider(x);
    res.stationarity = x.grad.cwiseAbs().maxCoeff();
    const double scale = 1.0 + x.grad_f.cwiseAbs().maxCoeff();
    if (viol <= opt.feas_tol && res.stationarity <= opt.opt_tol * scale) {
      res.converged = true;
      best = x;
      best_viol = viol;
      break;
    }
    if (st.timed_out) {
      res.timed_out = true;
      break;
    }
    al.update_multipliers(x);
    if (viol > 0.25 * prev_viol) al.rho = std::min(al.rho * opt.penalty_growth, opt.penalty_max);
    prev_viol = viol;
    al.rescore(x);
  }

  res.x = best.x;
  res.objective = best.f;
  res.max_violation = best_viol;
  return res;
}

}  // namespace ccplan
