#include "ccplan/trajectory_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccplan/error.hpp"
#include "ccplan/estimators.hpp"
#include "ccplan/quadform_cdf.hpp"

namespace ccplan {

namespace {

constexpr double kFeasTol = kFeasibilityTolerance;

bool is_psd(const Mat& m, int size) {
  return m.rows() == size && m.cols() == size && m.allFinite() && is_symmetric(m, 1e-9) &&
         min_eigenvalue(m) >= -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Chance-constraint data for one (knot, obstacle) pair, fixed during a solve.
struct ChanceTerm {
  int knot;
  Vec obstacle_mean;
  Mat cov;
  Ellipsoid region;
};

// One corridor face at one knot: b - a^T p - reach >= 0.
struct FaceTerm {
  int knot;
  Vec a;
  double offset;  // b - reach
};

struct BoundTerm {
  int step;
  int component;
  double value;
  bool lower;
};

class Transcription {
 public:
  Transcription(const TranscribedProblem& p, std::optional<double> chance_delta,
                const std::vector<Vec>& cov_states, const std::vector<Vec>& cov_controls)
      : p_(p), n_(p.steps), nx_(p.state_dim()), nu_(p.control_dim()), np_(p.position_dim()),
        delta_(chance_delta) {
    num_vars_ = (n_ - 1) * (nx_ + nu_);
    x0_ = p.initial_state.mean;
    for (int t = 0; t < n_; ++t) targets_.push_back(p.reference_at(t));
    u_nom_ = p.dynamics->nominal_control();

    if (delta_) {
      const std::vector<Mat> sx = robot_covariances(p, cov_states, cov_controls);
      for (int t = 1; t < n_; ++t) {
        for (size_t j = 0; j < p.obstacles.size(); ++j) {
          const ObstacleTrack& o = p.obstacles[j];
          chance_.push_back({t, o.means[t], sx[t].topLeftCorner(np_, np_) + o.covs[t],
                             p.collision_shape(t, static_cast<int>(j))});
        }
      }
    }
    if (!p.corridor.empty()) {
      for (int t = 1; t < n_; ++t) {
        const Polyhedron& poly = p.corridor[t];
        const std::optional<Ellipsoid> qa = p.augmented_robot(t);
        for (int i = 0; i < poly.rows(); ++i) {
          const Vec a = poly.a().row(i).transpose();
          const double reach = qa ? std::sqrt(std::max(0.0, a.dot(qa->shape() * a))) : 0.0;
          faces_.push_back({t, a, poly.b()(i) - reach});
        }
      }
    }
    for (int t = 0; t < n_ - 1; ++t) {
      for (int k = 0; k < nu_; ++k) {
        if (p.control_lower.size() > 0 && std::isfinite(p.control_lower(k))) {
          bounds_.push_back({t, k, p.control_lower(k), true});
        }
        if (p.control_upper.size() > 0 && std::isfinite(p.control_upper(k))) {
          bounds_.push_back({t, k, p.control_upper(k), false});
        }
      }
    }
    build_hessian();
  }

  int num_vars() const { return num_vars_; }
  int num_eq() const { return (n_ - 1) * nx_; }
  int num_ineq() const {
    return static_cast<int>(chance_.size() + faces_.size() + bounds_.size());
  }

  int xi(int t) const { return (t - 1) * nx_; }  // t >= 1
  int ui(int t) const { return (n_ - 1) * nx_ + t * nu_; }

  Vec state(const Vec& z, int t) const { return t == 0 ? x0_ : Vec(z.segment(xi(t), nx_)); }
  Vec control(const Vec& z, int t) const { return z.segment(ui(t), nu_); }

  Vec pack(const std::vector<Vec>& states, const std::vector<Vec>& controls) const {
    Vec z(num_vars_);
    for (int t = 1; t < n_; ++t) z.segment(xi(t), nx_) = states[t];
    for (int t = 0; t < n_ - 1; ++t) z.segment(ui(t), nu_) = controls[t];
    return z;
  }

  void unpack(const Vec& z, std::vector<Vec>& states, std::vector<Vec>& controls) const {
    states.assign(n_, Vec());
    controls.assign(n_ - 1, Vec());
    for (int t = 0; t < n_; ++t) states[t] = state(z, t);
    for (int t = 0; t < n_ - 1; ++t) controls[t] = control(z, t);
  }

  double objective(const Vec& z, Vec* grad) const {
    const CostWeights& w = p_.weights;
    double f = 0.0;
    if (grad) grad->setZero(num_vars_);
    for (int t = 1; t < n_; ++t) {
      const Mat& m = t == n_ - 1 ? w.terminal : w.position;
      const Vec e = z.segment(xi(t), np_) - targets_[t];
      const Vec me = m * e;
      f += e.dot(me);
      if (grad) grad->segment(xi(t), np_) += 2.0 * me;
    }
    for (int t = 0; t < n_ - 1; ++t) {
      const Vec e = control(z, t) - u_nom_;
      const Vec me = w.control * e;
      f += e.dot(me);
      if (grad) grad->segment(ui(t), nu_) += 2.0 * me;
      if (t + 1 < n_ - 1) {
        const Vec du = control(z, t + 1) - control(z, t);
        const Vec mdu = w.control_rate * du;
        f += du.dot(mdu);
        if (grad) {
          grad->segment(ui(t + 1), nu_) += 2.0 * mdu;
          grad->segment(ui(t), nu_) -= 2.0 * mdu;
        }
      }
    }
    return f;
  }

  void equalities(const Vec& z, Vec& c, Mat* jac) const {
    if (jac) jac->setZero(num_eq(), num_vars_);
    for (int t = 0; t < n_ - 1; ++t) {
      const Vec xt = state(z, t), ut = control(z, t);
      const int row = t * nx_;
      if (jac) {
        const StepJacobian j = p_.dynamics->linearize(xt, ut, p_.dt);
        c.segment(row, nx_) = p_.dynamics->state_difference(state(z, t + 1), j.next);
        jac->block(row, xi(t + 1), nx_, nx_).setIdentity();
        if (t > 0) jac->block(row, xi(t), nx_, nx_) = -j.fx;
        jac->block(row, ui(t), nx_, nu_) = -j.fu;
      } else {
        c.segment(row, nx_) =
            p_.dynamics->state_difference(state(z, t + 1), p_.dynamics->step(xt, ut, p_.dt));
      }
    }
  }

  void inequalities(const Vec& z, Vec& g, Mat* jac) const {
    if (jac) jac->setZero(num_ineq(), num_vars_);
    int row = 0;
    for (const ChanceTerm& c : chance_) {
      Vec rel = z.segment(xi(c.knot), np_) - c.obstacle_mean;
      // The residual is undefined with the mean exactly on the obstacle
      // centre; nudge it off so the solver still sees a direction.
      if (rel.norm() < 1e-12) rel(0) += 1e-9;
      const ResidualEval r = chance_constraint_residual_grad(rel, c.cov, c.region, *delta_);
      g(row) = r.value;
      if (jac) jac->block(row, xi(c.knot), 1, np_) = r.gradient.transpose();
      ++row;
    }
    for (const FaceTerm& f : faces_) {
      g(row) = f.offset - f.a.dot(z.segment(xi(f.knot), np_));
      if (jac) jac->block(row, xi(f.knot), 1, np_) = -f.a.transpose();
      ++row;
    }
    for (const BoundTerm& b : bounds_) {
      const int col = ui(b.step) + b.component;
      g(row) = b.lower ? z(col) - b.value : b.value - z(col);
      if (jac) (*jac)(row, col) = b.lower ? 1.0 : -1.0;
      ++row;
    }
  }

  const Mat& hessian() const { return hessian_; }

 private:
  void build_hessian() {
    const CostWeights& w = p_.weights;
    hessian_ = Mat::Zero(num_vars_, num_vars_);
    for (int t = 1; t < n_; ++t) {
      hessian_.block(xi(t), xi(t), np_, np_) += 2.0 * (t == n_ - 1 ? w.terminal : w.position);
    }
    for (int t = 0; t < n_ - 1; ++t) {
      hessian_.block(ui(t), ui(t), nu_, nu_) += 2.0 * w.control;
      if (t + 1 < n_ - 1) {
        const Mat r = 2.0 * w.control_rate;
        hessian_.block(ui(t), ui(t), nu_, nu_) += r;
        hessian_.block(ui(t + 1), ui(t + 1), nu_, nu_) += r;
        hessian_.block(ui(t), ui(t + 1), nu_, nu_) -= r;
        hessian_.block(ui(t + 1), ui(t), nu_, nu_) -= r;
      }
    }
  }

  const TranscribedProblem& p_;
  int n_, nx_, nu_, np_;
  std::optional<double> delta_;
  int num_vars_ = 0;
  Vec x0_;
  Vec u_nom_;
  std::vector<Vec> targets_;
  std::vector<ChanceTerm> chance_;
  std::vector<FaceTerm> faces_;
  std::vector<BoundTerm> bounds_;
  Mat hessian_;
};

// Central differences of a vector-valued callback.
Mat fd_jacobian(const std::function<void(const Vec&, Vec&)>& fn, const Vec& z, int rows) {
  Mat jac(rows, z.size());
  Vec zp = z, fp(rows), fm(rows);
  for (int k = 0; k < z.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(z(k)));
    zp(k) = z(k) + h;
    fn(zp, fp);
    zp(k) = z(k) - h;
    fn(zp, fm);
    zp(k) = z(k);
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

NlpProblem make_nlp(const Transcription& tr, bool finite_difference) {
  NlpProblem nlp;
  nlp.num_vars = tr.num_vars();
  nlp.num_eq = tr.num_eq();
  nlp.num_ineq = tr.num_ineq();
  nlp.objective_hessian = tr.hessian();
  if (!finite_difference) {
    nlp.objective = [&tr](const Vec& z, Vec* g) { return tr.objective(z, g); };
    nlp.equalities = [&tr](const Vec& z, Vec& c, Mat* j) { tr.equalities(z, c, j); };
    nlp.inequalities = [&tr](const Vec& z, Vec& g, Mat* j) { tr.inequalities(z, g, j); };
    return nlp;
  }
  nlp.objective = [&tr](const Vec& z, Vec* g) {
    if (g) {
      const Mat j = fd_jacobian([&](const Vec& y, Vec& out) { out(0) = tr.objective(y, nullptr); },
                                z, 1);
      *g = j.row(0).transpose();
    }
    return tr.objective(z, nullptr);
  };
  const int ne = tr.num_eq(), ni = tr.num_ineq();
  nlp.equalities = [&tr, ne](const Vec& z, Vec& c, Mat* j) {
    tr.equalities(z, c, nullptr);
    if (j) *j = fd_jacobian([&](const Vec& y, Vec& out) { tr.equalities(y, out, nullptr); }, z, ne);
  };
  nlp.inequalities = [&tr, ni](const Vec& z, Vec& g, Mat* j) {
    tr.inequalities(z, g, nullptr);
    if (j) *j = fd_jacobian([&](const Vec& y, Vec& out) { tr.inequalities(y, out, nullptr); }, z, ni);
  };
  return nlp;
}

Trajectory nominal_rollout(const TranscribedProblem& p) {
  Trajectory t;
  const std::vector<Vec> controls(p.steps - 1, p.dynamics->nominal_control());
  t.states = rollout(*p.dynamics, p.initial_state.mean, controls, p.dt).states;
  t.controls = controls;
  return t;
}

// Smallest total allocation N * max_t P_l that the trajectory already
// satisfies. Any allocation above it leaves the chance constraints of this
// trajectory inactive, so the trajectory also solves those problems.
double satisfied_allocation(const Trajectory& t, const TranscribedProblem& p) {
  const int np = p.position_dim();
  const std::vector<Mat> sx = robot_covariances(p, t.states, t.controls);
  double worst = 0.0;
  for (int k = 1; k < p.steps; ++k) {
    for (size_t j = 0; j < p.obstacles.size(); ++j) {
      const ObstacleTrack& o = p.obstacles[j];
      const Vec rel = t.states[k].head(np) - o.means[k];
      if (rel.norm() < 1e-12) return p.steps;  // P_l = 1 at the centre
      const GaussianState g{rel, sx[k].topLeftCorner(np, np) + o.covs[k]};
      worst = std::max(worst, collision_prob_linearized(g, p.collision_shape(k, static_cast<int>(j))));
    }
  }
  return p.steps * worst;
}

void attach_risk(Trajectory& t, const TranscribedProblem& p) {
  const RiskReport r = trajectory_risk(t, p);
  t.per_step_risk = r.per_step;
  t.total_risk = r.total;
}

}  // namespace

CostWeights CostWeights::uniform(int position_dim, int control_dim, double position,
                                 double terminal, double control, double control_rate) {
  CostWeights w;
  w.position = position * Mat::Identity(position_dim, position_dim);
  w.terminal = terminal * Mat::Identity(position_dim, position_dim);
  w.control = control * Mat::Identity(control_dim, control_dim);
  w.control_rate = control_rate * Mat::Identity(control_dim, control_dim);
  return w;
}

NlpOptions SolveOptions::default_nlp() {
  NlpOptions o;
  o.feas_tol = 1e-7;  // margin under the 1e-6 acceptance threshold
  return o;
}

void TranscribedProblem::validate() const {
  if (!dynamics) throw Error(ErrorKind::kInvalidInput, "problem has no dynamics model");
  if (steps < 2) throw Error(ErrorKind::kInvalidInput, "horizon needs at least 2 knots");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::kInvalidInput, "dt must be positive");
  const int nx = state_dim(), nu = control_dim(), np = position_dim();
  if (initial_state.mean.size() != nx) {
    throw Error(ErrorKind::kDimensionMismatch, "initial state size differs from the model");
  }
  ccplan::validate(initial_state);
  if (process_noise.size() > 0 && !is_psd(process_noise, nx)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "process noise must be PSD of state size");
  }
  if (robot_shape && robot_shape->dim() != np) {
    throw Error(ErrorKind::kDimensionMismatch, "robot shape dimension");
  }
  if (!(frs.empty() || frs.size() == 1 || static_cast<int>(frs.size()) == steps)) {
    throw Error(ErrorKind::kDimensionMismatch, "FRS list must hold 0, 1 or N shapes");
  }
  for (const Ellipsoid& e : frs) {
    if (e.dim() != np) throw Error(ErrorKind::kDimensionMismatch, "FRS shape dimension");
  }
  for (const ObstacleTrack& o : obstacles) {
    if (static_cast<int>(o.means.size()) != steps || static_cast<int>(o.covs.size()) != steps) {
      throw Error(ErrorKind::kDimensionMismatch, "obstacle track must have exactly N entries");
    }
    if (o.shape.dim() != np) throw Error(ErrorKind::kDimensionMismatch, "obstacle shape dimension");
    for (int t = 0; t < steps; ++t) {
      if (o.means[t].size() != np) throw Error(ErrorKind::kDimensionMismatch, "obstacle mean size");
      if (!is_psd(o.covs[t], np)) {
        throw Error(ErrorKind::kNotPositiveDefinite, "obstacle covariance must be PSD");
      }
    }
  }
  if (!(corridor.empty() || static_cast<int>(corridor.size()) == steps)) {
    throw Error(ErrorKind::kDimensionMismatch, "corridor must hold 0 or N polyhedra");
  }
  for (const Polyhedron& poly : corridor) {
    if (poly.dim() != np) throw Error(ErrorKind::kDimensionMismatch, "corridor dimension");
  }
  if (goal.size() != np) throw Error(ErrorKind::kDimensionMismatch, "goal size");
  if (!reference.empty()) {
    if (static_cast<int>(reference.size()) != steps) {
      throw Error(ErrorKind::kDimensionMismatch, "reference must hold N positions");
    }
    for (const Vec& r : reference) {
      if (r.size() != np || !r.allFinite()) throw Error(ErrorKind::kInvalidInput, "reference position");
    }
  }
  if (!is_psd(weights.position, np) || !is_psd(weights.terminal, np) ||
      !is_psd(weights.control, nu) || !is_psd(weights.control_rate, nu)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "cost weights must be PSD of matching size");
  }
  for (const Vec* b : {&control_lower, &control_upper}) {
    if (b->size() != 0 && b->size() != nu) throw Error(ErrorKind::kDimensionMismatch, "control bound size");
  }
  if (control_lower.size() > 0 && control_upper.size() > 0 &&
      (control_lower.array() > control_upper.array()).any()) {
    throw Error(ErrorKind::kInvalidInput, "control lower bound exceeds upper bound");
  }
}

Vec TranscribedProblem::reference_at(int t) const {
  if (!reference.empty()) return reference[t];
  const Vec start = initial_state.mean.head(position_dim());
  return start + (goal - start) * (static_cast<double>(t) / (steps - 1));
}

std::optional<Ellipsoid> TranscribedProblem::augmented_robot(int t) const {
  std::optional<Ellipsoid> qd;
  if (!frs.empty()) qd = frs.size() == 1 ? frs[0] : frs[t];
  if (robot_shape && qd) return minkowski_outer(*robot_shape, *qd);
  return robot_shape ? robot_shape : qd;
}

Ellipsoid TranscribedProblem::collision_shape(int t, int obstacle) const {
  std::optional<Ellipsoid> qd;
  if (!frs.empty()) qd = frs.size() == 1 ? frs[0] : frs[t];
  return collision_region(robot_shape, qd, obstacles[obstacle].shape);
}

std::vector<Mat> robot_covariances(const TranscribedProblem& p, const std::vector<Vec>& states,
                                   const std::vector<Vec>& controls) {
  std::vector<Mat> jac;
  jac.reserve(controls.size());
  for (size_t t = 0; t < controls.size(); ++t) {
    jac.push_back(p.dynamics->linearize(states[t], controls[t], p.dt).fx);
  }
  const int nx = p.state_dim();
  const Mat w = p.process_noise.size() > 0 ? p.process_noise : Mat::Zero(nx, nx);
  return propagate_covariance(p.initial_state.cov, jac, w);
}

RiskReport trajectory_risk(const Trajectory& t, const TranscribedProblem& p) {
  if (static_cast<int>(t.states.size()) != p.steps || static_cast<int>(t.controls.size()) != p.steps - 1) {
    throw Error(ErrorKind::kDimensionMismatch, "trajectory length differs from the problem");
  }
  const int np = p.position_dim();
  const int m = static_cast<int>(p.obstacles.size());
  RiskReport r;
  r.per_step.assign(p.steps, 0.0);
  r.worst_obstacle.assign(p.steps, m > 0 ? 0 : -1);
  r.per_obstacle_max.assign(m, 0.0);
  if (m == 0) return r;
  const std::vector<Mat> sx = robot_covariances(p, t.states, t.controls);
  for (int k = 0; k < p.steps; ++k) {
    for (int j = 0; j < m; ++j) {
      const ObstacleTrack& o = p.obstacles[j];
      const GaussianState rel{t.states[k].head(np) - o.means[k],
                              sx[k].topLeftCorner(np, np) + o.covs[k]};
      const double pc = collision_prob_exact(rel, p.collision_shape(k, j));
      r.per_obstacle_max[j] = std::max(r.per_obstacle_max[j], pc);
      if (pc > r.per_step[k]) {
        r.per_step[k] = pc;
        r.worst_obstacle[k] = j;
      }
    }
  }
  for (double v : r.per_step) r.total += v;
  return r;
}

Trajectory solve_nlp(const TranscribedProblem& p, std::optional<double> chance_delta,
                     const Trajectory* warm_start, const SolveOptions& opt) {
  p.validate();
  if (chance_delta && !(*chance_delta > 0.0 && *chance_delta < 0.5)) {
    throw Error(ErrorKind::kOutOfRange, "per-step chance allocation must lie in (0, 0.5)");
  }
  if (warm_start && (static_cast<int>(warm_start->states.size()) != p.steps ||
                     static_cast<int>(warm_start->controls.size()) != p.steps - 1)) {
    throw Error(ErrorKind::kDimensionMismatch, "warm start length differs from the problem");
  }
  const Trajectory start = warm_start ? *warm_start : nominal_rollout(p);
  const Transcription tr(p, chance_delta, start.states, start.controls);
  const NlpProblem nlp = make_nlp(tr, opt.finite_difference_gradients);

  NlpOptions nopt = opt.nlp;
  if (opt.deadline) nopt.deadline = opt.deadline;
  const Vec z0 = tr.pack(start.states, start.controls);
  const NlpResult res = solve_augmented_lagrangian(nlp, z0, nopt);

  Trajectory out;
  tr.unpack(res.x, out.states, out.controls);
  out.objective = res.objective;
  out.max_violation = res.max_violation;
  out.converged = res.converged && res.max_violation <= kFeasTol;
  out.timed_out = res.timed_out;

  if (warm_start) {
    const double warm_viol = max_violation(nlp, z0);
    const double warm_obj = tr.objective(z0, nullptr);
    if (warm_viol <= kFeasTol && (out.max_violation > kFeasTol || warm_obj < out.objective)) {
      tr.unpack(z0, out.states, out.controls);
      out.objective = warm_obj;
      out.max_violation = warm_viol;
    }
  }
  attach_risk(out, p);
  return out;
}

IterResult iter_traj_opt(const TranscribedProblem& p, double total_delta, double precision,
                         const IterOptions& opt) {
  if (!(total_delta > 0.0) || !std::isfinite(total_delta)) {
    throw Error(ErrorKind::kOutOfRange, "total risk must be positive");
  }
  if (precision <= 0.0) precision = 0.01 * total_delta;
  p.validate();
  const int n = p.steps;
  SolveOptions sopt = opt.solve;
  auto expired = [&] {
    return sopt.deadline && std::chrono::steady_clock::now() > *sopt.deadline;
  };

  IterResult out;
  IterTrace& trace = out.trace;
  std::vector<Trajectory> iterates;  // parallel to trace.iterations
  iterates.reserve(opt.max_iterations + 1);  // `warm` points into it

  auto feasible = [](const Trajectory& t) { return t.max_violation <= kFeasTol; };
  const Trajectory* guess = opt.initial_guess ? &*opt.initial_guess : nullptr;
  auto run_chance = [&](double allocated, const Trajectory* warm) -> const Trajectory& {
    const double per_step = std::min(allocated / n, kMaxStepAllocation);
    Trajectory t = solve_nlp(p, per_step, warm, sopt);
    trace.timed_out = trace.timed_out || t.timed_out;
    trace.iterations.push_back({allocated, t.total_risk, t.objective, t.converged, feasible(t)});
    iterates.push_back(std::move(t));
    return iterates.back();
  };
  auto within = [&](const Trajectory& t) {
    return feasible(t) && std::abs(t.total_risk - total_delta) <= precision;
  };

  // Delta_k = Delta with the linearised bound already guarantees
  // delta_k <= Delta, so this order leaves a usable answer on timeout.
  if (opt.linearized_first && opt.max_iterations > 0) {
    const Trajectory& t = run_chance(total_delta, guess);
    if (within(t)) {
      out.trajectory = t;
      trace.converged = true;
      return out;
    }
  }

  Trajectory relaxed = solve_nlp(p, std::nullopt, guess, sopt);
  trace.relaxed_risk = relaxed.total_risk;
  trace.timed_out = trace.timed_out || relaxed.timed_out;
  if (feasible(relaxed) && relaxed.total_risk <= total_delta) {
    out.trajectory = std::move(relaxed);
    trace.converged = !out.trajectory.timed_out;
    return out;
  }

  double alloc_lo = 0.0, risk_lo = 0.0;
  double alloc_hi = static_cast<double>(n), risk_hi = relaxed.total_risk;
  if (opt.tighten_bracket) alloc_hi = std::min(alloc_hi, satisfied_allocation(relaxed, p));
  auto update_bracket = [&](const Trajectory& t, double allocated) {
    if (opt.tighten_bracket && feasible(t)) allocated = std::min(allocated, satisfied_allocation(t, p));
    if (!feasible(t)) {
      alloc_lo = allocated;  // too tight to solve: allow more risk
    } else if (t.total_risk > total_delta) {
      alloc_hi = allocated;
      risk_hi = t.total_risk;
    } else {
      alloc_lo = allocated;
      risk_lo = t.total_risk;
    }
  };
  if (!iterates.empty()) update_bracket(iterates.back(), trace.iterations.back().allocated);

  const Trajectory* warm = iterates.empty() ? &relaxed : &iterates.back();
  while (static_cast<int>(iterates.size()) < opt.max_iterations && !expired()) {
    double allocated;
    if (risk_hi == risk_lo) {
      allocated = 0.5 * (alloc_lo + alloc_hi);
    } else {
      allocated = alloc_lo + (alloc_hi - alloc_lo) / (risk_hi - risk_lo) * (total_delta - risk_lo);
    }
    const Trajectory& t = run_chance(allocated, warm);
    if (within(t)) {
      out.trajectory = t;
      trace.converged = true;
      return out;
    }
    update_bracket(t, allocated);
    warm = &iterates.back();
  }

  // Cap or deadline: the closest iterate not above Delta + precision,
  // otherwise the most conservative one.
  int best = -1;
  for (size_t k = 0; k < iterates.size(); ++k) {
    const Trajectory& t = iterates[k];
    if (!feasible(t) || t.total_risk > total_delta + precision) continue;
    if (best < 0 || std::abs(t.total_risk - total_delta) <
                        std::abs(iterates[best].total_risk - total_delta)) {
      best = static_cast<int>(k);
    }
  }
  if (best < 0) {
    for (size_t k = 0; k < iterates.size(); ++k) {
      if (best < 0 || iterates[k].total_risk < iterates[best].total_risk) best = static_cast<int>(k);
    }
  }
  out.trajectory = best >= 0 ? iterates[best] : relaxed;
  if (expired()) trace.timed_out = true;
  return out;
}

}  // namespace ccplan
