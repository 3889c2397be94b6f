#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <vector>

#include "ccplan/augmented_lagrangian.hpp"
#include "ccplan/corridor.hpp"
#include "ccplan/models.hpp"

namespace ccplan {

/// Quadratic tracking cost
///   sum_{t=1}^{N-2} |p_t - r_t|^2_P + |p_{N-1} - goal|^2_PN
///   + sum_t |u_t - u_nom|^2_U + sum_t |u_{t+1} - u_t|^2_dU.
/// Matrices must be symmetric PSD of position / control size.
struct CostWeights {
  Mat position;
  Mat terminal;
  Mat control;
  Mat control_rate;

  static CostWeights uniform(int position_dim, int control_dim, double position = 1.0,
                             double terminal = 10.0, double control = 0.1,
                             double control_rate = 0.1);
};

/// Direct-transcription planning problem over N knots (N - 1 controls).
/// Knot 0 is the fixed initial state; knots 1..N-1 and all controls are the
/// decision variables.
struct TranscribedProblem {
  int steps = 0;  ///< N
  double dt = 0.0;
  std::shared_ptr<const Dynamics> dynamics;
  GaussianState initial_state;  ///< full robot state and its covariance
  Mat process_noise;            ///< W per step; empty means zero

  std::optional<Ellipsoid> robot_shape;  ///< absent for a point robot
  /// FRS shape per knot: empty (none), one entry (constant) or N entries.
  std::vector<Ellipsoid> frs;
  /// Predicted obstacles; every track has exactly N means and covariances.
  std::vector<ObstacleTrack> obstacles;
  /// Corridor polyhedron per knot: empty (no corridor) or N entries.
  std::vector<Polyhedron> corridor;

  Vec goal;                    ///< goal position
  std::vector<Vec> reference;  ///< N reference positions; empty means the straight line to the goal
  CostWeights weights;
  Vec control_lower;  ///< empty or control_dim entries (may be -inf)
  Vec control_upper;

  /// Throws kInvalidInput / kDimensionMismatch when the invariants fail.
  void validate() const;
  int state_dim() const { return dynamics->state_dim(); }
  int control_dim() const { return dynamics->control_dim(); }
  int position_dim() const { return dynamics->position_dim(); }

  /// Reference position for knot t (explicit or straight line).
  Vec reference_at(int t) const;
  /// Q_x (+) Q_d at knot t, absent when both parts are absent.
  std::optional<Ellipsoid> augmented_robot(int t) const;
  /// Q_x (+) Q_o (+) Q_d at knot t for one obstacle.
  Ellipsoid collision_shape(int t, int obstacle) const;
};

struct Trajectory {
  std::vector<Vec> states;    ///< N
  std::vector<Vec> controls;  ///< N - 1
  std::vector<double> per_step_risk;
  double total_risk = 0.0;
  double objective = 0.0;
  double max_violation = 0.0;  ///< over dynamics, corridor, bounds and (when imposed) chance constraints
  bool converged = false;
  bool timed_out = false;
};

struct RiskReport {
  std::vector<double> per_step;  ///< max over obstacles, N entries
  double total = 0.0;
  std::vector<double> per_obstacle_max;
  std::vector<int> worst_obstacle;  ///< per step, -1 without obstacles
};

struct IterRecord {
  double allocated;  ///< Delta_k (total, spread uniformly over the N knots)
  double achieved;   ///< delta_k
  double objective;
  bool solver_converged;
  bool feasible;
};

struct IterTrace {
  double relaxed_risk = 0.0;  ///< delta_0 of the unconstrained solve
  std::vector<IterRecord> iterations;
  bool converged = false;
  bool timed_out = false;
};

struct SolveOptions {
  NlpOptions nlp = default_nlp();
  /// Replace analytic gradients by central differences (testing aid).
  bool finite_difference_gradients = false;
  std::optional<std::chrono::steady_clock::time_point> deadline;

  static NlpOptions default_nlp();
};

/// Constraint violation up to which a trajectory counts as feasible.
constexpr double kFeasibilityTolerance = 1e-6;

/// Largest per-step allocation passed to the deterministic chance residual,
/// which needs delta < 1/2.
constexpr double kMaxStepAllocation = 0.49;

/// Solves the transcribed problem, with P_l <= chance_delta imposed at knots
/// 1..N-1 for every obstacle when chance_delta is set. Robot covariances are
/// propagated once along the warm start (or the nominal-control rollout)
/// and held fixed. A feasible warm start with a lower objective is returned
/// in place of a worse solver result.
Trajectory solve_nlp(const TranscribedProblem& p, std::optional<double> chance_delta = std::nullopt,
                     const Trajectory* warm_start = nullptr, const SolveOptions& opt = {});

/// Exact risk per knot: max over obstacles of the series estimate with the
/// relative covariance Sigma_x (position block) + Sigma_o.
RiskReport trajectory_risk(const Trajectory& t, const TranscribedProblem& p);

/// Covariances of the robot state along a trajectory (N entries).
std::vector<Mat> robot_covariances(const TranscribedProblem& p, const std::vector<Vec>& states,
                                   const std::vector<Vec>& controls);

struct IterOptions {
  int max_iterations = 10;
  /// Solve with the whole budget allocated (Delta_1 = Delta) first, so an
  /// early deadline still leaves a feasible linearised solution.
  bool linearized_first = false;
  /// Store at each bracket end the tightest allocation its trajectory
  /// already satisfies (N * max_t P_l) instead of the allocation requested.
  /// Without it, early guesses where the constraint is inactive shrink the
  /// bracket only geometrically.
  bool tighten_bracket = true;
  /// Starting point for the first solves (e.g. the previous plan shifted
  /// by one step); the nominal rollout when absent.
  std::optional<Trajectory> initial_guess;
  SolveOptions solve;
};

struct IterResult {
  Trajectory trajectory;
  IterTrace trace;
};

/// Iterative tightening: relaxation first, then per-step allocations
/// Delta_k / N chosen by proportional interpolation inside the bracket
/// [Delta_l, Delta_h] until |delta_k - Delta| <= precision.
/// precision <= 0 selects 0.01 * total_delta.
IterResult iter_traj_opt(const TranscribedProblem& p, double total_delta, double precision = 0.0,
                         const IterOptions& opt = {});

}  // namespace ccplan
