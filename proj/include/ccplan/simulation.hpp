#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ccplan/scenario.hpp"

namespace ccplan {

/// Scripted obstacle: walks towards its waypoints in turn at constant speed
/// (or drifts with constant velocity when it has none). Per-step position
/// noise is drawn from the spec's process noise.
class Walker {
 public:
  explicit Walker(const ObstacleSpec& spec);
  void advance(double dt, const Vec& noise);
  const Vec& position() const { return position_; }
  const Vec& velocity() const { return velocity_; }

 private:
  void aim();

  ObstacleSpec spec_;
  Vec position_;
  Vec velocity_;
  size_t target_ = 0;
  bool finished_ = false;
};

struct SimConfig {
  double duration = 10.0;
  std::uint64_t seed = 0;
  std::optional<double> time_budget_ms;  ///< overrides the scenario value
  /// Adds per-cycle planning time to the log; makes the output depend on
  /// the machine, so it is off by default.
  bool record_timing = false;
};

struct SimSummary {
  int cycles = 0;
  int collisions = 0;        ///< (cycle, obstacle) pairs with true shape overlap
  int fallback_cycles = 0;   ///< cycles without a feasible new plan
  int degraded_references = 0;
  bool reached_goal = false;  ///< within goal tolerance at some cycle
  bool success = false;       ///< no collision and within tolerance at the end
  double final_goal_distance = 0.0;
  double min_margin = 0.0;    ///< smallest robot-obstacle Mahalanobis distance
  double mean_plan_ms = 0.0;  ///< only filled when timing is recorded
};

/// Braking command that cancels the current velocity: within one step for
/// the point mass; for the quadrotor by tilting against the velocity
/// (decelerating over about a second, tilt at most 0.35 rad) with the
/// thrust that holds altitude. Clamped to the control bounds.
Vec brake_control(const Dynamics& dyn, const Vec& x, double dt, const Vec& lower, const Vec& upper);

/// True when the robot (its shape, or its position for a point robot)
/// overlaps the obstacle shape at the given centers.
bool true_overlap(const std::optional<Ellipsoid>& robot, const Vec& robot_position,
                  const Ellipsoid& obstacle, const Vec& obstacle_position);

/// Closed-loop receding-horizon run. Each control period (the horizon dt):
/// build the belief from the true world (obstacles within sensing range,
/// measured with their position covariance), search a primitive reference,
/// run the iterative chance-constrained optimizer and apply the first
/// control (the braking control when planning fails), then advance the
/// robot and the walkers with seeded noise. Writes one JSON object per
/// cycle and a final summary object to `log`.
SimSummary simulate(const Scenario& s, const SimConfig& config, std::ostream& log);

}  // namespace ccplan
