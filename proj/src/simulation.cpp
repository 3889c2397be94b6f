#include "ccplan/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "ccplan/error.hpp"
#include "ccplan/motion_primitives.hpp"
#include "ccplan/rng.hpp"

namespace ccplan {

using nlohmann::json;

namespace {

// Per-cycle random streams.
constexpr std::uint64_t kMeasurementStream = 1;
constexpr std::uint64_t kRobotNoiseStream = 2;
constexpr std::uint64_t kWalkerNoiseStream = 3;

Vec gaussian(CounterRng& rng, const Mat& sqrt_cov) {
  Vec z(sqrt_cov.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return sqrt_cov * z;
}

Mat sqrt_or_zero(const Mat& cov, int size) {
  return cov.size() > 0 ? sym_sqrt(cov) : Mat::Zero(size, size);
}

// Previous plan advanced by one control period, last knot repeated.
Trajectory shifted(const Trajectory& t) {
  Trajectory s = t;
  s.states.erase(s.states.begin());
  s.states.push_back(s.states.back());
  s.controls.erase(s.controls.begin());
  s.controls.push_back(s.controls.back());
  return s;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

Walker::Walker(const ObstacleSpec& spec) : spec_(spec), position_(spec.position), velocity_(spec.velocity) {
  if (!spec_.waypoints.empty()) aim();
}

void Walker::aim() {
  if (finished_) {
    velocity_.setZero();
    return;
  }
  const Vec d = spec_.waypoints[target_] - position_;
  const double dist = d.norm();
  velocity_ = dist > 1e-12 ? Vec(d * (spec_.speed / dist)) : Vec(Vec::Zero(d.size()));
}

void Walker::advance(double dt, const Vec& noise) {
  if (spec_.waypoints.empty()) {
    position_ += velocity_ * dt;
  } else {
    double remaining = spec_.speed * dt;
    // Bounded so coincident looping waypoints cannot spin forever.
    for (size_t hops = 0; remaining > 0.0 && !finished_ && hops <= spec_.waypoints.size(); ++hops) {
      const Vec d = spec_.waypoints[target_] - position_;
      const double dist = d.norm();
      if (dist <= remaining) {
        position_ = spec_.waypoints[target_];
        remaining -= dist;
        if (++target_ == spec_.waypoints.size()) {
          if (spec_.loop) {
            target_ = 0;
          } else {
            finished_ = true;
          }
        }
      } else {
        position_ += d * (remaining / dist);
        remaining = 0.0;
      }
    }
  }
  position_ += noise;
  if (!spec_.waypoints.empty()) aim();
}

Vec brake_control(const Dynamics& dyn, const Vec& x, double dt, const Vec& lower, const Vec& upper) {
  Vec u;
  if (const auto* quad = dynamic_cast<const QuadrotorModel*>(&dyn)) {
    constexpr double kBrakeTime = 1.0;
    constexpr double kMaxTilt = 0.35;
    const double g = quad->gravity();
    const Vec accel = -x.segment(3, 3) / kBrakeTime;
    // Desired acceleration in the yaw-aligned frame, then small-angle tilt.
    const double cy = std::cos(x(8)), sy = std::sin(x(8));
    const double forward = cy * accel(0) + sy * accel(1);
    const double left = -sy * accel(0) + cy * accel(1);
    const double lift = std::max(0.2 * g, g + accel(2));
    const double pitch = std::clamp(std::atan2(forward, lift), -kMaxTilt, kMaxTilt);
    const double roll = std::clamp(std::atan2(-left, lift), -kMaxTilt, kMaxTilt);
    u = Vec::Zero(4);
    u(0) = (roll - x(6)) / dt;
    u(1) = (pitch - x(7)) / dt;
    u(3) = quad->mass() * lift / std::max(0.2, std::cos(x(6)) * std::cos(x(7)));
  } else {
    const int d = dyn.position_dim();
    u = -x.segment(d, d) / dt;
  }
  if (lower.size() == u.size()) u = u.cwiseMax(lower);
  if (upper.size() == u.size()) u = u.cwiseMin(upper);
  return u;
}

bool true_overlap(const std::optional<Ellipsoid>& robot, const Vec& robot_position,
                  const Ellipsoid& obstacle, const Vec& obstacle_position) {
  if (robot) return ellipsoids_overlap(robot_position, *robot, obstacle_position, obstacle);
  return obstacle.contains(robot_position - obstacle_position);
}

SimSummary simulate(const Scenario& s, const SimConfig& config, std::ostream& log) {
  using clock = std::chrono::steady_clock;
  validate_scenario(s);
  if (!(config.duration >= 0.0)) throw Error(ErrorKind::kInvalidInput, "duration must be nonnegative");
  const auto dyn = make_dynamics(s.robot);
  const int d = s.robot.dim;
  const int nx = dyn->state_dim();
  const int steps = s.horizon.steps;
  const double dt = s.horizon.dt;
  const double delta = s.risk.total;
  const double budget_ms = config.time_budget_ms.value_or(s.simulation.time_budget_ms);
  const int cycles = static_cast<int>(std::lround(config.duration / dt));

  const Mat robot_noise = sqrt_or_zero(s.robot.process_noise, nx);
  const Mat robot_cov = s.robot.initial_cov.size() > 0 ? s.robot.initial_cov : Mat::Zero(nx, nx);
  std::optional<Ellipsoid> robot_shape;
  if (s.robot.semi_axes) robot_shape = Ellipsoid::from_semi_axes(*s.robot.semi_axes);

  std::vector<Walker> walkers;
  std::vector<Mat> measurement_sqrt, walker_noise;
  std::vector<Ellipsoid> shapes;
  for (const ObstacleSpec& o : s.obstacles) {
    walkers.emplace_back(o);
    measurement_sqrt.push_back(sqrt_or_zero(o.cov, d));
    walker_noise.push_back(sqrt_or_zero(o.process_noise, d));
    shapes.push_back(obstacle_shape(o));
  }
  Scenario open_space = s;
  open_space.corridor.clear();
  PrimitiveOptions popt;
  popt.budget = s.simulation.primitive_budget;
  popt.primitive_steps = s.simulation.primitive_steps;
  if (s.robot.max_speed) popt.max_speed = *s.robot.max_speed;
  const double step_allocation = std::min(delta / steps, kMaxStepAllocation);

  SimSummary summary;
  summary.min_margin = std::numeric_limits<double>::infinity();
  double plan_ms_total = 0.0;
  Vec x = s.robot.initial_state;
  std::optional<Trajectory> previous;
  int plan_age = 0;  // cycles since `previous` was planned

  for (int c = 0; c < cycles; ++c) {
    const std::uint64_t cycle_seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
    CounterRng measure(derive_seed(cycle_seed, kMeasurementStream));
    WorldBelief belief;
    belief.robot = {x, robot_cov};
    for (size_t j = 0; j < walkers.size(); ++j) {
      // Noise is drawn for every walker so the stream does not depend on
      // which obstacles happen to be in range.
      const Vec measured = walkers[j].position() + gaussian(measure, measurement_sqrt[j]);
      if ((walkers[j].position() - x.head(d)).norm() > s.simulation.sensing_range) continue;
      ObstacleSpec seen = s.obstacles[j];
      seen.position = measured;
      seen.velocity = walkers[j].velocity();
      belief.obstacles.push_back(obstacle_belief(seen, d));
      belief.obstacle_ids.push_back(static_cast<int>(j));
    }

    json rec;
    rec["cycle"] = c;
    rec["time"] = c * dt;
    rec["state"] = vec_json(x);
    rec["obstacles_in_range"] = belief.obstacle_ids;
    const auto t0 = clock::now();
    Vec u;
    std::string failure;
    try {
      const TranscribedProblem base = make_problem(open_space, belief);
      const ReferenceResult ref = generate_reference(base, step_allocation, s.corridor, popt);
      rec["reference_degraded"] = ref.degraded;
      rec["expansions"] = ref.expansions;
      summary.degraded_references += ref.degraded;
      const TranscribedProblem p = make_problem(s, belief, &ref.positions);
      IterOptions io = iter_options(s);
      io.linearized_first = true;
      if (previous) io.initial_guess = shifted(*previous);
      if (budget_ms > 0.0) {
        io.solve.deadline = t0 + std::chrono::duration_cast<clock::duration>(
                                     std::chrono::duration<double, std::milli>(budget_ms));
      }
      const IterResult r = iter_traj_opt(p, delta, s.risk.precision, io);
      rec["iterations"] = r.trace.iterations.size();
      rec["converged"] = r.trace.converged;
      rec["timed_out"] = r.trace.timed_out;
      rec["planned_risk"] = r.trajectory.total_risk;
      if (r.trajectory.max_violation <= kFeasibilityTolerance && !r.trajectory.controls.empty()) {
        u = r.trajectory.controls.front();
        previous = r.trajectory;
      } else {
        failure = "no feasible trajectory";
      }
    } catch (const Error& e) {
      failure = e.what();
    }
    const double plan_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    plan_ms_total += plan_ms;
    if (config.record_timing) rec["plan_ms"] = plan_ms;
    rec["fallback"] = !failure.empty();
    if (!failure.empty()) {
      rec["failure"] = failure;
      ++summary.fallback_cycles;
      // Keep following the last feasible plan while it lasts, then brake.
      if (previous && plan_age + 1 < steps - 1) {
        previous = shifted(*previous);
        ++plan_age;
        u = previous->controls.front();
        rec["fallback_mode"] = "previous_plan";
      } else {
        previous.reset();
        u = brake_control(*dyn, x, dt, s.robot.control_lower, s.robot.control_upper);
        rec["fallback_mode"] = "brake";
      }
    } else {
      plan_age = 0;
    }
    rec["control"] = vec_json(u);

    CounterRng robot_rng(derive_seed(cycle_seed, kRobotNoiseStream));
    CounterRng walker_rng(derive_seed(cycle_seed, kWalkerNoiseStream));
    x = dyn->step(x, u, dt) + gaussian(robot_rng, robot_noise);
    for (size_t j = 0; j < walkers.size(); ++j) walkers[j].advance(dt, gaussian(walker_rng, walker_noise[j]));

    json obstacles = json::array(), hits = json::array();
    double cycle_margin = std::numeric_limits<double>::infinity();
    const Vec pos = x.head(d);
    for (size_t j = 0; j < walkers.size(); ++j) {
      obstacles.push_back(vec_json(walkers[j].position()));
      if (true_overlap(robot_shape, pos, shapes[j], walkers[j].position())) {
        hits.push_back(j);
        ++summary.collisions;
      }
      const Vec rel = pos - walkers[j].position();
      const Mat cov = robot_cov.topLeftCorner(d, d) + s.obstacles[j].cov;
      cycle_margin = std::min(cycle_margin, std::sqrt(rel.dot(cov.ldlt().solve(rel))));
    }
    const double goal_distance = (pos - s.goal).norm();
    summary.reached_goal = summary.reached_goal || goal_distance <= s.simulation.goal_tolerance;
    summary.final_goal_distance = goal_distance;
    summary.min_margin = std::min(summary.min_margin, cycle_margin);
    rec["next_state"] = vec_json(x);
    rec["obstacle_positions"] = obstacles;
    rec["collisions"] = hits;
    if (std::isfinite(cycle_margin)) rec["margin"] = cycle_margin;
    rec["goal_distance"] = goal_distance;
    log << rec.dump() << '\n';
    ++summary.cycles;
  }

  if (cycles == 0) summary.final_goal_distance = (x.head(d) - s.goal).norm();
  summary.success = summary.collisions == 0 && summary.final_goal_distance <= s.simulation.goal_tolerance;
  if (config.record_timing && summary.cycles > 0) summary.mean_plan_ms = plan_ms_total / summary.cycles;

  json tail;
  tail["cycles"] = summary.cycles;
  tail["collisions"] = summary.collisions;
  tail["fallback_cycles"] = summary.fallback_cycles;
  tail["degraded_references"] = summary.degraded_references;
  tail["reached_goal"] = summary.reached_goal;
  tail["success"] = summary.success;
  tail["final_goal_distance"] = summary.final_goal_distance;
  if (std::isfinite(summary.min_margin)) tail["min_margin"] = summary.min_margin;
  if (config.record_timing) tail["mean_plan_ms"] = summary.mean_plan_ms;
  log << json{{"summary", tail}}.dump() << '\n';
  log.flush();
  return summary;
}

}  // namespace ccplan
