#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccplan/corridor.hpp"
#include "ccplan/trajectory_opt.hpp"

namespace ccplan {

constexpr int kScenarioSchema = 1;

struct RobotSpec {
  std::string dynamics = "point_mass";  ///< "point_mass" or "quadrotor"
  int dim = 2;                          ///< position dimension (quadrotor: 3)
  double mass = 1.0;
  double gravity = 9.81;
  std::optional<Vec> semi_axes;  ///< absent for a point robot
  Vec initial_state;
  Mat initial_cov;    ///< state covariance; empty means zero
  Mat process_noise;  ///< W; empty means zero
  Vec control_lower;  ///< empty means unbounded
  Vec control_upper;
  std::optional<double> max_speed;  ///< caps the straight-line reference speed
};

/// Scripted waypoint walker: moves at `speed` towards each waypoint in turn
/// (looping when `loop`), or with constant `velocity` when no waypoints.
struct ObstacleSpec {
  std::string name;
  Vec semi_axes;
  double yaw = 0.0;
  Vec position;
  Vec velocity;
  Mat cov;           ///< position covariance
  Mat velocity_cov;  ///< empty means zero
  Mat process_noise; ///< per-step position noise; empty means zero
  std::vector<Vec> waypoints;
  double speed = 0.0;
  bool loop = false;
};

struct HorizonSpec {
  int steps = 0;
  double dt = 0.0;
  std::optional<double> duration;  ///< when present must equal steps * dt
};

struct RiskSpec {
  double total = 0.0;
  std::string allocation = "uniform";
  double precision = 0.0;  ///< <= 0 selects 0.01 * total
  int max_iterations = 10;
  bool linearized_first = false;
  bool tighten_bracket = true;
};

/// FRS shape Q_d. The disturbance fraction is metadata only: computing the
/// reachable set from a disturbance bound is outside this library.
struct FrsSpec {
  std::optional<Vec> semi_axes;
  std::optional<double> disturbance_force_fraction;
};

struct CostSpec {
  double position = 1.0;
  double terminal = 10.0;
  double control = 0.1;
  double control_rate = 0.1;
};

struct SimulationSpec {
  double duration = 10.0;
  double time_budget_ms = 45.0;  ///< per planning cycle; 0 disables the budget
  double sensing_range = 5.0;
  double goal_tolerance = 0.2;
  int primitive_budget = 2000;      ///< node expansions per reference search
  int primitive_steps = 5;          ///< knots per motion primitive
};

struct Scenario {
  int schema = kScenarioSchema;
  std::string name;
  RobotSpec robot;
  std::vector<ObstacleSpec> obstacles;
  std::vector<Polyhedron> corridor;
  Vec goal;
  HorizonSpec horizon;
  RiskSpec risk;
  FrsSpec frs;
  CostSpec cost;
  std::map<std::string, std::uint64_t> seeds;
  SimulationSpec simulation;
};

/// Parses and validates a scenario document. Box corridor entries
/// {"box": [min, max]} expand to halfspaces. Throws kInvalidInput with the
/// offending field on malformed input.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Canonical JSON (2-space indent, polyhedra written as {"a", "b"}).
std::string serialize_scenario(const Scenario& s);

/// Checks cross-field invariants (sizes, PSD matrices, horizon duration).
void validate_scenario(const Scenario& s);

std::shared_ptr<const Dynamics> make_dynamics(const RobotSpec& robot);

/// Belief over the world used to build a planning problem.
struct WorldBelief {
  GaussianState robot;                   ///< full robot state
  std::vector<GaussianState> obstacles;  ///< 12-dimensional obstacle states
  std::vector<int> obstacle_ids;         ///< index into Scenario::obstacles
};

/// Obstacle ellipsoid rotated by its yaw.
Ellipsoid obstacle_shape(const ObstacleSpec& o);

/// 12-dimensional obstacle state and covariance from its spec.
GaussianState obstacle_belief(const ObstacleSpec& o, int dim);
WorldBelief initial_belief(const Scenario& s);

/// Transcribed problem for the belief: obstacles predicted with the
/// constant-velocity model, corridor polyhedra assigned along the reference
/// (the given one, else a straight, speed-capped line to the goal).
TranscribedProblem make_problem(const Scenario& s, const WorldBelief& belief,
                                const std::vector<Vec>* reference = nullptr);

IterOptions iter_options(const Scenario& s);

}  // namespace ccplan
