#include "ccplan/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ccplan/error.hpp"

namespace ccplan {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::kInvalidInput, "scenario field '" + field + "': " + why);
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(field, "not finite");
  return v;
}

Vec get_vec(const json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_number(j[i], field);
  return v;
}

// Row-major array of arrays.
Mat get_mat(const json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of rows");
  if (j.empty()) return Mat();
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) bad(field, "rows must be arrays of equal length");
    for (size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = get_number(j[r][c], field);
    }
  }
  return m;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

// Optional-field readers: leave the default when the key is absent or null.
template <typename T, typename F>
void read(const json& obj, const char* key, const std::string& path, T& out, F&& convert) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  out = convert(*it, path + "." + key);
}

void read_number(const json& obj, const char* key, const std::string& path, double& out) {
  read(obj, key, path, out, get_number);
}

void read_int(const json& obj, const char* key, const std::string& path, int& out) {
  read(obj, key, path, out, [](const json& j, const std::string& f) {
    if (!j.is_number_integer()) bad(f, "expected an integer");
    return j.get<int>();
  });
}

void read_bool(const json& obj, const char* key, const std::string& path, bool& out) {
  read(obj, key, path, out, [](const json& j, const std::string& f) {
    if (!j.is_boolean()) bad(f, "expected true or false");
    return j.get<bool>();
  });
}

void read_string(const json& obj, const char* key, const std::string& path, std::string& out) {
  read(obj, key, path, out, [](const json& j, const std::string& f) {
    if (!j.is_string()) bad(f, "expected a string");
    return j.get<std::string>();
  });
}

void read_vec(const json& obj, const char* key, const std::string& path, Vec& out) {
  read(obj, key, path, out, get_vec);
}

void read_mat(const json& obj, const char* key, const std::string& path, Mat& out) {
  read(obj, key, path, out, get_mat);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) bad(path + "." + key, "missing");
  return *it;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
}

Polyhedron parse_polyhedron(const json& j, const std::string& path) {
  require_object(j, path);
  if (j.contains("box")) {
    const json& box = j["box"];
    if (!box.is_array() || box.size() != 2) bad(path + ".box", "expected [min, max]");
    return Polyhedron::box(get_vec(box[0], path + ".box"), get_vec(box[1], path + ".box"));
  }
  return Polyhedron(get_mat(require(j, "a", path), path + ".a"), get_vec(require(j, "b", path), path + ".b"));
}

Mat padded(const Mat& m, int size) {
  Mat out = Mat::Zero(size, size);
  if (m.size() > 0) out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

Eigen::Vector3d padded3(const Vec& v) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  out.head(v.size()) = v;
  return out;
}

void check_psd(const Mat& m, int size, const std::string& field, bool strict = false) {
  if (m.size() == 0) return;
  if (m.rows() != size || m.cols() != size) bad(field, "expected a " + std::to_string(size) + "x" + std::to_string(size) + " matrix");
  if (!is_symmetric(m, 1e-9)) bad(field, "matrix is not symmetric");
  const double lo = min_eigenvalue(m);
  if (strict ? !(lo > 0.0) : lo < -1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::kNotPositiveDefinite,
                "scenario field '" + field + "': matrix is not positive " + (strict ? "definite" : "semidefinite"));
  }
}

void check_size(const Vec& v, int size, const std::string& field) {
  if (v.size() != size) bad(field, "expected " + std::to_string(size) + " entries");
}

void check_axes(const Vec& v, int size, const std::string& field) {
  check_size(v, size, field);
  if ((v.array() <= 0.0).any()) bad(field, "semi-axes must be positive");
}

}  // namespace

void validate_scenario(const Scenario& s) {
  if (s.schema != kScenarioSchema) bad("schema", "unsupported version " + std::to_string(s.schema));
  const RobotSpec& r = s.robot;
  if (r.dynamics == "quadrotor") {
    if (r.dim != 3) bad("robot.dim", "the quadrotor is 3-dimensional");
  } else if (r.dynamics == "point_mass") {
    if (r.dim != 2 && r.dim != 3) bad("robot.dim", "must be 2 or 3");
  } else {
    bad("robot.dynamics", "expected 'point_mass' or 'quadrotor'");
  }
  if (!(r.mass > 0.0)) bad("robot.mass", "must be positive");
  if (!(r.gravity >= 0.0)) bad("robot.gravity", "must be nonnegative");
  const auto dyn = make_dynamics(r);
  const int nx = dyn->state_dim(), nu = dyn->control_dim(), d = r.dim;
  check_size(r.initial_state, nx, "robot.initial_state");
  check_psd(r.initial_cov, nx, "robot.initial_cov");
  check_psd(r.process_noise, nx, "robot.process_noise");
  if (r.semi_axes) check_axes(*r.semi_axes, d, "robot.semi_axes");
  if (r.control_lower.size() > 0) check_size(r.control_lower, nu, "robot.control_lower");
  if (r.control_upper.size() > 0) check_size(r.control_upper, nu, "robot.control_upper");
  if (r.max_speed && !(*r.max_speed > 0.0)) bad("robot.max_speed", "must be positive");

  for (size_t i = 0; i < s.obstacles.size(); ++i) {
    const ObstacleSpec& o = s.obstacles[i];
    const std::string path = "obstacles[" + std::to_string(i) + "]";
    check_axes(o.semi_axes, d, path + ".semi_axes");
    check_size(o.position, d, path + ".position");
    check_size(o.velocity, d, path + ".velocity");
    check_psd(o.cov, d, path + ".cov", /*strict=*/true);
    if (o.cov.size() == 0) bad(path + ".cov", "missing");
    check_psd(o.velocity_cov, d, path + ".velocity_cov");
    check_psd(o.process_noise, d, path + ".process_noise");
    for (const Vec& w : o.waypoints) check_size(w, d, path + ".waypoints");
    if (!o.waypoints.empty() && !(o.speed > 0.0)) bad(path + ".speed", "waypoints need a positive speed");
  }
  for (size_t i = 0; i < s.corridor.size(); ++i) {
    if (s.corridor[i].dim() != d) bad("corridor[" + std::to_string(i) + "]", "dimension differs from the robot");
  }
  check_size(s.goal, d, "goal");
  if (s.horizon.steps < 2) bad("horizon.steps", "must be at least 2");
  if (!(s.horizon.dt > 0.0)) bad("horizon.dt", "must be positive");
  if (s.horizon.duration && std::abs(s.horizon.steps * s.horizon.dt - *s.horizon.duration) > 1e-9) {
    bad("horizon.duration", "must equal steps * dt");
  }
  if (!(s.risk.total > 0.0)) bad("risk.total", "must be positive");
  if (s.risk.allocation != "uniform") bad("risk.allocation", "only 'uniform' is supported");
  if (s.risk.precision < 0.0) bad("risk.precision", "must be nonnegative");
  if (s.risk.max_iterations < 1) bad("risk.max_iterations", "must be at least 1");
  if (s.frs.semi_axes) check_axes(*s.frs.semi_axes, d, "frs.semi_axes");
  if (s.frs.disturbance_force_fraction && !(*s.frs.disturbance_force_fraction >= 0.0)) {
    bad("frs.disturbance_force_fraction", "must be nonnegative");
  }
  for (double w : {s.cost.position, s.cost.terminal, s.cost.control, s.cost.control_rate}) {
    if (!(w >= 0.0)) bad("cost", "weights must be nonnegative");
  }
  const SimulationSpec& sim = s.simulation;
  if (!(sim.duration >= 0.0)) bad("simulation.duration", "must be nonnegative");
  if (!(sim.time_budget_ms >= 0.0)) bad("simulation.time_budget_ms", "must be nonnegative");
  if (!(sim.sensing_range > 0.0)) bad("simulation.sensing_range", "must be positive");
  if (!(sim.goal_tolerance > 0.0)) bad("simulation.goal_tolerance", "must be positive");
  if (sim.primitive_budget < 0) bad("simulation.primitive_budget", "must be nonnegative");
  if (sim.primitive_steps < 1) bad("simulation.primitive_steps", "must be at least 1");
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidInput, std::string("scenario is not valid JSON: ") + e.what());
  }
  require_object(j, "scenario");
  Scenario s;
  read_int(j, "schema", "", s.schema);
  if (!j.contains("schema")) bad("schema", "missing");
  read_string(j, "name", "", s.name);

  const json& r = require(j, "robot", "");
  require_object(r, "robot");
  RobotSpec& robot = s.robot;
  read_string(r, "dynamics", "robot", robot.dynamics);
  read_int(r, "dim", "robot", robot.dim);
  read_number(r, "mass", "robot", robot.mass);
  read_number(r, "gravity", "robot", robot.gravity);
  Vec axes;
  read_vec(r, "semi_axes", "robot", axes);
  if (axes.size() > 0) robot.semi_axes = axes;
  robot.initial_state = get_vec(require(r, "initial_state", "robot"), "robot.initial_state");
  read_mat(r, "initial_cov", "robot", robot.initial_cov);
  read_mat(r, "process_noise", "robot", robot.process_noise);
  read_vec(r, "control_lower", "robot", robot.control_lower);
  read_vec(r, "control_upper", "robot", robot.control_upper);
  double speed = 0.0;
  read_number(r, "max_speed", "robot", speed);
  if (r.contains("max_speed") && !r["max_speed"].is_null()) robot.max_speed = speed;

  if (j.contains("obstacles")) {
    const json& list = j["obstacles"];
    if (!list.is_array()) bad("obstacles", "expected an array");
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string path = "obstacles[" + std::to_string(i) + "]";
      const json& o = list[i];
      require_object(o, path);
      ObstacleSpec spec;
      read_string(o, "name", path, spec.name);
      spec.semi_axes = get_vec(require(o, "semi_axes", path), path + ".semi_axes");
      read_number(o, "yaw", path, spec.yaw);
      spec.position = get_vec(require(o, "position", path), path + ".position");
      spec.velocity = Vec::Zero(spec.position.size());
      read_vec(o, "velocity", path, spec.velocity);
      spec.cov = get_mat(require(o, "cov", path), path + ".cov");
      read_mat(o, "velocity_cov", path, spec.velocity_cov);
      read_mat(o, "process_noise", path, spec.process_noise);
      if (o.contains("waypoints")) {
        const json& w = o["waypoints"];
        if (!w.is_array()) bad(path + ".waypoints", "expected an array of points");
        for (const json& p : w) spec.waypoints.push_back(get_vec(p, path + ".waypoints"));
      }
      read_number(o, "speed", path, spec.speed);
      read_bool(o, "loop", path, spec.loop);
      s.obstacles.push_back(std::move(spec));
    }
  }
  if (j.contains("corridor")) {
    const json& list = j["corridor"];
    if (!list.is_array()) bad("corridor", "expected an array");
    for (size_t i = 0; i < list.size(); ++i) {
      s.corridor.push_back(parse_polyhedron(list[i], "corridor[" + std::to_string(i) + "]"));
    }
  }
  s.goal = get_vec(require(j, "goal", ""), "goal");

  const json& h = require(j, "horizon", "");
  require_object(h, "horizon");
  read_int(h, "steps", "horizon", s.horizon.steps);
  read_number(h, "dt", "horizon", s.horizon.dt);
  double duration = 0.0;
  read_number(h, "duration", "horizon", duration);
  if (h.contains("duration") && !h["duration"].is_null()) s.horizon.duration = duration;

  const json& k = require(j, "risk", "");
  require_object(k, "risk");
  read_number(k, "total", "risk", s.risk.total);
  read_string(k, "allocation", "risk", s.risk.allocation);
  read_number(k, "precision", "risk", s.risk.precision);
  read_int(k, "max_iterations", "risk", s.risk.max_iterations);
  read_bool(k, "linearized_first", "risk", s.risk.linearized_first);
  read_bool(k, "tighten_bracket", "risk", s.risk.tighten_bracket);

  if (j.contains("frs") && !j["frs"].is_null()) {
    const json& f = j["frs"];
    require_object(f, "frs");
    Vec frs_axes;
    read_vec(f, "semi_axes", "frs", frs_axes);
    if (frs_axes.size() > 0) s.frs.semi_axes = frs_axes;
    double frac = 0.0;
    read_number(f, "disturbance_force_fraction", "frs", frac);
    if (f.contains("disturbance_force_fraction") && !f["disturbance_force_fraction"].is_null()) {
      s.frs.disturbance_force_fraction = frac;
    }
  }
  if (j.contains("cost")) {
    const json& c = j["cost"];
    require_object(c, "cost");
    read_number(c, "position", "cost", s.cost.position);
    read_number(c, "terminal", "cost", s.cost.terminal);
    read_number(c, "control", "cost", s.cost.control);
    read_number(c, "control_rate", "cost", s.cost.control_rate);
  }
  if (j.contains("seeds")) {
    const json& seeds = j["seeds"];
    require_object(seeds, "seeds");
    for (auto it = seeds.begin(); it != seeds.end(); ++it) {
      if (!it->is_number_unsigned()) bad("seeds." + it.key(), "expected a nonnegative integer");
      s.seeds[it.key()] = it->get<std::uint64_t>();
    }
  }
  if (j.contains("simulation")) {
    const json& sim = j["simulation"];
    require_object(sim, "simulation");
    read_number(sim, "duration", "simulation", s.simulation.duration);
    read_number(sim, "time_budget_ms", "simulation", s.simulation.time_budget_ms);
    read_number(sim, "sensing_range", "simulation", s.simulation.sensing_range);
    read_number(sim, "goal_tolerance", "simulation", s.simulation.goal_tolerance);
    read_int(sim, "primitive_budget", "simulation", s.simulation.primitive_budget);
    read_int(sim, "primitive_steps", "simulation", s.simulation.primitive_steps);
  }
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInvalidInput, "cannot open scenario file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string serialize_scenario(const Scenario& s) {
  json j;
  j["schema"] = s.schema;
  j["name"] = s.name;
  json r;
  r["dynamics"] = s.robot.dynamics;
  r["dim"] = s.robot.dim;
  r["mass"] = s.robot.mass;
  r["gravity"] = s.robot.gravity;
  if (s.robot.semi_axes) r["semi_axes"] = vec_json(*s.robot.semi_axes);
  r["initial_state"] = vec_json(s.robot.initial_state);
  if (s.robot.initial_cov.size() > 0) r["initial_cov"] = mat_json(s.robot.initial_cov);
  if (s.robot.process_noise.size() > 0) r["process_noise"] = mat_json(s.robot.process_noise);
  if (s.robot.control_lower.size() > 0) r["control_lower"] = vec_json(s.robot.control_lower);
  if (s.robot.control_upper.size() > 0) r["control_upper"] = vec_json(s.robot.control_upper);
  if (s.robot.max_speed) r["max_speed"] = *s.robot.max_speed;
  j["robot"] = r;

  json obstacles = json::array();
  for (const ObstacleSpec& o : s.obstacles) {
    json e;
    e["name"] = o.name;
    e["semi_axes"] = vec_json(o.semi_axes);
    e["yaw"] = o.yaw;
    e["position"] = vec_json(o.position);
    e["velocity"] = vec_json(o.velocity);
    e["cov"] = mat_json(o.cov);
    if (o.velocity_cov.size() > 0) e["velocity_cov"] = mat_json(o.velocity_cov);
    if (o.process_noise.size() > 0) e["process_noise"] = mat_json(o.process_noise);
    if (!o.waypoints.empty()) {
      json w = json::array();
      for (const Vec& p : o.waypoints) w.push_back(vec_json(p));
      e["waypoints"] = w;
      e["speed"] = o.speed;
      e["loop"] = o.loop;
    }
    obstacles.push_back(e);
  }
  j["obstacles"] = obstacles;
  json corridor = json::array();
  for (const Polyhedron& p : s.corridor) corridor.push_back({{"a", mat_json(p.a())}, {"b", vec_json(p.b())}});
  j["corridor"] = corridor;
  j["goal"] = vec_json(s.goal);

  json h;
  h["steps"] = s.horizon.steps;
  h["dt"] = s.horizon.dt;
  if (s.horizon.duration) h["duration"] = *s.horizon.duration;
  j["horizon"] = h;
  j["risk"] = {{"total", s.risk.total},
               {"allocation", s.risk.allocation},
               {"precision", s.risk.precision},
               {"max_iterations", s.risk.max_iterations},
               {"linearized_first", s.risk.linearized_first},
               {"tighten_bracket", s.risk.tighten_bracket}};
  json f = json::object();
  if (s.frs.semi_axes) f["semi_axes"] = vec_json(*s.frs.semi_axes);
  if (s.frs.disturbance_force_fraction) f["disturbance_force_fraction"] = *s.frs.disturbance_force_fraction;
  j["frs"] = f;
  j["cost"] = {{"position", s.cost.position},
               {"terminal", s.cost.terminal},
               {"control", s.cost.control},
               {"control_rate", s.cost.control_rate}};
  json seeds = json::object();
  for (const auto& [k, v] : s.seeds) seeds[k] = v;
  j["seeds"] = seeds;
  j["simulation"] = {{"duration", s.simulation.duration},
                     {"time_budget_ms", s.simulation.time_budget_ms},
                     {"sensing_range", s.simulation.sensing_range},
                     {"goal_tolerance", s.simulation.goal_tolerance},
                     {"primitive_budget", s.simulation.primitive_budget},
                     {"primitive_steps", s.simulation.primitive_steps}};
  return j.dump(2) + "\n";
}

Ellipsoid obstacle_shape(const ObstacleSpec& o) {
  const Eigen::Matrix3d r = rotation_rpy(0.0, 0.0, o.yaw);
  const int d = static_cast<int>(o.semi_axes.size());
  return Ellipsoid::from_semi_axes(o.semi_axes, r.topLeftCorner(d, d));
}

std::shared_ptr<const Dynamics> make_dynamics(const RobotSpec& robot) {
  if (robot.dynamics == "quadrotor") return std::make_shared<QuadrotorModel>(robot.mass, robot.gravity);
  if (robot.dynamics == "point_mass") return std::make_shared<PointMassModel>(robot.dim);
  bad("robot.dynamics", "expected 'point_mass' or 'quadrotor'");
}

GaussianState obstacle_belief(const ObstacleSpec& o, int dim) {
  GaussianState g;
  g.mean = ObstacleModel::make_state(padded3(o.position), padded3(o.velocity), o.yaw);
  g.cov = Mat::Zero(ObstacleModel::kStateDim, ObstacleModel::kStateDim);
  g.cov.topLeftCorner(3, 3) = padded(o.cov, 3);
  if (o.velocity_cov.size() > 0) {
    // The model state holds body-frame velocity.
    const Eigen::Matrix3d r = rotation_rpy(0.0, 0.0, o.yaw);
    g.cov.block(3, 3, 3, 3) = r.transpose() * padded(o.velocity_cov, 3) * r;
  }
  (void)dim;
  return g;
}

WorldBelief initial_belief(const Scenario& s) {
  WorldBelief b;
  const int nx = static_cast<int>(s.robot.initial_state.size());
  b.robot = {s.robot.initial_state, s.robot.initial_cov.size() > 0 ? s.robot.initial_cov : Mat::Zero(nx, nx)};
  for (size_t i = 0; i < s.obstacles.size(); ++i) {
    b.obstacles.push_back(obstacle_belief(s.obstacles[i], s.robot.dim));
    b.obstacle_ids.push_back(static_cast<int>(i));
  }
  return b;
}

TranscribedProblem make_problem(const Scenario& s, const WorldBelief& belief,
                                const std::vector<Vec>* reference) {
  const int d = s.robot.dim;
  TranscribedProblem p;
  p.steps = s.horizon.steps;
  p.dt = s.horizon.dt;
  p.dynamics = make_dynamics(s.robot);
  p.initial_state = belief.robot;
  p.process_noise = s.robot.process_noise;
  if (s.robot.semi_axes) p.robot_shape = Ellipsoid::from_semi_axes(*s.robot.semi_axes);
  if (s.frs.semi_axes) p.frs = {Ellipsoid::from_semi_axes(*s.frs.semi_axes)};

  for (size_t k = 0; k < belief.obstacles.size(); ++k) {
    const ObstacleSpec& o = s.obstacles[static_cast<size_t>(belief.obstacle_ids[k])];
    Mat v = Mat::Zero(ObstacleModel::kStateDim, ObstacleModel::kStateDim);
    v.topLeftCorner(3, 3) = padded(o.process_noise, 3);
    p.obstacles.push_back(predict_obstacle(belief.obstacles[k], v, obstacle_shape(o),
                                           p.steps - 1, p.dt, d));
  }

  p.goal = s.goal;
  const Vec start = belief.robot.mean.head(d);
  if (reference) {
    p.reference = *reference;
  } else if (s.robot.max_speed) {
    const Vec to_goal = s.goal - start;
    const double dist = to_goal.norm();
    for (int t = 0; t < p.steps; ++t) {
      const double along = std::min(dist, *s.robot.max_speed * p.dt * t);
      p.reference.push_back(dist > 0.0 ? Vec(start + to_goal * (along / dist)) : start);
    }
  }
  if (!s.corridor.empty()) {
    std::vector<Vec> points;
    for (int t = 0; t < p.steps; ++t) points.push_back(p.reference_at(t));
    for (int idx : assign_polyhedra(points, s.corridor)) p.corridor.push_back(s.corridor[idx]);
  }
  p.weights = CostWeights::uniform(d, p.control_dim(), s.cost.position, s.cost.terminal, s.cost.control,
                                   s.cost.control_rate);
  p.control_lower = s.robot.control_lower;
  p.control_upper = s.robot.control_upper;
  p.validate();
  return p;
}

IterOptions iter_options(const Scenario& s) {
  IterOptions o;
  o.max_iterations = s.risk.max_iterations;
  o.linearized_first = s.risk.linearized_first;
  o.tighten_bracket = s.risk.tighten_bracket;
  return o;
}

}  // namespace ccplan
