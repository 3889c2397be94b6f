#include "ccplan/motion_primitives.hpp"

#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include "ccplan/error.hpp"
#include "ccplan/estimators.hpp"
#include "ccplan/gauss_hermite.hpp"

namespace ccplan {

namespace {

constexpr double kDefaultAcceleration = 2.0;
constexpr double kDefaultRate = 1.0;
constexpr double kThrustLevels[] = {0.8, 1.0, 1.2};
// Added to the goal distance of nodes whose end position would become too
// risky if held for the rest of the horizon, so the search turns away from
// obstacles before their predicted arrival instead of backtracking late.
// The size of the miss is added on top, which steers the search out of an
// obstacle's path rather than along it.
constexpr double kConflictPenalty = 100.0;

double bound_or(const Vec& lower, const Vec& upper, int i, double fallback) {
  double m = fallback;
  if (lower.size() > i && std::isfinite(lower(i))) m = std::min(m, std::abs(lower(i)));
  if (upper.size() > i && std::isfinite(upper(i))) m = std::min(m, std::abs(upper(i)));
  return m > 0.0 ? m : fallback;
}

Vec clamp(Vec u, const Vec& lower, const Vec& upper) {
  if (lower.size() == u.size()) u = u.cwiseMax(lower);
  if (upper.size() == u.size()) u = u.cwiseMin(upper);
  return u;
}

struct Node {
  std::vector<Vec> states;  // knots covered by this node, excluding the parent's last
  std::vector<Vec> controls;
  std::vector<double> risk;
  int parent = -1;
  int last_knot = 0;
};

// Coarse state signature used to skip revisits at the same knot.
std::vector<long> signature(const Vec& x, int knot, int np) {
  std::vector<long> key{knot};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double cell = i < np ? 0.1 : 0.2;
    key.push_back(std::lround(x(i) / cell));
  }
  return key;
}

ReferenceResult straight_line(const TranscribedProblem& p, const PrimitiveOptions& opt, int expansions) {
  ReferenceResult r;
  r.degraded = true;
  r.expansions = expansions;
  const int np = p.position_dim();
  const Vec start = p.initial_state.mean.head(np);
  const Vec to_goal = p.goal - start;
  const double dist = to_goal.norm();
  for (int t = 0; t < p.steps; ++t) {
    double frac = static_cast<double>(t) / (p.steps - 1);
    if (opt.max_speed > 0.0 && dist > 0.0) frac = std::min(1.0, opt.max_speed * p.dt * t / dist);
    r.positions.push_back(start + frac * to_goal);
  }
  return r;
}

}  // namespace

std::vector<Vec> primitive_controls(const Dynamics& dyn, const Vec& x, double duration,
                                    const Vec& lower, const Vec& upper, const PrimitiveOptions& opt) {
  std::vector<Vec> out;
  if (const auto* quad = dynamic_cast<const QuadrotorModel*>(&dyn)) {
    const double roll = x(6), pitch = x(7);
    const double r_roll = opt.angular_rate > 0.0 ? opt.angular_rate : bound_or(lower, upper, 0, kDefaultRate);
    const double r_pitch = opt.angular_rate > 0.0 ? opt.angular_rate : bound_or(lower, upper, 1, kDefaultRate);
    // Three fixed rates plus the rate that levels the axis within the primitive.
    const double roll_rates[] = {-r_roll, 0.0, r_roll, -roll / duration};
    const double pitch_rates[] = {-r_pitch, 0.0, r_pitch, -pitch / duration};
    const double hover = quad->mass() * quad->gravity() / std::max(0.2, std::cos(roll) * std::cos(pitch));
    for (double rr : roll_rates) {
      for (double pr : pitch_rates) {
        for (double level : kThrustLevels) {
          Vec u(4);
          u << rr, pr, 0.0, level * hover;
          out.push_back(clamp(u, lower, upper));
        }
      }
    }
    return out;
  }
  const int d = dyn.position_dim();
  Vec a(d);
  for (int i = 0; i < d; ++i) {
    a(i) = opt.acceleration > 0.0 ? opt.acceleration : bound_or(lower, upper, i, kDefaultAcceleration);
  }
  int combos = 1;
  for (int i = 0; i < d; ++i) combos *= 3;
  for (int c = 0; c < combos; ++c) {
    Vec u(d);
    for (int i = 0, rest = c; i < d; ++i, rest /= 3) u(i) = (rest % 3 - 1) * a(i);
    out.push_back(clamp(u, lower, upper));
  }
  // Braking primitive: cancels the current velocity over the primitive.
  out.push_back(clamp(Vec(-x.tail(d) / duration), lower, upper));
  return out;
}

ReferenceResult generate_reference(const TranscribedProblem& p, double step_allocation,
                                   const std::vector<Polyhedron>& free_space,
                                   const PrimitiveOptions& opt) {
  p.validate();
  if (opt.primitive_steps < 1) throw Error(ErrorKind::kInvalidInput, "primitive_steps must be >= 1");
  if (!(step_allocation > 0.0)) throw Error(ErrorKind::kInvalidInput, "step allocation must be positive");
  if (opt.budget <= 0) return straight_line(p, opt, 0);

  const Dynamics& dyn = *p.dynamics;
  const int np = p.position_dim();
  const Mat robot_pos_cov = p.initial_state.cov.size() > 0 ? Mat(p.initial_state.cov.topLeftCorner(np, np))
                                                            : Mat::Zero(np, np);
  std::vector<std::vector<Ellipsoid>> regions(static_cast<size_t>(p.steps));
  std::vector<std::optional<Ellipsoid>> augmented(static_cast<size_t>(p.steps));
  for (int k = 1; k < p.steps; ++k) {
    for (size_t j = 0; j < p.obstacles.size(); ++j) regions[k].push_back(p.collision_shape(k, static_cast<int>(j)));
    augmented[k] = p.augmented_robot(k);
  }

  // Returns the knot risk, or a negative value when the knot is rejected.
  auto check_knot = [&](const Vec& x, int k) -> double {
    const Vec pos = x.head(np);
    if (opt.max_speed > 0.0 && x.segment(np, np).norm() > opt.max_speed + 1e-9) return -1.0;
    if (!free_space.empty()) {
      bool inside = false;
      for (const Polyhedron& poly : free_space) {
        const Vec res = augmented[k] ? corridor_residuals(pos, *augmented[k], poly) : Vec(poly.b() - poly.a() * pos);
        if (res.minCoeff() >= 0.0) {
          inside = true;
          break;
        }
      }
      if (!inside) return -1.0;
    }
    double worst = 0.0;
    for (size_t j = 0; j < p.obstacles.size(); ++j) {
      const ObstacleTrack& o = p.obstacles[j];
      const GaussianState rel{pos - o.means[k], robot_pos_cov + o.covs[k]};
      const double risk = collision_prob_gh(rel, regions[k][j], opt.quadrature_order);
      if (risk > step_allocation) return -1.0;
      worst = std::max(worst, risk);
    }
    return worst;
  };

  // How far holding `pos` for the rest of the horizon misses the allocation:
  // 0 when every later knot passes, otherwise the worst linearised residual
  // deficit. The linearised bound dominates the exact value, so it clears
  // most knots cheaply; the rest are judged with the same rule as
  // check_knot. Knots whose prediction repeats the previous one (static
  // obstacles) are skipped.
  const double residual_delta = std::min(step_allocation, kMaxStepAllocation);
  auto hold_deficit = [&](const Vec& pos, int from_knot) {
    double deficit = 0.0;
    for (size_t j = 0; j < p.obstacles.size(); ++j) {
      const ObstacleTrack& o = p.obstacles[j];
      for (int k = from_knot + 1; k < p.steps; ++k) {
        if (k > from_knot + 1 && o.means[k] == o.means[k - 1] && o.covs[k] == o.covs[k - 1]) continue;
        const GaussianState rel{pos - o.means[k], robot_pos_cov + o.covs[k]};
        const double residual = rel.mean.norm() < 1e-12
                                    ? -1.0
                                    : chance_constraint_residual(rel.mean, rel.cov, regions[k][j], residual_delta);
        if (residual >= 0.0) continue;
        if (rel.mean.norm() >= 1e-12 && collision_prob_gh(rel, regions[k][j], opt.quadrature_order) <= step_allocation) {
          continue;
        }
        deficit = std::max(deficit, -residual);
      }
    }
    return deficit;
  };
  auto priority = [&](const Vec& x, int knot) {
    const Vec pos = x.head(np);
    const double deficit = hold_deficit(pos, knot);
    return (pos - p.goal).norm() + (deficit > 0.0 ? kConflictPenalty + deficit : 0.0);
  };

  std::vector<Node> nodes;
  nodes.push_back({{p.initial_state.mean}, {}, {0.0}, -1, 0});
  using Entry = std::tuple<double, int, int>;  // distance to goal, -knot, node id
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  open.emplace(priority(p.initial_state.mean, 0), 0, 0);
  std::set<std::vector<long>> seen;
  int expansions = 0;

  while (!open.empty()) {
    const int id = std::get<2>(open.top());
    open.pop();
    if (nodes[id].last_knot == p.steps - 1) {
      ReferenceResult r;
      r.expansions = expansions;
      std::vector<int> chain;
      for (int n = id; n >= 0; n = nodes[n].parent) chain.push_back(n);
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        const Node& n = nodes[*it];
        r.states.insert(r.states.end(), n.states.begin(), n.states.end());
        r.controls.insert(r.controls.end(), n.controls.begin(), n.controls.end());
        r.step_risk.insert(r.step_risk.end(), n.risk.begin(), n.risk.end());
      }
      for (const Vec& x : r.states) r.positions.push_back(x.head(np));
      return r;
    }
    if (expansions >= opt.budget) break;
    ++expansions;

    const Vec x0 = nodes[id].states.back();
    const int k0 = nodes[id].last_knot;
    const int len = std::min(opt.primitive_steps, p.steps - 1 - k0);
    for (const Vec& u : primitive_controls(dyn, x0, len * p.dt, p.control_lower, p.control_upper, opt)) {
      Node child;
      child.parent = id;
      child.last_knot = k0 + len;
      Vec x = x0;
      bool ok = true;
      for (int s = 1; s <= len && ok; ++s) {
        x = dyn.step(x, u, p.dt);
        const double risk = check_knot(x, k0 + s);
        ok = risk >= 0.0 && x.allFinite();
        child.states.push_back(x);
        child.controls.push_back(u);
        child.risk.push_back(risk);
      }
      if (!ok || !seen.insert(signature(x, child.last_knot, np)).second) continue;
      nodes.push_back(std::move(child));
      open.emplace(priority(x, k0 + len), -(k0 + len), static_cast<int>(nodes.size()) - 1);
    }
  }
  return straight_line(p, opt, expansions);
}

}  // namespace ccplan
