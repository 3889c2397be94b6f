#pragma once

#include <vector>

#include "ccplan/corridor.hpp"
#include "ccplan/trajectory_opt.hpp"

namespace ccplan {

struct PrimitiveOptions {
  int budget = 2000;        ///< node expansions before giving up
  int primitive_steps = 5;  ///< knots covered by one constant-control primitive
  int quadrature_order = 10;
  /// Lattice step sizes; non-positive values pick defaults from the control
  /// bounds (or 2 m/s^2 and 1 rad/s without bounds).
  double acceleration = 0.0;
  double angular_rate = 0.0;
  double max_speed = 0.0;  ///< reached only when positive; used by the fallback line
};

struct ReferenceResult {
  std::vector<Vec> positions;  ///< N reference positions
  std::vector<Vec> states;     ///< N states (empty when degraded)
  std::vector<Vec> controls;   ///< N - 1 controls (empty when degraded)
  std::vector<double> step_risk;  ///< quadrature risk per knot (empty when degraded)
  bool degraded = false;       ///< straight-line fallback
  int expansions = 0;
};

/// Greedy best-first search over a lattice of constant-control primitives
/// that fills the horizon of `p` from its initial state. Every knot of a
/// kept primitive has quadrature collision probability at most
/// `step_allocation` against each obstacle of `p` (relative covariance: the
/// initial robot position covariance plus the obstacle's) and, when
/// `free_space` is non-empty, the FRS-augmented robot inside at least one of
/// its polyhedra. `p.corridor` is ignored. Nodes are ranked by distance to
/// the goal, with a fixed penalty when holding the node's end position over
/// the rest of the horizon would break the allocation, growing with the
/// size of the miss.
/// When the budget runs out (or is zero) the straight line towards the
/// goal is returned flagged degraded.
ReferenceResult generate_reference(const TranscribedProblem& p, double step_allocation,
                                   const std::vector<Polyhedron>& free_space,
                                   const PrimitiveOptions& opt = {});

/// Control set of one lattice expansion from state x.
std::vector<Vec> primitive_controls(const Dynamics& dyn, const Vec& x, double duration,
                                    const Vec& lower, const Vec& upper, const PrimitiveOptions& opt);

}  // namespace ccplan
