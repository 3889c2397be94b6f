#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccplan/error.hpp"
#include "ccplan/motion_primitives.hpp"
#include "ccplan/scenario.hpp"

namespace ccplan {

/// Exit codes shared by every command.
enum ExitCode { kExitOk = 0, kExitInvalidInput = 2, kExitNotConverged = 3, kExitInternal = 4 };

/// Exit code for a library error: bad input maps to 2, infeasibility and
/// non-convergence to 3.
int exit_code_for(ErrorKind kind);

/// A scenario argument is a file path, or the name of a bundled scenario
/// ("scene1" resolves to <bundled dir>/scene1.json).
std::filesystem::path resolve_scenario(const std::string& name_or_path);
std::filesystem::path bundled_scenario_dir();

struct PlanOutput {
  TranscribedProblem problem;
  IterResult result;
  RiskReport risk;
  std::optional<ReferenceResult> reference;
  double seconds = 0.0;
};

/// One-horizon plan from the scenario's initial belief. With
/// `use_primitives` the tracking reference comes from the primitive search,
/// otherwise it is the straight (speed-capped) line to the goal.
PlanOutput run_plan(const Scenario& s, bool use_primitives = false);

/// Writes trajectory.json (states, controls, risk report, trace),
/// trajectory.csv (per-knot plot data) and trace.csv (one row per
/// Algorithm-1 iteration) into `dir`, creating it when needed.
void write_plan_outputs(const Scenario& s, const PlanOutput& out, const std::filesystem::path& dir);

/// Every estimator on a single relative-position distribution and region.
struct EstimateRow {
  std::string estimator;
  double value = 0.0;
  double half_width_3sigma = 0.0;  ///< Monte Carlo only
  double seconds = 0.0;
};
std::vector<EstimateRow> run_estimate(const GaussianState& rel, const Ellipsoid& region, int gh_order,
                                      long mc_samples, std::uint64_t seed);
void print_estimate_table(std::ostream& out, const std::vector<EstimateRow>& rows);
/// Machine-readable record; timing is included only on request.
std::string estimate_json(const GaussianState& rel, const Ellipsoid& region,
                          const std::vector<EstimateRow>& rows, bool with_timing);

}  // namespace ccplan
