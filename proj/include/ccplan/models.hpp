#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccplan/ellipsoid.hpp"

namespace ccplan {

/// Discrete step x_{t+1} = f(x_t, u_t) together with its Jacobians.
struct StepJacobian {
  Vec next;
  Mat fx;  ///< d next / d x
  Mat fu;  ///< d next / d u
};

/// Robot dynamics as consumed by the transcription. The first
/// position_dim() state entries are the robot position.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual int position_dim() const = 0;

  virtual Vec step(const Vec& x, const Vec& u, double dt) const = 0;
  virtual StepJacobian linearize(const Vec& x, const Vec& u, double dt) const = 0;

  /// Maps a state difference onto its shortest representative (angles are
  /// wrapped). Used for dynamics defects.
  virtual Vec state_difference(const Vec& a, const Vec& b) const { return a - b; }

  /// Control that holds the robot still at any position (zero for the point
  /// mass, hover thrust for the quadrotor). Costs penalise u - nominal.
  virtual Vec nominal_control() const { return Vec::Zero(control_dim()); }
};

/// Double integrator in 2 or 3 dimensions. State (p, v), control is the
/// acceleration. The zero-order-hold discretisation is exact.
class PointMassModel final : public Dynamics {
 public:
  explicit PointMassModel(int dim);

  std::string name() const override { return "point_mass"; }
  int state_dim() const override { return 2 * dim_; }
  int control_dim() const override { return dim_; }
  int position_dim() const override { return dim_; }

  Vec step(const Vec& x, const Vec& u, double dt) const override;
  StepJacobian linearize(const Vec& x, const Vec& u, double dt) const override;

 private:
  int dim_;
};

/// Quadrotor with tracked Euler-angle rates. State
/// [p (3), v (3), roll, pitch, yaw], control [roll rate, pitch rate, yaw rate, thrust].
///   p' = v,  v' = R(roll, pitch, yaw) [0, 0, f]^T / m - [0, 0, g],  angles' = rate commands.
/// Discretised with one classical RK4 step; angles are wrapped afterwards.
class QuadrotorModel final : public Dynamics {
 public:
  static constexpr int kStateDim = 9;
  static constexpr int kControlDim = 4;
  /// Pitch magnitude above which Euler angles approach gimbal lock.
  static constexpr double kGimbalWarnPitch = 1.4;

  explicit QuadrotorModel(double mass = 1.0, double gravity = 9.81);

  std::string name() const override { return "quadrotor"; }
  int state_dim() const override { return kStateDim; }
  int control_dim() const override { return kControlDim; }
  int position_dim() const override { return 3; }

  double mass() const { return mass_; }
  double gravity() const { return gravity_; }

  Vec step(const Vec& x, const Vec& u, double dt) const override;
  StepJacobian linearize(const Vec& x, const Vec& u, double dt) const override;
  Vec state_difference(const Vec& a, const Vec& b) const override;
  Vec nominal_control() const override;

  /// Continuous-time vector field and its Jacobians (unwrapped).
  Vec derivative(const Vec& x, const Vec& u) const;
  void derivative_jacobians(const Vec& x, const Vec& u, Mat& a, Mat& b) const;

 private:
  void validate(const Vec& x, const Vec& u, double dt) const;

  double mass_;
  double gravity_;
};

/// Called with a human-readable message when a model detects a condition
/// worth reporting but not fatal (gimbal proximity). Defaults to stderr,
/// once per process per condition.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);

/// Constant-velocity obstacle, state
/// [q (3), body velocity (3), roll, pitch, yaw, roll rate, pitch rate, yaw rate].
/// One explicit Euler step: q += R v dt, angles += rates dt.
class ObstacleModel {
 public:
  static constexpr int kStateDim = 12;

  static Vec step(const Vec& y, double dt);
  static StepJacobian linearize(const Vec& y, double dt);

  /// State with the given world position, world-frame velocity and yaw,
  /// zero roll/pitch and zero angular rates.
  static Vec make_state(const Eigen::Vector3d& position, const Eigen::Vector3d& world_velocity,
                        double yaw = 0.0);
};

/// Sigma_{t+1} = F_t Sigma_t F_t^T + W, symmetrised after every update.
/// Returns jacobians.size() + 1 covariances starting with sigma0.
std::vector<Mat> propagate_covariance(const Mat& sigma0, const std::vector<Mat>& jacobians,
                                      const Mat& w);

/// Nominal robot rollout from x0 under the controls, with per-step
/// Jacobians d x_{t+1} / d x_t.
struct Rollout {
  std::vector<Vec> states;
  std::vector<Mat> jacobians;
};
Rollout rollout(const Dynamics& dyn, const Vec& x0, const std::vector<Vec>& controls, double dt);

/// Predicted obstacle position distribution per step (t = 0..steps).
struct ObstacleTrack {
  std::vector<Vec> means;  ///< position means, dimension `dim`
  std::vector<Mat> covs;   ///< position covariances
  Ellipsoid shape;
};

/// Propagates a 12-dimensional obstacle state and its covariance with the
/// constant-velocity model, keeping the leading `dim` position components.
ObstacleTrack predict_obstacle(const GaussianState& y0, const Mat& v_noise, const Ellipsoid& shape,
                               int steps, double dt, int dim);

/// Q_x (+) Q_d (+) Q_o with the outer Minkowski bound, folded left to right.
Ellipsoid augmented_shape(const Ellipsoid& qx, const Ellipsoid& qd, const Ellipsoid& qo);

/// Collision region for optional robot and disturbance shapes; absent parts
/// are skipped (a point robot yields the obstacle shape itself).
Ellipsoid collision_region(const std::optional<Ellipsoid>& qx, const std::optional<Ellipsoid>& qd,
                           const Ellipsoid& qo);

}  // namespace ccplan
