#include "ccplan/models.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>

#include "ccplan/error.hpp"

namespace ccplan {

namespace {

std::mutex g_sink_mutex;
WarningSink g_sink;
std::atomic<bool> g_gimbal_warned{false};

void warn(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink) {
    g_sink(msg);
  } else {
    std::cerr << "warning: " << msg << '\n';
  }
}

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorKind::kInvalidInput, std::string(what) + " is not finite");
}

// Elementary rotations and their derivatives with respect to the angle.
Eigen::Matrix3d rot_x(double a, bool deriv) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  if (deriv) {
    r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  } else {
    r << 1, 0, 0, 0, c, -s, 0, s, c;
  }
  return r;
}

Eigen::Matrix3d rot_y(double a, bool deriv) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  if (deriv) {
    r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  } else {
    r << c, 0, s, 0, 1, 0, -s, 0, c;
  }
  return r;
}

Eigen::Matrix3d rot_z(double a, bool deriv) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  if (deriv) {
    r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  } else {
    r << c, -s, 0, s, c, 0, 0, 0, 1;
  }
  return r;
}

// dR/d(roll), dR/d(pitch), dR/d(yaw) for R = Rz Ry Rx.
std::array<Eigen::Matrix3d, 3> rotation_partials(double roll, double pitch, double yaw) {
  const Eigen::Matrix3d rx = rot_x(roll, false), ry = rot_y(pitch, false), rz = rot_z(yaw, false);
  return {rz * ry * rot_x(roll, true), rz * rot_y(pitch, true) * rx, rot_z(yaw, true) * ry * rx};
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  g_sink = std::move(sink);
}

// ---------------------------------------------------------------------------
// Point mass

PointMassModel::PointMassModel(int dim) : dim_(dim) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::kDimensionMismatch, "point mass must be 2D or 3D");
}

Vec PointMassModel::step(const Vec& x, const Vec& u, double dt) const {
  return linearize(x, u, dt).next;
}

StepJacobian PointMassModel::linearize(const Vec& x, const Vec& u, double dt) const {
  if (x.size() != state_dim() || u.size() != control_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "point-mass state/control size");
  }
  if (!(dt > 0.0)) throw Error(ErrorKind::kOutOfRange, "dt must be positive");
  const int d = dim_;
  StepJacobian j;
  j.fx = Mat::Identity(2 * d, 2 * d);
  j.fx.block(0, d, d, d) = dt * Mat::Identity(d, d);
  j.fu = Mat::Zero(2 * d, d);
  j.fu.topRows(d) = 0.5 * dt * dt * Mat::Identity(d, d);
  j.fu.bottomRows(d) = dt * Mat::Identity(d, d);
  j.next = j.fx * x + j.fu * u;
  return j;
}

// ---------------------------------------------------------------------------
// Quadrotor

QuadrotorModel::QuadrotorModel(double mass, double gravity) : mass_(mass), gravity_(gravity) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw Error(ErrorKind::kOutOfRange, "mass must be positive");
  if (!std::isfinite(gravity)) throw Error(ErrorKind::kInvalidInput, "gravity is not finite");
}

void QuadrotorModel::validate(const Vec& x, const Vec& u, double dt) const {
  if (x.size() != kStateDim || u.size() != kControlDim) {
    throw Error(ErrorKind::kDimensionMismatch, "quadrotor state/control size");
  }
  if (!(dt > 0.0)) throw Error(ErrorKind::kOutOfRange, "dt must be positive");
  require_finite(x, "quadrotor state");
  require_finite(u, "quadrotor control");
  // Thrust sign is left to the control bounds: optimiser iterates may probe
  // slightly negative thrust before the bounds are met.
  if (std::abs(x(7)) > kGimbalWarnPitch && !g_gimbal_warned.exchange(true)) {
    warn("quadrotor pitch beyond 1.4 rad; Euler angles are close to gimbal lock");
  }
}

Vec QuadrotorModel::derivative(const Vec& x, const Vec& u) const {
  const double cr = std::cos(x(6)), sr = std::sin(x(6));
  const double cp = std::cos(x(7)), sp = std::sin(x(7));
  const double cy = std::cos(x(8)), sy = std::sin(x(8));
  const double a = u(3) / mass_;
  Vec dx(kStateDim);
  dx.segment<3>(0) = x.segment<3>(3);
  dx(3) = a * (cy * sp * cr + sy * sr);
  dx(4) = a * (sy * sp * cr - cy * sr);
  dx(5) = a * cp * cr - gravity_;
  dx.segment<3>(6) = u.segment<3>(0);
  return dx;
}

void QuadrotorModel::derivative_jacobians(const Vec& x, const Vec& u, Mat& a, Mat& b) const {
  const double cr = std::cos(x(6)), sr = std::sin(x(6));
  const double cp = std::cos(x(7)), sp = std::sin(x(7));
  const double cy = std::cos(x(8)), sy = std::sin(x(8));
  const double f = u(3) / mass_;
  a = Mat::Zero(kStateDim, kStateDim);
  b = Mat::Zero(kStateDim, kControlDim);
  a.block<3, 3>(0, 3).setIdentity();
  // Thrust direction R e3 and its angle partials.
  a(3, 6) = f * (-cy * sp * sr + sy * cr);
  a(4, 6) = f * (-sy * sp * sr - cy * cr);
  a(5, 6) = f * (-cp * sr);
  a(3, 7) = f * (cy * cp * cr);
  a(4, 7) = f * (sy * cp * cr);
  a(5, 7) = f * (-sp * cr);
  a(3, 8) = f * (-sy * sp * cr + cy * sr);
  a(4, 8) = f * (cy * sp * cr + sy * sr);
  b(3, 3) = (cy * sp * cr + sy * sr) / mass_;
  b(4, 3) = (sy * sp * cr - cy * sr) / mass_;
  b(5, 3) = cp * cr / mass_;
  b.block<3, 3>(6, 0).setIdentity();
}

Vec QuadrotorModel::step(const Vec& x, const Vec& u, double dt) const {
  validate(x, u, dt);
  const Vec k1 = derivative(x, u);
  const Vec k2 = derivative(x + 0.5 * dt * k1, u);
  const Vec k3 = derivative(x + 0.5 * dt * k2, u);
  const Vec k4 = derivative(x + dt * k3, u);
  Vec next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  for (int i = 6; i < 9; ++i) next(i) = wrap_angle(next(i));
  return next;
}

StepJacobian QuadrotorModel::linearize(const Vec& x, const Vec& u, double dt) const {
  validate(x, u, dt);
  const Mat eye = Mat::Identity(kStateDim, kStateDim);
  Mat a, b;

  // Chain rule through the four RK4 stages.
  const Vec k1 = derivative(x, u);
  derivative_jacobians(x, u, a, b);
  const Mat k1x = a, k1u = b;

  const Vec x2 = x + 0.5 * dt * k1;
  const Vec k2 = derivative(x2, u);
  derivative_jacobians(x2, u, a, b);
  const Mat k2x = a * (eye + 0.5 * dt * k1x);
  const Mat k2u = a * (0.5 * dt * k1u) + b;

  const Vec x3 = x + 0.5 * dt * k2;
  const Vec k3 = derivative(x3, u);
  derivative_jacobians(x3, u, a, b);
  const Mat k3x = a * (eye + 0.5 * dt * k2x);
  const Mat k3u = a * (0.5 * dt * k2u) + b;

  const Vec x4 = x + dt * k3;
  const Vec k4 = derivative(x4, u);
  derivative_jacobians(x4, u, a, b);
  const Mat k4x = a * (eye + dt * k3x);
  const Mat k4u = a * (dt * k3u) + b;

  StepJacobian j;
  j.next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  for (int i = 6; i < 9; ++i) j.next(i) = wrap_angle(j.next(i));
  j.fx = eye + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  j.fu = dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return j;
}

Vec QuadrotorModel::state_difference(const Vec& a, const Vec& b) const {
  Vec d = a - b;
  for (int i = 6; i < 9; ++i) d(i) = wrap_angle(d(i));
  return d;
}

Vec QuadrotorModel::nominal_control() const {
  Vec u = Vec::Zero(kControlDim);
  u(3) = mass_ * gravity_;
  return u;
}

// ---------------------------------------------------------------------------
// Obstacle

Vec ObstacleModel::step(const Vec& y, double dt) { return linearize(y, dt).next; }

StepJacobian ObstacleModel::linearize(const Vec& y, double dt) {
  if (y.size() != kStateDim) throw Error(ErrorKind::kDimensionMismatch, "obstacle state size");
  if (!(dt > 0.0)) throw Error(ErrorKind::kOutOfRange, "dt must be positive");
  require_finite(y, "obstacle state");
  const double roll = y(6), pitch = y(7), yaw = y(8);
  const Eigen::Vector3d v = y.segment<3>(3);
  const Eigen::Matrix3d r = rotation_rpy(roll, pitch, yaw);
  const auto partials = rotation_partials(roll, pitch, yaw);

  StepJacobian j;
  j.next = y;
  j.next.segment<3>(0) += dt * (r * v);
  for (int i = 0; i < 3; ++i) j.next(6 + i) = wrap_angle(y(6 + i) + dt * y(9 + i));
  j.fx = Mat::Identity(kStateDim, kStateDim);
  j.fx.block<3, 3>(0, 3) = dt * r;
  for (int i = 0; i < 3; ++i) j.fx.block<3, 1>(0, 6 + i) = dt * (partials[i] * v);
  j.fx.block<3, 3>(6, 9) = dt * Eigen::Matrix3d::Identity();
  j.fu = Mat::Zero(kStateDim, 0);
  return j;
}

Vec ObstacleModel::make_state(const Eigen::Vector3d& position,
                              const Eigen::Vector3d& world_velocity, double yaw) {
  Vec y = Vec::Zero(kStateDim);
  y.segment<3>(0) = position;
  y.segment<3>(3) = rotation_rpy(0.0, 0.0, yaw).transpose() * world_velocity;
  y(8) = wrap_angle(yaw);
  return y;
}

// ---------------------------------------------------------------------------
// Propagation

std::vector<Mat> propagate_covariance(const Mat& sigma0, const std::vector<Mat>& jacobians,
                                      const Mat& w) {
  if (sigma0.rows() != sigma0.cols() || w.rows() != sigma0.rows() || w.cols() != sigma0.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "covariance propagation sizes");
  }
  std::vector<Mat> out;
  out.reserve(jacobians.size() + 1);
  out.push_back(symmetrize(sigma0));
  for (const Mat& f : jacobians) {
    if (f.rows() != sigma0.rows() || f.cols() != sigma0.cols()) {
      throw Error(ErrorKind::kDimensionMismatch, "Jacobian size");
    }
    out.push_back(symmetrize(f * out.back() * f.transpose() + w));
  }
  return out;
}

Rollout rollout(const Dynamics& dyn, const Vec& x0, const std::vector<Vec>& controls, double dt) {
  Rollout r;
  r.states.reserve(controls.size() + 1);
  r.jacobians.reserve(controls.size());
  r.states.push_back(x0);
  for (const Vec& u : controls) {
    StepJacobian j = dyn.linearize(r.states.back(), u, dt);
    r.states.push_back(std::move(j.next));
    r.jacobians.push_back(std::move(j.fx));
  }
  return r;
}

ObstacleTrack predict_obstacle(const GaussianState& y0, const Mat& v_noise, const Ellipsoid& shape,
                               int steps, double dt, int dim) {
  if (y0.mean.size() != ObstacleModel::kStateDim) {
    throw Error(ErrorKind::kDimensionMismatch, "obstacle state size");
  }
  if (dim != shape.dim() || (dim != 2 && dim != 3)) {
    throw Error(ErrorKind::kDimensionMismatch, "obstacle shape dimension");
  }
  if (steps < 0) throw Error(ErrorKind::kOutOfRange, "negative step count");
  validate(y0);
  std::vector<Vec> states{y0.mean};
  std::vector<Mat> jacobians;
  for (int t = 0; t < steps; ++t) {
    StepJacobian j = ObstacleModel::linearize(states.back(), dt);
    states.push_back(std::move(j.next));
    jacobians.push_back(std::move(j.fx));
  }
  const std::vector<Mat> covs = propagate_covariance(y0.cov, jacobians, v_noise);
  ObstacleTrack track{{}, {}, shape};
  for (int t = 0; t <= steps; ++t) {
    track.means.push_back(states[t].head(dim));
    track.covs.push_back(covs[t].topLeftCorner(dim, dim));
  }
  return track;
}

Ellipsoid augmented_shape(const Ellipsoid& qx, const Ellipsoid& qd, const Ellipsoid& qo) {
  return minkowski_outer(minkowski_outer(qx, qd), qo);
}

Ellipsoid collision_region(const std::optional<Ellipsoid>& qx, const std::optional<Ellipsoid>& qd,
                           const Ellipsoid& qo) {
  std::optional<Ellipsoid> robot = qx;
  if (qd) robot = robot ? minkowski_outer(*robot, *qd) : *qd;
  return robot ? minkowski_outer(*robot, qo) : qo;
}

}  // namespace ccplan
