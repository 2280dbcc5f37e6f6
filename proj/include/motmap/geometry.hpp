// Planar rigid-body kinematics: twists, poses, exponential/log maps, and the
// two reconstruction integrals (component-wise BVI vs. path-ordered product).
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace motmap {

/// Body-frame velocity: longitudinal, lateral, yaw rate.
struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Twist2() = default;
  Twist2(double vx_, double vy_, double omega_) : vx(vx_), vy(vy_), omega(omega_) {}

  Eigen::Vector3d vec() const { return {vx, vy, omega}; }
  static Twist2 from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

  Twist2 operator+(const Twist2& o) const { return {vx + o.vx, vy + o.vy, omega + o.omega}; }
  Twist2 operator-(const Twist2& o) const { return {vx - o.vx, vy - o.vy, omega - o.omega}; }
  Twist2 operator*(double s) const { return {vx * s, vy * s, omega * s}; }
};

/// World pose. Heading is stored unwrapped: composing incremental motions
/// accumulates theta continuously, with no modular reduction.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(theta_) {}

  static Pose2 identity() { return {}; }
  Eigen::Matrix3d matrix() const;
};

/// Wrap to (-pi, pi].
double wrap_pi(double a);
/// Wrap to [0, 2*pi).
double wrap_2pi(double a);

/// Rigid motion produced by holding body velocity xi for dt seconds.
/// Small rotations (|omega*dt| < 1e-8) use a 3-term series expansion.
Pose2 se2_exp(const Twist2& xi, double dt);

/// Unit-time twist whose exponential reproduces p; requires |theta| < pi
/// for the principal branch.
Twist2 se2_log(const Pose2& p);

Pose2 pose_compose(const Pose2& a, const Pose2& b);
Pose2 pose_inverse(const Pose2& p);

/// b expressed relative to a, i.e. inverse(a) * b.
Pose2 pose_between(const Pose2& a, const Pose2& b);

/// Rotate a world-frame vector into the frame with heading theta.
Eigen::Vector2d rotate_into_frame(double theta, const Eigen::Vector2d& world);

/// Body velocity integral: trapezoidal component-wise integral of the twist
/// sequence sampled at uniform spacing dt. Ignores frame rotation, so it
/// differs from the true displacement whenever omega is active.
Twist2 bvi(std::span<const Twist2> twists, double dt);

/// Displacement reconstructed as the left-to-right product of incremental
/// exponentials, one per sampling interval (midpoint twist per interval, so
/// it reduces to the trapezoid rule when rotations commute).
Pose2 path_ordered_integral(std::span<const Twist2> twists, double dt);

}  // namespace motmap
