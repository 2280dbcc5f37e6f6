#include "motmap/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace motmap {

namespace {

constexpr double kSmallAngle = 1e-8;

// sin(t)/t and (1-cos(t))/t with series fallback near zero.
void sinc_versine(double t, double& a, double& b) {
  if (std::abs(t) < kSmallAngle) {
    const double t2 = t * t;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = t / 2.0 - t * t2 / 24.0 + t2 * t2 * t / 720.0;
  } else {
    a = std::sin(t) / t;
    const double sh = std::sin(0.5 * t);  // 1 - cos(t) = 2 sin^2(t/2), no cancellation
    b = 2.0 * sh * sh / t;
  }
}

}  // namespace

Eigen::Matrix3d Pose2::matrix() const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const double c = std::cos(theta), s = std::sin(theta);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  m(0, 2) = x;
  m(1, 2) = y;
  return m;
}

double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

double wrap_2pi(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

Pose2 se2_exp(const Twist2& xi, double dt) {
  if (dt < 0.0) throw std::invalid_argument("se2_exp: dt must be non-negative");
  const double th = xi.omega * dt;
  double a, b;
  sinc_versine(th, a, b);
  Pose2 p;
  p.x = dt * (a * xi.vx - b * xi.vy);
  p.y = dt * (b * xi.vx + a * xi.vy);
  p.theta = th;
  return p;
}

Twist2 se2_log(const Pose2& p) {
  if (std::abs(p.theta) >= std::numbers::pi)
    throw std::invalid_argument("se2_log: |theta| must be < pi");
  double a, b;
  sinc_versine(p.theta, a, b);
  const double det = a * a + b * b;
  Twist2 xi;
  xi.vx = (a * p.x + b * p.y) / det;
  xi.vy = (-b * p.x + a * p.y) / det;
  xi.omega = p.theta;
  return xi;
}

Pose2 pose_compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  Pose2 r;
  r.x = a.x + c * b.x - s * b.y;
  r.y = a.y + s * b.x + c * b.y;
  r.theta = a.theta + b.theta;
  return r;
}

Pose2 pose_inverse(const Pose2& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  Pose2 r;
  r.x = -(c * p.x + s * p.y);
  r.y = -(-s * p.x + c * p.y);
  r.theta = -p.theta;
  return r;
}

Pose2 pose_between(const Pose2& a, const Pose2& b) { return pose_compose(pose_inverse(a), b); }

Eigen::Vector2d rotate_into_frame(double theta, const Eigen::Vector2d& world) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * world.x() + s * world.y(), -s * world.x() + c * world.y()};
}

Twist2 bvi(std::span<const Twist2> twists, double dt) {
  if (twists.empty()) throw std::invalid_argument("bvi: empty twist sequence");
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (size_t i = 0; i + 1 < twists.size(); ++i)
    acc += 0.5 * dt * (twists[i].vec() + twists[i + 1].vec());
  return Twist2::from_vec(acc);
}

Pose2 path_ordered_integral(std::span<const Twist2> twists, double dt) {
  if (twists.empty()) throw std::invalid_argument("path_ordered_integral: empty twist sequence");
  Pose2 g = Pose2::identity();
  for (size_t i = 0; i + 1 < twists.size(); ++i) {
    const Twist2 mid = (twists[i] + twists[i + 1]) * 0.5;
    g = pose_compose(g, se2_exp(mid, dt));
  }
  return g;
}

}  // namespace motmap
