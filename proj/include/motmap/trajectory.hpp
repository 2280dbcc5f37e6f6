#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "motmap/geometry.hpp"

namespace motmap {

/// Shape split into actuated coordinates (motor angles) and passive
/// coordinates (flipper angles in simulation; PCA scores after ingest).
struct ShapeState {
  Eigen::VectorXd r_a;
  Eigen::VectorXd r_p;
};

struct Sample {
  double t = 0.0;      ///< [s]
  double phase = 0.0;  ///< gait phase in [0, 2*pi)
  ShapeState shape;
  Eigen::VectorXd dshape_a;  ///< d(r_a)/dt
  Eigen::VectorXd dshape_p;  ///< d(r_p)/dt
  Twist2 vb;                 ///< body velocity
};

/// Uniformly sampled run of one gait at one frequency.
///
/// `poses` optionally carries world poses alongside the samples (same length
/// when present); they are produced by the simulator and by marker ingest and
/// consumed by finite_difference_velocities, but are not part of the CSV
/// serialization.
struct Trajectory {
  std::vector<Sample> samples;
  double sample_rate = 0.0;  ///< [Hz]
  std::string gait_id;
  double frequency = 0.0;  ///< gait frequency [Hz]
  std::string trial_id;
  std::vector<Pose2> poses;

  int n_a() const;
  int n_p() const;
  double dt() const { return 1.0 / sample_rate; }

  /// Throws std::invalid_argument if time stamps are not uniform at
  /// 1/sample_rate, fewer than 2 samples, or dimensions are inconsistent.
  void validate() const;
};

/// Write `csv_path` plus a metadata sidecar at the same path with the
/// extension replaced by ".json".
void save_trajectory(const Trajectory& traj, const std::string& csv_path);

/// Read a trajectory written by save_trajectory (CSV + JSON sidecar).
Trajectory load_trajectory(const std::string& csv_path);

/// Fill dshape_a/dshape_p by central differences (second-order one-sided at
/// the ends) and, when poses are present, fill vb from pose differences
/// mapped into the body frame at the midpoint heading. Requires >= 3 samples.
Trajectory finite_difference_velocities(const Trajectory& traj);

/// Keep every `factor`-th sample (no anti-alias filter), dividing the sample
/// rate accordingly. factor >= 1.
Trajectory decimate(const Trajectory& traj, int factor);

}  // namespace motmap
