#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "motmap/geometry.hpp"
#include "motmap/trajectory.hpp"

namespace motmap {

/// One motion-capture frame: 3-D marker positions in millimeters with
/// per-marker validity (dropouts arrive as NaN and are marked invalid).
struct MarkerFrame {
  double t = 0.0;  ///< [s]
  std::vector<Eigen::Vector3d> pos;
  std::vector<bool> valid;

  int n_markers() const { return static_cast<int>(pos.size()); }
};

/// Marker-role map for one instrumented segment: the two top-face markers
/// define the segment plane patch; the motor-axis (joint) location is a fixed
/// affine combination of them,
///   joint = centroid + lambda*(mB - mA) + rho*R90*(mB - mA),
/// with (lambda, rho) determined by the rig geometry. The segment X axis runs
/// from the joint through the top-marker centroid.
struct SegmentRig {
  std::array<int, 2> top_markers{};
  int spoke_marker = -1;  ///< raised marker contributing to the passive state
  double lambda = 0.0;
  double rho = 0.0;
};

/// Full marker-role map plus the rig constants ingest needs.
struct Rig {
  int n_markers = 11;
  SegmentRig head, tail;
  int lowered_marker = -1;           ///< extra tail marker, unused by the fit
  std::vector<int> flipper_markers;  ///< one marker per flipper
  std::vector<int> flipper_segment;  ///< 0 = head segment, 1 = tail segment
  double joint_distance = 0.0;       ///< rig distance between motor axes [mm]
  double unit_scale = 1e-3;          ///< mm -> trajectory length units

  void validate() const;
};

void save_rig(const Rig& rig, const std::string& path);
Rig load_rig(const std::string& path);

/// Marker CSV: header `t,m0x,m0y,m0z,...`; NaN entries mark dropouts.
void save_markers(const std::vector<MarkerFrame>& frames, const std::string& path);
std::vector<MarkerFrame> load_markers(const std::string& path);

struct JumpReport {
  std::size_t total_points = 0;    ///< markers x frames
  std::size_t jump_flagged = 0;    ///< flagged by the displacement scan
  std::size_t input_invalid = 0;   ///< NaN/invalid on arrival
  std::size_t trimmed_frames = 0;  ///< boundary frames dropped (no extrapolation)
  double removed_fraction = 0.0;   ///< jump_flagged / total_points
};

/// Scan each marker track for inter-frame displacements larger than
/// `threshold` (mm) and invalidate the arrival point of every such jump (a
/// one-frame spike therefore loses itself and its successor). Invalid runs
/// are refilled by linear interpolation between the nearest valid neighbors;
/// runs touching a recording boundary cannot be interpolated, so those frames
/// are trimmed instead.
std::pair<std::vector<MarkerFrame>, JumpReport> remove_jumps(
    const std::vector<MarkerFrame>& frames, double threshold = 9.0);

/// Orthonormal 2-D chart on the swim plane; used to express all planar
/// quantities of a recording in one fixed frame.
struct PlaneChart {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d = p - origin;
    return {d.dot(e1), d.dot(e2)};
  }
};

/// Least-squares plane through the top-face markers of all given frames;
/// the in-plane X axis is the projection of the world X axis, and the normal
/// is oriented along +Z.
PlaneChart fit_plane_chart(const std::vector<MarkerFrame>& frames, const Rig& rig);

/// Body and segment poses in chart coordinates [mm].
struct BodyFit {
  Pose2 body;  ///< origin: midpoint of the motor axes; X: tail axis -> head axis
  Pose2 head_segment;  ///< origin: head motor axis; X: toward top-marker centroid
  Pose2 tail_segment;  ///< origin: tail motor axis; X: toward top-marker centroid
};

/// Fit the body frame of a single frame in the given chart. The two motor-axis
/// points are reconstructed from the segment top markers and then corrected,
/// symmetrically along their connecting line, to the rig's constant joint
/// distance (least-squares with the distance constraint exact).
BodyFit fit_body_frame(const MarkerFrame& frame, const Rig& rig, const PlaneChart& chart);

/// Convenience overload fitting a chart from this frame's own top markers.
BodyFit fit_body_frame(const MarkerFrame& frame, const Rig& rig);

/// Motor angles recovered from the segment headings.
Eigen::Vector2d actuated_angles(const BodyFit& fit);

/// The 12-dimensional passive state: XY of the two spoke markers in the body
/// frame followed by XY of each flipper marker in its segment frame, all in
/// mm. Cartesian on purpose; no inverse trigonometry.
Eigen::VectorXd passive_state_vector(const MarkerFrame& frame, const Rig& rig, const BodyFit& fit,
                                     const PlaneChart& chart);

/// Full marker-to-trajectory pipeline: jump removal, global plane chart, body
/// frames, motor angles, 12-dim passive state, and finite-difference
/// velocities (body velocity from pose differences, in unit_scale lengths).
/// Phase is left at zero; callers assign it.
Trajectory ingest_trajectory(const std::vector<MarkerFrame>& frames, const Rig& rig,
                             double sample_rate, const std::string& gait_id, double frequency,
                             const std::string& trial_id, JumpReport* report = nullptr,
                             double jump_threshold = 9.0);

}  // namespace motmap
