#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "motmap/gait.hpp"
#include "motmap/geometry.hpp"
#include "motmap/markers.hpp"
#include "motmap/trajectory.hpp"

namespace motmap {

/// Where a flipper hinges: which link, how far along it (fraction of link
/// length from the link's joint), and on which side (+1 left, -1 right).
struct FlipperAttach {
  int link = 0;  ///< 0 head, 1 middle, 2 tail
  double fraction = 0.5;
  int side = +1;
};

/// Three-link swimmer with passive spring-damped flippers under anisotropic
/// resistive drag. Lengths in meters, angles in radians.
struct SwimmerParams {
  std::array<double, 3> link_lengths{0.1, 0.1, 0.1};  ///< head, middle, tail
  double drag_tangential = 1.0;  ///< c_t per unit length
  double drag_normal = 2.0;      ///< c_n per unit length, > c_t
  double flipper_length = 0.05;
  double flipper_stiffness = 0.05;  ///< k [torque/rad]
  double flipper_damping = 0.02;    ///< c [torque s/rad]
  double flipper_rest_angle = 40.0 * std::numbers::pi / 180.0;
  double flipper_limit = 80.0 * std::numbers::pi / 180.0;  ///< max |angle - rest|
  std::vector<FlipperAttach> flipper_attach = default_flippers();
  /// First-order lag between commanded and realized motor angles [s];
  /// 0 means the motors track the command exactly.
  double servo_tau = 0.0;

  static std::vector<FlipperAttach> default_flippers();
  int n_flippers() const { return static_cast<int>(flipper_attach.size()); }
  void validate() const;
};

/// Joint angles (motors) plus flipper angles.
struct FullShape {
  Eigen::VectorXd r_a;  ///< phi1, phi2
  Eigen::VectorXd r_p;  ///< flipper angles, one per flipper
};

/// Measurement and process noise. All randomness derives from `seed`;
/// amplitudes of zero reproduce the deterministic system exactly.
///
/// The disturbance terms model what the bench robot has and the clean
/// equations lack: `shape_disturbance` perturbs the servo target (requires
/// servo_tau > 0 to act), and `flipper_disturbance` applies a random torque
/// to each flipper. Both follow Ornstein-Uhlenbeck processes with
/// correlation time `disturbance_tau`, held constant within each step.
struct NoiseSpec {
  double marker_sigma = 0.0;  ///< isotropic marker noise std [mm]
  std::uint64_t seed = 0;
  double shape_disturbance = 0.0;    ///< servo-target OU std [rad]
  double flipper_disturbance = 0.0;  ///< flipper torque OU std [torque]
  double disturbance_tau = 1.0;      ///< OU correlation time [s]
  /// Separate OU correlation time for the flipper torque channel [s];
  /// 0 means "use disturbance_tau for both channels".
  double flipper_disturbance_tau = 0.0;
  /// Damped second-order resonance of the spoke-raised markers (they sit on
  /// flexible stalks); excited by rigid-motion acceleration. Off by default.
  bool spoke_resonance = false;
  double resonance_freq_hz = 6.0;
  double resonance_damping = 0.1;  ///< dimensionless damping ratio
};

/// Pose and rotation-derivative data for one drag-bearing segment, with
/// analytic derivatives of its center and direction w.r.t. the shape
/// coordinates (phi1, phi2, flipper angles...). All in the body frame.
struct SegmentKinematics {
  Eigen::Vector2d center;
  double psi = 0.0;  ///< direction angle
  double length = 0.0;
  Eigen::Matrix2Xd dcenter;  ///< 2 x n_shape
  Eigen::VectorXd dpsi;      ///< n_shape
};

/// Segment poses and Jacobians of the swimmer at a given shape.
std::vector<SegmentKinematics> swimmer_segments(const SwimmerParams& params,
                                                const FullShape& shape);

/// Quadratic-dissipation matrix over generalized rates
/// [v_b (3) | actuated rates | passive rates]: sum over segments of
/// J^T diag(c_t L, c_n L, c_n L^3/12) J, where J maps generalized rates to
/// (tangential, normal, angular) segment rates. Symmetric positive
/// semidefinite; the body block is positive definite.
Eigen::MatrixXd dissipation_matrix(const std::vector<SegmentKinematics>& segments,
                                   double c_t, double c_n, int n_shape);

/// Dissipation matrix partitioned by coordinate role.
struct DragBlocks {
  Eigen::MatrixXd full;  ///< (3 + n_a + n_p)^2
  int n_a = 0;
  int n_p = 0;

  Eigen::Block<const Eigen::MatrixXd> bb() const { return full.block(0, 0, 3, 3); }
  Eigen::Block<const Eigen::MatrixXd> ba() const { return full.block(0, 3, 3, n_a); }
  Eigen::Block<const Eigen::MatrixXd> bp() const { return full.block(0, 3 + n_a, 3, n_p); }
  Eigen::Block<const Eigen::MatrixXd> pb() const { return full.block(3 + n_a, 0, n_p, 3); }
  Eigen::Block<const Eigen::MatrixXd> pa() const { return full.block(3 + n_a, 3, n_p, n_a); }
  Eigen::Block<const Eigen::MatrixXd> pp() const {
    return full.block(3 + n_a, 3 + n_a, n_p, n_p);
  }
};

DragBlocks drag_matrices(const SwimmerParams& params, const FullShape& shape);

/// The closed-form locomotion maps at one shape:
///   v_b = A r_a' + B,   r_p' = C r_a' + D.
struct SudsMaps {
  Eigen::MatrixXd A;  ///< 3 x n_a
  Eigen::Vector3d B;
  Eigen::MatrixXd C;  ///< n_p x n_a
  Eigen::VectorXd D;
};

/// Solve the quasi-static force balance
///   [M_bb M_bp; M_pb M_pp + cI] [v_b; r_p'] = -[M_ba; M_pa] r_a'
///                                             + [0; -k (r_p - rest)]
/// for the affine maps. Throws std::runtime_error on a singular balance
/// system (never silently regularized).
SudsMaps suds_oracle(const SwimmerParams& params, const FullShape& shape);

/// Everything one simulated trial produces.
struct SimResult {
  Trajectory truth;     ///< exact states: r_p = flipper angles (n_p = n_flippers)
  Trajectory observed;  ///< marker-pipeline output: r_p = 12-dim passive state
  std::vector<SudsMaps> oracle;     ///< per truth sample
  std::vector<MarkerFrame> markers; ///< synthetic capture, noise applied
  Rig rig;
  JumpReport ingest_report;
};

/// Marker rig matching synthesize_markers for the given swimmer.
Rig default_rig(const SwimmerParams& params);

/// Synthetic capture frame [mm] for a swimmer at `pose` (world, meters) with
/// the given shape; noise-free. Marker layout matches default_rig(params).
MarkerFrame synthesize_markers(const SwimmerParams& params, const Pose2& pose,
                               const FullShape& shape, double t);

/// Integrate the swimmer under the commanded gait with fixed-step RK4 at the
/// sample rate (requires sample_rate >= 20 * frequency). Passive angles start
/// at `initial_rp` (rest when empty). Emits n_cycles * sample_rate/frequency
/// samples, the per-sample closed-form maps, synthetic markers, and the
/// marker-pipeline ("observed") trajectory (left empty for runs under 3
/// samples, too short to differentiate). Deterministic given noise.seed.
/// Throws std::runtime_error if the energy-rate check detects an unstable
/// step.
SimResult simulate(const SwimmerParams& params, const GaitSpec& gait, double frequency,
                   double n_cycles, double sample_rate, const NoiseSpec& noise,
                   const Eigen::VectorXd& initial_rp = Eigen::VectorXd());

/// Flattened per-sample oracle CSV: t, A row-major, B, C row-major, D.
void save_oracle_csv(const std::vector<SudsMaps>& rows, const Trajectory& truth,
                     const std::string& path);

/// Derive a decorrelated child seed from a root seed and a stream index.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

}  // namespace motmap
