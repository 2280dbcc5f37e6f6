#pragma once

#include <vector>

#include "motmap/gait.hpp"
#include "motmap/trajectory.hpp"

namespace motmap {

/// Partition of a trajectory's samples into K equal phase bins on [0, 2*pi):
/// sample n with phase phi lands in bin floor(K*phi/2*pi).
struct PhaseBins {
  int K = 0;
  std::vector<std::vector<int>> members;  ///< sample indices per bin
  std::vector<int> empty;                 ///< indices of empty bins (warning, not failure)

  double center(int k) const;  ///< bin-center phase 2*pi*(k + 0.5)/K
  std::size_t total() const;   ///< sum of bin populations
};

/// Set each sample's phase to the commanded gait angle theta(t) mod 2*pi.
/// The rate comes from traj.frequency when positive, else from 1/gait.period.
Trajectory phase_from_command(const Trajectory& traj, const GaitSpec& gait);

/// Estimate a phase for every sample from the actuated shape alone:
/// project r_a onto its first two mean-centered principal axes, take the
/// winding angle, unwrap it, and straighten it with a monotone
/// piecewise-linear map so the average rate is uniform. The global offset is
/// fixed by aligning phi = 0 with the maximum of the first principal
/// coordinate. Requires at least 3 full cycles; throws std::runtime_error on
/// non-rhythmic data (unwrapped angle not monotone after smoothing).
Trajectory estimate_phase(const Trajectory& traj);

/// Bin samples by phase; K >= 4.
PhaseBins bin_by_phase(const Trajectory& traj, int K = 24);

}  // namespace motmap
