#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "motmap/fourier.hpp"

namespace motmap {

/// Commanded periodic gait: one Fourier series per actuated coordinate,
/// parameterized by the gait angle theta in [0, 2*pi).
struct GaitSpec {
  std::string label;                 ///< "O", "D-", "D+", "S-", "S+", or user-defined
  double period = 1.0;               ///< nominal period [s]; runs may override via frequency
  std::vector<FourierSeries> coords; ///< one series per actuated coordinate

  int n_a() const { return static_cast<int>(coords.size()); }
};

/// Evaluate commanded shape and its theta-derivative at gait angle theta.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gait_eval(const GaitSpec& g, double theta);

/// The five benchmark gaits, ordered along the similarity axis used for
/// gait-distance categories: S+, S-, O, D-, D+.
///
/// O is the unit circle (phi1 = cos theta, phi2 = sin theta). The D gaits add
/// a third harmonic with amplitude 1/9 (D-) or 1/4 (D+) as +cos(3 theta) on
/// phi1 and -sin(3 theta) on phi2; the S gaits use the opposite signs.
std::vector<GaitSpec> gait_library();

/// Look up a library gait by label; throws std::invalid_argument if unknown.
GaitSpec gait_by_label(const std::string& label);

/// Index of a label along the similarity axis S+, S-, O, D-, D+ (0..4);
/// throws std::invalid_argument if the label is not a library gait.
int gait_axis_index(const std::string& label);

}  // namespace motmap
