#pragma once

#include <Eigen/Dense>
#include <vector>

namespace motmap {

/// Truncated real Fourier series on [0, 2*pi):
///   f(phi) = a0 + sum_h a[h-1]*cos(h*phi) + b[h-1]*sin(h*phi).
///
/// Used for nominal-gait curves and for interpolating per-bin model
/// coefficients smoothly across the phase circle.
struct FourierSeries {
  double a0 = 0.0;
  std::vector<double> a;  ///< cosine coefficients, harmonics 1..H
  std::vector<double> b;  ///< sine coefficients, harmonics 1..H

  int harmonics() const { return static_cast<int>(a.size()); }

  double value(double phi) const;

  /// d f / d phi.
  double derivative(double phi) const;

  /// Least-squares fit with `harmonics` harmonics to samples (phi[i], y[i]).
  ///
  /// With ridge == 0 the fit is solved by column-pivoted QR and throws
  /// std::runtime_error if the design matrix is rank deficient (e.g. fewer
  /// distinct phases than coefficients). With ridge > 0 the normal equations
  /// are regularized instead, which always yields a solution.
  static FourierSeries fit(const std::vector<double>& phi, const std::vector<double>& y,
                           int harmonics, double ridge = 0.0);
};

}  // namespace motmap
