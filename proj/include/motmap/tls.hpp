#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "motmap/fourier.hpp"
#include "motmap/phase.hpp"
#include "motmap/trajectory.hpp"

namespace motmap {

/// What the phase-binned linear learner regresses on and predicts.
///
///  - plain:      targets = body twist; offsets taken in the actuated
///                coordinates only.
///  - suds:       targets = body twist and passive shape rates; offsets taken
///                in the actuated and passive coordinates jointly.
///  - phase_only: constant-regressor degenerate case — per-bin target means
///                interpolated across phase; shape inputs are ignored.
enum class TlsMode { plain, suds, phase_only };

/// Cycle-average shape curve r_bar(phi), one Fourier series per shape
/// coordinate (actuated coordinates first, then passive ones).
struct NominalGait {
  int n_a = 0;
  std::vector<FourierSeries> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  Eigen::VectorXd value(double phi) const;
  /// d r_bar / d phi (analytic derivative of the series).
  Eigen::VectorXd derivative(double phi) const;
};

/// Per-sample deviations from a nominal gait.
struct ShapeOffsets {
  Eigen::MatrixXd delta;       ///< rows: samples; r - r_bar(phi)
  Eigen::MatrixXd delta_rate;  ///< rdot - r_bar'(phi) * phase_rate
  Eigen::VectorXd phase_rate;  ///< d phi/dt by central differences
};

/// Phase-binned affine model of body velocity (and passive rates in suds
/// mode): per bin, output = C + B*delta + A*delta_rate + G*vec(outer), with
/// every coefficient also carried as a Fourier interpolant across phase so
/// predictions vary smoothly between bin centers.
struct PhaseBinnedLinearModel {
  TlsMode mode = TlsMode::plain;
  int n_a = 0;
  int n_p = 0;
  double ridge = 0.0;
  double mean_phase_rate = 0.0;  ///< training-average d phi/dt
  NominalGait nominal;
  PhaseBins bins;                         ///< binning used at fit time
  std::vector<Eigen::MatrixXd> bin_coef;  ///< per bin: outputs x regressors
  std::vector<char> bin_fitted;           ///< 1 if fit from data, 0 if filled
  /// Fourier interpolants across phase, [output][regressor].
  std::vector<std::vector<FourierSeries>> interp;
  /// Max |interpolant(center) - fitted value| over fitted bins/coefficients.
  double smoothing_bound = 0.0;
  std::vector<std::string> diagnostics;

  int outputs() const { return mode == TlsMode::suds ? 3 + n_p : 3; }
  int delta_dim() const;
  int rate_dim() const { return mode == TlsMode::phase_only ? 0 : n_a; }
  int regressors() const;

  /// Interpolated coefficient matrix (outputs x regressors) at phase phi.
  Eigen::MatrixXd coef_at(double phi) const;
};

/// Least-squares Fourier fit of every shape coordinate against phase.
/// Requires assigned phases spanning at least two cycles.
NominalGait fit_nominal_gait(const Trajectory& traj, int harmonics = 7);

/// Deviations of each sample from the nominal gait. The phase rate is
/// estimated by central differences of the unwrapped phase sequence.
ShapeOffsets compute_offsets(const Trajectory& traj, const NominalGait& nominal);

/// Total least squares for a single output: minimizes orthogonal residuals
/// of the stacked [regressors | targets] matrix via its smallest right
/// singular direction. Columns and target are equilibrated to unit norm
/// first (the orthogonal-residual objective weighs all entries equally, so
/// mixed physical scales would skew the error geometry); the solution is
/// mapped back to the raw scales. `ridge` (relative to the largest singular
/// value) stabilizes near-degenerate bins. Regressor columns whose norm
/// falls below 1e-5 of the largest column are excluded (coefficient zero):
/// they carry no resolvable signal and would only poison extrapolation.
/// Falls back to ordinary least squares when appending the target column
/// does not reduce the smallest singular value (nongeneric problem), when
/// that value is non-unique, or when the solution direction is vertical;
/// `degenerate`, when given, reports that fallback.
Eigen::VectorXd tls_solve(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& targets,
                          double ridge = 1e-10, bool* degenerate = nullptr);

/// Fit the phase-binned model on a phase-assigned trajectory. Fits the
/// nominal gait internally, solves each sufficiently populated bin by
/// per-output total least squares on the centered bin (the constant term is
/// exact, recovered from the bin means, and never perturbed like a noisy
/// regressor), fills sparse bins from the Fourier interpolant of the fitted
/// ones, and records diagnostics.
PhaseBinnedLinearModel fit_tls(const Trajectory& traj, const PhaseBins& bins, TlsMode mode,
                               double ridge = 1e-10);

/// Predict outputs at (phi, shape, actuated rate). `shape` holds the model's
/// offset coordinates (actuated, plus passive in suds mode). The phase rate
/// defaults to the training average when NaN.
Eigen::VectorXd predict_tls(const PhaseBinnedLinearModel& model, double phi,
                            const Eigen::VectorXd& shape, const Eigen::VectorXd& rate_a,
                            double phase_rate = std::numeric_limits<double>::quiet_NaN());

/// Same prediction from one bin's raw (non-interpolated) coefficients.
Eigen::VectorXd predict_tls_at_bin(const PhaseBinnedLinearModel& model, int bin, double phi,
                                   const Eigen::VectorXd& shape, const Eigen::VectorXd& rate_a,
                                   double phase_rate = std::numeric_limits<double>::quiet_NaN());

/// Versioned JSON serialization; doubles survive a round trip bit-exactly.
std::string tls_to_json(const PhaseBinnedLinearModel& model);
PhaseBinnedLinearModel tls_from_json(const std::string& text);

}  // namespace motmap
