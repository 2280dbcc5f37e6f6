#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motmap/trajectory.hpp"

namespace motmap {

/// Gating-feature choice for the mixture regression model.
///  - plain:     gate on r_a, predict the body twist.
///  - suds:      gate on (r_a, r_p), predict the body twist and d(r_p)/dt.
///  - branching: gate on (r_a, dr_a/|dr_a|), predict the body twist; the
///               direction feature lets the model stay multi-valued where the
///               same shape is revisited with different motion.
enum class GmrMode { plain, suds, branching };

struct GmrConfig {
  int components = 32;     ///< mixture size J
  GmrMode mode = GmrMode::plain;
  double bandwidth = 0.5;  ///< gate kernel scale h (standardized features)
  double ridge = 1e-6;     ///< local-fit ridge on standardized regressors
  std::uint64_t seed = 0;  ///< k-means++ seeding stream
  bool full_em = false;    ///< iterate gate re-estimation to convergence
  int max_em_iters = 100;  ///< cap when full_em is set
};

/// One gated locally-affine expert. Gate parameters live in the standardized
/// gating-feature space; the local map acts on raw dr_a and produces raw
/// outputs, so `local_bias` is exactly the prediction at dr_a = 0.
struct MixtureComponent {
  double weight = 0.0;         ///< mixing weight, in (0, 1]; weights sum to 1
  Eigen::VectorXd gate_mean;   ///< gate center
  Eigen::MatrixXd gate_cov;    ///< gate covariance, symmetric positive definite
  Eigen::MatrixXd local_map;   ///< outputs() x n_a
  Eigen::VectorXd local_bias;  ///< outputs()
};

/// Phase-free mixture model of the motility map: a Gaussian-gated convex
/// combination of affine-in-dr_a experts. Immutable once fitted; concurrent
/// predictions need no synchronization.
struct MixtureModel {
  GmrMode mode = GmrMode::plain;
  int n_a = 0;
  int n_p = 0;
  double bandwidth = 0.0;
  double ridge = 0.0;
  Eigen::VectorXd feature_mean;   ///< gating-feature standardization offset
  Eigen::VectorXd feature_scale;  ///< gating-feature standardization scale
  std::vector<MixtureComponent> components;
  std::vector<std::string> diagnostics;  ///< dropped components, fit notes

  /// Output dimension: 3 (vx, vy, omega), plus n_p passive rates in suds mode.
  int outputs() const { return mode == GmrMode::suds ? 3 + n_p : 3; }

  /// Gating-feature dimension for the configured mode.
  int gate_dim() const {
    if (mode == GmrMode::suds) return n_a + n_p;
    if (mode == GmrMode::branching) return 2 * n_a;
    return n_a;
  }
};

/// Prediction with gating diagnostics. `responsibilities` follows the model's
/// component storage order; `extrapolation` is set when the query sits more
/// than 6 Mahalanobis units from every gate.
struct GmrPrediction {
  Eigen::VectorXd output;
  Eigen::VectorXd responsibilities;
  double min_mahalanobis = 0.0;
  bool extrapolation = false;
};

/// Fit a mixture regression model on the trajectory samples.
///
/// Gate centers are seeded by k-means++ (fixed seed, 20 Lloyd iterations) on
/// the standardized gating features; gate covariances start from the
/// within-cluster covariance scaled by bandwidth^2 with the diagonal floored
/// at 1e-6; one round of soft responsibility re-estimation updates the gates
/// before the local maps are fitted by responsibility-weighted ridge least
/// squares. Deterministic for a given seed. Components left empty by the
/// assignment are dropped, weights renormalized, and a diagnostic recorded.
///
/// Throws std::invalid_argument if components < 1, sample count < 10 * J,
/// bandwidth <= 0, ridge < 0, suds mode without passive coordinates, or the
/// samples have inconsistent dimensions.
MixtureModel fit_gmr(const Trajectory& traj, const GmrConfig& config);

/// Evaluate the model at one query. `shape_p` is required (and used) only in
/// suds mode; pass an empty vector otherwise. Responsibilities are computed
/// in log space; far queries are flagged, never rejected.
GmrPrediction predict_gmr(const MixtureModel& model,
                          const Eigen::VectorXd& shape_a,
                          const Eigen::VectorXd& shape_p,
                          const Eigen::VectorXd& rate_a);

/// Reusable evaluator that factorizes every gate covariance once, for tight
/// prediction loops. Bound to the model by reference: the model must outlive
/// the predictor and stay unmodified. Predictions are identical to
/// predict_gmr (which is implemented on top of this class).
class GmrPredictor {
 public:
  explicit GmrPredictor(const MixtureModel& model);

  GmrPrediction predict(const Eigen::VectorXd& shape_a, const Eigen::VectorXd& shape_p,
                        const Eigen::VectorXd& rate_a) const;

 private:
  const MixtureModel* model_;
  std::vector<int> order_;  ///< canonical accumulation order
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;  ///< per storage index
  std::vector<double> log_norm_;
};

/// Pick the gate bandwidth by 5-fold contiguous-block cross-validation on the
/// training trajectory (>= 5 cycles of phase coverage required). Returns the
/// grid value minimizing held-out RMS; near-ties (within 1e-10 relative plus
/// absolute slack) resolve toward the largest bandwidth. `curve`, when given,
/// receives the held-out RMS per grid value in ascending-bandwidth order.
/// Throws std::invalid_argument on an empty or non-positive grid.
double cross_validate_bandwidth(const Trajectory& traj, const GmrConfig& config,
                                const std::vector<double>& grid,
                                std::vector<double>* curve = nullptr);

/// Serialize to a versioned JSON document. Doubles round-trip bit-exactly.
std::string gmr_to_json(const MixtureModel& model);

/// Parse a document produced by gmr_to_json. Throws std::runtime_error on a
/// wrong format tag or version and on malformed structure.
MixtureModel gmr_from_json(const std::string& text);

}  // namespace motmap
