#pragma once

#include <Eigen/Dense>
#include <vector>

#include "motmap/trajectory.hpp"

namespace motmap {

/// Principal-component reduction of the 12-dimensional passive marker state.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  ///< dim x n_components, orthonormal columns
  Eigen::VectorXd explained;   ///< variance fraction per kept component

  int dim() const { return static_cast<int>(mean.size()); }
  int n_components() const { return static_cast<int>(components.cols()); }
};

/// Mean-centered PCA by singular value decomposition. Deterministic sign
/// convention: each component's largest-magnitude entry is positive.
/// Throws if rows.size() <= dim, n_components > dim, or the data rank is
/// below n_components.
PcaModel fit_pca(const std::vector<Eigen::VectorXd>& rows, int n_components);

/// r_p = components^T (x - mean).
Eigen::VectorXd project_passive(const PcaModel& model, const Eigen::VectorXd& x);

/// Replace each sample's r_p by its PCA scores and dshape_p by the same
/// linear projection of the rates (the projection is affine, so rates map
/// through components^T alone).
Trajectory reduce_passive(const PcaModel& model, const Trajectory& traj);

}  // namespace motmap
