#include "motmap/pca.hpp"

#include <stdexcept>

namespace motmap {

PcaModel fit_pca(const std::vector<Eigen::VectorXd>& rows, int n_components) {
  if (rows.empty()) throw std::invalid_argument("fit_pca: no data");
  const int d = static_cast<int>(rows.front().size());
  const int n = static_cast<int>(rows.size());
  if (n <= d) throw std::invalid_argument("fit_pca: need more samples than dimensions");
  if (n_components < 1 || n_components > d)
    throw std::invalid_argument("fit_pca: n_components out of range");

  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw std::invalid_argument("fit_pca: inconsistent dimensions");
    X.row(i) = rows[i].transpose();
  }
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double total = sv.squaredNorm();
  if (sv(n_components - 1) < 1e-12 * (1.0 + sv(0)))
    throw std::runtime_error("fit_pca: requested components exceed data rank");

  PcaModel model;
  model.mean = mean.transpose();
  model.components = svd.matrixV().leftCols(n_components);
  model.explained.resize(n_components);
  for (int c = 0; c < n_components; ++c) {
    int arg = 0;
    model.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(arg, c) < 0.0) model.components.col(c) = -model.components.col(c);
    model.explained(c) = total > 0.0 ? sv(c) * sv(c) / total : 0.0;
  }
  return model;
}

Eigen::VectorXd project_passive(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.mean.size()) throw std::invalid_argument("project_passive: bad dimension");
  return model.components.transpose() * (x - model.mean);
}

Trajectory reduce_passive(const PcaModel& model, const Trajectory& traj) {
  Trajectory out = traj;
  for (Sample& s : out.samples) {
    s.shape.r_p = project_passive(model, s.shape.r_p);
    if (s.dshape_p.size())
      s.dshape_p = (model.components.transpose() * s.dshape_p).eval();
  }
  return out;
}

}  // namespace motmap
