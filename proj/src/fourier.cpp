#include "motmap/fourier.hpp"

#include <cmath>
#include <stdexcept>

namespace motmap {

double FourierSeries::value(double phi) const {
  double f = a0;
  for (size_t h = 0; h < a.size(); ++h) {
    const double k = static_cast<double>(h + 1);
    f += a[h] * std::cos(k * phi) + b[h] * std::sin(k * phi);
  }
  return f;
}

double FourierSeries::derivative(double phi) const {
  double f = 0.0;
  for (size_t h = 0; h < a.size(); ++h) {
    const double k = static_cast<double>(h + 1);
    f += k * (-a[h] * std::sin(k * phi) + b[h] * std::cos(k * phi));
  }
  return f;
}

FourierSeries FourierSeries::fit(const std::vector<double>& phi, const std::vector<double>& y,
                                 int harmonics, double ridge) {
  if (phi.size() != y.size()) throw std::invalid_argument("FourierSeries::fit: size mismatch");
  if (harmonics < 0) throw std::invalid_argument("FourierSeries::fit: negative harmonics");
  const int n = static_cast<int>(phi.size());
  const int p = 2 * harmonics + 1;
  if (n == 0) throw std::invalid_argument("FourierSeries::fit: no samples");

  Eigen::MatrixXd X(n, p);
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int h = 1; h <= harmonics; ++h) {
      X(i, 2 * h - 1) = std::cos(h * phi[i]);
      X(i, 2 * h) = std::sin(h * phi[i]);
    }
  }

  Eigen::VectorXd c(p);
  if (ridge > 0.0) {
    Eigen::MatrixXd G = X.transpose() * X;
    G.diagonal().array() += ridge;
    c = G.ldlt().solve(X.transpose() * yv);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p)
      throw std::runtime_error("FourierSeries::fit: rank-deficient design (too few distinct phases)");
    c = qr.solve(yv);
  }

  FourierSeries s;
  s.a0 = c(0);
  s.a.resize(harmonics);
  s.b.resize(harmonics);
  for (int h = 1; h <= harmonics; ++h) {
    s.a[h - 1] = c(2 * h - 1);
    s.b[h - 1] = c(2 * h);
  }
  return s;
}

}  // namespace motmap
