#include "motmap/gait.hpp"

#include <stdexcept>

namespace motmap {

namespace {

FourierSeries harmonic13(double c1, double s1, double c3, double s3) {
  FourierSeries f;
  f.a = {c1, 0.0, c3};
  f.b = {s1, 0.0, s3};
  return f;
}

GaitSpec make_gait(const std::string& label, double third_cos1, double third_sin2) {
  GaitSpec g;
  g.label = label;
  g.period = 1.0;
  g.coords.push_back(harmonic13(1.0, 0.0, third_cos1, 0.0));  // phi1 = cos + c3*cos3
  g.coords.push_back(harmonic13(0.0, 1.0, 0.0, third_sin2));  // phi2 = sin + s3*sin3
  return g;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gait_eval(const GaitSpec& g, double theta) {
  const int n = g.n_a();
  Eigen::VectorXd r(n), dr(n);
  for (int i = 0; i < n; ++i) {
    r(i) = g.coords[i].value(theta);
    dr(i) = g.coords[i].derivative(theta);
  }
  return {r, dr};
}

std::vector<GaitSpec> gait_library() {
  std::vector<GaitSpec> lib;
  lib.push_back(make_gait("S+", -1.0 / 4.0, +1.0 / 4.0));
  lib.push_back(make_gait("S-", -1.0 / 9.0, +1.0 / 9.0));
  lib.push_back(make_gait("O", 0.0, 0.0));
  lib.push_back(make_gait("D-", +1.0 / 9.0, -1.0 / 9.0));
  lib.push_back(make_gait("D+", +1.0 / 4.0, -1.0 / 4.0));
  return lib;
}

GaitSpec gait_by_label(const std::string& label) {
  for (const auto& g : gait_library())
    if (g.label == label) return g;
  throw std::invalid_argument("gait_by_label: unknown gait '" + label + "'");
}

int gait_axis_index(const std::string& label) {
  const auto lib = gait_library();
  for (size_t i = 0; i < lib.size(); ++i)
    if (lib[i].label == label) return static_cast<int>(i);
  throw std::invalid_argument("gait_axis_index: unknown gait '" + label + "'");
}

}  // namespace motmap
