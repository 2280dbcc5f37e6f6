#include "motmap/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace motmap {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::filesystem::path sidecar_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p;
}

}  // namespace

int Trajectory::n_a() const {
  return samples.empty() ? 0 : static_cast<int>(samples.front().shape.r_a.size());
}

int Trajectory::n_p() const {
  return samples.empty() ? 0 : static_cast<int>(samples.front().shape.r_p.size());
}

void Trajectory::validate() const {
  if (samples.size() < 2) throw std::invalid_argument("Trajectory: need >= 2 samples");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("Trajectory: sample_rate must be > 0");
  const double step = 1.0 / sample_rate;
  const double tol = 1e-9 + 1e-6 * step;
  const int na = n_a(), np = n_p();
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (i > 0 && std::abs(s.t - samples[i - 1].t - step) > tol)
      throw std::invalid_argument("Trajectory: non-uniform time stamps");
    if (static_cast<int>(s.shape.r_a.size()) != na || static_cast<int>(s.shape.r_p.size()) != np)
      throw std::invalid_argument("Trajectory: inconsistent shape dimensions");
    if (s.dshape_a.size() != 0 && static_cast<int>(s.dshape_a.size()) != na)
      throw std::invalid_argument("Trajectory: inconsistent dshape_a dimension");
    if (s.dshape_p.size() != 0 && static_cast<int>(s.dshape_p.size()) != np)
      throw std::invalid_argument("Trajectory: inconsistent dshape_p dimension");
  }
  if (!poses.empty() && poses.size() != samples.size())
    throw std::invalid_argument("Trajectory: poses length mismatch");
}

void save_trajectory(const Trajectory& traj, const std::string& csv_path) {
  traj.validate();
  const int na = traj.n_a(), np = traj.n_p();

  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("save_trajectory: cannot open " + csv_path);

  out << "t,phase";
  for (int i = 0; i < na; ++i) out << ",ra" << i;
  for (int i = 0; i < np; ++i) out << ",rp" << i;
  for (int i = 0; i < na; ++i) out << ",dra" << i;
  for (int i = 0; i < np; ++i) out << ",drp" << i;
  out << ",vbx,vby,omega\n";

  for (const Sample& s : traj.samples) {
    out << fmt(s.t) << ',' << fmt(s.phase);
    for (int i = 0; i < na; ++i) out << ',' << fmt(s.shape.r_a(i));
    for (int i = 0; i < np; ++i) out << ',' << fmt(s.shape.r_p(i));
    for (int i = 0; i < na; ++i) out << ',' << fmt(s.dshape_a.size() ? s.dshape_a(i) : 0.0);
    for (int i = 0; i < np; ++i) out << ',' << fmt(s.dshape_p.size() ? s.dshape_p(i) : 0.0);
    out << ',' << fmt(s.vb.vx) << ',' << fmt(s.vb.vy) << ',' << fmt(s.vb.omega) << '\n';
  }
  if (!out) throw std::runtime_error("save_trajectory: write failed for " + csv_path);

  nlohmann::json meta{{"gait_id", traj.gait_id},       {"frequency_hz", traj.frequency},
                      {"trial_id", traj.trial_id},     {"sample_rate_hz", traj.sample_rate},
                      {"n_a", na},                     {"n_p", np}};
  std::ofstream meta_out(sidecar_path(csv_path));
  if (!meta_out) throw std::runtime_error("save_trajectory: cannot open sidecar for " + csv_path);
  meta_out << meta.dump(2) << '\n';
}

Trajectory load_trajectory(const std::string& csv_path) {
  std::ifstream meta_in(sidecar_path(csv_path));
  if (!meta_in) throw std::runtime_error("load_trajectory: missing sidecar for " + csv_path);
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  Trajectory traj;
  traj.gait_id = meta.at("gait_id").get<std::string>();
  traj.frequency = meta.at("frequency_hz").get<double>();
  traj.trial_id = meta.at("trial_id").get<std::string>();
  traj.sample_rate = meta.at("sample_rate_hz").get<double>();
  const int na = meta.at("n_a").get<int>();
  const int np = meta.at("n_p").get<int>();

  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("load_trajectory: cannot open " + csv_path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_trajectory: empty file " + csv_path);
  const int n_cols = 2 + 2 * (na + np) + 3;
  {
    int commas = 0;
    for (char c : line)
      if (c == ',') ++commas;
    if (commas + 1 != n_cols)
      throw std::runtime_error("load_trajectory: header/metadata column mismatch in " + csv_path);
  }

  std::vector<double> row(n_cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    for (int c = 0; c < n_cols; ++c) {
      char* end = nullptr;
      row[c] = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("load_trajectory: malformed row in " + csv_path);
      p = end;
      if (*p == ',') ++p;
    }
    Sample s;
    int c = 0;
    s.t = row[c++];
    s.phase = row[c++];
    s.shape.r_a.resize(na);
    s.shape.r_p.resize(np);
    s.dshape_a.resize(na);
    s.dshape_p.resize(np);
    for (int i = 0; i < na; ++i) s.shape.r_a(i) = row[c++];
    for (int i = 0; i < np; ++i) s.shape.r_p(i) = row[c++];
    for (int i = 0; i < na; ++i) s.dshape_a(i) = row[c++];
    for (int i = 0; i < np; ++i) s.dshape_p(i) = row[c++];
    s.vb.vx = row[c++];
    s.vb.vy = row[c++];
    s.vb.omega = row[c++];
    traj.samples.push_back(std::move(s));
  }
  traj.validate();
  return traj;
}

namespace {

// Second-order finite differences of a scalar series: central inside,
// one-sided three-point stencils at the ends.
double diff_at(const std::vector<double>& x, size_t i, double dt) {
  const size_t n = x.size();
  if (i == 0) return (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
  if (i + 1 == n) return (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
  return (x[i + 1] - x[i - 1]) / (2.0 * dt);
}

}  // namespace

Trajectory finite_difference_velocities(const Trajectory& traj) {
  if (traj.samples.size() < 3)
    throw std::invalid_argument("finite_difference_velocities: need >= 3 samples");
  traj.validate();

  Trajectory out = traj;
  const size_t n = traj.samples.size();
  const double dt = traj.dt();
  const int na = traj.n_a(), np = traj.n_p();

  std::vector<double> col(n);
  for (int j = 0; j < na; ++j) {
    for (size_t i = 0; i < n; ++i) col[i] = traj.samples[i].shape.r_a(j);
    for (size_t i = 0; i < n; ++i) {
      if (out.samples[i].dshape_a.size() != na) out.samples[i].dshape_a.resize(na);
      out.samples[i].dshape_a(j) = diff_at(col, i, dt);
    }
  }
  for (int j = 0; j < np; ++j) {
    for (size_t i = 0; i < n; ++i) col[i] = traj.samples[i].shape.r_p(j);
    for (size_t i = 0; i < n; ++i) {
      if (out.samples[i].dshape_p.size() != np) out.samples[i].dshape_p.resize(np);
      out.samples[i].dshape_p(j) = diff_at(col, i, dt);
    }
  }

  if (!traj.poses.empty()) {
    std::vector<double> xs(n), ys(n), ths(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = traj.poses[i].x;
      ys[i] = traj.poses[i].y;
      ths[i] = traj.poses[i].theta;  // unwrapped by construction
    }
    for (size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d world(diff_at(xs, i, dt), diff_at(ys, i, dt));
      const Eigen::Vector2d body = rotate_into_frame(ths[i], world);
      out.samples[i].vb.vx = body.x();
      out.samples[i].vb.vy = body.y();
      out.samples[i].vb.omega = diff_at(ths, i, dt);
    }
  }
  return out;
}

Trajectory decimate(const Trajectory& traj, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
  if (factor == 1) return traj;
  Trajectory out;
  out.sample_rate = traj.sample_rate / factor;
  out.gait_id = traj.gait_id;
  out.frequency = traj.frequency;
  out.trial_id = traj.trial_id;
  for (size_t i = 0; i < traj.samples.size(); i += factor) {
    out.samples.push_back(traj.samples[i]);
    if (!traj.poses.empty()) out.poses.push_back(traj.poses[i]);
  }
  return out;
}

}  // namespace motmap
