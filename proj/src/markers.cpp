#include "motmap/markers.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace motmap {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::Vector2d r90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

}  // namespace

void Rig::validate() const {
  if (n_markers < 4) throw std::invalid_argument("Rig: need at least 4 markers");
  auto check = [&](int idx, const char* what) {
    if (idx < 0 || idx >= n_markers)
      throw std::invalid_argument(std::string("Rig: bad index for ") + what);
  };
  check(head.top_markers[0], "head top");
  check(head.top_markers[1], "head top");
  check(head.spoke_marker, "head spoke");
  check(tail.top_markers[0], "tail top");
  check(tail.top_markers[1], "tail top");
  check(tail.spoke_marker, "tail spoke");
  if (flipper_markers.size() != flipper_segment.size())
    throw std::invalid_argument("Rig: flipper marker/segment size mismatch");
  for (int idx : flipper_markers) check(idx, "flipper");
  for (int s : flipper_segment)
    if (s != 0 && s != 1) throw std::invalid_argument("Rig: flipper segment must be 0 or 1");
  if (!(joint_distance > 0.0)) throw std::invalid_argument("Rig: joint_distance must be > 0");
  if (!(unit_scale > 0.0)) throw std::invalid_argument("Rig: unit_scale must be > 0");
}

void save_rig(const Rig& rig, const std::string& path) {
  rig.validate();
  nlohmann::json seg_h{{"top_markers", rig.head.top_markers},
                       {"spoke_marker", rig.head.spoke_marker},
                       {"lambda", rig.head.lambda},
                       {"rho", rig.head.rho}};
  nlohmann::json seg_t{{"top_markers", rig.tail.top_markers},
                       {"spoke_marker", rig.tail.spoke_marker},
                       {"lambda", rig.tail.lambda},
                       {"rho", rig.tail.rho}};
  nlohmann::json j{{"n_markers", rig.n_markers},
                   {"head", seg_h},
                   {"tail", seg_t},
                   {"lowered_marker", rig.lowered_marker},
                   {"flipper_markers", rig.flipper_markers},
                   {"flipper_segment", rig.flipper_segment},
                   {"joint_distance", rig.joint_distance},
                   {"unit_scale", rig.unit_scale}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_rig: cannot open " + path);
  out << j.dump(2) << '\n';
}

Rig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_rig: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Rig rig;
  rig.n_markers = j.at("n_markers").get<int>();
  auto seg = [](const nlohmann::json& s) {
    SegmentRig r;
    r.top_markers[0] = s.at("top_markers")[0].get<int>();
    r.top_markers[1] = s.at("top_markers")[1].get<int>();
    r.spoke_marker = s.at("spoke_marker").get<int>();
    r.lambda = s.at("lambda").get<double>();
    r.rho = s.at("rho").get<double>();
    return r;
  };
  rig.head = seg(j.at("head"));
  rig.tail = seg(j.at("tail"));
  rig.lowered_marker = j.at("lowered_marker").get<int>();
  rig.flipper_markers = j.at("flipper_markers").get<std::vector<int>>();
  rig.flipper_segment = j.at("flipper_segment").get<std::vector<int>>();
  rig.joint_distance = j.at("joint_distance").get<double>();
  rig.unit_scale = j.at("unit_scale").get<double>();
  rig.validate();
  return rig;
}

void save_markers(const std::vector<MarkerFrame>& frames, const std::string& path) {
  if (frames.empty()) throw std::invalid_argument("save_markers: no frames");
  const int n = frames.front().n_markers();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_markers: cannot open " + path);
  out << 't';
  for (int m = 0; m < n; ++m) out << ",m" << m << "x,m" << m << "y,m" << m << 'z';
  out << '\n';
  for (const MarkerFrame& f : frames) {
    if (f.n_markers() != n) throw std::invalid_argument("save_markers: marker count varies");
    out << fmt(f.t);
    for (int m = 0; m < n; ++m) {
      if (f.valid[m])
        out << ',' << fmt(f.pos[m].x()) << ',' << fmt(f.pos[m].y()) << ',' << fmt(f.pos[m].z());
      else
        out << ",nan,nan,nan";
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_markers: write failed for " + path);
}

std::vector<MarkerFrame> load_markers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_markers: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_markers: empty file " + path);
  int commas = 0;
  for (char c : line)
    if (c == ',') ++commas;
  if (commas % 3 != 0) throw std::runtime_error("load_markers: bad header in " + path);
  const int n = commas / 3;

  std::vector<MarkerFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MarkerFrame f;
    f.pos.resize(n);
    f.valid.resize(n);
    const char* p = line.c_str();
    char* end = nullptr;
    f.t = std::strtod(p, &end);
    if (end == p) throw std::runtime_error("load_markers: malformed row in " + path);
    p = end;
    for (int m = 0; m < n; ++m) {
      Eigen::Vector3d v;
      for (int c = 0; c < 3; ++c) {
        if (*p == ',') ++p;
        v(c) = std::strtod(p, &end);
        if (end == p) throw std::runtime_error("load_markers: malformed row in " + path);
        p = end;
      }
      f.pos[m] = v;
      f.valid[m] = v.allFinite();
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::pair<std::vector<MarkerFrame>, JumpReport> remove_jumps(
    const std::vector<MarkerFrame>& frames, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("remove_jumps: threshold must be > 0");
  if (frames.empty()) return {{}, {}};
  const std::size_t nf = frames.size();
  const int nm = frames.front().n_markers();

  JumpReport report;
  report.total_points = nf * static_cast<std::size_t>(nm);

  // input_bad[m][i]: marker m arrived unusable at frame i (dropout/NaN).
  std::vector<std::vector<bool>> input_bad(nm, std::vector<bool>(nf, false));
  for (std::size_t i = 0; i < nf; ++i) {
    if (frames[i].n_markers() != nm)
      throw std::invalid_argument("remove_jumps: marker count varies");
    for (int m = 0; m < nm; ++m)
      if (!frames[i].valid[m] || !frames[i].pos[m].allFinite()) {
        input_bad[m][i] = true;
        ++report.input_invalid;
      }
  }

  // One pass over the original tracks: flag the arrival point of every
  // oversized displacement. Displacements are measured on the raw data, so a
  // one-frame spike flags itself and its successor (the departure from the
  // spike is also oversized).
  std::vector<std::vector<bool>> invalid = input_bad;
  for (int m = 0; m < nm; ++m) {
    for (std::size_t i = 0; i + 1 < nf; ++i) {
      if (input_bad[m][i] || input_bad[m][i + 1]) continue;
      if ((frames[i + 1].pos[m] - frames[i].pos[m]).norm() > threshold &&
          !invalid[m][i + 1]) {
        invalid[m][i + 1] = true;
        ++report.jump_flagged;
      }
    }
  }
  report.removed_fraction =
      static_cast<double>(report.jump_flagged) / static_cast<double>(report.total_points);

  // Boundary runs cannot be interpolated: trim whole frames instead.
  std::size_t lead = 0, tail = 0;
  for (int m = 0; m < nm; ++m) {
    std::size_t first = 0;
    while (first < nf && invalid[m][first]) ++first;
    if (first == nf) throw std::runtime_error("remove_jumps: a marker has no valid samples");
    std::size_t last = nf - 1;
    while (last > first && invalid[m][last]) --last;
    lead = std::max(lead, first);
    tail = std::max(tail, nf - 1 - last);
  }
  if (lead + tail >= nf) throw std::runtime_error("remove_jumps: nothing left after trimming");
  report.trimmed_frames = lead + tail;

  std::vector<MarkerFrame> out(frames.begin() + lead, frames.end() - tail);
  const std::size_t n = out.size();

  // Linear gap fill on the interior.
  for (int m = 0; m < nm; ++m) {
    std::size_t i = 0;
    while (i < n) {
      if (!invalid[m][lead + i]) {
        out[i].valid[m] = true;
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && invalid[m][lead + j]) ++j;
      if (i == 0 || j == n)
        throw std::logic_error("remove_jumps: boundary gap survived trimming");
      const Eigen::Vector3d &a = out[i - 1].pos[m], &b = out[j].pos[m];
      const double span = static_cast<double>(j - (i - 1));
      for (std::size_t k = i; k < j; ++k) {
        const double w = static_cast<double>(k - (i - 1)) / span;
        out[k].pos[m] = (1.0 - w) * a + w * b;
        out[k].valid[m] = true;
      }
      i = j;
    }
  }
  return {std::move(out), report};
}

PlaneChart fit_plane_chart(const std::vector<MarkerFrame>& frames, const Rig& rig) {
  rig.validate();
  std::vector<Eigen::Vector3d> pts;
  const std::array<int, 4> tops{rig.head.top_markers[0], rig.head.top_markers[1],
                                rig.tail.top_markers[0], rig.tail.top_markers[1]};
  for (const MarkerFrame& f : frames)
    for (int idx : tops)
      if (f.valid[idx]) pts.push_back(f.pos[idx]);
  if (pts.size() < 3) throw std::invalid_argument("fit_plane_chart: fewer than 3 top markers");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigenvalues ascending: [0] is the out-of-plane direction. Collinear point
  // sets leave the second direction empty too.
  if (eig.eigenvalues()(1) < 1e-12 * (1.0 + eig.eigenvalues()(2)))
    throw std::invalid_argument("fit_plane_chart: collinear/degenerate marker set");

  PlaneChart chart;
  chart.origin = mean;
  chart.normal = eig.eigenvectors().col(0);
  if (chart.normal.z() < 0.0) chart.normal = -chart.normal;

  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  e1 -= e1.dot(chart.normal) * chart.normal;
  if (e1.norm() < 1e-6) {
    e1 = Eigen::Vector3d::UnitY();
    e1 -= e1.dot(chart.normal) * chart.normal;
  }
  chart.e1 = e1.normalized();
  chart.e2 = chart.normal.cross(chart.e1);
  return chart;
}

namespace {

struct SegmentFit {
  Eigen::Vector2d joint;
  Eigen::Vector2d centroid;
};

SegmentFit fit_segment(const MarkerFrame& frame, const SegmentRig& seg, const PlaneChart& chart) {
  const int ia = seg.top_markers[0], ib = seg.top_markers[1];
  if (!frame.valid[ia] || !frame.valid[ib])
    throw std::runtime_error("fit_body_frame: missing top marker");
  const Eigen::Vector2d a = chart.project(frame.pos[ia]);
  const Eigen::Vector2d b = chart.project(frame.pos[ib]);
  SegmentFit fit;
  fit.centroid = 0.5 * (a + b);
  const Eigen::Vector2d d = b - a;
  fit.joint = fit.centroid + seg.lambda * d + seg.rho * r90(d);
  return fit;
}

}  // namespace

BodyFit fit_body_frame(const MarkerFrame& frame, const Rig& rig, const PlaneChart& chart) {
  const SegmentFit head = fit_segment(frame, rig.head, chart);
  const SegmentFit tail = fit_segment(frame, rig.tail, chart);

  Eigen::Vector2d jh = head.joint, jt = tail.joint;
  const double dist = (jh - jt).norm();
  if (dist < 1e-9) throw std::runtime_error("fit_body_frame: coincident motor axes");
  const Eigen::Vector2d u = (jh - jt) / dist;
  const double corr = 0.5 * (rig.joint_distance - dist);
  jh += corr * u;
  jt -= corr * u;

  BodyFit fit;
  fit.body.x = 0.5 * (jh.x() + jt.x());
  fit.body.y = 0.5 * (jh.y() + jt.y());
  fit.body.theta = std::atan2(u.y(), u.x());

  const Eigen::Vector2d hd = head.centroid - jh;
  fit.head_segment.x = jh.x();
  fit.head_segment.y = jh.y();
  fit.head_segment.theta = std::atan2(hd.y(), hd.x());

  const Eigen::Vector2d td = tail.centroid - jt;
  fit.tail_segment.x = jt.x();
  fit.tail_segment.y = jt.y();
  fit.tail_segment.theta = std::atan2(td.y(), td.x());
  return fit;
}

BodyFit fit_body_frame(const MarkerFrame& frame, const Rig& rig) {
  return fit_body_frame(frame, rig, fit_plane_chart({frame}, rig));
}

Eigen::Vector2d actuated_angles(const BodyFit& fit) {
  const double phi1 = wrap_pi(fit.head_segment.theta - fit.body.theta);
  const double phi2 = wrap_pi(std::numbers::pi - (fit.tail_segment.theta - fit.body.theta));
  return {phi1, phi2};
}

Eigen::VectorXd passive_state_vector(const MarkerFrame& frame, const Rig& rig, const BodyFit& fit,
                                     const PlaneChart& chart) {
  const int nf = static_cast<int>(rig.flipper_markers.size());
  Eigen::VectorXd out(4 + 2 * nf);

  auto into_frame = [&chart](const Pose2& pose, const Eigen::Vector3d& p) {
    const Eigen::Vector2d q = chart.project(p);
    return rotate_into_frame(pose.theta, q - Eigen::Vector2d(pose.x, pose.y));
  };

  auto need = [&frame](int idx) {
    if (!frame.valid[idx]) throw std::runtime_error("passive_state_vector: missing marker");
    return idx;
  };

  out.segment<2>(0) = into_frame(fit.body, frame.pos[need(rig.head.spoke_marker)]);
  out.segment<2>(2) = into_frame(fit.body, frame.pos[need(rig.tail.spoke_marker)]);
  for (int i = 0; i < nf; ++i) {
    const Pose2& seg = rig.flipper_segment[i] == 0 ? fit.head_segment : fit.tail_segment;
    out.segment<2>(4 + 2 * i) = into_frame(seg, frame.pos[need(rig.flipper_markers[i])]);
  }
  return out;
}

Trajectory ingest_trajectory(const std::vector<MarkerFrame>& frames, const Rig& rig,
                             double sample_rate, const std::string& gait_id, double frequency,
                             const std::string& trial_id, JumpReport* report,
                             double jump_threshold) {
  rig.validate();
  auto [clean, rep] = remove_jumps(frames, jump_threshold);
  if (report) *report = rep;
  if (clean.size() < 3) throw std::invalid_argument("ingest_trajectory: need >= 3 frames");

  const PlaneChart chart = fit_plane_chart(clean, rig);

  Trajectory traj;
  traj.sample_rate = sample_rate;
  traj.gait_id = gait_id;
  traj.frequency = frequency;
  traj.trial_id = trial_id;
  traj.samples.reserve(clean.size());
  traj.poses.reserve(clean.size());

  double prev_theta = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const BodyFit fit = fit_body_frame(clean[i], rig, chart);
    Sample s;
    s.t = clean[i].t;
    s.shape.r_a = actuated_angles(fit);
    s.shape.r_p = passive_state_vector(clean[i], rig, fit, chart);
    traj.samples.push_back(std::move(s));

    Pose2 pose;
    pose.x = fit.body.x * rig.unit_scale;
    pose.y = fit.body.y * rig.unit_scale;
    pose.theta = i == 0 ? fit.body.theta : prev_theta + wrap_pi(fit.body.theta - prev_theta);
    prev_theta = pose.theta;
    traj.poses.push_back(pose);
  }
  return finite_difference_velocities(traj);
}

}  // namespace motmap
