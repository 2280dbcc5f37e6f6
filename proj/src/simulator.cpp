#include "motmap/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace motmap {

namespace {

using std::numbers::pi;

Eigen::Vector2d unit(double a) { return {std::cos(a), std::sin(a)}; }
Eigen::Vector2d dunit(double a) { return {-std::sin(a), std::cos(a)}; }

}  // namespace

std::vector<FlipperAttach> SwimmerParams::default_flippers() {
  return {{0, 0.5, +1}, {0, 0.5, -1}, {2, 0.5, +1}, {2, 0.5, -1}};
}

void SwimmerParams::validate() const {
  for (double l : link_lengths)
    if (!(l > 0.0)) throw std::invalid_argument("SwimmerParams: link lengths must be > 0");
  if (!(drag_tangential > 0.0))
    throw std::invalid_argument("SwimmerParams: drag_tangential must be > 0");
  if (!(drag_normal > drag_tangential))
    throw std::invalid_argument("SwimmerParams: drag_normal must exceed drag_tangential");
  if (!(flipper_length > 0.0))
    throw std::invalid_argument("SwimmerParams: flipper_length must be > 0");
  if (flipper_stiffness < 0.0)
    throw std::invalid_argument("SwimmerParams: flipper_stiffness must be >= 0");
  if (!(flipper_damping > 0.0))
    throw std::invalid_argument("SwimmerParams: flipper_damping must be > 0");
  if (!(flipper_limit > 0.0) || flipper_limit > pi / 2.0 + 1e-12)
    throw std::invalid_argument("SwimmerParams: flipper_limit must lie in (0, pi/2]");
  if (servo_tau < 0.0) throw std::invalid_argument("SwimmerParams: servo_tau must be >= 0");
  for (const FlipperAttach& f : flipper_attach) {
    if (f.link < 0 || f.link > 2)
      throw std::invalid_argument("SwimmerParams: flipper link index out of range");
    if (f.fraction < 0.0 || f.fraction > 1.0)
      throw std::invalid_argument("SwimmerParams: flipper fraction must lie in [0, 1]");
    if (f.side != 1 && f.side != -1)
      throw std::invalid_argument("SwimmerParams: flipper side must be +1 or -1");
  }
}

std::vector<SegmentKinematics> swimmer_segments(const SwimmerParams& params,
                                                const FullShape& shape) {
  params.validate();
  const int nf = params.n_flippers();
  if (shape.r_a.size() != 2) throw std::invalid_argument("swimmer_segments: r_a must have dim 2");
  if (shape.r_p.size() != nf)
    throw std::invalid_argument("swimmer_segments: r_p must have one angle per flipper");
  const int ns = 2 + nf;
  const double c = params.link_lengths[1] / 2.0;  // half middle link

  // Per-link base point, direction, and direction gradient w.r.t. shape.
  struct LinkFrame {
    Eigen::Vector2d base;
    double psi;
    Eigen::VectorXd dpsi;
    double length;
  };
  std::array<LinkFrame, 3> links;
  links[0] = {{+c, 0.0}, shape.r_a(0), Eigen::VectorXd::Zero(ns), params.link_lengths[0]};
  links[0].dpsi(0) = 1.0;
  links[1] = {{-c, 0.0}, 0.0, Eigen::VectorXd::Zero(ns), params.link_lengths[1]};
  links[2] = {{-c, 0.0}, pi - shape.r_a(1), Eigen::VectorXd::Zero(ns), params.link_lengths[2]};
  links[2].dpsi(1) = -1.0;

  std::vector<SegmentKinematics> segs;
  segs.reserve(3 + nf);
  for (const LinkFrame& l : links) {
    SegmentKinematics s;
    s.length = l.length;
    s.psi = l.psi;
    s.dpsi = l.dpsi;
    s.center = l.base + 0.5 * l.length * unit(l.psi);
    s.dcenter = 0.5 * l.length * dunit(l.psi) * l.dpsi.transpose();
    segs.push_back(std::move(s));
  }

  for (int j = 0; j < nf; ++j) {
    const FlipperAttach& at = params.flipper_attach[j];
    const LinkFrame& l = links[at.link];
    const double s_side = static_cast<double>(at.side);
    const double alpha = shape.r_p(j);

    SegmentKinematics s;
    s.length = params.flipper_length;
    s.psi = l.psi + s_side * alpha;
    s.dpsi = l.dpsi;
    s.dpsi(2 + j) += s_side;

    const Eigen::Vector2d hinge = l.base + at.fraction * l.length * unit(l.psi);
    const Eigen::Matrix2Xd dhinge =
        at.fraction * l.length * dunit(l.psi) * l.dpsi.transpose();
    s.center = hinge + 0.5 * s.length * unit(s.psi);
    s.dcenter = dhinge + 0.5 * s.length * dunit(s.psi) * s.dpsi.transpose();
    segs.push_back(std::move(s));
  }
  return segs;
}

Eigen::MatrixXd dissipation_matrix(const std::vector<SegmentKinematics>& segments, double c_t,
                                   double c_n, int n_shape) {
  const int n = 3 + n_shape;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd J(3, n);
  for (const SegmentKinematics& seg : segments) {
    const Eigen::Vector2d t = unit(seg.psi);
    const Eigen::Vector2d nrm(-t.y(), t.x());
    const Eigen::Vector2d spin(-seg.center.y(), seg.center.x());  // d(center vel)/d omega

    J.setZero();
    J(0, 0) = t.x();
    J(0, 1) = t.y();
    J(0, 2) = t.dot(spin);
    J.row(0).tail(n_shape) = t.transpose() * seg.dcenter;
    J(1, 0) = nrm.x();
    J(1, 1) = nrm.y();
    J(1, 2) = nrm.dot(spin);
    J.row(1).tail(n_shape) = nrm.transpose() * seg.dcenter;
    J(2, 2) = 1.0;
    J.row(2).tail(n_shape) = seg.dpsi.transpose();

    const double L = seg.length;
    const Eigen::Vector3d w(c_t * L, c_n * L, c_n * L * L * L / 12.0);
    M.noalias() += J.transpose() * w.asDiagonal() * J;
  }
  return M;
}

DragBlocks drag_matrices(const SwimmerParams& params, const FullShape& shape) {
  DragBlocks blocks;
  blocks.n_a = 2;
  blocks.n_p = params.n_flippers();
  blocks.full = dissipation_matrix(swimmer_segments(params, shape), params.drag_tangential,
                                   params.drag_normal, 2 + blocks.n_p);
  return blocks;
}

namespace {

// Balance system [M_bb M_bp; M_pb M_pp + cI], factorized once per shape.
struct BalanceSystem {
  DragBlocks blocks;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  int nf;

  explicit BalanceSystem(const SwimmerParams& params, const FullShape& shape)
      : blocks(drag_matrices(params, shape)), nf(blocks.n_p) {
    Eigen::MatrixXd S(3 + nf, 3 + nf);
    S.topLeftCorner(3, 3) = blocks.bb();
    S.topRightCorner(3, nf) = blocks.bp();
    S.bottomLeftCorner(nf, 3) = blocks.pb();
    S.bottomRightCorner(nf, nf) = blocks.pp();
    S.bottomRightCorner(nf, nf).diagonal().array() += params.flipper_damping;
    ldlt.compute(S);
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-14 * d.maxCoeff()))
      throw std::runtime_error("suds balance: singular force/torque system");
  }

  // Columns of [v_b; r_p'] for each RHS column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return ldlt.solve(rhs); }

  // Spring right-hand side for the passive rows.
  Eigen::VectorXd spring_rhs(const SwimmerParams& params, const FullShape& shape) const {
    return -params.flipper_stiffness *
           (shape.r_p.array() - params.flipper_rest_angle).matrix();
  }
};

}  // namespace

SudsMaps suds_oracle(const SwimmerParams& params, const FullShape& shape) {
  const BalanceSystem sys(params, shape);
  const int nf = sys.nf;

  Eigen::MatrixXd rhs(3 + nf, 3);
  rhs.topLeftCorner(3, 2) = -sys.blocks.ba();
  rhs.bottomLeftCorner(nf, 2) = -sys.blocks.pa();
  rhs.col(2).head(3).setZero();
  rhs.col(2).tail(nf) = sys.spring_rhs(params, shape);

  const Eigen::MatrixXd sol = sys.solve(rhs);
  SudsMaps maps;
  maps.A = sol.topLeftCorner(3, 2);
  maps.B = sol.col(2).head(3);
  maps.C = sol.bottomLeftCorner(nf, 2);
  maps.D = sol.col(2).tail(nf);
  return maps;
}

namespace {

struct MarkerLayout {
  // Segment-frame marker positions [mm]: x along the link from its joint.
  Eigen::Vector2d top_a{10.0, -15.0};
  Eigen::Vector2d top_b{60.0, 15.0};
  Eigen::Vector2d spoke{15.0, 0.0};
  double top_z = 30.0;
  double spoke_z = 80.0;
  double lowered_z = 5.0;
  double flipper_marker_fraction = 0.7;
  double flipper_z = 25.0;
};

}  // namespace

Rig default_rig(const SwimmerParams& params) {
  params.validate();
  const MarkerLayout lay;
  Rig rig;
  rig.n_markers = 7 + params.n_flippers();
  rig.head.top_markers = {0, 1};
  rig.head.spoke_marker = 2;
  rig.tail.top_markers = {3, 4};
  rig.tail.spoke_marker = 5;
  rig.lowered_marker = 6;
  for (int j = 0; j < params.n_flippers(); ++j) {
    rig.flipper_markers.push_back(7 + j);
    rig.flipper_segment.push_back(params.flipper_attach[j].link == 0 ? 0 : 1);
  }
  rig.joint_distance = params.link_lengths[1] * 1000.0;
  rig.unit_scale = 1e-3;

  // joint - centroid = lambda*(b - a) + rho*R90*(b - a), solved from layout.
  const Eigen::Vector2d c = 0.5 * (lay.top_a + lay.top_b);
  const Eigen::Vector2d d = lay.top_b - lay.top_a;
  Eigen::Matrix2d basis;
  basis.col(0) = d;
  basis.col(1) = Eigen::Vector2d(-d.y(), d.x());
  const Eigen::Vector2d lr = basis.colPivHouseholderQr().solve(-c);
  rig.head.lambda = rig.tail.lambda = lr(0);
  rig.head.rho = rig.tail.rho = lr(1);
  return rig;
}

MarkerFrame synthesize_markers(const SwimmerParams& params, const Pose2& pose,
                               const FullShape& shape, double t) {
  const MarkerLayout lay;
  const int nf = params.n_flippers();
  MarkerFrame frame;
  frame.t = t;
  frame.pos.resize(7 + nf);
  frame.valid.assign(7 + nf, true);

  const Eigen::Vector2d body_mm(pose.x * 1000.0, pose.y * 1000.0);
  const double c = params.link_lengths[1] / 2.0 * 1000.0;

  struct Seg {
    Eigen::Vector2d origin;  // world mm
    double angle;            // world
    double length_mm;
  };
  auto place = [&](const Eigen::Vector2d& body_pt, double body_angle, double len) {
    const Eigen::Vector2d o =
        body_mm + Eigen::Rotation2Dd(pose.theta) * body_pt;
    return Seg{o, pose.theta + body_angle, len};
  };
  const Seg head = place({+c, 0.0}, shape.r_a(0), params.link_lengths[0] * 1000.0);
  const Seg tail = place({-c, 0.0}, pi - shape.r_a(1), params.link_lengths[2] * 1000.0);
  const Seg mid = place({-c, 0.0}, 0.0, params.link_lengths[1] * 1000.0);

  auto seg_point = [](const Seg& s, const Eigen::Vector2d& local, double z) {
    const Eigen::Vector2d w = s.origin + Eigen::Rotation2Dd(s.angle) * local;
    return Eigen::Vector3d(w.x(), w.y(), z);
  };

  frame.pos[0] = seg_point(head, lay.top_a, lay.top_z);
  frame.pos[1] = seg_point(head, lay.top_b, lay.top_z);
  frame.pos[2] = seg_point(head, lay.spoke, lay.spoke_z);
  frame.pos[3] = seg_point(tail, lay.top_a, lay.top_z);
  frame.pos[4] = seg_point(tail, lay.top_b, lay.top_z);
  frame.pos[5] = seg_point(tail, lay.spoke, lay.spoke_z);
  frame.pos[6] = seg_point(tail, {tail.length_mm, 0.0}, lay.lowered_z);

  const double fl_mm = params.flipper_length * 1000.0;
  for (int j = 0; j < nf; ++j) {
    const FlipperAttach& at = params.flipper_attach[j];
    const Seg& s = at.link == 0 ? head : (at.link == 2 ? tail : mid);
    const Eigen::Vector2d hinge(at.fraction * s.length_mm, 0.0);
    const Eigen::Vector2d local =
        hinge + lay.flipper_marker_fraction * fl_mm * unit(at.side * shape.r_p(j));
    frame.pos[7 + j] = seg_point(s, local, lay.flipper_z);
  }
  return frame;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  auto mix = [](std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  };
  return mix(root ^ mix(stream + 0x632BE59BD9B4E019ULL));
}

namespace {

// Ornstein-Uhlenbeck values held constant within each integration step.
struct Disturbances {
  Eigen::Vector2d shape = Eigen::Vector2d::Zero();
  Eigen::VectorXd flipper;
};

struct StepRates {
  Eigen::Vector2d r_a;
  Eigen::Vector2d dr_a;
  Eigen::VectorXd dr_p;
  Twist2 vb;
  double dissipated_power = 0.0;
};

class SwimmerDynamics {
 public:
  SwimmerDynamics(const SwimmerParams& params, const GaitSpec& gait, double frequency)
      : params_(params), gait_(gait), two_pi_f_(2.0 * pi * frequency) {}

  bool has_servo() const { return params_.servo_tau > 0.0; }
  int state_dim() const { return 3 + (has_servo() ? 2 : 0) + params_.n_flippers(); }

  // state layout: [x, y, theta, (r_a if servo), r_p]
  Eigen::VectorXd initial_state(const Eigen::VectorXd& initial_rp) const {
    const int nf = params_.n_flippers();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(state_dim());
    int at = 3;
    if (has_servo()) {
      y.segment<2>(3) = gait_eval(gait_, 0.0).first;
      at += 2;
    }
    if (initial_rp.size() == 0)
      y.segment(at, nf).setConstant(params_.flipper_rest_angle);
    else if (initial_rp.size() == nf)
      y.segment(at, nf) = initial_rp;
    else
      throw std::invalid_argument("simulate: initial_rp has wrong dimension");
    return y;
  }

  Eigen::VectorXd passive_of(const Eigen::VectorXd& y) const {
    return y.segment(has_servo() ? 5 : 3, params_.n_flippers());
  }
  void set_passive(Eigen::VectorXd& y, const Eigen::VectorXd& rp) const {
    y.segment(has_servo() ? 5 : 3, params_.n_flippers()) = rp;
  }

  // Realized rates and body velocity at (t, y) under the held disturbances.
  StepRates rates(double t, const Eigen::VectorXd& y, const Disturbances& dist) const {
    const auto [cmd, dcmd] = gait_eval(gait_, two_pi_f_ * t);
    StepRates out;
    if (has_servo()) {
      out.r_a = y.segment<2>(3);
      out.dr_a = (cmd + dist.shape - out.r_a) / params_.servo_tau;
    } else {
      out.r_a = cmd;
      out.dr_a = two_pi_f_ * dcmd;
    }

    FullShape shape{out.r_a, passive_of(y)};
    const BalanceSystem sys(params_, shape);
    const int nf = sys.nf;
    Eigen::VectorXd rhs(3 + nf);
    rhs.head<3>() = -sys.blocks.ba() * out.dr_a;
    rhs.tail(nf) = -sys.blocks.pa() * out.dr_a + sys.spring_rhs(params_, shape);
    if (dist.flipper.size()) rhs.tail(nf) += dist.flipper;
    const Eigen::VectorXd sol = sys.solve(rhs);
    out.vb = Twist2{sol(0), sol(1), sol(2)};
    out.dr_p = sol.tail(nf);

    // Project the flow at the opening limit: clamp angles may not move
    // further outward.
    const double lo = params_.flipper_rest_angle - params_.flipper_limit;
    const double hi = params_.flipper_rest_angle + params_.flipper_limit;
    for (int j = 0; j < nf; ++j) {
      if (shape.r_p(j) <= lo + 1e-12 && out.dr_p(j) < 0.0) out.dr_p(j) = 0.0;
      if (shape.r_p(j) >= hi - 1e-12 && out.dr_p(j) > 0.0) out.dr_p(j) = 0.0;
    }

    Eigen::VectorXd z(3 + 2 + nf);
    z << sol.head<3>(), out.dr_a, out.dr_p;
    out.dissipated_power = z.dot(sys.blocks.full * z);
    return out;
  }

  Eigen::VectorXd derivative(double t, const Eigen::VectorXd& y,
                             const Disturbances& dist) const {
    const StepRates r = rates(t, y, dist);
    Eigen::VectorXd dy(state_dim());
    const double th = y(2), cth = std::cos(th), sth = std::sin(th);
    dy(0) = r.vb.vx * cth - r.vb.vy * sth;
    dy(1) = r.vb.vx * sth + r.vb.vy * cth;
    dy(2) = r.vb.omega;
    int at = 3;
    if (has_servo()) {
      dy.segment<2>(3) = r.dr_a;
      at += 2;
    }
    dy.segment(at, params_.n_flippers()) = r.dr_p;
    return dy;
  }

  void rk4_step(double t, double h, Eigen::VectorXd& y, const Disturbances& dist) const {
    const Eigen::VectorXd k1 = derivative(t, y, dist);
    const Eigen::VectorXd k2 = derivative(t + 0.5 * h, y + 0.5 * h * k1, dist);
    const Eigen::VectorXd k3 = derivative(t + 0.5 * h, y + 0.5 * h * k2, dist);
    const Eigen::VectorXd k4 = derivative(t + h, y + h * k3, dist);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Projection step for the flipper opening limit.
    const int nf = params_.n_flippers();
    const double lo = params_.flipper_rest_angle - params_.flipper_limit;
    const double hi = params_.flipper_rest_angle + params_.flipper_limit;
    Eigen::VectorXd rp = passive_of(y);
    for (int j = 0; j < nf; ++j) rp(j) = std::clamp(rp(j), lo, hi);
    set_passive(y, rp);
  }

 private:
  const SwimmerParams& params_;
  const GaitSpec& gait_;
  double two_pi_f_;
};

// Add a damped second-order response to the spoke markers, driven by their
// rigid-motion acceleration (flexible stalks have inertia).
void apply_spoke_resonance(std::vector<MarkerFrame>& frames, const Rig& rig,
                           const NoiseSpec& noise, double h) {
  const double w0 = 2.0 * pi * noise.resonance_freq_hz;
  const double zeta = noise.resonance_damping;
  for (int idx : {rig.head.spoke_marker, rig.tail.spoke_marker}) {
    const std::size_t n = frames.size();
    std::vector<Eigen::Vector3d> rigid(n);
    for (std::size_t i = 0; i < n; ++i) rigid[i] = frames[i].pos[idx];
    Eigen::Vector3d u = Eigen::Vector3d::Zero(), du = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      if (i > 0 && i + 1 < n) acc = (rigid[i + 1] - 2.0 * rigid[i] + rigid[i - 1]) / (h * h);
      du += h * (-w0 * w0 * u - 2.0 * zeta * w0 * du - acc);
      u += h * du;
      frames[i].pos[idx] += u;
    }
  }
}

}  // namespace

SimResult simulate(const SwimmerParams& params, const GaitSpec& gait, double frequency,
                   double n_cycles, double sample_rate, const NoiseSpec& noise,
                   const Eigen::VectorXd& initial_rp) {
  params.validate();
  if (gait.n_a() != 2) throw std::invalid_argument("simulate: gait must drive 2 motor angles");
  if (!(frequency > 0.0)) throw std::invalid_argument("simulate: frequency must be > 0");
  if (!(n_cycles > 0.0)) throw std::invalid_argument("simulate: n_cycles must be > 0");
  if (!(sample_rate >= 20.0 * frequency))
    throw std::invalid_argument("simulate: sample_rate must be >= 20x frequency");
  if (noise.marker_sigma < 0.0) throw std::invalid_argument("simulate: marker_sigma must be >= 0");
  if (noise.shape_disturbance < 0.0 || noise.flipper_disturbance < 0.0 ||
      !(noise.disturbance_tau > 0.0) || noise.flipper_disturbance_tau < 0.0)
    throw std::invalid_argument("simulate: bad disturbance parameters");

  const int nf = params.n_flippers();
  const double h = 1.0 / sample_rate;
  const long n_samples = std::llround(n_cycles * sample_rate / frequency);
  if (n_samples < 2) throw std::invalid_argument("simulate: fewer than 2 samples requested");

  const SwimmerDynamics dyn(params, gait, frequency);
  Eigen::VectorXd y = dyn.initial_state(initial_rp);

  std::mt19937_64 rng_process(derive_seed(noise.seed, 1));
  std::mt19937_64 rng_marker(derive_seed(noise.seed, 2));
  std::normal_distribution<double> randn(0.0, 1.0);

  Disturbances dist;
  dist.flipper = Eigen::VectorXd::Zero(nf);
  const bool process_noise = noise.shape_disturbance > 0.0 || noise.flipper_disturbance > 0.0;
  if (process_noise) {
    for (int i = 0; i < 2; ++i) dist.shape(i) = noise.shape_disturbance * randn(rng_process);
    for (int j = 0; j < nf; ++j) dist.flipper(j) = noise.flipper_disturbance * randn(rng_process);
  }
  const double rho = std::exp(-h / noise.disturbance_tau);
  const double renew = std::sqrt(1.0 - rho * rho);
  const double flip_tau =
      noise.flipper_disturbance_tau > 0.0 ? noise.flipper_disturbance_tau : noise.disturbance_tau;
  const double rho_f = std::exp(-h / flip_tau);
  const double renew_f = std::sqrt(1.0 - rho_f * rho_f);

  SimResult result;
  result.rig = default_rig(params);
  result.truth.sample_rate = sample_rate;
  result.truth.gait_id = gait.label;
  result.truth.frequency = frequency;
  result.truth.samples.reserve(n_samples);
  result.truth.poses.reserve(n_samples);
  result.oracle.reserve(n_samples);
  result.markers.reserve(n_samples);

  for (long i = 0; i < n_samples; ++i) {
    const double t = i * h;
    if (!y.allFinite()) throw std::runtime_error("simulate: state diverged (unstable step)");

    const StepRates r = dyn.rates(t, y, dist);
    if (!(r.dissipated_power >= -1e-9 * (1.0 + std::abs(r.dissipated_power))))
      throw std::runtime_error("simulate: energy-rate check failed (unstable step)");

    Pose2 pose;
    pose.x = y(0);
    pose.y = y(1);
    pose.theta = y(2);
    const FullShape shape{r.r_a, dyn.passive_of(y)};

    Sample s;
    s.t = t;
    s.phase = wrap_2pi(2.0 * pi * frequency * t);
    s.shape.r_a = r.r_a;
    s.shape.r_p = shape.r_p;
    s.dshape_a = r.dr_a;
    s.dshape_p = r.dr_p;
    s.vb = r.vb;
    result.truth.samples.push_back(std::move(s));
    result.truth.poses.push_back(pose);
    result.oracle.push_back(suds_oracle(params, shape));
    result.markers.push_back(synthesize_markers(params, pose, shape, t));

    if (i + 1 < n_samples) {
      dyn.rk4_step(t, h, y, dist);
      if (process_noise) {
        for (int k = 0; k < 2; ++k)
          dist.shape(k) = rho * dist.shape(k) + noise.shape_disturbance * renew * randn(rng_process);
        for (int j = 0; j < nf; ++j)
          dist.flipper(j) =
              rho_f * dist.flipper(j) + noise.flipper_disturbance * renew_f * randn(rng_process);
      }
    }
  }

  if (noise.spoke_resonance) apply_spoke_resonance(result.markers, result.rig, noise, h);
  if (noise.marker_sigma > 0.0) {
    for (MarkerFrame& f : result.markers)
      for (Eigen::Vector3d& p : f.pos)
        for (int c = 0; c < 3; ++c) p(c) += noise.marker_sigma * randn(rng_marker);
  }

  // The marker pipeline differentiates, which takes 3 frames; micro-runs
  // (used for probing single steps) skip it and leave `observed` empty.
  if (n_samples < 3) return result;

  result.observed =
      ingest_trajectory(result.markers, result.rig, sample_rate, gait.label, frequency,
                        result.truth.trial_id, &result.ingest_report);
  if (result.observed.samples.size() == result.truth.samples.size()) {
    for (std::size_t i = 0; i < result.observed.samples.size(); ++i)
      result.observed.samples[i].phase = result.truth.samples[i].phase;
  } else {
    // Boundary frames were trimmed by jump removal: align by timestamp.
    for (Sample& s : result.observed.samples) {
      const long j = std::llround(s.t * sample_rate);
      if (j >= 0 && j < n_samples) s.phase = result.truth.samples[j].phase;
    }
  }
  return result;
}

void save_oracle_csv(const std::vector<SudsMaps>& rows, const Trajectory& truth,
                     const std::string& path) {
  if (rows.size() != truth.samples.size())
    throw std::invalid_argument("save_oracle_csv: row/sample count mismatch");
  if (rows.empty()) throw std::invalid_argument("save_oracle_csv: no rows");
  const int na = static_cast<int>(rows.front().A.cols());
  const int np = static_cast<int>(rows.front().C.rows());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_oracle_csv: cannot open " + path);
  out << 't';
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < na; ++c) out << ",a" << r << c;
  for (int r = 0; r < 3; ++r) out << ",b" << r;
  for (int r = 0; r < np; ++r)
    for (int c = 0; c < na; ++c) out << ",c" << r << c;
  for (int r = 0; r < np; ++r) out << ",d" << r;
  out << '\n';

  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", truth.samples[i].t);
    out << buf;
    const SudsMaps& m = rows[i];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < na; ++c) put(m.A(r, c));
    for (int r = 0; r < 3; ++r) put(m.B(r));
    for (int r = 0; r < np; ++r)
      for (int c = 0; c < na; ++c) put(m.C(r, c));
    for (int r = 0; r < np; ++r) put(m.D(r));
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_oracle_csv: write failed for " + path);
}

}  // namespace motmap
