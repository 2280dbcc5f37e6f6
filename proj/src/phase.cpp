#include "motmap/phase.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace motmap {

namespace {

using std::numbers::pi;

}  // namespace

double PhaseBins::center(int k) const {
  if (k < 0 || k >= K) throw std::invalid_argument("PhaseBins: bin index out of range");
  return 2.0 * pi * (k + 0.5) / K;
}

std::size_t PhaseBins::total() const {
  std::size_t n = 0;
  for (const auto& bin : members) n += bin.size();
  return n;
}

Trajectory phase_from_command(const Trajectory& traj, const GaitSpec& gait) {
  double f = traj.frequency;
  if (!(f > 0.0)) {
    if (!(gait.period > 0.0))
      throw std::invalid_argument("phase_from_command: no usable frequency");
    f = 1.0 / gait.period;
  }
  Trajectory out = traj;
  for (Sample& s : out.samples) s.phase = wrap_2pi(2.0 * pi * f * s.t);
  return out;
}

Trajectory estimate_phase(const Trajectory& traj) {
  const int n = static_cast<int>(traj.samples.size());
  if (n < 8) throw std::invalid_argument("estimate_phase: too few samples");
  const int na = traj.n_a();
  if (na < 2) throw std::invalid_argument("estimate_phase: needs >= 2 actuated coordinates");

  // Mean-centered principal axes of the actuated shape.
  Eigen::MatrixXd X(n, na);
  for (int i = 0; i < n; ++i) X.row(i) = traj.samples[i].shape.r_a.transpose();
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  const Eigen::MatrixXd cov = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd u1 = eig.eigenvectors().col(na - 1);  // ascending order
  Eigen::VectorXd u2 = eig.eigenvectors().col(na - 2);
  // Deterministic orientation: largest-magnitude entry of the major axis is
  // positive, and for planar shapes the frame is right-handed, so rotating
  // the shape plane can only shift the phase by a constant.
  int arg = 0;
  u1.cwiseAbs().maxCoeff(&arg);
  if (u1(arg) < 0.0) u1 = -u1;
  if (na == 2) {
    u2 = Eigen::Vector2d(-u1(1), u1(0));
  } else {
    u2.cwiseAbs().maxCoeff(&arg);
    if (u2(arg) < 0.0) u2 = -u2;
  }
  const Eigen::VectorXd s1 = X * u1;
  const Eigen::VectorXd s2 = X * u2;

  // Winding angle, unwrapped by continuity.
  std::vector<double> psi(n);
  psi[0] = std::atan2(s2(0), s1(0));
  for (int i = 1; i < n; ++i) {
    const double raw = std::atan2(s2(i), s1(i));
    psi[i] = psi[i - 1] + wrap_pi(raw - psi[i - 1]);
  }

  const double advance = psi[n - 1] - psi[0];
  if (std::abs(advance) < 3.0 * 2.0 * pi)
    throw std::invalid_argument("estimate_phase: fewer than 3 full cycles of data");
  const double direction = advance > 0.0 ? 1.0 : -1.0;
  const double samples_per_cycle = n * 2.0 * pi / std::abs(advance);

  // Rhythmicity: the smoothed unwrapped angle must be monotone.
  const int radius = std::max(1, static_cast<int>(std::lround(samples_per_cycle / 16.0)));
  std::vector<double> smooth(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - radius), hi = std::min(n - 1, i + radius);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += psi[j];
    smooth[i] = acc / (hi - lo + 1);
  }
  for (int i = 1; i < n; ++i)
    if (direction * (smooth[i] - smooth[i - 1]) < 0.0)
      throw std::runtime_error("estimate_phase: non-rhythmic data (angle not monotone)");

  // Straighten: bin the wrapped angle and estimate, per bin, the circular
  // mean offset between the uniform-rate target and the angle. Interpolating
  // those offsets gives the monotone piecewise-linear correction.
  const double t0 = traj.samples.front().t;
  const double rate = advance / (traj.samples.back().t - t0);
  const int M = 64;
  std::vector<double> cs(M, 0.0), sn(M, 0.0);
  std::vector<int> cnt(M, 0);
  for (int i = 0; i < n; ++i) {
    const double target = psi[0] + rate * (traj.samples[i].t - t0);
    const double d = target - psi[i];
    const int m = std::min(M - 1, static_cast<int>(wrap_2pi(psi[i]) / (2.0 * pi) * M));
    cs[m] += std::cos(d);
    sn[m] += std::sin(d);
    ++cnt[m];
  }
  std::vector<double> corr(M);
  for (int m = 0; m < M; ++m) {
    if (cnt[m] > 0) {
      corr[m] = std::atan2(sn[m], cs[m]);
    } else {
      // Fill from the nearest populated neighbors (circular scan).
      int before = m, after = m;
      for (int step = 1; step <= M; ++step) {
        before = (m - step + M) % M;
        if (cnt[before] > 0) break;
      }
      for (int step = 1; step <= M; ++step) {
        after = (m + step) % M;
        if (cnt[after] > 0) break;
      }
      const double a = std::atan2(sn[before], cs[before]);
      const double b = std::atan2(sn[after], cs[after]);
      corr[m] = a + 0.5 * wrap_pi(b - a);
    }
  }

  // Piecewise-linear, circular interpolation of the per-bin corrections at
  // bin centers; the correction is slowly varying, so adjacent knots are
  // joined through their wrapped difference.
  auto correction_at = [&](double wrapped) {
    const double pos = wrapped / (2.0 * pi) * M - 0.5;
    const int k0 = static_cast<int>(std::floor(pos));
    const double w = pos - k0;
    const double a = corr[(k0 % M + M) % M];
    const double b = corr[((k0 + 1) % M + M) % M];
    return a + w * wrap_pi(b - a);
  };

  std::vector<double> phi(n);
  for (int i = 0; i < n; ++i) phi[i] = psi[i] + correction_at(wrap_2pi(psi[i]));
  for (int i = 1; i < n; ++i)
    if (direction * (phi[i] - phi[i - 1]) < -1e-9)
      throw std::runtime_error("estimate_phase: straightening produced a non-monotone map");

  // Fix the global offset: phi = 0 at the maximum of the first principal
  // coordinate's fundamental harmonic.
  double ac = 0.0, as = 0.0;
  for (int i = 0; i < n; ++i) {
    ac += s1(i) * std::cos(phi[i]);
    as += s1(i) * std::sin(phi[i]);
  }
  const double offset = std::atan2(as, ac);

  Trajectory out = traj;
  for (int i = 0; i < n; ++i) out.samples[i].phase = wrap_2pi(phi[i] - offset);
  return out;
}

PhaseBins bin_by_phase(const Trajectory& traj, int K) {
  if (K < 4) throw std::invalid_argument("bin_by_phase: K must be >= 4");
  PhaseBins bins;
  bins.K = K;
  bins.members.resize(K);
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const double phi = wrap_2pi(traj.samples[i].phase);
    const int k = std::min(K - 1, static_cast<int>(phi / (2.0 * pi) * K));
    bins.members[k].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < K; ++k)
    if (bins.members[k].empty()) bins.empty.push_back(k);
  return bins;
}

}  // namespace motmap
