#include "motmap/tls.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "motmap/geometry.hpp"

namespace motmap {

namespace {

/// Unwrap the per-sample phases through minimal increments so rates and cycle
/// counts can be read off the sequence.
std::vector<double> unwrap_phases(const Trajectory& traj) {
  std::vector<double> u(traj.samples.size());
  if (u.empty()) return u;
  u[0] = traj.samples[0].phase;
  for (std::size_t i = 1; i < u.size(); ++i)
    u[i] = u[i - 1] + wrap_pi(traj.samples[i].phase - u[i - 1]);
  return u;
}

Eigen::VectorXd full_shape(const Sample& s) {
  Eigen::VectorXd r(s.shape.r_a.size() + s.shape.r_p.size());
  r << s.shape.r_a, s.shape.r_p;
  return r;
}

Eigen::VectorXd full_rate(const Sample& s) {
  Eigen::VectorXd r(s.dshape_a.size() + s.dshape_p.size());
  r << s.dshape_a, s.dshape_p;
  return r;
}

/// Regressor vector [1 | delta | delta_rate | vec(outer product)].
Eigen::VectorXd regressor_vector(const Eigen::VectorXd& delta, const Eigen::VectorXd& rate) {
  const int d = static_cast<int>(delta.size());
  const int r = static_cast<int>(rate.size());
  Eigen::VectorXd z(1 + d + r + d * r);
  z(0) = 1.0;
  z.segment(1, d) = delta;
  z.segment(1 + d, r) = rate;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < d; ++j) z(1 + d + r + i * d + j) = rate(i) * delta(j);
  return z;
}

}  // namespace

Eigen::VectorXd NominalGait::value(double phi) const {
  Eigen::VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v(i) = coords[i].value(phi);
  return v;
}

Eigen::VectorXd NominalGait::derivative(double phi) const {
  Eigen::VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v(i) = coords[i].derivative(phi);
  return v;
}

int PhaseBinnedLinearModel::delta_dim() const {
  switch (mode) {
    case TlsMode::plain: return n_a;
    case TlsMode::suds: return n_a + n_p;
    case TlsMode::phase_only: return 0;
  }
  return 0;
}

int PhaseBinnedLinearModel::regressors() const {
  const int d = delta_dim();
  const int r = rate_dim();
  return 1 + d + r + d * r;
}

Eigen::MatrixXd PhaseBinnedLinearModel::coef_at(double phi) const {
  Eigen::MatrixXd c(outputs(), regressors());
  for (int o = 0; o < c.rows(); ++o)
    for (int p = 0; p < c.cols(); ++p) c(o, p) = interp[o][p].value(phi);
  return c;
}

NominalGait fit_nominal_gait(const Trajectory& traj, int harmonics) {
  if (harmonics < 1) throw std::invalid_argument("fit_nominal_gait: harmonics must be >= 1");
  if (traj.samples.size() < 2) throw std::invalid_argument("fit_nominal_gait: too few samples");
  const std::vector<double> u = unwrap_phases(traj);
  const double span = std::abs(u.back() - u.front());
  if (span < 0.98 * 4.0 * std::numbers::pi)
    throw std::invalid_argument("fit_nominal_gait: phases must span at least two cycles");

  const int n = static_cast<int>(traj.samples.size());
  std::vector<double> phi(n);
  for (int i = 0; i < n; ++i) phi[i] = traj.samples[i].phase;

  NominalGait g;
  g.n_a = traj.n_a();
  const int dim = traj.n_a() + traj.n_p();
  g.coords.resize(dim);
  std::vector<double> y(n);
  for (int c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) y[i] = full_shape(traj.samples[i])(c);
    g.coords[c] = FourierSeries::fit(phi, y, harmonics);
  }
  return g;
}

ShapeOffsets compute_offsets(const Trajectory& traj, const NominalGait& nominal) {
  const int n = static_cast<int>(traj.samples.size());
  if (n < 3) throw std::invalid_argument("compute_offsets: need >= 3 samples");
  if (traj.sample_rate <= 0.0) throw std::invalid_argument("compute_offsets: sample_rate not set");
  const int dim = nominal.dim();
  if (traj.n_a() + traj.n_p() != dim)
    throw std::invalid_argument("compute_offsets: shape dimension mismatch with nominal gait");

  const std::vector<double> u = unwrap_phases(traj);
  const double h = traj.dt();
  ShapeOffsets out;
  out.delta.resize(n, dim);
  out.delta_rate.resize(n, dim);
  out.phase_rate.resize(n);
  for (int i = 0; i < n; ++i) {
    if (i == 0)
      out.phase_rate(i) = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    else if (i == n - 1)
      out.phase_rate(i) = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    else
      out.phase_rate(i) = (u[i + 1] - u[i - 1]) / (2.0 * h);

    const Sample& s = traj.samples[i];
    out.delta.row(i) = (full_shape(s) - nominal.value(s.phase)).transpose();
    out.delta_rate.row(i) =
        (full_rate(s) - nominal.derivative(s.phase) * out.phase_rate(i)).transpose();
  }
  return out;
}

namespace {

/// TLS core on a column-screened regressor block (every column significant).
Eigen::VectorXd tls_solve_core(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& targets,
                               double ridge, bool* degenerate) {
  const int n = static_cast<int>(regressors.rows());
  const int p = static_cast<int>(regressors.cols());

  Eigen::MatrixXd stacked(n, p + 1);
  stacked.leftCols(p) = regressors;
  stacked.col(p) = targets;

  Eigen::MatrixXd gram = stacked.transpose() * stacked;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> probe(gram, Eigen::EigenvaluesOnly);
  const double top = std::max(probe.eigenvalues().maxCoeff(), 0.0);
  // Penalize the regressor components of the orthogonal-residual direction:
  // equivalent to appending ridge-scaled rows to the regressor columns of the
  // stacked matrix, which steers near-vertical solutions away from blow-up.
  const double lambda2 = ridge * ridge * top;
  gram.diagonal().head(p).array() += lambda2;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd evals = eig.eigenvalues();  // ascending
  const Eigen::VectorXd v = eig.eigenvectors().col(0);

  // The orthogonal-residual solution is only meaningful when appending the
  // target column genuinely lowers the smallest singular value below that of
  // the regressor block alone; otherwise the smallest direction lies (or may
  // lie) inside the regressor span and the construction degenerates.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> reg_probe(
      Eigen::MatrixXd(regressors.transpose() * regressors), Eigen::EigenvaluesOnly);
  const double reg_min = reg_probe.eigenvalues()(0);
  const bool nongeneric = evals(0) >= reg_min - 1e-9 * std::max(evals(p), 1e-300);
  const bool multiple = evals(1) - evals(0) <= 1e-12 * std::max(evals(p), 1e-300);
  // Callers hand in unit-norm columns and targets, so a meaningful gain
  // vector has O(1) entries; a near-vertical direction (or any solution far
  // outside that range) encodes an absurd amplification along a direction the
  // data cannot resolve. The orthogonal-residual solution is also only
  // trusted while its vertical residual stays close to the least-squares
  // optimum: when it drifts far above, the smallest singular direction is
  // noise among the regressors, not the sought relation.
  const Eigen::VectorXd x_ols = regressors.colPivHouseholderQr().solve(targets);
  const bool vertical = std::abs(v(p)) <= 1e-6;
  if (!(nongeneric || multiple || vertical)) {
    const Eigen::VectorXd x = -v.head(p) / v(p);
    if (x.norm() <= 30.0 &&
        (regressors * x - targets).norm() <=
            1.5 * (regressors * x_ols - targets).norm() + 1e-12)
      return x;
  }
  if (degenerate) *degenerate = true;
  return x_ols;
}

}  // namespace

Eigen::VectorXd tls_solve(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& targets,
                          double ridge, bool* degenerate) {
  const int n = static_cast<int>(regressors.rows());
  const int p = static_cast<int>(regressors.cols());
  if (targets.size() != n) throw std::invalid_argument("tls_solve: row count mismatch");
  if (n < p + 1) throw std::invalid_argument("tls_solve: need more rows than columns");
  if (ridge < 0.0) throw std::invalid_argument("tls_solve: ridge must be nonnegative");
  if (degenerate) *degenerate = false;

  // Columns that are negligible against the dominant one carry no resolvable
  // signal — on noiseless near-nominal data they are pure truncation residue
  // and would otherwise soak up within-bin target variation with enormous
  // coefficients. Exclude them; their coefficients stay zero.
  const Eigen::VectorXd norms = regressors.colwise().norm();
  const double max_norm = norms.maxCoeff();
  std::vector<int> keep;
  for (int j = 0; j < p; ++j)
    if (norms(j) > 1e-5 * max_norm) keep.push_back(j);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  const double target_norm = targets.norm();
  if (keep.empty() || max_norm == 0.0 || target_norm == 0.0) {
    if (degenerate) *degenerate = (target_norm != 0.0);
    return x;
  }

  // Equilibrate: the orthogonal-residual objective weighs every matrix entry
  // equally, so mixed column scales (offsets vs rates vs products) would let
  // the largest-scale columns dominate the error geometry. Solve with each
  // kept column and the target scaled to unit norm, then map back.
  Eigen::MatrixXd kept(n, keep.size());
  for (std::size_t m = 0; m < keep.size(); ++m)
    kept.col(m) = regressors.col(keep[m]) / norms(keep[m]);
  const Eigen::VectorXd xk = tls_solve_core(kept, targets / target_norm, ridge, degenerate);
  for (std::size_t m = 0; m < keep.size(); ++m)
    x(keep[m]) = xk(m) * target_norm / norms(keep[m]);
  return x;
}

PhaseBinnedLinearModel fit_tls(const Trajectory& traj, const PhaseBins& bins, TlsMode mode,
                               double ridge) {
  if (bins.K < 4) throw std::invalid_argument("fit_tls: need at least 4 bins");
  if (bins.total() != traj.samples.size())
    throw std::invalid_argument("fit_tls: bins do not partition the trajectory");
  if (ridge < 0.0) throw std::invalid_argument("fit_tls: ridge must be nonnegative");
  if (traj.n_a() < 1) throw std::invalid_argument("fit_tls: no actuated coordinates");
  if (mode == TlsMode::suds && traj.n_p() < 1)
    throw std::invalid_argument("fit_tls: suds mode requires passive coordinates");

  PhaseBinnedLinearModel model;
  model.mode = mode;
  model.n_a = traj.n_a();
  model.n_p = traj.n_p();
  model.ridge = ridge;
  model.bins = bins;
  if (mode == TlsMode::phase_only) {
    // The constant-regressor mode never evaluates the nominal curve, so a
    // single cycle of data must suffice; keep a zero curve of matching shape
    // instead of demanding the two cycles a Fourier fit needs.
    model.nominal.n_a = traj.n_a();
    model.nominal.coords.assign(static_cast<std::size_t>(traj.n_a() + traj.n_p()),
                                FourierSeries{});
  } else {
    model.nominal = fit_nominal_gait(traj);
  }
  const ShapeOffsets off = compute_offsets(traj, model.nominal);
  model.mean_phase_rate = off.phase_rate.mean();

  const int n_out = model.outputs();
  const int d = model.delta_dim();
  const int r = model.rate_dim();
  const int P = model.regressors();

  // Targets: body twist, plus passive shape rates in suds mode.
  Eigen::MatrixXd Y(traj.samples.size(), n_out);
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const Sample& s = traj.samples[i];
    Y(i, 0) = s.vb.vx;
    Y(i, 1) = s.vb.vy;
    Y(i, 2) = s.vb.omega;
    if (mode == TlsMode::suds) Y.row(i).tail(model.n_p) = s.dshape_p.transpose();
  }

  // Build every regressor row once; the bins index into the shared matrix.
  const int n = static_cast<int>(traj.samples.size());
  Eigen::MatrixXd G(n, P - 1);
  for (int i = 0; i < n; ++i)
    G.row(i) =
        regressor_vector(off.delta.row(i).head(d), off.delta_rate.row(i).head(r)).tail(P - 1);

  // Screen out offset columns that carry no exogenous information. Two kinds
  // are poison for an orthogonal-residual solve: columns that are negligible
  // against the raw signal they derive from (integrator- or sensor-level
  // dust), and columns that are a deterministic function of the phase
  // (truncation residue of the finite-harmonic nominal fit). Either way the
  // solver would hand them enormous gains that wreck predictions away from
  // the training loop, so a column stays active only when it is a visible
  // fraction of its reference scale and a generous Fourier fit in phase
  // leaves a visible cycle-to-cycle remainder.
  std::vector<int> active;
  if (P > 1) {
    Eigen::VectorXd shape_scale = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd rate_scale = Eigen::VectorXd::Zero(r);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd rs = full_shape(traj.samples[i]);
      shape_scale += rs.head(d).cwiseAbs2();
      rate_scale += traj.samples[i].dshape_a.head(r).cwiseAbs2();
    }
    shape_scale = (shape_scale / n).cwiseSqrt();
    rate_scale = (rate_scale / n).cwiseSqrt();
    Eigen::VectorXd ref_norms(P - 1);
    for (int j = 0; j < d; ++j) ref_norms(j) = shape_scale(j);
    for (int a = 0; a < r; ++a) ref_norms(d + a) = rate_scale(a);
    for (int a = 0; a < r; ++a)
      for (int j = 0; j < d; ++j) ref_norms(d + r + a * d + j) = rate_scale(a) * shape_scale(j);
    ref_norms *= std::sqrt(static_cast<double>(n));

    Eigen::MatrixXd Gc = G.rowwise() - G.colwise().mean();
    const Eigen::VectorXd col_norms = Gc.colwise().norm();
    const std::vector<double> u = unwrap_phases(traj);
    const double cycles = std::max(1.0, std::abs(u.back() - u.front()) / (2.0 * std::numbers::pi));
    const int spc = static_cast<int>(n / cycles);
    const int H2 = std::min({48, n / 12, spc / 2 - 2});
    Eigen::VectorXd resid_norms = col_norms;
    if (H2 >= 1 && col_norms.maxCoeff() > 0.0) {
      Eigen::MatrixXd F(n, 2 * H2 + 1);
      F.col(0).setOnes();
      for (int i = 0; i < n; ++i)
        for (int h = 1; h <= H2; ++h) {
          F(i, 2 * h - 1) = std::cos(h * traj.samples[i].phase);
          F(i, 2 * h) = std::sin(h * traj.samples[i].phase);
        }
      const Eigen::MatrixXd R = Gc - F * F.colPivHouseholderQr().solve(Gc);
      resid_norms = R.colwise().norm();
    }
    for (int j = 0; j < P - 1; ++j)
      if (col_norms(j) > 1e-5 * ref_norms(j) && resid_norms(j) > 3e-2 * col_norms(j))
        active.push_back(j);
    if (static_cast<int>(active.size()) < P - 1)
      model.diagnostics.push_back(
          "excluded " + std::to_string(P - 1 - static_cast<int>(active.size())) + " of " +
          std::to_string(P - 1) + " offset regressors: phase-locked or negligible");
  }
  const int q = static_cast<int>(active.size());

  model.bin_coef.assign(bins.K, Eigen::MatrixXd::Zero(n_out, P));
  model.bin_fitted.assign(bins.K, 0);
  std::vector<int> fitted_bins;
  for (int k = 0; k < bins.K; ++k) {
    const std::vector<int>& idx = bins.members[k];
    if (static_cast<int>(idx.size()) < 2 * P) continue;
    // Center the bin before the orthogonal-residual solve: the constant
    // offset is known exactly and must not be perturbed like a noisy
    // regressor, so it is recovered from the means afterwards.
    Eigen::MatrixXd Z(idx.size(), q);
    for (std::size_t m = 0; m < idx.size(); ++m)
      for (int c = 0; c < q; ++c) Z(m, c) = G(idx[m], active[c]);
    Eigen::RowVectorXd z_mean = Eigen::RowVectorXd::Zero(q);
    if (q > 0) {
      z_mean = Z.colwise().mean();
      Z.rowwise() -= z_mean;
    }
    for (int o = 0; o < n_out; ++o) {
      Eigen::VectorXd y(idx.size());
      for (std::size_t m = 0; m < idx.size(); ++m) y(m) = Y(idx[m], o);
      const double y_mean = y.mean();
      if (q == 0) {
        model.bin_coef[k](o, 0) = y_mean;
        continue;
      }
      y.array() -= y_mean;
      bool degenerate = false;
      const Eigen::VectorXd gain = tls_solve(Z, y, ridge, &degenerate);
      model.bin_coef[k](o, 0) = y_mean - gain.dot(z_mean);
      for (int c = 0; c < q; ++c) model.bin_coef[k](o, 1 + active[c]) = gain(c);
      if (degenerate)
        model.diagnostics.push_back("bin " + std::to_string(k) + ", output " + std::to_string(o) +
                                    ": degenerate total least squares direction; fell back to "
                                    "ordinary least squares");
    }
    model.bin_fitted[k] = 1;
    fitted_bins.push_back(k);
  }

  const int fitted = static_cast<int>(fitted_bins.size());
  if (fitted == 0)
    throw std::runtime_error("fit_tls: no phase bin has at least twice as many samples as "
                             "regressors");

  int H = std::min(bins.K / 2 - 1, 7);
  if (2 * H + 1 > fitted) {
    H = (fitted - 1) / 2;
    model.diagnostics.push_back("interpolation order reduced to " + std::to_string(H) + ": only " +
                                std::to_string(fitted) + " of " + std::to_string(bins.K) +
                                " bins had enough samples");
  }

  std::vector<double> centers(fitted);
  for (int m = 0; m < fitted; ++m) centers[m] = bins.center(fitted_bins[m]);
  model.interp.assign(n_out, std::vector<FourierSeries>(P));
  std::vector<double> values(fitted);
  model.smoothing_bound = 0.0;
  for (int o = 0; o < n_out; ++o) {
    for (int p = 0; p < P; ++p) {
      for (int m = 0; m < fitted; ++m) values[m] = model.bin_coef[fitted_bins[m]](o, p);
      model.interp[o][p] = FourierSeries::fit(centers, values, H);
      for (int m = 0; m < fitted; ++m)
        model.smoothing_bound = std::max(
            model.smoothing_bound, std::abs(model.interp[o][p].value(centers[m]) - values[m]));
    }
  }

  int filled = 0;
  for (int k = 0; k < bins.K; ++k) {
    if (model.bin_fitted[k]) continue;
    model.bin_coef[k] = model.coef_at(bins.center(k));
    ++filled;
  }
  if (filled > 0)
    model.diagnostics.push_back(std::to_string(filled) + " of " + std::to_string(bins.K) +
                                " bins filled from the phase interpolant");
  return model;
}

namespace {

Eigen::VectorXd model_regressor(const PhaseBinnedLinearModel& model, double phi,
                                const Eigen::VectorXd& shape, const Eigen::VectorXd& rate_a,
                                double phase_rate) {
  const int d = model.delta_dim();
  const int r = model.rate_dim();
  if (d > 0 && shape.size() != d)
    throw std::invalid_argument("predict_tls: shape has wrong dimension");
  if (r > 0 && rate_a.size() != r)
    throw std::invalid_argument("predict_tls: actuated rate has wrong dimension");
  if (std::isnan(phase_rate)) phase_rate = model.mean_phase_rate;

  Eigen::VectorXd delta(d), drate(r);
  if (d > 0) delta = shape - model.nominal.value(phi).head(d);
  if (r > 0) drate = rate_a - model.nominal.derivative(phi).head(r) * phase_rate;
  return regressor_vector(delta, drate);
}

}  // namespace

Eigen::VectorXd predict_tls(const PhaseBinnedLinearModel& model, double phi,
                            const Eigen::VectorXd& shape, const Eigen::VectorXd& rate_a,
                            double phase_rate) {
  return model.coef_at(phi) * model_regressor(model, phi, shape, rate_a, phase_rate);
}

Eigen::VectorXd predict_tls_at_bin(const PhaseBinnedLinearModel& model, int bin, double phi,
                                   const Eigen::VectorXd& shape, const Eigen::VectorXd& rate_a,
                                   double phase_rate) {
  if (bin < 0 || bin >= static_cast<int>(model.bin_coef.size()))
    throw std::invalid_argument("predict_tls_at_bin: bin index out of range");
  return model.bin_coef[bin] * model_regressor(model, phi, shape, rate_a, phase_rate);
}

namespace {

using nlohmann::json;

json series_to_json(const FourierSeries& s) {
  return json{{"a0", s.a0}, {"a", s.a}, {"b", s.b}};
}

FourierSeries series_from_json(const json& j) {
  FourierSeries s;
  s.a0 = j.at("a0").get<double>();
  s.a = j.at("a").get<std::vector<double>>();
  s.b = j.at("b").get<std::vector<double>>();
  return s;
}

std::string mode_name(TlsMode m) {
  switch (m) {
    case TlsMode::plain: return "plain";
    case TlsMode::suds: return "suds";
    case TlsMode::phase_only: return "phase_only";
  }
  throw std::logic_error("unknown mode");
}

TlsMode mode_from_name(const std::string& name) {
  if (name == "plain") return TlsMode::plain;
  if (name == "suds") return TlsMode::suds;
  if (name == "phase_only") return TlsMode::phase_only;
  throw std::runtime_error("unknown model mode: " + name);
}

}  // namespace

std::string tls_to_json(const PhaseBinnedLinearModel& model) {
  json j;
  j["format"] = "motmap.tls";
  j["version"] = 1;
  j["mode"] = mode_name(model.mode);
  j["n_a"] = model.n_a;
  j["n_p"] = model.n_p;
  j["ridge"] = model.ridge;
  j["mean_phase_rate"] = model.mean_phase_rate;
  j["smoothing_bound"] = model.smoothing_bound;
  j["nominal"] = {{"n_a", model.nominal.n_a}, {"coords", json::array()}};
  for (const FourierSeries& s : model.nominal.coords) j["nominal"]["coords"].push_back(series_to_json(s));
  j["bins"] = {{"K", model.bins.K}, {"members", model.bins.members}, {"empty", model.bins.empty}};
  j["bin_fitted"] = json::array();
  for (char f : model.bin_fitted) j["bin_fitted"].push_back(static_cast<int>(f));
  j["bin_coef"] = json::array();
  for (const Eigen::MatrixXd& c : model.bin_coef) {
    json rows = json::array();
    for (int o = 0; o < c.rows(); ++o) {
      json row = json::array();
      for (int p = 0; p < c.cols(); ++p) row.push_back(c(o, p));
      rows.push_back(std::move(row));
    }
    j["bin_coef"].push_back(std::move(rows));
  }
  j["interp"] = json::array();
  for (const auto& per_output : model.interp) {
    json row = json::array();
    for (const FourierSeries& s : per_output) row.push_back(series_to_json(s));
    j["interp"].push_back(std::move(row));
  }
  j["diagnostics"] = model.diagnostics;
  return j.dump(2);
}

PhaseBinnedLinearModel tls_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format").get<std::string>() != "motmap.tls" || j.at("version").get<int>() != 1)
    throw std::runtime_error("tls_from_json: unsupported model document");
  PhaseBinnedLinearModel model;
  model.mode = mode_from_name(j.at("mode").get<std::string>());
  model.n_a = j.at("n_a").get<int>();
  model.n_p = j.at("n_p").get<int>();
  model.ridge = j.at("ridge").get<double>();
  model.mean_phase_rate = j.at("mean_phase_rate").get<double>();
  model.smoothing_bound = j.at("smoothing_bound").get<double>();
  model.nominal.n_a = j.at("nominal").at("n_a").get<int>();
  for (const json& s : j.at("nominal").at("coords")) model.nominal.coords.push_back(series_from_json(s));
  model.bins.K = j.at("bins").at("K").get<int>();
  model.bins.members = j.at("bins").at("members").get<std::vector<std::vector<int>>>();
  model.bins.empty = j.at("bins").at("empty").get<std::vector<int>>();
  for (const json& f : j.at("bin_fitted")) model.bin_fitted.push_back(static_cast<char>(f.get<int>()));
  for (const json& rows : j.at("bin_coef")) {
    Eigen::MatrixXd c(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (int o = 0; o < c.rows(); ++o)
      for (int p = 0; p < c.cols(); ++p) c(o, p) = rows[o][p].get<double>();
    model.bin_coef.push_back(std::move(c));
  }
  for (const json& row : j.at("interp")) {
    std::vector<FourierSeries> per_output;
    for (const json& s : row) per_output.push_back(series_from_json(s));
    model.interp.push_back(std::move(per_output));
  }
  model.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return model;
}

}  // namespace motmap
