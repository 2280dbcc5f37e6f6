#include "motmap/gmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "motmap/geometry.hpp"

namespace motmap {

namespace {

constexpr double kPi = 3.14159265358979323846;

double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

Eigen::VectorXd unit_direction(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (n > 0.0) return v / n;
  return Eigen::VectorXd::Zero(v.size());
}

Eigen::VectorXd gate_vector(GmrMode mode, const Sample& s) {
  if (mode == GmrMode::plain) return s.shape.r_a;
  if (mode == GmrMode::suds) {
    Eigen::VectorXd g(s.shape.r_a.size() + s.shape.r_p.size());
    g << s.shape.r_a, s.shape.r_p;
    return g;
  }
  Eigen::VectorXd g(2 * s.shape.r_a.size());
  g << s.shape.r_a, unit_direction(s.dshape_a);
  return g;
}

Eigen::VectorXd target_vector(GmrMode mode, const Sample& s) {
  const int extra = mode == GmrMode::suds ? static_cast<int>(s.dshape_p.size()) : 0;
  Eigen::VectorXd y(3 + extra);
  y(0) = s.vb.vx;
  y(1) = s.vb.vy;
  y(2) = s.vb.omega;
  if (extra > 0) y.tail(extra) = s.dshape_p;
  return y;
}

/// Within-cluster covariance scaled to a gate kernel: bandwidth^2 scaling,
/// diagonal floor, and a tiny unconditional jitter so the Cholesky step
/// cannot fail on perfectly correlated features.
Eigen::MatrixXd gate_covariance(const Eigen::MatrixXd& cov, double bandwidth) {
  Eigen::MatrixXd sigma = bandwidth * bandwidth * cov;
  for (int k = 0; k < sigma.rows(); ++k) sigma(k, k) = std::max(sigma(k, k), 1e-6);
  const double jitter = 1e-12 * std::max(1.0, sigma.diagonal().maxCoeff());
  sigma.diagonal().array() += jitter;
  return sigma;
}

/// k-means++ seeding followed by a fixed number of Lloyd iterations on the
/// rows of X. Ties go to the lowest center index; centers that lose all
/// members keep their position. Returns the final hard assignment.
std::vector<int> kmeans(const Eigen::MatrixXd& X, int J, std::uint64_t seed,
                        Eigen::MatrixXd* centers_out) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(J, d);

  const int first = std::min(static_cast<int>(unit_interval(rng) * n), n - 1);
  centers.row(0) = X.row(first);
  Eigen::VectorXd dist2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < J; ++j) {
    const double total = dist2.sum();
    int pick = 0;
    if (total > 0.0) {
      const double r = unit_interval(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(static_cast<int>(unit_interval(rng) * n), n - 1);
    }
    centers.row(j) = X.row(pick);
    dist2 = dist2.cwiseMin((X.rowwise() - centers.row(j)).rowwise().squaredNorm());
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (X.row(i) - centers.row(0)).squaredNorm();
      for (int j = 1; j < J; ++j) {
        const double dj = (X.row(i) - centers.row(j)).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      assign[i] = best;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(J, d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(J);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += X.row(i);
      counts(assign[i]) += 1.0;
    }
    for (int j = 0; j < J; ++j) {
      if (counts(j) > 0.0) centers.row(j) = sums.row(j) / counts(j);
    }
  }
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (X.row(i) - centers.row(0)).squaredNorm();
    for (int j = 1; j < J; ++j) {
      const double dj = (X.row(i) - centers.row(j)).squaredNorm();
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    assign[i] = best;
  }
  *centers_out = centers;
  return assign;
}

/// Gate parameters during fitting, before local maps exist.
struct Gate {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int label = 0;  ///< original component index, for diagnostics
};

struct GateDensity {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_norm = 0.0;  ///< log pi - (d log 2 pi + log det Sigma) / 2
};

GateDensity prepare_density(double weight, const Eigen::MatrixXd& cov) {
  GateDensity gd;
  gd.llt.compute(cov);
  if (gd.llt.info() != Eigen::Success) {
    throw std::runtime_error("gmr: gate covariance is not positive definite");
  }
  double logdet = 0.0;
  const auto& L = gd.llt.matrixLLT();
  for (int k = 0; k < cov.rows(); ++k) logdet += 2.0 * std::log(L(k, k));
  const double d = static_cast<double>(cov.rows());
  gd.log_norm = std::log(weight) - 0.5 * (d * std::log(2.0 * kPi) + logdet);
  return gd;
}

double mahalanobis2(const GateDensity& gd, const Eigen::VectorXd& diff) {
  return gd.llt.matrixL().solve(diff).squaredNorm();
}

/// One E-step: normalized responsibilities per sample (rows of G) and the
/// total log-likelihood.
Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& G, const std::vector<Gate>& gates,
                                 double* loglik) {
  const int n = static_cast<int>(G.rows());
  const int J = static_cast<int>(gates.size());
  std::vector<GateDensity> dens;
  dens.reserve(J);
  for (const Gate& g : gates) dens.push_back(prepare_density(g.weight, g.cov));
  Eigen::MatrixXd W(n, J);
  double ll = 0.0;
  Eigen::VectorXd lp(J);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      lp(j) = dens[j].log_norm - 0.5 * mahalanobis2(dens[j], G.row(i).transpose() - gates[j].mean);
    }
    const double m = lp.maxCoeff();
    double z = 0.0;
    for (int j = 0; j < J; ++j) z += std::exp(lp(j) - m);
    for (int j = 0; j < J; ++j) W(i, j) = std::exp(lp(j) - m) / z;
    ll += m + std::log(z);
  }
  if (loglik != nullptr) *loglik = ll;
  return W;
}

/// M-step on the gate mixture; starved components are removed and logged.
std::vector<Gate> reestimate_gates(const Eigen::MatrixXd& G, const Eigen::MatrixXd& W,
                                   const std::vector<Gate>& gates, double bandwidth,
                                   std::vector<std::string>* diagnostics) {
  const int n = static_cast<int>(G.rows());
  const int J = static_cast<int>(gates.size());
  std::vector<Gate> next;
  double total = 0.0;
  for (int j = 0; j < J; ++j) {
    const double wj = W.col(j).sum();
    if (wj < 1e-9 * n) {
      diagnostics->push_back("component " + std::to_string(gates[j].label) +
                             " starved during refinement; dropped");
      continue;
    }
    Gate g;
    g.label = gates[j].label;
    g.weight = wj;
    g.mean = (W.col(j).asDiagonal() * G).colwise().sum().transpose() / wj;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(G.cols(), G.cols());
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd diff = G.row(i).transpose() - g.mean;
      cov.noalias() += W(i, j) * diff * diff.transpose();
    }
    g.cov = gate_covariance(cov / wj, bandwidth);
    next.push_back(std::move(g));
    total += wj;
  }
  if (next.empty()) throw std::runtime_error("gmr: every component starved during refinement");
  for (Gate& g : next) g.weight /= total;
  return next;
}

int lex_compare(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return -1;
    if (a(i) > b(i)) return 1;
  }
  return 0;
}

/// Total order on components so that predictions accumulate in an order
/// independent of storage order (permutation bit-identity).
std::vector<int> canonical_order(const std::vector<MixtureComponent>& comps) {
  std::vector<int> order(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    int c = lex_compare(comps[a].gate_mean, comps[b].gate_mean);
    if (c != 0) return c < 0;
    if (comps[a].weight != comps[b].weight) return comps[a].weight < comps[b].weight;
    c = lex_compare(comps[a].local_bias, comps[b].local_bias);
    if (c != 0) return c < 0;
    const Eigen::VectorXd ma = comps[a].local_map.reshaped();
    const Eigen::VectorXd mb = comps[b].local_map.reshaped();
    c = lex_compare(ma, mb);
    if (c != 0) return c < 0;
    const Eigen::VectorXd ca = comps[a].gate_cov.reshaped();
    const Eigen::VectorXd cb = comps[b].gate_cov.reshaped();
    return lex_compare(ca, cb) < 0;
  });
  return order;
}

double unwrapped_phase_span(const Trajectory& traj) {
  if (traj.samples.size() < 2) return 0.0;
  double span = 0.0;
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    span += wrap_pi(traj.samples[i].phase - traj.samples[i - 1].phase);
  }
  return std::abs(span);
}

}  // namespace

MixtureModel fit_gmr(const Trajectory& traj, const GmrConfig& config) {
  if (config.components < 1) throw std::invalid_argument("fit_gmr: components must be >= 1");
  if (!(config.bandwidth > 0.0)) throw std::invalid_argument("fit_gmr: bandwidth must be positive");
  if (config.ridge < 0.0) throw std::invalid_argument("fit_gmr: ridge must be non-negative");
  const int n = static_cast<int>(traj.samples.size());
  if (n < 10 * config.components) {
    throw std::invalid_argument("fit_gmr: need at least 10 samples per component (" +
                                std::to_string(n) + " samples for " +
                                std::to_string(config.components) + " components)");
  }
  const int n_a = traj.n_a();
  const int n_p = traj.n_p();
  if (n_a < 1) throw std::invalid_argument("fit_gmr: trajectory has no actuated coordinates");
  if (config.mode == GmrMode::suds && n_p < 1) {
    throw std::invalid_argument("fit_gmr: suds mode requires passive coordinates");
  }
  for (const Sample& s : traj.samples) {
    if (s.shape.r_a.size() != n_a || s.shape.r_p.size() != n_p ||
        s.dshape_a.size() != n_a || s.dshape_p.size() != n_p) {
      throw std::invalid_argument("fit_gmr: inconsistent sample dimensions");
    }
  }

  MixtureModel model;
  model.mode = config.mode;
  model.n_a = n_a;
  model.n_p = n_p;
  model.bandwidth = config.bandwidth;
  model.ridge = config.ridge;
  const int gd = model.gate_dim();
  const int outputs = model.outputs();

  Eigen::MatrixXd G(n, gd);
  Eigen::MatrixXd X(n, n_a);
  Eigen::MatrixXd Y(n, outputs);
  for (int i = 0; i < n; ++i) {
    const Sample& s = traj.samples[i];
    G.row(i) = gate_vector(config.mode, s).transpose();
    X.row(i) = s.dshape_a.transpose();
    Y.row(i) = target_vector(config.mode, s).transpose();
  }

  model.feature_mean = G.colwise().mean().transpose();
  model.feature_scale.resize(gd);
  for (int k = 0; k < gd; ++k) {
    const double var = (G.col(k).array() - model.feature_mean(k)).square().mean();
    const double sd = std::sqrt(var);
    model.feature_scale(k) = sd > 1e-12 ? sd : 1.0;
  }
  const Eigen::MatrixXd Gs = ((G.rowwise() - model.feature_mean.transpose()).array().rowwise() /
                              model.feature_scale.transpose().array())
                                 .matrix();

  Eigen::MatrixXd centers;
  const std::vector<int> assign = kmeans(Gs, config.components, config.seed, &centers);

  std::vector<Gate> gates;
  for (int j = 0; j < config.components; ++j) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (assign[i] == j) members.push_back(i);
    }
    if (members.empty()) {
      model.diagnostics.push_back("component " + std::to_string(j) +
                                  " empty after assignment; dropped");
      continue;
    }
    Gate g;
    g.label = j;
    g.weight = static_cast<double>(members.size()) / n;
    g.mean = Eigen::VectorXd::Zero(gd);
    for (int i : members) g.mean += Gs.row(i).transpose();
    g.mean /= static_cast<double>(members.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(gd, gd);
    for (int i : members) {
      const Eigen::VectorXd diff = Gs.row(i).transpose() - g.mean;
      cov.noalias() += diff * diff.transpose();
    }
    g.cov = gate_covariance(cov / static_cast<double>(members.size()), config.bandwidth);
    gates.push_back(std::move(g));
  }
  if (gates.empty()) throw std::runtime_error("fit_gmr: no non-empty components");

  // Responsibility re-estimation: one gate update by default, iterated to
  // convergence of the data log-likelihood when full_em is set.
  const int refinements = config.full_em ? std::max(1, config.max_em_iters) : 1;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < refinements; ++iter) {
    double ll = 0.0;
    const Eigen::MatrixXd W = responsibilities(Gs, gates, &ll);
    gates = reestimate_gates(Gs, W, gates, config.bandwidth, &model.diagnostics);
    if (config.full_em && std::abs(ll - prev_ll) <= 1e-10 * (1.0 + std::abs(ll))) break;
    prev_ll = ll;
  }
  const Eigen::MatrixXd W = responsibilities(Gs, gates, nullptr);

  // Local maps: responsibility-weighted ridge least squares on standardized
  // regressors, then mapped back so (local_map, local_bias) act on raw dr_a.
  Eigen::VectorXd reg_mean = X.colwise().mean().transpose();
  Eigen::VectorXd reg_scale(n_a);
  for (int k = 0; k < n_a; ++k) {
    const double var = (X.col(k).array() - reg_mean(k)).square().mean();
    const double sd = std::sqrt(var);
    reg_scale(k) = sd > 1e-12 ? sd : 1.0;
  }
  const Eigen::MatrixXd Xs = ((X.rowwise() - reg_mean.transpose()).array().rowwise() /
                              reg_scale.transpose().array())
                                 .matrix();

  const int p = 1 + n_a;
  for (std::size_t jj = 0; jj < gates.size(); ++jj) {
    const int j = static_cast<int>(jj);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(p, outputs);
    Eigen::VectorXd a(p);
    for (int i = 0; i < n; ++i) {
      a(0) = 1.0;
      a.tail(n_a) = Xs.row(i).transpose();
      N.noalias() += W(i, j) * a * a.transpose();
      R.noalias() += W(i, j) * a * Y.row(i);
    }
    for (int k = 1; k < p; ++k) N(k, k) += config.ridge;
    const Eigen::MatrixXd beta = N.ldlt().solve(R);

    MixtureComponent comp;
    comp.weight = gates[jj].weight;
    comp.gate_mean = gates[jj].mean;
    comp.gate_cov = gates[jj].cov;
    comp.local_map.resize(outputs, n_a);
    comp.local_bias.resize(outputs);
    for (int o = 0; o < outputs; ++o) {
      double bias = beta(0, o);
      for (int k = 0; k < n_a; ++k) {
        const double coef = beta(1 + k, o) / reg_scale(k);
        comp.local_map(o, k) = coef;
        bias -= coef * reg_mean(k);
      }
      comp.local_bias(o) = bias;
    }
    model.components.push_back(std::move(comp));
  }
  return model;
}

GmrPredictor::GmrPredictor(const MixtureModel& model) : model_(&model) {
  if (model.components.empty()) throw std::invalid_argument("predict_gmr: model has no components");
  order_ = canonical_order(model.components);
  llt_.reserve(model.components.size());
  log_norm_.reserve(model.components.size());
  for (const MixtureComponent& c : model.components) {
    GateDensity gd = prepare_density(c.weight, c.gate_cov);
    log_norm_.push_back(gd.log_norm);
    llt_.push_back(std::move(gd.llt));
  }
}

GmrPrediction GmrPredictor::predict(const Eigen::VectorXd& shape_a, const Eigen::VectorXd& shape_p,
                                    const Eigen::VectorXd& rate_a) const {
  const MixtureModel& model = *model_;
  if (shape_a.size() != model.n_a) throw std::invalid_argument("predict_gmr: shape_a has wrong size");
  if (rate_a.size() != model.n_a) throw std::invalid_argument("predict_gmr: rate_a has wrong size");
  if (model.mode == GmrMode::suds && shape_p.size() != model.n_p) {
    throw std::invalid_argument("predict_gmr: shape_p has wrong size");
  }

  Eigen::VectorXd g(model.gate_dim());
  if (model.mode == GmrMode::plain) {
    g = shape_a;
  } else if (model.mode == GmrMode::suds) {
    g << shape_a, shape_p;
  } else {
    g << shape_a, unit_direction(rate_a);
  }
  const Eigen::VectorXd gs =
      (g - model.feature_mean).cwiseQuotient(model.feature_scale);

  const int J = static_cast<int>(model.components.size());
  Eigen::VectorXd lp(J);
  Eigen::VectorXd m2(J);
  for (int idx = 0; idx < J; ++idx) {
    const int s = order_[idx];
    const MixtureComponent& c = model.components[s];
    m2(idx) = llt_[s].matrixL().solve(gs - c.gate_mean).squaredNorm();
    lp(idx) = log_norm_[s] - 0.5 * m2(idx);
  }
  const double m = lp.maxCoeff();
  double z = 0.0;
  for (int idx = 0; idx < J; ++idx) z += std::exp(lp(idx) - m);

  GmrPrediction pred;
  pred.responsibilities.resize(J);
  pred.output = Eigen::VectorXd::Zero(model.outputs());
  double min_m2 = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < J; ++idx) {
    const MixtureComponent& c = model.components[order_[idx]];
    const double w = std::exp(lp(idx) - m) / z;
    pred.responsibilities(order_[idx]) = w;
    pred.output.noalias() += w * (c.local_map * rate_a + c.local_bias);
    min_m2 = std::min(min_m2, m2(idx));
  }
  pred.min_mahalanobis = std::sqrt(min_m2);
  pred.extrapolation = pred.min_mahalanobis > 6.0;
  return pred;
}

GmrPrediction predict_gmr(const MixtureModel& model, const Eigen::VectorXd& shape_a,
                          const Eigen::VectorXd& shape_p, const Eigen::VectorXd& rate_a) {
  return GmrPredictor(model).predict(shape_a, shape_p, rate_a);
}

double cross_validate_bandwidth(const Trajectory& traj, const GmrConfig& config,
                                const std::vector<double>& grid, std::vector<double>* curve) {
  if (grid.empty()) throw std::invalid_argument("cross_validate_bandwidth: empty grid");
  std::vector<double> hs = grid;
  for (double h : hs) {
    if (!(h > 0.0)) throw std::invalid_argument("cross_validate_bandwidth: bandwidths must be positive");
  }
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());

  const double cycles = unwrapped_phase_span(traj) / (2.0 * kPi);
  if (cycles < 5.0 * (1.0 - 1e-9)) {
    throw std::invalid_argument("cross_validate_bandwidth: need at least 5 cycles of data");
  }

  const int n = static_cast<int>(traj.samples.size());
  const int folds = 5;
  std::vector<double> rms(hs.size(), 0.0);
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    double sse = 0.0;
    std::int64_t count = 0;
    for (int f = 0; f < folds; ++f) {
      const int lo = static_cast<int>(static_cast<std::int64_t>(f) * n / folds);
      const int hi_idx = static_cast<int>(static_cast<std::int64_t>(f + 1) * n / folds);
      Trajectory train;
      train.sample_rate = traj.sample_rate;
      train.gait_id = traj.gait_id;
      train.frequency = traj.frequency;
      train.trial_id = traj.trial_id;
      train.samples.reserve(traj.samples.size() - (hi_idx - lo));
      for (int i = 0; i < n; ++i) {
        if (i < lo || i >= hi_idx) train.samples.push_back(traj.samples[i]);
      }
      GmrConfig c = config;
      c.bandwidth = hs[hi];
      const MixtureModel model = fit_gmr(train, c);
      for (int i = lo; i < hi_idx; ++i) {
        const Sample& s = traj.samples[i];
        const GmrPrediction pred = predict_gmr(model, s.shape.r_a, s.shape.r_p, s.dshape_a);
        const Eigen::VectorXd err = pred.output - target_vector(config.mode, s);
        sse += err.squaredNorm();
        count += err.size();
      }
    }
    rms[hi] = std::sqrt(sse / static_cast<double>(count));
  }
  if (curve != nullptr) *curve = rms;

  double best = rms[0];
  for (double r : rms) best = std::min(best, r);
  const double tol = 1e-10 * (1.0 + best);
  double chosen = hs[0];
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    if (rms[hi] <= best + tol) chosen = hs[hi];
  }
  return chosen;
}

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const int nr = static_cast<int>(rows.size());
  const int nc = nr > 0 ? static_cast<int>(rows[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (int r = 0; r < nr; ++r) {
    if (static_cast<int>(rows[r].size()) != nc) {
      throw std::runtime_error("gmr_from_json: ragged matrix");
    }
    for (int c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

std::string mode_name(GmrMode mode) {
  switch (mode) {
    case GmrMode::plain: return "plain";
    case GmrMode::suds: return "suds";
    case GmrMode::branching: return "branching";
  }
  throw std::invalid_argument("unknown gmr mode");
}

GmrMode mode_from_name(const std::string& name) {
  if (name == "plain") return GmrMode::plain;
  if (name == "suds") return GmrMode::suds;
  if (name == "branching") return GmrMode::branching;
  throw std::runtime_error("gmr_from_json: unknown mode '" + name + "'");
}

}  // namespace

std::string gmr_to_json(const MixtureModel& model) {
  json j;
  j["format"] = "motmap.gmr";
  j["version"] = 1;
  j["mode"] = mode_name(model.mode);
  j["n_a"] = model.n_a;
  j["n_p"] = model.n_p;
  j["bandwidth"] = model.bandwidth;
  j["ridge"] = model.ridge;
  j["feature_mean"] = vector_to_json(model.feature_mean);
  j["feature_scale"] = vector_to_json(model.feature_scale);
  j["components"] = json::array();
  for (const MixtureComponent& c : model.components) {
    j["components"].push_back(json{{"weight", c.weight},
                                   {"gate_mean", vector_to_json(c.gate_mean)},
                                   {"gate_cov", matrix_to_json(c.gate_cov)},
                                   {"local_map", matrix_to_json(c.local_map)},
                                   {"local_bias", vector_to_json(c.local_bias)}});
  }
  j["diagnostics"] = model.diagnostics;
  return j.dump(2);
}

MixtureModel gmr_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != "motmap.gmr") {
      throw std::runtime_error("gmr_from_json: unsupported model document");
    }
    if (j.at("version").get<int>() != 1) {
      throw std::runtime_error("gmr_from_json: unsupported version");
    }
    MixtureModel model;
    model.mode = mode_from_name(j.at("mode").get<std::string>());
    model.n_a = j.at("n_a").get<int>();
    model.n_p = j.at("n_p").get<int>();
    model.bandwidth = j.at("bandwidth").get<double>();
    model.ridge = j.at("ridge").get<double>();
    model.feature_mean = vector_from_json(j.at("feature_mean"));
    model.feature_scale = vector_from_json(j.at("feature_scale"));
    for (const json& c : j.at("components")) {
      MixtureComponent comp;
      comp.weight = c.at("weight").get<double>();
      comp.gate_mean = vector_from_json(c.at("gate_mean"));
      comp.gate_cov = matrix_from_json(c.at("gate_cov"));
      comp.local_map = matrix_from_json(c.at("local_map"));
      comp.local_bias = vector_from_json(c.at("local_bias"));
      model.components.push_back(std::move(comp));
    }
    model.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("gmr_from_json: malformed document: ") + e.what());
  }
}

}  // namespace motmap
