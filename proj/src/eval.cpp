#include "motmap/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "motmap/gait.hpp"
#include "motmap/phase.hpp"

namespace motmap {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Uniform double in [0, 1) with exactly 53 random bits, so draws do not
/// depend on the standard library's distribution implementation.
double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, count) from a uniform double in [0, 1).
int pick_from(double u, int count) {
  return std::min(static_cast<int>(u * count), count - 1);
}

/// Uniform integer in [0, count).
int pick(std::mt19937_64& rng, int count) { return pick_from(unit_interval(rng), count); }

std::string condition_label(const Condition& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s @ %.6g Hz", c.gait_id.c_str(), c.frequency);
  return buf;
}

Trajectory slice_trajectory(const Trajectory& traj, int begin, int end) {
  Trajectory out;
  out.sample_rate = traj.sample_rate;
  out.gait_id = traj.gait_id;
  out.frequency = traj.frequency;
  out.trial_id = traj.trial_id;
  out.samples.assign(traj.samples.begin() + begin, traj.samples.begin() + end);
  if (!traj.poses.empty())
    out.poses.assign(traj.poses.begin() + begin, traj.poses.begin() + end);
  return out;
}

/// Shortest round-trip decimal form, shared by every CSV emitter so reruns
/// are byte-identical.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Run `body(t)` for t in [0, n_tasks) on `jobs` workers. `body` must not
/// throw; tasks handle their own failures.
void run_tasks(int jobs, std::size_t n_tasks, const std::function<void(std::size_t)>& body) {
  if (n_tasks == 0) return;
  std::size_t workers = jobs < 1 ? 1 : static_cast<std::size_t>(jobs);
  workers = std::min(workers, n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) body(t);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t t = cursor.fetch_add(1);
        if (t >= n_tasks) return;
        body(t);
      }
    });
  }
  for (std::thread& th : pool) th.join();
}

int resolve_jobs(const EvalOptions& opts) {
  if (opts.jobs > 0) return opts.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::phase_only: return "phase_only";
    case ModelKind::tls: return "tls";
    case ModelKind::tls_suds: return "tls_suds";
    case ModelKind::gmr: return "gmr";
    case ModelKind::gmr_suds: return "gmr_suds";
  }
  throw std::invalid_argument("model_kind_name: unknown kind");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "phase_only") return ModelKind::phase_only;
  if (name == "tls") return ModelKind::tls;
  if (name == "tls_suds") return ModelKind::tls_suds;
  if (name == "gmr") return ModelKind::gmr;
  if (name == "gmr_suds") return ModelKind::gmr_suds;
  throw std::invalid_argument("model_kind_from_name: unknown kind '" + name + "'");
}

std::vector<Condition> benchmark_conditions() {
  std::vector<Condition> out;
  for (const GaitSpec& g : gait_library()) {
    for (double f : {1.0 / 3.0, 0.5, 1.0}) out.push_back({g.label, f});
  }
  return out;
}

PeriodRelation period_relation(const Condition& train, const Condition& test) {
  // The model's period is 1/f_train: a higher training frequency means a
  // shorter model period than the data it is scored on.
  if (train.frequency > test.frequency) return PeriodRelation::model_shorter;
  if (train.frequency < test.frequency) return PeriodRelation::model_longer;
  return PeriodRelation::model_equal;
}

std::string period_relation_name(PeriodRelation rel) {
  switch (rel) {
    case PeriodRelation::model_shorter: return "model<data";
    case PeriodRelation::model_equal: return "model=data";
    case PeriodRelation::model_longer: return "model>data";
  }
  throw std::invalid_argument("period_relation_name: unknown relation");
}

int gait_distance(const Condition& train, const Condition& test) {
  return std::abs(gait_axis_index(train.gait_id) - gait_axis_index(test.gait_id));
}

int gait_category(int gait_distance) {
  if (gait_distance < 0) throw std::invalid_argument("gait_category: negative distance");
  return gait_distance >= 2 ? 2 : gait_distance;
}

std::string gait_category_name(int category) {
  switch (category) {
    case 0: return "same";
    case 1: return "near";
    case 2: return "far";
  }
  throw std::invalid_argument("gait_category_name: unknown category");
}

std::vector<int> Dataset::trials_for(const Condition& cond) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].gait_id == cond.gait_id && trials[i].frequency == cond.frequency)
      out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<Condition> Dataset::conditions() const {
  std::vector<Condition> out;
  for (const Trajectory& t : trials) {
    const Condition c{t.gait_id, t.frequency};
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const Condition& a, const Condition& b) {
    const int ia = gait_axis_index(a.gait_id);
    const int ib = gait_axis_index(b.gait_id);
    if (ia != ib) return ia < ib;
    return a.frequency < b.frequency;
  });
  return out;
}

int samples_per_cycle(const Trajectory& traj) {
  if (traj.sample_rate <= 0.0 || traj.frequency <= 0.0)
    throw std::invalid_argument("samples_per_cycle: sample_rate and frequency must be positive");
  const double real = traj.sample_rate / traj.frequency;
  const int spc = static_cast<int>(std::llround(real));
  if (spc < 1 || std::abs(real - spc) > 1e-6 * std::max(1, spc))
    throw std::invalid_argument("samples_per_cycle: sample_rate / frequency is not an integer (" +
                                num(real) + ")");
  return spc;
}

int common_samples_per_cycle(const Dataset& data) {
  if (data.trials.empty()) throw std::invalid_argument("common_samples_per_cycle: empty dataset");
  const int spc = samples_per_cycle(data.trials.front());
  for (const Trajectory& t : data.trials) {
    if (samples_per_cycle(t) != spc)
      throw std::invalid_argument(
          "common_samples_per_cycle: trials disagree on samples per cycle; decimate to a common "
          "rate first");
  }
  return spc;
}

Dataset decimate_to_common_rate(const Dataset& data, std::vector<std::string>* log) {
  if (data.trials.empty()) throw std::invalid_argument("decimate_to_common_rate: empty dataset");
  std::vector<int> spc(data.trials.size());
  int target = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < data.trials.size(); ++i) {
    spc[i] = samples_per_cycle(data.trials[i]);
    target = std::min(target, spc[i]);
  }
  Dataset out;
  out.trials.reserve(data.trials.size());
  std::map<int, int> decimated;  // factor -> trial count
  for (std::size_t i = 0; i < data.trials.size(); ++i) {
    if (spc[i] % target != 0)
      throw std::invalid_argument("decimate_to_common_rate: trial '" + data.trials[i].trial_id +
                                  "' has " + std::to_string(spc[i]) +
                                  " samples per cycle, not a multiple of the smallest (" +
                                  std::to_string(target) + ")");
    const int factor = spc[i] / target;
    out.trials.push_back(factor == 1 ? data.trials[i] : decimate(data.trials[i], factor));
    if (factor > 1) ++decimated[factor];
  }
  if (log != nullptr) {
    for (const auto& [factor, count] : decimated) {
      log->push_back("decimated " + std::to_string(count) + " trial(s) by " +
                     std::to_string(factor) + " to " + std::to_string(target) +
                     " samples per cycle");
    }
  }
  return out;
}

std::vector<Pairing> bootstrap_pairings(const Dataset& data, const Condition& train_cond,
                                        const Condition& test_cond, int n_iter,
                                        std::uint64_t seed, int cycles,
                                        std::vector<std::string>* log) {
  if (n_iter < 1) throw std::invalid_argument("bootstrap_pairings: n_iter must be >= 1");
  if (cycles < 1) throw std::invalid_argument("bootstrap_pairings: cycles must be >= 1");
  const int spc = common_samples_per_cycle(data);
  const std::vector<int> train_trials = data.trials_for(train_cond);
  const std::vector<int> test_trials = data.trials_for(test_cond);
  if (train_trials.size() < 2)
    throw std::invalid_argument("bootstrap_pairings: condition " + condition_label(train_cond) +
                                " has fewer than two trials");
  if (test_trials.size() < 2)
    throw std::invalid_argument("bootstrap_pairings: condition " + condition_label(test_cond) +
                                " has fewer than two trials");

  const std::vector<Condition> conds = data.conditions();
  const auto cond_pos = [&conds](const Condition& c) {
    return static_cast<std::uint64_t>(std::find(conds.begin(), conds.end(), c) - conds.begin());
  };
  const std::uint64_t ti = cond_pos(train_cond);
  const std::uint64_t si = cond_pos(test_cond);
  // The training stream depends only on the training condition so that the
  // training slice of iteration m is the same whatever the test condition;
  // one fitted model can then be scored against every test condition.
  std::mt19937_64 rng_train(derive_seed(seed, 1000 + ti));
  std::mt19937_64 rng_test(derive_seed(seed, 2000 + ti * 64 + si));

  const int want = cycles * spc;
  const bool same_condition = train_cond == test_cond;
  int short_train = 0;
  int short_test = 0;
  std::vector<Pairing> out;
  out.reserve(n_iter);
  for (int m = 0; m < n_iter; ++m) {
    Pairing p;
    {
      const double u1 = unit_interval(rng_train);
      const double u2 = unit_interval(rng_train);
      const int trial = train_trials[pick_from(u1, static_cast<int>(train_trials.size()))];
      const int n = static_cast<int>(data.trials[trial].samples.size());
      const int len = std::min(want, n);
      if (len < want) ++short_train;
      const int start = pick_from(u2, n - len + 1);
      p.train = {trial, start, start + len};
    }
    {
      const double u1 = unit_interval(rng_test);
      const double u2 = unit_interval(rng_test);
      std::vector<int> allowed;
      allowed.reserve(test_trials.size());
      for (int t : test_trials) {
        if (!(same_condition && t == p.train.trial)) allowed.push_back(t);
      }
      const int trial = allowed[pick_from(u1, static_cast<int>(allowed.size()))];
      const int n = static_cast<int>(data.trials[trial].samples.size());
      const int len = std::min(want, n);
      if (len < want) ++short_test;
      const int start = pick_from(u2, n - len + 1);
      p.test = {trial, start, start + len};
    }
    out.push_back(p);
  }
  if (log != nullptr && (short_train > 0 || short_test > 0)) {
    log->push_back("pairings " + condition_label(train_cond) + " -> " +
                   condition_label(test_cond) + ": " + std::to_string(short_train) +
                   " train / " + std::to_string(short_test) + " test slice(s) shorter than " +
                   std::to_string(cycles) + " cycles (full trial used)");
  }
  return out;
}

FittedEvalModel fit_eval_model(ModelKind kind, const Trajectory& train, const EvalOptions& opts,
                               std::uint64_t seed) {
  const int n = static_cast<int>(train.samples.size());
  if (n < 4) throw std::invalid_argument("fit_eval_model: training slice too short");
  FittedEvalModel out;
  out.kind = kind;
  switch (kind) {
    case ModelKind::phase_only:
    case ModelKind::tls:
    case ModelKind::tls_suds: {
      const TlsMode mode = kind == ModelKind::phase_only ? TlsMode::phase_only
                           : kind == ModelKind::tls      ? TlsMode::plain
                                                         : TlsMode::suds;
      const int na = train.n_a();
      const int np = train.n_p();
      const int d = mode == TlsMode::plain ? na : mode == TlsMode::suds ? na + np : 0;
      const int r = mode == TlsMode::phase_only ? 0 : na;
      const int P = 1 + d + r + d * r;
      // Shrink the bin count on short slices so bins can still reach the
      // 2 * P samples the per-bin solver needs (never below the fitter's
      // four-bin minimum; hopeless slices still fail inside fit_tls).
      const int K = std::min(opts.tls_bins, std::max(4, n / (2 * P)));
      out.tls = fit_tls(train, bin_by_phase(train, K), mode, opts.tls_ridge);
      break;
    }
    case ModelKind::gmr:
    case ModelKind::gmr_suds: {
      GmrConfig cfg;
      // Honor the fitter's J <= n / 10 precondition on short slices.
      cfg.components = std::max(1, std::min(opts.gmr_components, n / 10));
      cfg.mode = kind == ModelKind::gmr ? GmrMode::plain : GmrMode::suds;
      cfg.bandwidth = opts.gmr_bandwidth;
      cfg.ridge = opts.gmr_ridge;
      cfg.full_em = opts.gmr_full_em;
      cfg.seed = seed;
      out.gmr = fit_gmr(train, cfg);
      break;
    }
  }
  return out;
}

namespace {

/// Per-slice scoring context: holds the fitted model plus, for mixture
/// kinds, the reusable predictor with pre-factorized gates.
struct SliceScorer {
  const FittedEvalModel* model;
  std::optional<GmrPredictor> gmr;

  explicit SliceScorer(const FittedEvalModel& m) : model(&m) {
    if (m.kind == ModelKind::gmr || m.kind == ModelKind::gmr_suds) gmr.emplace(m.gmr);
  }

  Twist2 at(const Sample& s, double phase_rate) const {
    Eigen::VectorXd y;
    switch (model->kind) {
      case ModelKind::phase_only:
        y = predict_tls(model->tls, s.phase, Eigen::VectorXd(), Eigen::VectorXd(), phase_rate);
        break;
      case ModelKind::tls:
        y = predict_tls(model->tls, s.phase, s.shape.r_a, s.dshape_a, phase_rate);
        break;
      case ModelKind::tls_suds: {
        Eigen::VectorXd shape(s.shape.r_a.size() + s.shape.r_p.size());
        shape << s.shape.r_a, s.shape.r_p;
        y = predict_tls(model->tls, s.phase, shape, s.dshape_a, phase_rate);
        break;
      }
      case ModelKind::gmr:
      case ModelKind::gmr_suds:
        y = gmr->predict(s.shape.r_a, s.shape.r_p, s.dshape_a).output;
        break;
    }
    return Twist2{y(0), y(1), y(2)};
  }
};

double score_slice(const SliceScorer& scorer, const Trajectory& trial, const TrialSlice& slice,
                   double phase_rate) {
  double sse = 0.0;
  for (int i = slice.begin; i < slice.end; ++i) {
    const Sample& s = trial.samples[i];
    const Twist2 p = scorer.at(s, phase_rate);
    const double d = p.vx - s.vb.vx;
    sse += d * d;
  }
  return std::sqrt(sse / slice.size());
}

EvalRecord make_record(ModelKind kind, const Condition& train, const Condition& test,
                       int iteration, double n_cycles) {
  EvalRecord r;
  r.model_kind = kind;
  r.train = train;
  r.test = test;
  r.iteration = iteration;
  r.n_cycles = n_cycles;
  r.freq_same = train.frequency == test.frequency;
  r.gait_dist = gait_distance(train, test);
  r.period = period_relation(train, test);
  return r;
}

void mark_failed(EvalRecord& r, const std::string& why) {
  r.failed = true;
  r.rms_error = kNaN;
  r.log_rms = kNaN;
  r.note = why;
}

std::uint64_t fit_stream(ModelKind kind, int cond_index, int n_conds, int iteration, int n_iter) {
  // High base keeps these streams clear of the pairing and benchmark ones.
  return (1ull << 20) + (static_cast<std::uint64_t>(kind) * n_conds + cond_index) *
                            static_cast<std::uint64_t>(n_iter) +
         iteration;
}

}  // namespace

PhaseBinnedLinearModel phase_only_baseline(const Trajectory& traj, int bins) {
  return fit_tls(traj, bin_by_phase(traj, bins), TlsMode::phase_only);
}

Twist2 predict_eval_model(const FittedEvalModel& model, const Sample& sample, double phase_rate) {
  return SliceScorer(model).at(sample, phase_rate);
}

double rms_error_x(const std::vector<Twist2>& predicted, const std::vector<Twist2>& truth) {
  if (predicted.empty()) throw std::invalid_argument("rms_error_x: empty sequences");
  if (predicted.size() != truth.size())
    throw std::invalid_argument("rms_error_x: sequence lengths differ");
  double sse = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i].vx - truth[i].vx;
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(predicted.size()));
}

GridResult run_grid(const Dataset& data, const std::vector<ModelKind>& models, int n_iter,
                    std::uint64_t seed, const EvalOptions& opts) {
  if (models.empty()) throw std::invalid_argument("run_grid: no model kinds given");
  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = a + 1; b < models.size(); ++b) {
      if (models[a] == models[b]) throw std::invalid_argument("run_grid: duplicate model kind");
    }
  }
  if (n_iter < 1) throw std::invalid_argument("run_grid: n_iter must be >= 1");

  GridResult out;
  const Dataset grid_data = decimate_to_common_rate(data, &out.diagnostics);
  const int spc = common_samples_per_cycle(grid_data);
  const std::vector<Condition> conds = grid_data.conditions();
  const int C = static_cast<int>(conds.size());
  const int K = static_cast<int>(models.size());

  // pairings[i][j][m]: train condition i, test condition j, iteration m.
  // The training slice of (i, m) is identical across j by construction.
  std::vector<std::vector<std::vector<Pairing>>> pairings(C);
  for (int i = 0; i < C; ++i) {
    pairings[i].resize(C);
    for (int j = 0; j < C; ++j) {
      pairings[i][j] = bootstrap_pairings(grid_data, conds[i], conds[j], n_iter, seed,
                                          opts.train_cycles, &out.diagnostics);
    }
  }

  out.records.resize(static_cast<std::size_t>(K) * C * C * n_iter);
  const std::size_t n_tasks = static_cast<std::size_t>(K) * C * n_iter;
  std::atomic<int> failed{0};

  const auto task = [&](std::size_t t) {
    const int m = static_cast<int>(t % n_iter);
    const int i = static_cast<int>((t / n_iter) % C);
    const int k = static_cast<int>(t / n_iter / C);
    const ModelKind kind = models[k];
    const TrialSlice train_slice = pairings[i][0][m].train;
    const double n_cycles = static_cast<double>(train_slice.size()) / spc;
    const auto slot = [&](int j) {
      return ((static_cast<std::size_t>(k) * C + i) * C + j) * n_iter + m;
    };

    std::optional<FittedEvalModel> fitted;
    std::string fit_error;
    try {
      const Trajectory train = slice_trajectory(grid_data.trials[train_slice.trial],
                                                train_slice.begin, train_slice.end);
      fitted = fit_eval_model(kind, train, opts,
                              derive_seed(seed, fit_stream(kind, i, C, m, n_iter)));
    } catch (const std::exception& e) {
      fit_error = e.what();
    }

    std::optional<SliceScorer> scorer;
    if (fitted) scorer.emplace(*fitted);
    for (int j = 0; j < C; ++j) {
      EvalRecord r = make_record(kind, conds[i], conds[j], m, n_cycles);
      if (!fitted) {
        mark_failed(r, fit_error);
        failed.fetch_add(1);
      } else {
        const bool in_sample = opts.in_sample && i == j;
        const TrialSlice slice = in_sample ? train_slice : pairings[i][j][m].test;
        if (in_sample) r.note = "in-sample";
        try {
          r.rms_error = score_slice(*scorer, grid_data.trials[slice.trial], slice,
                                    2.0 * std::numbers::pi * conds[j].frequency);
          r.log_rms = std::log(r.rms_error);
        } catch (const std::exception& e) {
          mark_failed(r, e.what());
          failed.fetch_add(1);
        }
      }
      out.records[slot(j)] = std::move(r);
    }
  };
  run_tasks(resolve_jobs(opts), n_tasks, task);
  out.n_failed = failed.load();
  return out;
}

std::vector<CategorySummary> category_stats(const std::vector<EvalRecord>& records) {
  std::map<std::tuple<int, int, int>, std::vector<double>> groups;
  for (const EvalRecord& r : records) {
    if (r.failed) continue;
    // freq_same sorts first (0) so same-frequency rows lead the report.
    groups[{static_cast<int>(r.model_kind), r.freq_same ? 0 : 1, gait_category(r.gait_dist)}]
        .push_back(r.log_rms);
  }
  std::vector<CategorySummary> out;
  for (auto& [key, values] : groups) {
    CategorySummary s;
    s.kind = static_cast<ModelKind>(std::get<0>(key));
    s.freq_same = std::get<1>(key) == 0;
    s.gait_cat = std::get<2>(key);
    s.count = static_cast<int>(values.size());
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_lo = std::numeric_limits<double>::infinity();
    s.whisker_hi = -std::numeric_limits<double>::infinity();
    for (double v : values) {
      if (v >= lo_fence) s.whisker_lo = std::min(s.whisker_lo, v);
      if (v <= hi_fence) s.whisker_hi = std::max(s.whisker_hi, v);
    }
    out.push_back(s);
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty values");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

struct GlmColumn {
  std::string name;
  Eigen::VectorXd values;
};

Eigen::VectorXd record_predictors(const EvalRecord& r) {
  Eigen::VectorXd x(6);
  x(0) = (r.model_kind == ModelKind::tls_suds || r.model_kind == ModelKind::gmr_suds) ? 1.0 : 0.0;
  x(1) = (r.model_kind == ModelKind::gmr || r.model_kind == ModelKind::gmr_suds) ? 1.0 : 0.0;
  x(2) = r.period == PeriodRelation::model_shorter ? 1.0 : 0.0;
  x(3) = r.period == PeriodRelation::model_equal ? 1.0 : 0.0;
  x(4) = r.gait_dist == 0 ? 1.0 : 0.0;
  x(5) = r.gait_dist >= 2 ? 1.0 : 0.0;
  return x;
}

const char* kPredictorNames[6] = {"suds",       "gmr",       "period_shorter",
                                  "period_equal", "gait_same", "gait_far"};

}  // namespace

GlmFit fit_glm(const std::vector<EvalRecord>& records, GlmKind kind) {
  std::vector<const EvalRecord*> rows;
  int excluded_failed = 0;
  int excluded_baseline = 0;
  int excluded_nonfinite = 0;
  for (const EvalRecord& r : records) {
    if (r.failed) {
      ++excluded_failed;
      continue;
    }
    if (r.model_kind == ModelKind::phase_only) {
      ++excluded_baseline;
      continue;
    }
    if (!std::isfinite(r.log_rms)) {
      ++excluded_nonfinite;
      continue;
    }
    rows.push_back(&r);
  }
  const int n = static_cast<int>(rows.size());

  GlmFit out;
  out.kind = kind;
  out.n = n;
  if (excluded_failed > 0)
    out.notes.push_back("excluded " + std::to_string(excluded_failed) + " failed record(s)");
  if (excluded_baseline > 0)
    out.notes.push_back("excluded " + std::to_string(excluded_baseline) +
                        " baseline-kind record(s): the indicators describe the four learned "
                        "kinds");
  if (excluded_nonfinite > 0)
    out.notes.push_back("excluded " + std::to_string(excluded_nonfinite) +
                        " record(s) with non-finite log rms");

  // Assemble candidate columns: intercept, the six main indicators, and for
  // the interactions flavor all pairwise products of the mains.
  std::vector<GlmColumn> cols;
  cols.push_back({"intercept", Eigen::VectorXd::Ones(n)});
  Eigen::MatrixXd mains(n, 6);
  for (int i = 0; i < n; ++i) mains.row(i) = record_predictors(*rows[i]).transpose();
  for (int p = 0; p < 6; ++p) cols.push_back({kPredictorNames[p], mains.col(p)});
  if (kind == GlmKind::first_order_interactions) {
    for (int a = 0; a < 6; ++a) {
      for (int b = a + 1; b < 6; ++b) {
        cols.push_back({std::string(kPredictorNames[a]) + ":" + kPredictorNames[b],
                        mains.col(a).cwiseProduct(mains.col(b))});
      }
    }
  }

  // Known aliasing: identically zero products of mutually exclusive
  // indicators, and exact duplicates. Dropped and reported, never silently.
  std::vector<GlmColumn> kept;
  for (GlmColumn& c : cols) {
    if (c.values.size() == 0 || c.values.cwiseAbs().maxCoeff() == 0.0) {
      out.dropped.push_back(c.name + " (identically zero)");
      continue;
    }
    bool duplicate = false;
    for (const GlmColumn& k : kept) {
      if (k.values == c.values) {
        out.dropped.push_back(c.name + " (duplicate of " + k.name + ")");
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(std::move(c));
  }

  const int p = static_cast<int>(kept.size());
  if (n <= p)
    throw std::invalid_argument("fit_glm: " + std::to_string(n) + " usable record(s) for " +
                                std::to_string(p) + " design columns");
  Eigen::MatrixXd X(n, p);
  for (int c = 0; c < p; ++c) X.col(c) = kept[c].values;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = rows[i]->log_rms;

  const Eigen::MatrixXd xtx = X.transpose() * X;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx);
    const double largest = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() <= 1e-10 * largest)
      throw std::runtime_error(
          "fit_glm: design is rank deficient beyond the known aliasing; records do not span "
          "the predictor combinations");
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd beta = ldlt.solve(X.transpose() * y);
  const double rss = (y - X * beta).squaredNorm();
  out.dof = n - p;
  const double sigma2 = rss / out.dof;
  out.sigma = std::sqrt(sigma2);
  const Eigen::MatrixXd cov = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  const boost::math::students_t tdist(out.dof);
  const double tq = boost::math::quantile(tdist, 0.975);

  out.terms.resize(p);
  for (int c = 0; c < p; ++c) {
    GlmTerm& t = out.terms[c];
    t.name = kept[c].name;
    t.estimate = beta(c);
    t.se = std::sqrt(std::max(cov(c, c), 0.0));
    t.ci_lo = t.estimate - tq * t.se;
    t.ci_hi = t.estimate + tq * t.se;
  }
  std::sort(out.terms.begin(), out.terms.end(), [](const GlmTerm& a, const GlmTerm& b) {
    const double ma = std::abs(a.estimate);
    const double mb = std::abs(b.estimate);
    if (ma != mb) return ma > mb;
    return a.name < b.name;
  });
  return out;
}

std::vector<int> default_cycle_counts() {
  return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 21, 30, 39, 48};
}

SweepResult sample_efficiency_sweep(const Dataset& data, const std::vector<ModelKind>& models,
                                    const std::vector<int>& cycle_counts, int n_iter,
                                    std::uint64_t seed, const EvalOptions& opts) {
  if (models.empty()) throw std::invalid_argument("sample_efficiency_sweep: no model kinds given");
  if (n_iter < 1) throw std::invalid_argument("sample_efficiency_sweep: n_iter must be >= 1");
  if (cycle_counts.empty())
    throw std::invalid_argument("sample_efficiency_sweep: no cycle counts given");
  std::vector<int> counts = cycle_counts;
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("sample_efficiency_sweep: cycle counts must be >= 1");
  }
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  SweepResult out;
  const Dataset sweep_data = decimate_to_common_rate(data, &out.diagnostics);
  const int spc = common_samples_per_cycle(sweep_data);
  const std::vector<Condition> conds = sweep_data.conditions();
  const int C = static_cast<int>(conds.size());
  const int K = static_cast<int>(models.size());

  int max_cycles = 0;
  for (const Trajectory& t : sweep_data.trials)
    max_cycles = std::max(max_cycles, static_cast<int>(t.samples.size()) / spc);
  std::vector<int> feasible;
  for (int c : counts) {
    if (c <= max_cycles) {
      feasible.push_back(c);
    } else {
      out.diagnostics.push_back("cycle count " + std::to_string(c) + " exceeds every trial (max " +
                                std::to_string(max_cycles) + " cycles); skipped");
    }
  }
  if (feasible.empty())
    throw std::invalid_argument("sample_efficiency_sweep: every cycle count exceeds the trials");
  const int Q = static_cast<int>(feasible.size());
  const int pairing_cycles = std::max(opts.train_cycles, feasible.back());

  std::vector<std::vector<Pairing>> pairings(C);
  for (int i = 0; i < C; ++i) {
    pairings[i] = bootstrap_pairings(sweep_data, conds[i], conds[i], n_iter, seed, pairing_cycles,
                                     &out.diagnostics);
  }

  // Iterations whose training slice cannot supply a count are skipped for
  // that count; summarize the skips up front (they depend only on the data).
  std::map<std::pair<int, int>, int> skipped;  // (condition, count) -> iterations
  for (int i = 0; i < C; ++i) {
    for (int q = 0; q < Q; ++q) {
      int misses = 0;
      for (int m = 0; m < n_iter; ++m) {
        if (feasible[q] * spc > pairings[i][m].train.size()) ++misses;
      }
      if (misses > 0) skipped[{i, q}] = misses;
    }
  }
  for (const auto& [key, misses] : skipped) {
    out.diagnostics.push_back("condition " + condition_label(conds[key.first]) + ", " +
                              std::to_string(feasible[key.second]) + " cycles: " +
                              std::to_string(misses) + " of " + std::to_string(n_iter) +
                              " iteration(s) lack that much training data; skipped");
  }

  const int kSkipped = -1;
  std::vector<EvalRecord> slots(static_cast<std::size_t>(K) * C * Q * n_iter);
  for (EvalRecord& r : slots) r.iteration = kSkipped;
  const std::size_t n_tasks = static_cast<std::size_t>(K) * C * n_iter;
  std::atomic<int> failed_total{0};

  const auto task = [&](std::size_t t) {
    const int m = static_cast<int>(t % n_iter);
    const int i = static_cast<int>((t / n_iter) % C);
    const int k = static_cast<int>(t / n_iter / C);
    const ModelKind kind = models[k];
    const Pairing& pairing = pairings[i][m];
    const std::uint64_t fseed = derive_seed(seed, fit_stream(kind, i, C, m, n_iter));
    const double phase_rate = 2.0 * std::numbers::pi * conds[i].frequency;
    for (int q = 0; q < Q; ++q) {
      const int need = feasible[q] * spc;
      if (need > pairing.train.size()) continue;
      const std::size_t slot =
          ((static_cast<std::size_t>(k) * C + i) * Q + q) * n_iter + m;
      EvalRecord r = make_record(kind, conds[i], conds[i], m, feasible[q]);
      try {
        const Trajectory train = slice_trajectory(sweep_data.trials[pairing.train.trial],
                                                  pairing.train.begin, pairing.train.begin + need);
        const FittedEvalModel fitted = fit_eval_model(kind, train, opts, fseed);
        const SliceScorer scorer(fitted);
        r.rms_error =
            score_slice(scorer, sweep_data.trials[pairing.test.trial], pairing.test, phase_rate);
        r.log_rms = std::log(r.rms_error);
      } catch (const std::exception& e) {
        mark_failed(r, e.what());
        failed_total.fetch_add(1);
      }
      slots[slot] = std::move(r);
    }
  };
  run_tasks(resolve_jobs(opts), n_tasks, task);

  out.records.reserve(slots.size());
  for (EvalRecord& r : slots) {
    if (r.iteration != kSkipped) out.records.push_back(std::move(r));
  }

  // Per (model, frequency, cycles) summaries, pooled over gaits and
  // iterations; model order follows the caller's list.
  for (int k = 0; k < K; ++k) {
    std::vector<double> freqs;
    for (const Condition& c : conds) {
      if (std::find(freqs.begin(), freqs.end(), c.frequency) == freqs.end())
        freqs.push_back(c.frequency);
    }
    std::sort(freqs.begin(), freqs.end());
    for (double f : freqs) {
      for (int q = 0; q < Q; ++q) {
        SweepCell cell;
        cell.kind = models[k];
        cell.frequency = f;
        cell.cycles = feasible[q];
        std::vector<double> values;
        for (const EvalRecord& r : out.records) {
          if (r.model_kind != models[k] || r.train.frequency != f ||
              static_cast<int>(r.n_cycles) != feasible[q])
            continue;
          if (r.failed) {
            ++cell.failed;
          } else {
            values.push_back(r.rms_error);
          }
        }
        cell.count = static_cast<int>(values.size());
        if (!values.empty()) {
          cell.median = quantile(values, 0.5);
          cell.q1 = quantile(values, 0.25);
          cell.q3 = quantile(values, 0.75);
        }
        if (cell.count > 0 || cell.failed > 0) out.cells.push_back(cell);
      }
    }
  }

  // Tail slope of log median rms vs log cycles over counts >= 5, pooled
  // across frequencies and gaits.
  for (int k = 0; k < K; ++k) {
    SweepSlope slope;
    slope.kind = models[k];
    std::vector<double> lx, ly;
    for (int q = 0; q < Q; ++q) {
      if (feasible[q] < 5) continue;
      std::vector<double> values;
      for (const EvalRecord& r : out.records) {
        if (r.model_kind == models[k] && !r.failed &&
            static_cast<int>(r.n_cycles) == feasible[q])
          values.push_back(r.rms_error);
      }
      if (values.empty()) continue;
      const double med = quantile(values, 0.5);
      if (!(med > 0.0)) continue;
      lx.push_back(std::log(static_cast<double>(feasible[q])));
      ly.push_back(std::log(med));
    }
    slope.points = static_cast<int>(lx.size());
    if (slope.points >= 2) {
      const double n_pts = static_cast<double>(slope.points);
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      for (int idx = 0; idx < slope.points; ++idx) {
        sx += lx[idx];
        sy += ly[idx];
        sxx += lx[idx] * lx[idx];
        sxy += lx[idx] * ly[idx];
      }
      slope.slope = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
    } else {
      slope.slope = kNaN;
      out.diagnostics.push_back("model " + model_kind_name(models[k]) +
                                ": fewer than two tail points; no slope");
    }
    out.slopes.push_back(slope);
  }
  if (failed_total.load() > 0)
    out.diagnostics.push_back(std::to_string(failed_total.load()) + " fit(s) failed");
  return out;
}

SwimmerParams BenchmarkConfig::benchmark_swimmer() {
  SwimmerParams p;
  // Soft, lightly damped flippers respond visibly to torque disturbances, so
  // the passive state carries a measurable share of the propulsion signal.
  p.flipper_damping = 0.004;
  p.servo_tau = 0.05;
  return p;
}

NoiseSpec BenchmarkConfig::benchmark_noise() {
  NoiseSpec n;
  n.marker_sigma = 0.02;        // [mm]; keeps the velocity noise floor low
  n.shape_disturbance = 0.06;   // [rad] servo-target wander
  n.flipper_disturbance = 0.012;  // [torque] flipper excitation
  n.disturbance_tau = 0.4;      // [s]
  return n;
}

void BenchmarkConfig::validate() const {
  swimmer.validate();
  if (sample_rate <= 0.0) throw std::invalid_argument("BenchmarkConfig: sample_rate must be > 0");
  if (trials_per_condition < 2)
    throw std::invalid_argument("BenchmarkConfig: need at least two trials per condition");
  if (min_cycles < 1 || max_cycles < min_cycles)
    throw std::invalid_argument("BenchmarkConfig: cycle range must satisfy 1 <= min <= max");
  if (pca_components < 1)
    throw std::invalid_argument("BenchmarkConfig: pca_components must be >= 1");
}

Dataset simulate_benchmark(const BenchmarkConfig& cfg, std::vector<std::string>* log,
                           PcaModel* pca_out) {
  cfg.validate();
  const std::vector<Condition> conds = benchmark_conditions();
  std::mt19937_64 rng_len(derive_seed(cfg.seed, 7001));

  std::vector<Trajectory> raw;
  raw.reserve(conds.size() * cfg.trials_per_condition);
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    const Condition& cond = conds[ci];
    const GaitSpec gait = gait_by_label(cond.gait_id);
    for (int t = 0; t < cfg.trials_per_condition; ++t) {
      // The first trial of every condition gets the maximum length so every
      // sweep cycle count up to max_cycles stays feasible.
      const int cycles = t == 0 ? cfg.max_cycles
                                : cfg.min_cycles +
                                      pick(rng_len, cfg.max_cycles - cfg.min_cycles + 1);
      NoiseSpec noise = cfg.noise;
      noise.seed = derive_seed(cfg.seed, 8000 + ci * 64 + static_cast<std::size_t>(t));
      // The ingest pipeline trims a few boundary samples, so simulate one
      // spare cycle and truncate back to the nominal length; trial lengths
      // then mean exactly what the cycle counts say.
      SimResult sim =
          simulate(cfg.swimmer, gait, cond.frequency, cycles + 1, cfg.sample_rate, noise);
      Trajectory obs = std::move(sim.observed);
      obs.gait_id = cond.gait_id;
      obs.frequency = cond.frequency;
      const std::size_t keep =
          static_cast<std::size_t>(cycles) * static_cast<std::size_t>(samples_per_cycle(obs));
      if (obs.samples.size() < keep)
        throw std::runtime_error("simulate_benchmark: trial shorter than requested after ingest");
      obs.samples.resize(keep);
      if (!obs.poses.empty()) obs.poses.resize(keep);
      char id[64];
      std::snprintf(id, sizeof id, "%s_f%.2f_t%d", cond.gait_id.c_str(), cond.frequency, t);
      obs.trial_id = id;
      raw.push_back(std::move(obs));
    }
  }

  // One passive-coordinate basis across all trials, so a model trained on
  // one trial can read any other trial's passive coordinates.
  std::vector<Eigen::VectorXd> rows;
  std::size_t total = 0;
  for (const Trajectory& t : raw) total += t.samples.size();
  rows.reserve(total);
  for (const Trajectory& t : raw) {
    for (const Sample& s : t.samples) rows.push_back(s.shape.r_p);
  }
  const PcaModel pca = fit_pca(rows, cfg.pca_components);
  if (pca_out != nullptr) *pca_out = pca;

  Dataset out;
  out.trials.reserve(raw.size());
  for (const Trajectory& t : raw) out.trials.push_back(reduce_passive(pca, t));
  if (log != nullptr) {
    log->push_back("simulated " + std::to_string(out.trials.size()) + " trial(s) across " +
                   std::to_string(conds.size()) + " condition(s); shared basis keeps " +
                   std::to_string(pca.n_components()) + " passive component(s)");
  }
  return out;
}

std::string record_to_json(const EvalRecord& r) {
  json j;
  j["model"] = model_kind_name(r.model_kind);
  j["train_gait"] = r.train.gait_id;
  j["train_freq"] = r.train.frequency;
  j["test_gait"] = r.test.gait_id;
  j["test_freq"] = r.test.frequency;
  j["iteration"] = r.iteration;
  j["n_cycles"] = r.n_cycles;
  if (std::isfinite(r.rms_error)) {
    j["rms"] = r.rms_error;
  } else {
    j["rms"] = nullptr;
  }
  if (std::isfinite(r.log_rms)) {
    j["log_rms"] = r.log_rms;
  } else {
    j["log_rms"] = nullptr;
  }
  j["freq_same"] = r.freq_same;
  j["gait_dist"] = r.gait_dist;
  j["period"] = period_relation_name(r.period);
  j["failed"] = r.failed;
  j["note"] = r.note;
  return j.dump();
}

EvalRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    EvalRecord r;
    r.model_kind = model_kind_from_name(j.at("model").get<std::string>());
    r.train = {j.at("train_gait").get<std::string>(), j.at("train_freq").get<double>()};
    r.test = {j.at("test_gait").get<std::string>(), j.at("test_freq").get<double>()};
    r.iteration = j.at("iteration").get<int>();
    r.n_cycles = j.at("n_cycles").get<double>();
    r.rms_error = j.at("rms").is_null() ? kNaN : j.at("rms").get<double>();
    r.log_rms = j.at("log_rms").is_null() ? kNaN : j.at("log_rms").get<double>();
    r.freq_same = j.at("freq_same").get<bool>();
    r.gait_dist = j.at("gait_dist").get<int>();
    const std::string period = j.at("period").get<std::string>();
    if (period == "model<data") {
      r.period = PeriodRelation::model_shorter;
    } else if (period == "model=data") {
      r.period = PeriodRelation::model_equal;
    } else if (period == "model>data") {
      r.period = PeriodRelation::model_longer;
    } else {
      throw std::runtime_error("record_from_json: unknown period relation '" + period + "'");
    }
    r.failed = j.at("failed").get<bool>();
    r.note = j.at("note").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("record_from_json: malformed record: ") + e.what());
  }
}

void save_records_jsonl(const std::string& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_records_jsonl: cannot open '" + path + "'");
  for (const EvalRecord& r : records) out << record_to_json(r) << '\n';
  if (!out) throw std::runtime_error("save_records_jsonl: write to '" + path + "' failed");
}

std::vector<EvalRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_records_jsonl: cannot open '" + path + "'");
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

std::string category_csv(const std::vector<CategorySummary>& stats) {
  std::string out = "model,freq_same,gait_category,count,median,q1,q3,whisker_low,whisker_high\n";
  for (const CategorySummary& s : stats) {
    out += model_kind_name(s.kind);
    out += s.freq_same ? ",same," : ",different,";
    out += gait_category_name(s.gait_cat);
    out += "," + std::to_string(s.count);
    out += "," + num(s.median) + "," + num(s.q1) + "," + num(s.q3);
    out += "," + num(s.whisker_lo) + "," + num(s.whisker_hi) + "\n";
  }
  return out;
}

std::string glm_csv(const GlmFit& fit) {
  std::string out = "term,estimate,ci_low,ci_high\n";
  for (const GlmTerm& t : fit.terms) {
    out += t.name + "," + num(t.estimate) + "," + num(t.ci_lo) + "," + num(t.ci_hi) + "\n";
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "model,frequency,cycles,count,failed,median,q1,q3\n";
  for (const SweepCell& c : sweep.cells) {
    out += model_kind_name(c.kind) + "," + num(c.frequency) + "," + std::to_string(c.cycles);
    out += "," + std::to_string(c.count) + "," + std::to_string(c.failed);
    out += "," + num(c.median) + "," + num(c.q1) + "," + num(c.q3) + "\n";
  }
  return out;
}

std::string slopes_csv(const SweepResult& sweep) {
  std::string out = "model,slope,points\n";
  for (const SweepSlope& s : sweep.slopes) {
    out += model_kind_name(s.kind) + "," + num(s.slope) + "," + std::to_string(s.points) + "\n";
  }
  return out;
}

}  // namespace motmap
