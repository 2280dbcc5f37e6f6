#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "motmap/eval.hpp"
#include "motmap/gait.hpp"

using namespace motmap;

namespace {

constexpr double kPi = 3.14159265358979323846;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * ((rng() >> 11) * 0x1p-53);
}

double gauss(std::mt19937_64& rng) {
  const double u1 = ((rng() >> 11) + 0.5) * 0x1p-53;
  const double u2 = (rng() >> 11) * 0x1p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Synthetic trial with slowly drifting shape deviations whose effect on the
/// body velocity is linear: a model that sees more of the shape state should
/// predict strictly better, which pins the learner ordering.
Trajectory synth_trial(const std::string& gait, double freq, double sample_rate, int n_cycles,
                       const std::string& trial_id, std::uint64_t seed) {
  const int spc = static_cast<int>(std::llround(sample_rate / freq));
  Trajectory traj;
  traj.sample_rate = sample_rate;
  traj.frequency = freq;
  traj.gait_id = gait;
  traj.trial_id = trial_id;
  const double omega = 2.0 * kPi * freq;
  const double shift = 0.7 * gait_axis_index(gait);
  std::mt19937_64 rng(seed);
  const int n = n_cycles * spc;
  traj.samples.resize(static_cast<std::size_t>(n));
  double d0 = 0.0, d1 = 0.0, p0 = 0.0;
  for (int i = 0; i < n; ++i) {
    Sample& s = traj.samples[static_cast<std::size_t>(i)];
    s.t = i / sample_rate;
    s.phase = 2.0 * kPi * (i % spc) / spc;
    const double prev_d0 = d0;
    const double prev_d1 = d1;
    const double prev_p0 = p0;
    d0 = 0.95 * d0 + 0.03 * gauss(rng);
    d1 = 0.95 * d1 + 0.03 * gauss(rng);
    p0 = 0.90 * p0 + 0.05 * gauss(rng);
    s.shape.r_a.resize(2);
    s.shape.r_a << std::sin(s.phase + shift) + d0, std::cos(s.phase) + d1;
    s.dshape_a.resize(2);
    s.dshape_a << std::cos(s.phase + shift) * omega + (d0 - prev_d0) * sample_rate,
        -std::sin(s.phase) * omega + (d1 - prev_d1) * sample_rate;
    s.shape.r_p.resize(1);
    s.shape.r_p << 0.3 * std::sin(s.phase) + p0;
    s.dshape_p.resize(1);
    s.dshape_p << 0.3 * std::cos(s.phase) * omega + (p0 - prev_p0) * sample_rate;
    s.vb.vx = 0.08 * std::cos(s.phase) + 0.5 * d0 - 0.2 * d1 + 0.3 * p0 + 0.003 * gauss(rng);
    s.vb.vy = 0.02 * std::sin(s.phase) + 0.1 * d1;
    s.vb.omega = 0.05 * std::sin(2.0 * s.phase) + 0.1 * p0;
  }
  return traj;
}

/// Two gaits x two frequencies at one sample rate, so the 0.5 Hz trials get
/// decimated by two inside the protocols.
Dataset synth_dataset(int trials_per_cond = 3, int cycles = 35, double sample_rate = 40.0) {
  Dataset data;
  const std::vector<std::string> gaits = {"S+", "S-"};
  const std::vector<double> freqs = {0.5, 1.0};
  for (std::size_t g = 0; g < gaits.size(); ++g) {
    for (std::size_t f = 0; f < freqs.size(); ++f) {
      for (int t = 0; t < trials_per_cond; ++t) {
        const std::string id = gaits[g] + "_" + std::to_string(f) + "_" + std::to_string(t);
        data.trials.push_back(synth_trial(gaits[g], freqs[f], sample_rate, cycles, id,
                                          1000 * g + 100 * f + static_cast<std::uint64_t>(t)));
      }
    }
  }
  return data;
}

EvalRecord make_rec(ModelKind kind, const Condition& train, const Condition& test, int iteration,
                    double log_value) {
  EvalRecord r;
  r.model_kind = kind;
  r.train = train;
  r.test = test;
  r.iteration = iteration;
  r.n_cycles = 30.0;
  r.log_rms = log_value;
  r.rms_error = std::exp(log_value);
  r.freq_same = train.frequency == test.frequency;
  r.gait_dist = gait_distance(train, test);
  r.period = period_relation(train, test);
  return r;
}

/// The effect-model indicator vector, written independently of the library.
Eigen::VectorXd record_mains(const EvalRecord& r) {
  Eigen::VectorXd x(6);
  x(0) = (r.model_kind == ModelKind::tls_suds || r.model_kind == ModelKind::gmr_suds) ? 1.0 : 0.0;
  x(1) = (r.model_kind == ModelKind::gmr || r.model_kind == ModelKind::gmr_suds) ? 1.0 : 0.0;
  x(2) = r.period == PeriodRelation::model_shorter ? 1.0 : 0.0;
  x(3) = r.period == PeriodRelation::model_equal ? 1.0 : 0.0;
  x(4) = r.gait_dist == 0 ? 1.0 : 0.0;
  x(5) = r.gait_dist >= 2 ? 1.0 : 0.0;
  return x;
}

const char* kMainNames[6] = {"suds",         "gmr",       "period_shorter",
                             "period_equal", "gait_same", "gait_far"};

/// Balanced records over the full grid and the four learned kinds with a
/// planted linear (plus optional interaction) structure on log rms.
std::vector<EvalRecord> planted_records(const Eigen::VectorXd& beta, const Eigen::MatrixXd* inter,
                                        double noise, int n_iter, std::uint64_t seed) {
  REQUIRE(beta.size() == 7);
  std::vector<EvalRecord> recs;
  std::mt19937_64 rng(seed);
  const std::vector<Condition> conds = benchmark_conditions();
  const ModelKind kinds[4] = {ModelKind::tls, ModelKind::tls_suds, ModelKind::gmr,
                              ModelKind::gmr_suds};
  for (int m = 0; m < n_iter; ++m) {
    for (ModelKind k : kinds) {
      for (const Condition& tr : conds) {
        for (const Condition& te : conds) {
          EvalRecord r = make_rec(k, tr, te, m, 0.0);
          const Eigen::VectorXd x = record_mains(r);
          double mu = beta(0);
          for (int i = 0; i < 6; ++i) mu += beta(i + 1) * x(i);
          if (inter != nullptr) {
            for (int a = 0; a < 6; ++a) {
              for (int b = a + 1; b < 6; ++b) mu += (*inter)(a, b) * x(a) * x(b);
            }
          }
          const double lv = mu + (noise > 0.0 ? noise * gauss(rng) : 0.0);
          r.log_rms = lv;
          r.rms_error = std::exp(lv);
          recs.push_back(std::move(r));
        }
      }
    }
  }
  return recs;
}

/// Independent OLS path: assemble the same design (intercept + mains, plus
/// products for the interactions flavor; drop zero and duplicate columns) and
/// solve with a QR factorization of X itself, not the normal equations.
std::vector<std::pair<std::string, double>> ols_oracle(const std::vector<EvalRecord>& records,
                                                       bool interactions) {
  std::vector<const EvalRecord*> rows;
  for (const EvalRecord& r : records) {
    if (r.failed || r.model_kind == ModelKind::phase_only || !std::isfinite(r.log_rms)) continue;
    rows.push_back(&r);
  }
  const int n = static_cast<int>(rows.size());
  std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
  cols.emplace_back("intercept", Eigen::VectorXd::Ones(n));
  Eigen::MatrixXd mains(n, 6);
  for (int i = 0; i < n; ++i) mains.row(i) = record_mains(*rows[i]).transpose();
  for (int p = 0; p < 6; ++p) cols.emplace_back(kMainNames[p], mains.col(p));
  if (interactions) {
    for (int a = 0; a < 6; ++a) {
      for (int b = a + 1; b < 6; ++b) {
        cols.emplace_back(std::string(kMainNames[a]) + ":" + kMainNames[b],
                          mains.col(a).cwiseProduct(mains.col(b)));
      }
    }
  }
  std::vector<std::pair<std::string, Eigen::VectorXd>> kept;
  for (auto& c : cols) {
    if (c.second.cwiseAbs().maxCoeff() == 0.0) continue;
    bool dup = false;
    for (const auto& k : kept) {
      if (k.second == c.second) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(c));
  }
  const int p = static_cast<int>(kept.size());
  Eigen::MatrixXd X(n, p);
  for (int c = 0; c < p; ++c) X.col(c) = kept[static_cast<std::size_t>(c)].second;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = rows[static_cast<std::size_t>(i)]->log_rms;
  const Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
  std::vector<std::pair<std::string, double>> out;
  for (int c = 0; c < p; ++c) out.emplace_back(kept[static_cast<std::size_t>(c)].first, b(c));
  return out;
}

double term_estimate(const GlmFit& fit, const std::string& name) {
  for (const GlmTerm& t : fit.terms) {
    if (t.name == name) return t.estimate;
  }
  FAIL("missing term: ", name);
  return 0.0;
}

const GlmTerm& term_of(const GlmFit& fit, const std::string& name) {
  for (const GlmTerm& t : fit.terms) {
    if (t.name == name) return t;
  }
  FAIL("missing term: ", name);
  static GlmTerm dummy;
  return dummy;
}

bool contains(const std::vector<std::string>& lines, const std::string& needle) {
  for (const std::string& s : lines) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string records_digest(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const EvalRecord& r : records) {
    out += record_to_json(r);
    out += '\n';
  }
  return out;
}

double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace

TEST_CASE("model kind and condition vocabulary") {
  const ModelKind kinds[5] = {ModelKind::phase_only, ModelKind::tls, ModelKind::tls_suds,
                              ModelKind::gmr, ModelKind::gmr_suds};
  for (ModelKind k : kinds) CHECK(model_kind_from_name(model_kind_name(k)) == k);
  CHECK(model_kind_name(ModelKind::tls_suds) == "tls_suds");
  CHECK_THROWS_AS(model_kind_from_name("nope"), std::invalid_argument);

  const std::vector<Condition> conds = benchmark_conditions();
  REQUIRE(conds.size() == 15);
  // Gait-major, frequency ascending within a gait.
  CHECK(conds[0].gait_id == "S+");
  CHECK(conds[1].gait_id == "S+");
  CHECK(conds[2].gait_id == "S+");
  CHECK(conds[0].frequency == doctest::Approx(1.0 / 3.0));
  CHECK(conds[1].frequency == doctest::Approx(0.5));
  CHECK(conds[2].frequency == doctest::Approx(1.0));
  CHECK(conds[14].gait_id == "D+");
  std::set<std::string> gaits;
  for (const Condition& c : conds) gaits.insert(c.gait_id);
  CHECK(gaits == std::set<std::string>{"S+", "S-", "O", "D-", "D+"});

  // Period relation: higher training frequency means a shorter model period.
  const Condition f1{"S+", 1.0};
  const Condition fh{"S+", 0.5};
  CHECK(period_relation(f1, fh) == PeriodRelation::model_shorter);
  CHECK(period_relation(fh, f1) == PeriodRelation::model_longer);
  CHECK(period_relation(f1, f1) == PeriodRelation::model_equal);
  CHECK(period_relation_name(PeriodRelation::model_shorter) == "model<data");
  CHECK(period_relation_name(PeriodRelation::model_equal) == "model=data");
  CHECK(period_relation_name(PeriodRelation::model_longer) == "model>data");

  // Gait distance along the ordered axis, collapsed to same/near/far.
  CHECK(gait_distance(Condition{"S+", 1.0}, Condition{"S+", 0.5}) == 0);
  CHECK(gait_distance(Condition{"S+", 1.0}, Condition{"S-", 1.0}) == 1);
  CHECK(gait_distance(Condition{"S+", 1.0}, Condition{"D+", 1.0}) == 4);
  CHECK(gait_distance(Condition{"D-", 1.0}, Condition{"S-", 1.0}) == 2);
  CHECK(gait_category(0) == 0);
  CHECK(gait_category(1) == 1);
  CHECK(gait_category(2) == 2);
  CHECK(gait_category(4) == 2);
  CHECK(gait_category_name(0) == "same");
  CHECK(gait_category_name(1) == "near");
  CHECK(gait_category_name(2) == "far");
}

TEST_CASE("rms_error_x matches its defining examples") {
  auto tw = [](double vx) { return Twist2{vx, 0.3, -0.2}; };
  const std::vector<Twist2> truth = {tw(0.1), tw(-0.4), tw(0.2), tw(0.0)};

  CHECK(rms_error_x(truth, truth) == 0.0);

  std::vector<Twist2> offset = truth;
  for (Twist2& t : offset) t.vx += 0.05;
  CHECK(rms_error_x(offset, truth) == doctest::Approx(0.05).epsilon(1e-12));

  std::vector<Twist2> alt = truth;
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i].vx += (i % 2 == 0 ? 0.05 : -0.05);
  CHECK(rms_error_x(alt, truth) == doctest::Approx(0.05).epsilon(1e-12));

  // Only vx enters: perturbing vy and omega changes nothing.
  std::vector<Twist2> spun = truth;
  for (Twist2& t : spun) {
    t.vy += 9.0;
    t.omega -= 5.0;
  }
  CHECK(rms_error_x(spun, truth) == 0.0);

  CHECK_THROWS_AS(rms_error_x({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(rms_error_x(truth, {tw(1.0)}), std::invalid_argument);
}

TEST_CASE("quantile follows the linear-interpolation convention") {
  CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.75) == 4.0);
  CHECK(quantile({5, 3, 1, 4, 2}, 0.5) == 3.0);  // sorts internally
  CHECK(quantile({7.5}, 0.0) == 7.5);
  CHECK(quantile({7.5}, 1.0) == 7.5);
  CHECK(quantile({1.0, 2.0}, 0.5) == 1.5);

  // Random data against an independently coded sorted-position oracle.
  std::mt19937_64 rng(11);
  std::vector<double> v(37);
  for (double& x : v) x = uniform(rng, -5.0, 5.0);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i <= 10; ++i) {
    const double p = i / 10.0;
    const double pos = p * (sorted.size() - 1.0);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), sorted.size() - 1);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double want = sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    CHECK(quantile(v, p) == doctest::Approx(want).epsilon(1e-14));
  }

  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, -0.1), std::invalid_argument);
}

TEST_CASE("category_stats summarizes log rms per model and category") {
  const Condition sp1{"S+", 1.0};
  const Condition sm_h{"S-", 0.5};
  const Condition dp1{"D+", 1.0};

  std::vector<EvalRecord> recs;
  // tls, same frequency, same gait: logs 1..5.
  for (int i = 1; i <= 5; ++i) recs.push_back(make_rec(ModelKind::tls, sp1, sp1, i, i));
  // gmr, same frequency, far gait: logs 1,2,3,4,100 with a whisker-capping outlier.
  const double far_logs[5] = {1, 2, 3, 4, 100};
  for (double lv : far_logs) recs.push_back(make_rec(ModelKind::gmr, sp1, dp1, 0, lv));
  // tls_suds, different frequency, near gait: a single record.
  recs.push_back(make_rec(ModelKind::tls_suds, sp1, sm_h, 0, 2.5));
  // A failed record must not contribute.
  EvalRecord bad = make_rec(ModelKind::tls, sp1, sp1, 9, 50.0);
  bad.failed = true;
  bad.rms_error = bad.log_rms = std::numeric_limits<double>::quiet_NaN();
  recs.push_back(bad);

  const std::vector<CategorySummary> stats = category_stats(recs);
  REQUIRE(stats.size() == 3);

  // Sorted by kind, same-frequency first, category ascending.
  CHECK(stats[0].kind == ModelKind::tls);
  CHECK(stats[1].kind == ModelKind::tls_suds);
  CHECK(stats[2].kind == ModelKind::gmr);

  const CategorySummary& a = stats[0];
  CHECK(a.freq_same);
  CHECK(a.gait_cat == 0);
  CHECK(a.count == 5);
  CHECK(a.median == 3.0);
  CHECK(a.q1 == 2.0);
  CHECK(a.q3 == 4.0);
  CHECK(a.whisker_lo == 1.0);  // fence at 2 - 1.5*2 = -1
  CHECK(a.whisker_hi == 5.0);  // fence at 4 + 1.5*2 = 7

  const CategorySummary& b = stats[1];
  CHECK_FALSE(b.freq_same);
  CHECK(b.gait_cat == 1);
  CHECK(b.count == 1);
  CHECK(b.median == 2.5);
  CHECK(b.q1 == 2.5);
  CHECK(b.q3 == 2.5);
  CHECK(b.whisker_lo == 2.5);
  CHECK(b.whisker_hi == 2.5);

  const CategorySummary& c = stats[2];
  CHECK(c.freq_same);
  CHECK(c.gait_cat == 2);
  CHECK(c.count == 5);
  CHECK(c.median == 3.0);
  CHECK(c.whisker_lo == 1.0);
  CHECK(c.whisker_hi == 4.0);  // 100 sits beyond the 1.5 IQR fence

  const std::string csv = category_csv(stats);
  CHECK(csv.rfind("model,freq_same,gait_category,count,median,q1,q3,whisker_low,whisker_high\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("tls,same,same,5,3,2,4,1,5") != std::string::npos);
}

TEST_CASE("samples-per-cycle normalization") {
  Trajectory t = synth_trial("S+", 0.5, 40.0, 3, "a", 1);
  CHECK(samples_per_cycle(t) == 80);

  Trajectory bad = t;
  bad.sample_rate = 100.0;
  bad.frequency = 0.3;  // 333.3 samples per cycle
  CHECK_THROWS_AS(samples_per_cycle(bad), std::invalid_argument);

  Dataset data;
  data.trials.push_back(synth_trial("S+", 0.5, 40.0, 3, "a", 1));  // 80 per cycle
  data.trials.push_back(synth_trial("S-", 0.5, 20.0, 3, "b", 2));  // 40 per cycle
  CHECK_THROWS_AS(common_samples_per_cycle(data), std::invalid_argument);

  std::vector<std::string> log;
  const Dataset norm = decimate_to_common_rate(data, &log);
  CHECK(common_samples_per_cycle(norm) == 40);
  CHECK(norm.trials[0].samples.size() == data.trials[0].samples.size() / 2);
  CHECK(norm.trials[0].sample_rate == doctest::Approx(20.0));
  CHECK(norm.trials[1].samples.size() == data.trials[1].samples.size());
  CHECK(contains(log, "decimated 1 trial(s) by 2 to 40 samples per cycle"));

  // Non-integer ratio between cycle resolutions.
  Dataset rough;
  rough.trials.push_back(synth_trial("S+", 0.5, 30.0, 3, "a", 1));  // 60 per cycle
  rough.trials.push_back(synth_trial("S-", 0.5, 20.0, 3, "b", 2));  // 40 per cycle
  CHECK_THROWS_AS(decimate_to_common_rate(rough), std::invalid_argument);
}

TEST_CASE("bootstrap pairings: determinism, trial separation, slice bounds") {
  Dataset data;
  const Condition ca{"S+", 0.5};
  const Condition cb{"S-", 0.5};
  const Condition cc{"O", 0.5};
  const int lengths_a[4] = {35, 20, 35, 12};  // cycles; spc = 40 at 20 Hz
  for (int t = 0; t < 4; ++t) {
    data.trials.push_back(
        synth_trial(ca.gait_id, ca.frequency, 20.0, lengths_a[t], "a" + std::to_string(t), 10 + t));
  }
  for (int t = 0; t < 2; ++t) {
    data.trials.push_back(
        synth_trial(cb.gait_id, cb.frequency, 20.0, 35, "b" + std::to_string(t), 20 + t));
  }
  data.trials.push_back(synth_trial(cc.gait_id, cc.frequency, 20.0, 35, "c0", 30));

  const std::vector<int> ia = data.trials_for(ca);
  REQUIRE(ia.size() == 4);
  CHECK(data.trials_for(cc).size() == 1);
  REQUIRE(data.conditions().size() == 3);
  CHECK(data.conditions()[0] == ca);  // sorted along the gait axis
  CHECK(data.conditions()[1] == cb);
  CHECK(data.conditions()[2] == cc);

  const int spc = common_samples_per_cycle(data);
  REQUIRE(spc == 40);
  const int want = 30 * spc;

  std::vector<std::string> log;
  const std::vector<Pairing> same = bootstrap_pairings(data, ca, ca, 200, 7, 30, &log);
  REQUIRE(same.size() == 200);
  std::set<int> train_trials;
  for (const Pairing& p : same) {
    CHECK(p.train.trial != p.test.trial);
    CHECK(std::count(ia.begin(), ia.end(), p.train.trial) == 1);
    CHECK(std::count(ia.begin(), ia.end(), p.test.trial) == 1);
    for (const TrialSlice& s : {p.train, p.test}) {
      const int n = static_cast<int>(data.trials[static_cast<std::size_t>(s.trial)].samples.size());
      CHECK(s.begin >= 0);
      CHECK(s.end <= n);
      CHECK(s.size() == std::min(want, n));
    }
    train_trials.insert(p.train.trial);
  }
  CHECK(train_trials.size() == 4);  // every trial gets drawn eventually
  CHECK(contains(log, "shorter than 30"));

  // Bit-identical reruns; a different seed changes the draws.
  CHECK(same == bootstrap_pairings(data, ca, ca, 200, 7, 30));
  CHECK(same != bootstrap_pairings(data, ca, ca, 200, 8, 30));

  // The training stream depends only on the train condition, so a model
  // fitted once per iteration can be scored against every test condition.
  const std::vector<Pairing> cross = bootstrap_pairings(data, ca, cb, 200, 7, 30);
  REQUIRE(cross.size() == 200);
  const std::vector<int> ib = data.trials_for(cb);
  for (std::size_t i = 0; i < cross.size(); ++i) {
    CHECK(cross[i].train == same[i].train);
    CHECK(std::count(ib.begin(), ib.end(), cross[i].test.trial) == 1);
  }

  CHECK_THROWS_AS(bootstrap_pairings(data, cc, ca, 5, 7), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_pairings(data, ca, cc, 5, 7), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_pairings(data, ca, ca, 0, 7), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_pairings(data, ca, ca, 5, 7, 0), std::invalid_argument);
}

TEST_CASE("run_grid: record layout, partition, determinism, learner ordering") {
  const Dataset data = synth_dataset();
  const std::vector<ModelKind> models = {ModelKind::phase_only, ModelKind::tls,
                                         ModelKind::tls_suds, ModelKind::gmr, ModelKind::gmr_suds};
  const int n_iter = 3;
  EvalOptions opts;
  const GridResult grid = run_grid(data, models, n_iter, 42, opts);

  const std::vector<Condition> conds = decimate_to_common_rate(data).conditions();
  REQUIRE(conds.size() == 4);
  const int C = 4;
  REQUIRE(grid.records.size() == models.size() * C * C * n_iter);
  CHECK(grid.n_failed == 0);

  // Deterministic layout: model-major, then train condition, test condition,
  // iteration; derived fields recomputable from the conditions.
  std::size_t slot = 0;
  std::map<std::pair<bool, int>, int> bucket;
  for (std::size_t k = 0; k < models.size(); ++k) {
    for (int i = 0; i < C; ++i) {
      for (int j = 0; j < C; ++j) {
        for (int m = 0; m < n_iter; ++m, ++slot) {
          const EvalRecord& r = grid.records[slot];
          CHECK(r.model_kind == models[k]);
          CHECK(r.train == conds[static_cast<std::size_t>(i)]);
          CHECK(r.test == conds[static_cast<std::size_t>(j)]);
          CHECK(r.iteration == m);
          CHECK_FALSE(r.failed);
          CHECK(r.n_cycles == 30.0);
          CHECK(std::isfinite(r.rms_error));
          CHECK(r.rms_error > 0.0);
          CHECK(r.log_rms == std::log(r.rms_error));
          CHECK(r.freq_same == (r.train.frequency == r.test.frequency));
          CHECK(r.gait_dist == gait_distance(r.train, r.test));
          CHECK(r.period == period_relation(r.train, r.test));
          ++bucket[{r.freq_same, gait_category(r.gait_dist)}];
        }
      }
    }
  }
  // The records partition exactly into the frequency x gait-category table.
  int total = 0;
  for (const auto& [key, count] : bucket) total += count;
  CHECK(total == static_cast<int>(grid.records.size()));
  CHECK(bucket[{true, 0}] == static_cast<int>(models.size()) * 4 * n_iter);
  CHECK(bucket[{true, 1}] == static_cast<int>(models.size()) * 4 * n_iter);
  CHECK(bucket[{false, 0}] == static_cast<int>(models.size()) * 4 * n_iter);
  CHECK(bucket[{false, 1}] == static_cast<int>(models.size()) * 4 * n_iter);

  // Scheduling must not leak into the results: a single-threaded rerun is
  // bit-identical.
  EvalOptions serial = opts;
  serial.jobs = 1;
  const GridResult again = run_grid(data, models, n_iter, 42, serial);
  CHECK(records_digest(again.records) == records_digest(grid.records));

  // Learner ordering on same-condition cells: each added input strictly
  // helps on data whose velocity depends linearly on all of them.
  auto same_cond_rms = [&](ModelKind k) {
    std::vector<double> v;
    for (const EvalRecord& r : grid.records) {
      if (r.model_kind == k && r.train == r.test) v.push_back(r.rms_error);
    }
    REQUIRE(v.size() == static_cast<std::size_t>(C * n_iter));
    return v;
  };
  const double med_phase = median_of(same_cond_rms(ModelKind::phase_only));
  const double med_tls = median_of(same_cond_rms(ModelKind::tls));
  const double med_tls_suds = median_of(same_cond_rms(ModelKind::tls_suds));
  const double med_gmr = median_of(same_cond_rms(ModelKind::gmr));
  const double med_gmr_suds = median_of(same_cond_rms(ModelKind::gmr_suds));
  CHECK(med_phase > med_tls);
  CHECK(med_tls > med_tls_suds);
  CHECK(med_gmr_suds <= med_gmr);

  // JSON round trip: parse-and-reserialize reproduces every line exactly.
  for (const EvalRecord& r : grid.records) {
    const std::string line = record_to_json(r);
    CHECK(record_to_json(record_from_json(line)) == line);
  }

  // JSONL file round trip.
  const std::string path =
      (std::filesystem::temp_directory_path() / "motmap_test_eval_records.jsonl").string();
  save_records_jsonl(path, grid.records);
  const std::vector<EvalRecord> loaded = load_records_jsonl(path);
  REQUIRE(loaded.size() == grid.records.size());
  CHECK(records_digest(loaded) == records_digest(grid.records));
  std::filesystem::remove(path);

  // In-sample diagnostic mode: scoring the training slice itself must sit
  // below the out-of-sample spread of the same learner.
  EvalOptions diag = opts;
  diag.in_sample = true;
  const GridResult inres = run_grid(data, {ModelKind::tls}, 1, 42, diag);
  std::vector<double> in_rms;
  for (const EvalRecord& r : inres.records) {
    if (r.train == r.test) {
      CHECK(r.note == "in-sample");
      in_rms.push_back(r.rms_error);
    } else {
      CHECK(r.note.empty());
    }
  }
  REQUIRE(in_rms.size() == 4);
  CHECK(median_of(in_rms) < med_tls);
}

TEST_CASE("run_grid counts failed fits without dropping records") {
  const Dataset data = synth_dataset();
  EvalOptions opts;
  opts.train_cycles = 1;  // too short for the nominal-gait fit the tls kind needs
  const std::vector<ModelKind> models = {ModelKind::phase_only, ModelKind::tls};
  const GridResult grid = run_grid(data, models, 2, 5, opts);

  REQUIRE(grid.records.size() == 2 * 4 * 4 * 2);
  int failed = 0;
  for (const EvalRecord& r : grid.records) {
    if (r.model_kind == ModelKind::tls) {
      CHECK(r.failed);
      CHECK_FALSE(r.note.empty());
      CHECK_FALSE(std::isfinite(r.rms_error));
      CHECK_FALSE(std::isfinite(r.log_rms));
      ++failed;
      // Failed records survive serialization (NaN maps to null and back).
      const std::string line = record_to_json(r);
      const EvalRecord back = record_from_json(line);
      CHECK(back.failed);
      CHECK_FALSE(std::isfinite(back.rms_error));
      CHECK(record_to_json(back) == line);
    } else {
      CHECK_FALSE(r.failed);
      CHECK(std::isfinite(r.rms_error));
    }
  }
  CHECK(failed == 32);
  CHECK(grid.n_failed == 32);

  // Summaries skip the failed records entirely.
  for (const CategorySummary& s : category_stats(grid.records)) {
    CHECK(s.kind == ModelKind::phase_only);
    CHECK(std::isfinite(s.median));
  }

  CHECK_THROWS_AS(run_grid(data, {}, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(run_grid(data, {ModelKind::tls, ModelKind::tls}, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(run_grid(data, models, 0, 5), std::invalid_argument);
}

TEST_CASE("fit_eval_model adapts hyperparameters to short slices") {
  const Trajectory one_cycle = synth_trial("S+", 1.0, 40.0, 1, "short", 3);
  EvalOptions opts;

  // The constant and mixture kinds shrink their capacity and still fit.
  const FittedEvalModel base = fit_eval_model(ModelKind::phase_only, one_cycle, opts, 1);
  const Twist2 y = predict_eval_model(base, one_cycle.samples[5], 2.0 * kPi);
  CHECK(std::isfinite(y.vx));

  const FittedEvalModel mix = fit_eval_model(ModelKind::gmr, one_cycle, opts, 1);
  CHECK(static_cast<int>(mix.gmr.components.size()) <= 4);  // n / 10 cap
  CHECK(mix.gmr.components.size() >= 1);

  // The shape-regressor kinds cannot fit one cycle (the nominal gait needs
  // two); the failure is an exception, not a silent degradation.
  CHECK_THROWS(fit_eval_model(ModelKind::tls, one_cycle, opts, 1));

  // suds kinds refuse trajectories without passive coordinates.
  Trajectory no_passive = synth_trial("S+", 1.0, 40.0, 5, "np", 4);
  for (Sample& s : no_passive.samples) {
    s.shape.r_p.resize(0);
    s.dshape_p.resize(0);
  }
  CHECK_THROWS_AS(fit_eval_model(ModelKind::tls_suds, no_passive, opts, 1),
                  std::invalid_argument);
}

TEST_CASE("phase_only_baseline is a pure function of phase") {
  // Constant velocity: the baseline reproduces it exactly at every phase.
  Trajectory traj = synth_trial("S+", 1.0, 40.0, 10, "const", 6);
  for (Sample& s : traj.samples) s.vb = Twist2{0.123, -0.045, 0.01};
  const PhaseBinnedLinearModel base = phase_only_baseline(traj);
  for (int i = 0; i < 40; ++i) {
    const Sample& s = traj.samples[static_cast<std::size_t>(i)];
    const Twist2 y = predict_eval_model(FittedEvalModel{ModelKind::phase_only, base, {}}, s,
                                        2.0 * kPi);
    CHECK(y.vx == doctest::Approx(0.123).epsilon(1e-9));
    CHECK(y.vy == doctest::Approx(-0.045).epsilon(1e-9));
    CHECK(y.omega == doctest::Approx(0.01).epsilon(1e-9));
  }

  // The baseline ignores shape entirely: scrambling the shapes of the test
  // samples leaves its predictions unchanged.
  Trajectory varied = synth_trial("S+", 1.0, 40.0, 10, "vary", 7);
  const PhaseBinnedLinearModel model = phase_only_baseline(varied);
  const FittedEvalModel wrapped{ModelKind::phase_only, model, {}};
  for (int i = 0; i < 20; ++i) {
    Sample s = varied.samples[static_cast<std::size_t>(i)];
    const Twist2 before = predict_eval_model(wrapped, s, 2.0 * kPi);
    s.shape.r_a.setConstant(99.0);
    s.shape.r_p.setConstant(-99.0);
    s.dshape_a.setConstant(42.0);
    const Twist2 after = predict_eval_model(wrapped, s, 2.0 * kPi);
    CHECK(before.vx == after.vx);
    CHECK(before.vy == after.vy);
    CHECK(before.omega == after.omega);
  }
}

TEST_CASE("fit_glm recovers planted effects") {
  Eigen::VectorXd beta(7);
  beta << -3.2, -0.8, 0.3, 0.5, -0.6, -1.0, 0.9;

  SUBCASE("zero noise: exact coefficients, zero-width intervals") {
    const std::vector<EvalRecord> recs = planted_records(beta, nullptr, 0.0, 1, 1);
    REQUIRE(recs.size() == 4 * 15 * 15);
    const GlmFit fit = fit_glm(recs, GlmKind::direct);
    CHECK(fit.kind == GlmKind::direct);
    CHECK(fit.n == 900);
    CHECK(fit.dropped.empty());
    REQUIRE(fit.terms.size() == 7);
    CHECK(fit.dof == 893);
    CHECK(fit.sigma <= 1e-12);
    CHECK(std::abs(term_estimate(fit, "intercept") - beta(0)) <= 1e-10);
    for (int i = 0; i < 6; ++i) {
      const GlmTerm& t = term_of(fit, kMainNames[i]);
      CHECK(std::abs(t.estimate - beta(i + 1)) <= 1e-10);
      CHECK(t.ci_hi - t.ci_lo <= 1e-8);
      CHECK(t.ci_lo <= t.estimate);
      CHECK(t.estimate <= t.ci_hi);
    }
    // Terms arrive sorted by decreasing coefficient magnitude.
    for (std::size_t i = 1; i < fit.terms.size(); ++i) {
      CHECK(std::abs(fit.terms[i - 1].estimate) >= std::abs(fit.terms[i].estimate));
    }
  }

  SUBCASE("noisy fit: within three standard errors, matches an independent solver") {
    const std::vector<EvalRecord> recs = planted_records(beta, nullptr, 0.3, 5, 2);
    const GlmFit fit = fit_glm(recs, GlmKind::direct);
    CHECK(fit.n == 4500);
    CHECK(std::abs(fit.sigma - 0.3) < 0.02);
    CHECK(std::abs(term_estimate(fit, "intercept") - beta(0)) <=
          3.0 * term_of(fit, "intercept").se);
    for (int i = 0; i < 6; ++i) {
      const GlmTerm& t = term_of(fit, kMainNames[i]);
      CHECK(std::abs(t.estimate - beta(i + 1)) <= 3.0 * t.se);
      // 95% t-interval: the half-width over the standard error matches the
      // quantile for this many degrees of freedom (1.96 in the large limit).
      const double ratio = (t.ci_hi - t.estimate) / t.se;
      CHECK(ratio > 1.95);
      CHECK(ratio < 1.98);
      CHECK(t.ci_hi - t.estimate == doctest::Approx(t.estimate - t.ci_lo).epsilon(1e-9));
    }
    for (const auto& [name, est] : ols_oracle(recs, false)) {
      CHECK(std::abs(term_estimate(fit, name) - est) <= 1e-10);
    }

    const std::string csv = glm_csv(fit);
    CHECK(csv.rfind("term,estimate,ci_low,ci_high\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(fit.terms.size()) + 1);
  }

  SUBCASE("excluded records do not perturb the estimates") {
    const std::vector<EvalRecord> recs = planted_records(beta, nullptr, 0.3, 2, 3);
    const GlmFit clean = fit_glm(recs, GlmKind::direct);

    std::vector<EvalRecord> noisy = recs;
    const Condition c0 = benchmark_conditions()[0];
    for (int i = 0; i < 50; ++i) {
      noisy.push_back(make_rec(ModelKind::phase_only, c0, c0, i, 5.0));
    }
    for (int i = 0; i < 30; ++i) {
      EvalRecord r = make_rec(ModelKind::tls, c0, c0, i, 0.0);
      r.failed = true;
      r.rms_error = r.log_rms = std::numeric_limits<double>::quiet_NaN();
      noisy.push_back(r);
    }
    for (int i = 0; i < 10; ++i) {
      EvalRecord r = make_rec(ModelKind::gmr, c0, c0, i, 0.0);
      r.rms_error = 0.0;
      r.log_rms = -std::numeric_limits<double>::infinity();
      noisy.push_back(r);
    }
    const GlmFit fit = fit_glm(noisy, GlmKind::direct);
    CHECK(fit.n == clean.n);
    REQUIRE(fit.terms.size() == clean.terms.size());
    for (std::size_t i = 0; i < fit.terms.size(); ++i) {
      CHECK(fit.terms[i].name == clean.terms[i].name);
      CHECK(fit.terms[i].estimate == clean.terms[i].estimate);
    }
    CHECK(contains(fit.notes, "excluded 30 failed record(s)"));
    CHECK(contains(fit.notes, "excluded 50 baseline-kind record(s)"));
    CHECK(contains(fit.notes, "excluded 10 record(s) with non-finite log rms"));
  }
}

TEST_CASE("fit_glm interactions: known aliasing dropped, effects recovered") {
  Eigen::VectorXd beta(7);
  beta << -3.0, -0.5, 0.2, 0.6, -0.4, -0.8, 0.7;
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(6, 6);
  inter(0, 1) = 0.4;   // suds:gmr
  inter(2, 4) = -0.5;  // period_shorter:gait_same
  inter(1, 5) = 0.25;  // gmr:gait_far

  const std::vector<EvalRecord> recs = planted_records(beta, &inter, 0.2, 5, 4);
  const GlmFit fit = fit_glm(recs, GlmKind::first_order_interactions);
  CHECK(fit.kind == GlmKind::first_order_interactions);

  // Exactly the two structurally impossible products disappear: a period
  // cannot be both shorter and equal, a gait not both same and far.
  REQUIRE(fit.dropped.size() == 2);
  CHECK(fit.dropped[0] == "period_shorter:period_equal (identically zero)");
  CHECK(fit.dropped[1] == "gait_same:gait_far (identically zero)");
  CHECK(fit.terms.size() == 7 + 15 - 2);

  const auto within_3se = [&](const std::string& name, double truth) {
    const GlmTerm& t = term_of(fit, name);
    CHECK(std::abs(t.estimate - truth) <= 3.0 * t.se);
  };
  within_3se("suds:gmr", 0.4);
  within_3se("period_shorter:gait_same", -0.5);
  within_3se("gmr:gait_far", 0.25);
  within_3se("suds:period_shorter", 0.0);
  for (int i = 0; i < 6; ++i) within_3se(kMainNames[i], beta(i + 1));

  for (const auto& [name, est] : ols_oracle(recs, true)) {
    CHECK(std::abs(term_estimate(fit, name) - est) <= 1e-10);
  }

  // A main identically absent from the records is dropped, not inverted.
  std::vector<EvalRecord> tls_only;
  for (const EvalRecord& r : recs) {
    if (r.model_kind == ModelKind::tls || r.model_kind == ModelKind::tls_suds) {
      tls_only.push_back(r);
    }
  }
  const GlmFit partial = fit_glm(tls_only, GlmKind::direct);
  CHECK(contains(partial.dropped, "gmr (identically zero)"));
}

TEST_CASE("fit_glm validation and rank errors") {
  Eigen::VectorXd beta(7);
  beta << -3.0, -0.5, 0.2, 0.6, -0.4, -0.8, 0.7;

  // Training only at the top frequency: the model period is never longer
  // than the data period, so shorter + equal adds up to the intercept. That
  // is a genuine rank deficiency beyond the structural zero products.
  std::vector<EvalRecord> degenerate;
  for (const EvalRecord& r : planted_records(beta, nullptr, 0.1, 1, 5)) {
    if (r.train.frequency == 1.0) degenerate.push_back(r);
  }
  REQUIRE(degenerate.size() == 300);
  CHECK_THROWS_AS(fit_glm(degenerate, GlmKind::direct), std::runtime_error);

  // Five records cannot support seven design columns.
  const Condition sp1{"S+", 1.0};
  const Condition sph{"S+", 0.5};
  const Condition smh{"S-", 0.5};
  const Condition o1{"O", 1.0};
  std::vector<EvalRecord> tiny;
  tiny.push_back(make_rec(ModelKind::tls_suds, sp1, sph, 0, 1.0));  // shorter, same gait
  tiny.push_back(make_rec(ModelKind::gmr, sp1, o1, 0, 1.1));        // equal, far
  tiny.push_back(make_rec(ModelKind::gmr_suds, sph, sp1, 0, 1.2));  // longer, same gait
  tiny.push_back(make_rec(ModelKind::tls, sp1, smh, 0, 1.3));       // shorter, near
  tiny.push_back(make_rec(ModelKind::tls, o1, o1, 0, 1.4));         // equal, same gait
  CHECK_THROWS_AS(fit_glm(tiny, GlmKind::direct), std::invalid_argument);

  // Only failed records: nothing usable.
  std::vector<EvalRecord> all_failed;
  for (int i = 0; i < 8; ++i) {
    EvalRecord r = make_rec(ModelKind::tls, sp1, sph, i, 0.0);
    r.failed = true;
    all_failed.push_back(r);
  }
  CHECK_THROWS_AS(fit_glm(all_failed, GlmKind::direct), std::invalid_argument);
}

TEST_CASE("fit_glm interval coverage sits near the nominal level") {
  Eigen::VectorXd beta(7);
  beta << -3.2, -0.8, 0.3, 0.5, -0.6, -1.0, 0.9;

  // Fixed balanced design; only the noise is redrawn per repetition.
  std::vector<EvalRecord> recs = planted_records(beta, nullptr, 0.0, 1, 0);
  std::vector<double> mu(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) mu[i] = recs[i].log_rms;

  std::mt19937_64 rng(99);
  const double sigma = 0.4;
  const int reps = 300;
  int hits = 0;
  int cells = 0;
  for (int rep = 0; rep < reps; ++rep) {
    for (std::size_t i = 0; i < recs.size(); ++i) {
      recs[i].log_rms = mu[i] + sigma * gauss(rng);
    }
    const GlmFit fit = fit_glm(recs, GlmKind::direct);
    const double truth[7] = {beta(0), beta(1), beta(2), beta(3), beta(4), beta(5), beta(6)};
    const char* names[7] = {"intercept",    "suds",      "gmr",     "period_shorter",
                            "period_equal", "gait_same", "gait_far"};
    for (int i = 0; i < 7; ++i) {
      const GlmTerm& t = term_of(fit, names[i]);
      if (t.ci_lo <= truth[i] && truth[i] <= t.ci_hi) ++hits;
      ++cells;
    }
  }
  const double coverage = static_cast<double>(hits) / cells;
  CHECK(coverage >= 0.93);
  CHECK(coverage <= 0.97);
}

TEST_CASE("sample_efficiency_sweep: skips, failures, slopes, reduction to the grid") {
  const Dataset data = synth_dataset();
  const std::vector<ModelKind> models = {ModelKind::phase_only, ModelKind::tls};
  const int n_iter = 3;

  SUBCASE("counts beyond the trials are skipped; short counts fail the tls kind") {
    const SweepResult sweep =
        sample_efficiency_sweep(data, models, {1, 5, 30, 1000}, n_iter, 42);
    CHECK(contains(sweep.diagnostics, "cycle count 1000 exceeds every trial"));

    // 2 kinds x 4 conditions x 3 feasible counts x 3 iterations.
    REQUIRE(sweep.records.size() == 2 * 4 * 3 * 3);
    REQUIRE(sweep.cells.size() == 2 * 2 * 3);  // kind x frequency x count

    // Cells arrive sorted by model (as passed), frequency, then count.
    std::size_t idx = 0;
    for (std::size_t k = 0; k < models.size(); ++k) {
      for (double f : {0.5, 1.0}) {
        for (int c : {1, 5, 30}) {
          const SweepCell& cell = sweep.cells[idx++];
          CHECK(cell.kind == models[k]);
          CHECK(cell.frequency == f);
          CHECK(cell.cycles == c);
          if (cell.kind == ModelKind::tls && c == 1) {
            CHECK(cell.count == 0);
            CHECK(cell.failed == 2 * n_iter);  // both gaits, every iteration
          } else {
            CHECK(cell.count == 2 * n_iter);
            CHECK(cell.failed == 0);
            CHECK(std::isfinite(cell.median));
            CHECK(cell.q1 <= cell.median);
            CHECK(cell.median <= cell.q3);
          }
        }
      }
    }

    // Records carry the training length actually used.
    for (const EvalRecord& r : sweep.records) {
      CHECK((r.n_cycles == 1.0 || r.n_cycles == 5.0 || r.n_cycles == 30.0));
    }

    // Tail slopes pool the counts >= 5 (two points here).
    REQUIRE(sweep.slopes.size() == 2);
    for (const SweepSlope& s : sweep.slopes) {
      CHECK(s.points == 2);
      CHECK(std::isfinite(s.slope));
    }

    const std::string cells_csv = sweep_csv(sweep);
    CHECK(cells_csv.rfind("model,frequency,cycles,count,failed,median,q1,q3\n", 0) == 0);
    const std::string slope_csv = slopes_csv(sweep);
    CHECK(slope_csv.rfind("model,slope,points\n", 0) == 0);

    // Bit-identical rerun.
    const SweepResult again =
        sample_efficiency_sweep(data, models, {1, 5, 30, 1000}, n_iter, 42);
    CHECK(records_digest(again.records) == records_digest(sweep.records));
  }

  SUBCASE("at thirty cycles the sweep records coincide with the grid diagonal") {
    const SweepResult sweep = sample_efficiency_sweep(data, models, {30}, n_iter, 42);
    const GridResult grid = run_grid(data, models, n_iter, 42);

    std::vector<std::string> diag;
    for (const EvalRecord& r : grid.records) {
      if (r.train == r.test) diag.push_back(record_to_json(r));
    }
    REQUIRE(sweep.records.size() == diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
      CHECK(record_to_json(sweep.records[i]) == diag[i]);
    }

    // With one count below five, no tail remains.
    REQUIRE(sweep.slopes.size() == 2);
    for (const SweepSlope& s : sweep.slopes) {
      CHECK(s.points == 1);
      CHECK(std::isnan(s.slope));
    }
    CHECK(contains(sweep.diagnostics, "fewer than two tail points"));
  }

  SUBCASE("iterations whose training trial is too short are skipped, not failed") {
    Dataset mixed;
    const int lengths[4] = {35, 20, 35, 12};
    for (int t = 0; t < 4; ++t) {
      mixed.trials.push_back(
          synth_trial("S+", 0.5, 20.0, lengths[t], "a" + std::to_string(t), 50 + t));
    }
    for (int t = 0; t < 2; ++t) {
      mixed.trials.push_back(synth_trial("S-", 0.5, 20.0, 35, "b" + std::to_string(t), 60 + t));
    }
    const SweepResult sweep =
        sample_efficiency_sweep(mixed, {ModelKind::phase_only}, {30}, 40, 9);
    // Half the first condition's draws land on trials shorter than 30 cycles.
    CHECK(sweep.records.size() < 80);
    CHECK(sweep.records.size() >= 40);
    CHECK(contains(sweep.diagnostics, "lack that much training data; skipped"));
    REQUIRE(sweep.cells.size() == 1);
    CHECK(sweep.cells[0].count == static_cast<int>(sweep.records.size()));
    CHECK(sweep.cells[0].failed == 0);
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(sample_efficiency_sweep(data, models, {}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_efficiency_sweep(data, models, {0, 5}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_efficiency_sweep(data, models, {50}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_efficiency_sweep(data, models, {5}, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_efficiency_sweep(data, {}, {5}, 2, 1), std::invalid_argument);
  }

  SUBCASE("default counts") {
    const std::vector<int> counts = default_cycle_counts();
    REQUIRE(counts.size() == 14);
    for (int i = 1; i <= 10; ++i) CHECK(counts[static_cast<std::size_t>(i - 1)] == i);
    CHECK(counts[10] == 21);
    CHECK(counts[11] == 30);
    CHECK(counts[12] == 39);
    CHECK(counts[13] == 48);
  }
}

TEST_CASE("record serialization errors") {
  CHECK_THROWS_AS(record_from_json("{"), std::runtime_error);
  CHECK_THROWS_AS(record_from_json("{}"), std::runtime_error);
  CHECK_THROWS_AS(record_from_json("[1,2,3]"), std::runtime_error);
  CHECK_THROWS_AS(load_records_jsonl("/nonexistent/motmap.jsonl"), std::runtime_error);
}

TEST_CASE("simulate_benchmark produces a coherent trial registry") {
  BenchmarkConfig cfg;
  cfg.trials_per_condition = 2;
  cfg.min_cycles = 3;
  cfg.max_cycles = 3;
  cfg.sample_rate = 30.0;
  cfg.seed = 1;
  cfg.validate();

  std::vector<std::string> log;
  PcaModel pca;
  const Dataset data = simulate_benchmark(cfg, &log, &pca);

  REQUIRE(data.trials.size() == 30);
  CHECK(data.conditions() == benchmark_conditions());
  std::set<std::string> ids;
  for (const Trajectory& t : data.trials) {
    CHECK_FALSE(t.samples.empty());
    CHECK(t.n_a() == 2);
    CHECK(t.n_p() == cfg.pca_components);
    CHECK(samples_per_cycle(t) >= 30);
    CHECK(static_cast<int>(t.samples.size()) == 3 * samples_per_cycle(t));
    ids.insert(t.trial_id);
  }
  CHECK(ids.size() == 30);
  for (const Condition& c : benchmark_conditions()) {
    CHECK(data.trials_for(c).size() == 2);
  }
  CHECK_FALSE(log.empty());

  // One shared passive basis: orthonormal columns over the raw passive state.
  CHECK(pca.dim() == 12);
  CHECK(pca.n_components() == cfg.pca_components);
  const Eigen::MatrixXd gram =
      pca.components.transpose() * pca.components -
      Eigen::MatrixXd::Identity(cfg.pca_components, cfg.pca_components);
  CHECK(gram.cwiseAbs().maxCoeff() <= 1e-9);

  // The registry is ready for the protocols: normalization succeeds and a
  // tiny grid pass runs clean end to end.
  const Dataset norm = decimate_to_common_rate(data);
  CHECK(common_samples_per_cycle(norm) == 30);

  EvalOptions opts;
  opts.train_cycles = 2;
  const GridResult grid = run_grid(data, {ModelKind::phase_only}, 2, 3, opts);
  REQUIRE(grid.records.size() == 15 * 15 * 2);
  CHECK(grid.n_failed == 0);
  for (const EvalRecord& r : grid.records) {
    CHECK(std::isfinite(r.rms_error));
    CHECK(r.rms_error > 0.0);
  }

  // Determinism of the simulated registry itself.
  const Dataset data2 = simulate_benchmark(cfg);
  REQUIRE(data2.trials.size() == data.trials.size());
  for (std::size_t i = 0; i < data.trials.size(); ++i) {
    CHECK(data2.trials[i].trial_id == data.trials[i].trial_id);
    REQUIRE(data2.trials[i].samples.size() == data.trials[i].samples.size());
    CHECK(data2.trials[i].samples[7].vb.vx == data.trials[i].samples[7].vb.vx);
    CHECK(data2.trials[i].samples[7].shape.r_p == data.trials[i].samples[7].shape.r_p);
  }

  BenchmarkConfig bad = cfg;
  bad.trials_per_condition = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.min_cycles = 5;  // above max_cycles
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
