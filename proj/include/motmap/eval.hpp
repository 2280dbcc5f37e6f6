#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "motmap/gmr.hpp"
#include "motmap/pca.hpp"
#include "motmap/simulator.hpp"
#include "motmap/tls.hpp"
#include "motmap/trajectory.hpp"

namespace motmap {

/// The five learners the comparison harness knows how to fit.
enum class ModelKind { phase_only, tls, tls_suds, gmr, gmr_suds };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// One cell of the gait x frequency grid a trial was recorded under.
struct Condition {
  std::string gait_id;
  double frequency = 0.0;  ///< [Hz]

  bool operator==(const Condition& other) const = default;
};

/// The full benchmark grid: five gaits along the shape-axis order returned
/// by gait_library() crossed with 1/3, 1/2 and 1 Hz, gait-major.
std::vector<Condition> benchmark_conditions();

/// How the model's training period compares to the period of the data it is
/// asked to predict.
enum class PeriodRelation { model_shorter, model_equal, model_longer };

PeriodRelation period_relation(const Condition& train, const Condition& test);
std::string period_relation_name(PeriodRelation rel);

/// |axis index difference| along the ordered gait axis.
int gait_distance(const Condition& train, const Condition& test);

/// Collapse a gait distance to 0 = same, 1 = near (distance 1),
/// 2 = far (distance >= 2).
int gait_category(int gait_distance);
std::string gait_category_name(int category);

/// One bootstrap evaluation outcome: a model fitted on a training slice and
/// scored on a test slice.
struct EvalRecord {
  ModelKind model_kind = ModelKind::tls;
  Condition train;
  Condition test;
  int iteration = 0;
  double n_cycles = 0.0;   ///< training cycles actually used
  double rms_error = 0.0;  ///< body-x velocity RMS [m/s]; NaN when failed
  double log_rms = 0.0;    ///< natural log of rms_error
  bool freq_same = false;
  int gait_dist = 0;
  PeriodRelation period = PeriodRelation::model_equal;
  bool failed = false;
  std::string note;  ///< failure reason or shortened-slice remark
};

/// In-memory trial registry: every trajectory carries its own gait id,
/// frequency and trial id. Bootstrap protocols require all trials to share
/// one samples-per-cycle (see decimate_to_common_rate).
struct Dataset {
  std::vector<Trajectory> trials;

  /// Indices of the trials recorded under `cond`.
  std::vector<int> trials_for(const Condition& cond) const;
  /// Unique conditions present, sorted gait-major along the gait axis and by
  /// ascending frequency within a gait.
  std::vector<Condition> conditions() const;
};

/// Samples per cycle of one trial (sample_rate / frequency); throws
/// std::invalid_argument when that ratio is not an integer.
int samples_per_cycle(const Trajectory& traj);

/// The shared samples-per-cycle of a normalized dataset; throws when trials
/// disagree.
int common_samples_per_cycle(const Dataset& data);

/// Decimate every trial down to the smallest samples-per-cycle present so
/// slices at different frequencies hold equally many samples per cycle.
/// Throws std::invalid_argument when the ratios are not integer multiples.
Dataset decimate_to_common_rate(const Dataset& data, std::vector<std::string>* log = nullptr);

/// Contiguous sample range [begin, end) of one trial.
struct TrialSlice {
  int trial = -1;
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool operator==(const TrialSlice& other) const = default;
};

/// A matched train/test draw for one bootstrap iteration.
struct Pairing {
  TrialSlice train;
  TrialSlice test;

  bool operator==(const Pairing& other) const = default;
};

/// Draw n_iter train/test slice pairs between two grid conditions.
///
/// Each iteration picks a training trial uniformly from the train condition
/// and a contiguous interval of `cycles` cycles from it (uniform start, no
/// wrapping; trials shorter than the interval contribute their full length,
/// which is logged), then picks the test slice by the same process from the
/// test condition, excluding the training trial when the two conditions
/// coincide so train and test never share a trial.
///
/// The training draw stream depends only on (seed, train condition), so the
/// training slices of iteration m agree across all test conditions and a
/// model fitted once can be scored everywhere. Requires a normalized dataset
/// (common samples per cycle) and at least two trials per condition.
std::vector<Pairing> bootstrap_pairings(const Dataset& data, const Condition& train_cond,
                                        const Condition& test_cond, int n_iter,
                                        std::uint64_t seed, int cycles = 30,
                                        std::vector<std::string>* log = nullptr);

/// Learner hyperparameters and execution options for the protocols.
struct EvalOptions {
  int tls_bins = 24;
  double tls_ridge = 1e-10;
  int gmr_components = 32;
  double gmr_bandwidth = 0.5;
  double gmr_ridge = 1e-6;
  bool gmr_full_em = false;
  int train_cycles = 30;  ///< bootstrap training-interval length [cycles]
  int jobs = 0;           ///< worker threads; 0 = hardware concurrency
  /// Score same-condition cells on the training slice itself instead of the
  /// held-out one (diagnostic mode).
  bool in_sample = false;
};

/// A learner fitted to one training slice, ready to score test samples.
struct FittedEvalModel {
  ModelKind kind = ModelKind::tls;
  PhaseBinnedLinearModel tls;  ///< tls, tls_suds and phase_only kinds
  MixtureModel gmr;            ///< gmr and gmr_suds kinds
};

/// Fit `kind` on a training slice. Mixture size and phase-bin count shrink
/// automatically on short slices (the caps keep the learners' sample-count
/// preconditions satisfiable); fit failures propagate as exceptions.
FittedEvalModel fit_eval_model(ModelKind kind, const Trajectory& train, const EvalOptions& opts,
                               std::uint64_t seed);

/// Predicted body velocity at one test sample. `phase_rate` is the test
/// trajectory's phase advance rate (2*pi*frequency for command phase).
Twist2 predict_eval_model(const FittedEvalModel& model, const Sample& sample, double phase_rate);

/// Phase-binned constant model: per-bin mean body velocity against phase
/// alone, ignoring every shape input.
PhaseBinnedLinearModel phase_only_baseline(const Trajectory& traj, int bins = 24);

/// Root-mean-square error of predicted vs true body-x velocity. Both
/// sequences must be non-empty and equally long.
double rms_error_x(const std::vector<Twist2>& predicted, const std::vector<Twist2>& truth);

/// Every (model, train condition, test condition, iteration) outcome of the
/// bootstrap grid, ordered by model (as passed), train condition, test
/// condition, then iteration, independent of scheduling.
struct GridResult {
  std::vector<EvalRecord> records;
  int n_failed = 0;
  std::vector<std::string> diagnostics;
};

/// Bootstrap grid evaluation: for every model kind and every ordered pair of
/// grid conditions, fit on a training slice and score the paired test slice,
/// n_iter times. Training draws are shared across test conditions (one fit
/// per train condition and iteration) and across model kinds, so comparisons
/// between kinds are paired. Failed fits yield records with `failed` set;
/// they are counted but never silently dropped.
GridResult run_grid(const Dataset& data, const std::vector<ModelKind>& models, int n_iter,
                    std::uint64_t seed, const EvalOptions& opts = {});

/// Box-plot summary of log RMS per (model kind, frequency match, gait
/// category): quartiles plus whiskers at the most extreme points within
/// 1.5 IQR of the quartiles.
struct CategorySummary {
  ModelKind kind = ModelKind::tls;
  bool freq_same = false;
  int gait_cat = 0;
  int count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
};

std::vector<CategorySummary> category_stats(const std::vector<EvalRecord>& records);

/// Linear-interpolation quantile (the spreadsheet convention: index
/// p * (n - 1) into the sorted values). p in [0, 1], values non-empty.
double quantile(std::vector<double> values, double p);

/// Effect-model flavor: main effects only, or with all pairwise products of
/// the main-effect indicators added.
enum class GlmKind { direct, first_order_interactions };

struct GlmTerm {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Ordinary-least-squares fit of log RMS on the model/condition indicators,
/// with Student-t 95% confidence intervals.
struct GlmFit {
  GlmKind kind = GlmKind::direct;
  std::vector<GlmTerm> terms;        ///< sorted by decreasing |estimate|
  std::vector<std::string> dropped;  ///< aliased columns removed from the design
  int n = 0;                         ///< records entering the fit
  int dof = 0;                       ///< n minus retained columns
  double sigma = 0.0;                ///< residual standard error
  std::vector<std::string> notes;    ///< excluded-record counts etc.
};

/// Fit the effect model on grid records. Predictors: suds, gmr, shorter and
/// equal model-vs-data period (longer is the reference), same and far gait
/// (near is the reference), plus an intercept; the interactions flavor adds
/// all pairwise products. Identically zero product columns (mutually
/// exclusive indicators) are dropped and reported; any remaining rank
/// deficiency throws std::runtime_error. Baseline-kind and failed records
/// are excluded (the indicators only describe the four learned kinds).
GlmFit fit_glm(const std::vector<EvalRecord>& records, GlmKind kind);

/// Median/quartile summary of rms error at one training length.
struct SweepCell {
  ModelKind kind = ModelKind::tls;
  double frequency = 0.0;
  int cycles = 0;
  int count = 0;   ///< records entering the summary
  int failed = 0;  ///< failed fits at this cell
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Least-squares slope of log median rms against log cycle count over the
/// tail of the sweep (counts >= 5), pooled across frequencies and gaits.
struct SweepSlope {
  ModelKind kind = ModelKind::tls;
  double slope = 0.0;
  int points = 0;  ///< cycle counts entering the fit
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepSlope> slopes;
  std::vector<EvalRecord> records;
  std::vector<std::string> diagnostics;
};

/// The training lengths the sweep uses by default.
std::vector<int> default_cycle_counts();

/// Sample-efficiency sweep: for every same-condition grid cell, draw the
/// standard bootstrap pairings, truncate the training slice to each
/// requested cycle count, fit every model and score the paired test slice.
/// Counts no trial can supply are skipped and logged; with cycle_counts =
/// {30} (and full-length trials) the records coincide with run_grid's
/// same-condition cells.
SweepResult sample_efficiency_sweep(const Dataset& data, const std::vector<ModelKind>& models,
                                    const std::vector<int>& cycle_counts, int n_iter,
                                    std::uint64_t seed, const EvalOptions& opts = {});

/// Recipe for the built-in benchmark dataset: the full grid, several trials
/// per condition, one shared passive-coordinate basis across all trials.
struct BenchmarkConfig {
  SwimmerParams swimmer = benchmark_swimmer();
  NoiseSpec noise = benchmark_noise();
  double sample_rate = 100.0;  ///< [Hz]
  int trials_per_condition = 4;
  int min_cycles = 10;  ///< shortest trial length [cycles]
  int max_cycles = 30;  ///< longest trial length; trial 0 always gets it
  int pca_components = 4;
  std::uint64_t seed = 0;

  /// Swimmer with softer flippers than the bare defaults so the passive
  /// frame carries a measurable share of the propulsion.
  static SwimmerParams benchmark_swimmer();
  /// Disturbance and measurement noise levels that keep the learnable
  /// (shape-driven) part of the velocity signal well above the marker noise
  /// floor.
  static NoiseSpec benchmark_noise();

  void validate() const;
};

/// Simulate the benchmark dataset. Trial lengths are drawn uniformly between
/// min_cycles and max_cycles (the first trial of each condition always gets
/// max_cycles so every sweep length stays feasible); a single PCA basis is
/// fitted on the pooled passive states and applied to every trial. The basis
/// is returned through `pca_out` when given.
Dataset simulate_benchmark(const BenchmarkConfig& cfg, std::vector<std::string>* log = nullptr,
                           PcaModel* pca_out = nullptr);

/// One compact JSON object (no newline); doubles survive a round trip
/// bit-exactly.
std::string record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const std::string& line);

/// JSON-lines serialization of a record sequence.
void save_records_jsonl(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records_jsonl(const std::string& path);

/// CSV emitters (header row plus one line per entry; shortest round-trip
/// number formatting, so reruns are byte-identical).
std::string category_csv(const std::vector<CategorySummary>& stats);
std::string glm_csv(const GlmFit& fit);
std::string sweep_csv(const SweepResult& sweep);
std::string slopes_csv(const SweepResult& sweep);

}  // namespace motmap
