#pragma once

// Training, anomaly scoring, ROC/AUC, correction metrics and the
// hyperparameter sweep.

#include "lsteeg/model.hpp"
#include "lsteeg/signal.hpp"
#include "lsteeg/synth.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lsteeg {

// ---------------------------------------------------------------- normalization
//
// Per-epoch scaling: every channel has its own mean removed and the whole
// epoch is divided by one scale (the RMS of the centered epoch), so relative
// channel amplitudes survive. Zero-variance epochs keep scale 1.

struct EpochScale {
  Vector channel_means;
  double scale = 1.0;
};

EpochScale fit_scale(const Matrix& epoch);
Matrix apply_scale(const Matrix& epoch, const EpochScale& s);
Matrix invert_scale(const Matrix& normalized, const EpochScale& s);

// ---------------------------------------------------------------- training

enum class TrainMode { detection, correction };

struct TrainConfig {
  std::size_t max_epochs = 1000;
  std::size_t batch_size = 16;
  double lr = 5e-4;
  double lr_min = 0.0;
  std::size_t t_max = 10;
  std::size_t patience = 20;
  double min_delta = 1e-7;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::detection;
  bool normalize = true;
  // Detection mode fits only clean-labeled epochs (the "normal" class).
  bool clean_only = true;

  void validate() const;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // classify noisy when score >= threshold
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) sentinel first, ends at (1,1)
  double auc = 0.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

struct MetricReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> learning_rate;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::optional<double> rmse_mean;
  std::optional<double> rmse_sd;
  std::optional<RocCurve> roc;
  std::optional<AttenuationCurve> attenuation;
};

// Called after each training epoch with (epoch index, train loss, val loss).
using EpochCallback = std::function<void(std::size_t, double, double)>;

struct TrainResult {
  LsteegModel model;
  MetricReport report;
};

// Adam + cosine schedule over the train partition, validation on the val
// partition, best-validation weights restored at exit. Epochs stop once the
// validation loss has failed to improve by more than min_delta for
// `patience` consecutive epochs.
TrainResult train(const LsteegModel& model, const EpochDataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Mean loss over the given dataset entries in eval mode, in the same units
// training uses (normalized when cfg.normalize).
double evaluate_loss(const LsteegModel& model, const EpochDataset& data, const std::vector<std::size_t>& which,
                     const TrainConfig& cfg);

// ---------------------------------------------------------------- detection

// Any epoch -> reconstruction map; lets scoring run on stand-in models.
using EpochMap = std::function<Matrix(const Matrix&)>;

EpochMap model_map(const LsteegModel& model, bool normalize);

// Units of a reconstruction-error score. microvolts: mse(f(x), x) on the
// raw epoch. normalized: the same error divided by the epoch's squared
// scale, i.e. mse after both sides are normalized with x's scale.
enum class ScoreUnits { microvolts, normalized };

std::string_view to_string(ScoreUnits u);
ScoreUnits parse_score_units(std::string_view s);

// score_e = mse(f(x_e), x_e) for a raw -> raw map f, in the given units.
std::vector<double> detect_scores(const EpochMap& f, std::span<const Matrix> epochs,
                                  ScoreUnits units = ScoreUnits::microvolts);
// The model sees normalized epochs when `normalize`; the score units are
// independent of that choice.
std::vector<double> detect_scores(const LsteegModel& model, std::span<const Matrix> epochs, bool normalize = true,
                                  ScoreUnits units = ScoreUnits::microvolts);

// Noisy is the positive class. Throws ErrorClass::undefined_auc unless both
// classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels);

struct ThresholdChoice {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double youden = 0.0;
  bool degenerate = false;  // all scores equal, or no threshold beats chance
};

// Youden's J = TPR - FPR, maximized over the curve's thresholds; ties go to
// the lower FPR.
ThresholdChoice select_threshold(const RocCurve& roc);

// ---------------------------------------------------------------- correction

struct RmseSummary {
  double mean = 0.0;
  double sd = 0.0;  // population SD
  std::vector<double> per_epoch;
};

// rmse(f(input), target) per pair, in microvolts.
RmseSummary evaluate_correction(const EpochMap& f, std::span<const Matrix> inputs, std::span<const Matrix> targets);
RmseSummary evaluate_correction(const LsteegModel& model, std::span<const Matrix> inputs,
                                std::span<const Matrix> targets, bool normalize = true);

// ---------------------------------------------------------------- sweep

enum class SweepAxis { n_latent, n_outer, n_inner };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view s);

struct SweepRow {
  std::size_t value = 0;
  double test_mse = 0.0;
  std::size_t epochs_run = 0;
  std::size_t param_count = 0;
};

// One model per distinct value (first-occurrence order), each built and
// trained with identical seeds and budget. Test MSE is the mean detection
// score on the test partition (clean epochs when cfg.clean_only).
std::vector<SweepRow> sweep(SweepAxis axis, std::span<const std::size_t> values, const LsteegConfig& base,
                            const EpochDataset& data, const TrainConfig& cfg);

} // namespace lsteeg
