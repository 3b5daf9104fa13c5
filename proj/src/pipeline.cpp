#include "lsteeg/pipeline.hpp"

#include "lsteeg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace lsteeg {

namespace {

constexpr std::size_t kEvalBatch = 32;

double square(double v) { return v * v; }

std::vector<std::size_t> select(const EpochDataset& data, Partition p, const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::detection && cfg.clean_only) return data.indices(p, Label::clean);
  return data.indices(p);
}

// Network-space (input, target) pairs for the given entries.
struct PreparedSet {
  std::vector<Matrix> inputs;
  std::vector<Matrix> targets;
};

PreparedSet prepare(const EpochDataset& data, const std::vector<std::size_t>& which, const TrainConfig& cfg) {
  PreparedSet out;
  for (std::size_t k : which) {
    const Matrix& raw = data.inputs[k];
    const Matrix& target = cfg.mode == TrainMode::correction ? data.targets[k] : raw;
    if (cfg.normalize) {
      const EpochScale s = fit_scale(raw);
      out.inputs.push_back(apply_scale(raw, s));
      out.targets.push_back(apply_scale(target, s));
    } else {
      out.inputs.push_back(raw);
      out.targets.push_back(target);
    }
  }
  return out;
}

double mean_loss(const LsteegModel& model, const PreparedSet& set) {
  double total = 0.0;
  for (std::size_t start = 0; start < set.inputs.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, set.inputs.size() - start);
    const auto outputs = model.forward_batch(std::span(set.inputs).subspan(start, n));
    for (std::size_t k = 0; k < n; ++k) total += mse(outputs[k], set.targets[start + k]);
  }
  return total / static_cast<double>(set.inputs.size());
}

} // namespace

// ---------------------------------------------------------------- normalization

EpochScale fit_scale(const Matrix& epoch) {
  require(epoch.size() > 0, ErrorClass::dimension, "fit_scale: empty epoch");
  EpochScale s;
  s.channel_means = epoch.rowwise().mean();
  const double ms = (epoch.colwise() - s.channel_means).squaredNorm() / static_cast<double>(epoch.size());
  s.scale = ms > 0.0 && std::isfinite(ms) ? std::sqrt(ms) : 1.0;
  return s;
}

Matrix apply_scale(const Matrix& epoch, const EpochScale& s) {
  require(s.channel_means.size() == epoch.rows(), ErrorClass::dimension, "apply_scale: channel count mismatch");
  return (epoch.colwise() - s.channel_means) / s.scale;
}

Matrix invert_scale(const Matrix& normalized, const EpochScale& s) {
  require(s.channel_means.size() == normalized.rows(), ErrorClass::dimension, "invert_scale: channel count mismatch");
  return (normalized * s.scale).colwise() + s.channel_means;
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorClass::config, "TrainConfig: batch_size must be >= 1");
  require(max_epochs >= 1, ErrorClass::config, "TrainConfig: max_epochs must be >= 1");
  require(patience < max_epochs, ErrorClass::config, "TrainConfig: patience must be below max_epochs");
  require(lr > 0.0 && lr_min >= 0.0 && lr_min <= lr, ErrorClass::config, "TrainConfig: need 0 <= lr_min <= lr, lr > 0");
  require(t_max >= 1, ErrorClass::config, "TrainConfig: t_max must be >= 1");
  require(min_delta >= 0.0, ErrorClass::config, "TrainConfig: min_delta must be >= 0");
}

double evaluate_loss(const LsteegModel& model, const EpochDataset& data, const std::vector<std::size_t>& which,
                     const TrainConfig& cfg) {
  require(!which.empty(), ErrorClass::config, "evaluate_loss: no epochs selected");
  return mean_loss(model, prepare(data, which, cfg));
}

TrainResult train(const LsteegModel& initial, const EpochDataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  require(cfg.mode == TrainMode::detection || data.has_targets(), ErrorClass::config,
          "train: correction mode needs paired targets");
  require(data.n_channels() == initial.config().n_channels && data.n_samples() == initial.config().n_samples,
          ErrorClass::dimension, "train: dataset epochs do not match the model's N_C x N_T");
  const auto train_idx = select(data, Partition::train, cfg);
  const auto val_idx = select(data, Partition::val, cfg);
  require(!train_idx.empty(), ErrorClass::config, "train: empty training partition");
  require(!val_idx.empty(), ErrorClass::config, "train: empty validation partition");

  const PreparedSet train_set = prepare(data, train_idx, cfg);
  const PreparedSet val_set = prepare(data, val_idx, cfg);

  TrainResult result{initial, {}};
  LsteegModel& model = result.model;
  MetricReport& report = result.report;

  std::vector<std::size_t> sizes;
  for (const auto& t : model.params().tensors()) sizes.push_back(t.size());
  AdamState adam(sizes);
  LsteegParams grads = LsteegParams::zeros(model.config());
  LsteegParams best = model.params();
  const CosineSchedule schedule{cfg.lr, cfg.lr_min, cfg.t_max};
  Rng shuffle_rng(cfg.seed);
  Rng dropout_rng = shuffle_rng.split(1);

  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Matrix> batch_in, batch_out;
  std::size_t wait = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(schedule, epoch);
    shuffle_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_in.clear();
      batch_out.clear();
      for (std::size_t k = 0; k < n; ++k) {
        batch_in.push_back(train_set.inputs[order[start + k]]);
        batch_out.push_back(train_set.targets[order[start + k]]);
      }
      const double loss = model.loss_and_gradient(batch_in, batch_out, &dropout_rng, grads);
      if (!std::isfinite(loss)) {
        fail(ErrorClass::numeric, "train: loss became non-finite at epoch " + std::to_string(epoch));
      }
      total += loss * static_cast<double>(n);
      // The schedule touches zero once per period; that epoch makes no update.
      if (lr > 0.0) {
        const auto params = model.params().tensors();
        const auto g = std::as_const(grads).tensors();
        adam.step(params, g, lr);
      }
    }
    const double train_loss = total / static_cast<double>(order.size());
    const double val_loss = mean_loss(model, val_set);
    if (!std::isfinite(val_loss)) {
      fail(ErrorClass::numeric, "train: validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    report.train_loss.push_back(train_loss);
    report.val_loss.push_back(val_loss);
    report.learning_rate.push_back(lr);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);

    if (val_loss < report.best_val_loss - cfg.min_delta) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best = model.params();
      wait = 0;
    } else if (++wait > cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  model.params() = std::move(best);
  return result;
}

// ---------------------------------------------------------------- detection

EpochMap model_map(const LsteegModel& model, bool normalize) {
  return [&model, normalize](const Matrix& x) -> Matrix {
    if (!normalize) return model.forward(x);
    const EpochScale s = fit_scale(x);
    return invert_scale(model.forward(apply_scale(x, s)), s);
  };
}

std::string_view to_string(ScoreUnits u) {
  return u == ScoreUnits::microvolts ? "microvolts" : "normalized";
}

ScoreUnits parse_score_units(std::string_view s) {
  if (s == "microvolts") return ScoreUnits::microvolts;
  if (s == "normalized") return ScoreUnits::normalized;
  fail(ErrorClass::config, "unknown score units '" + std::string(s) + "' (expected microvolts|normalized)");
}

std::vector<double> detect_scores(const EpochMap& f, std::span<const Matrix> epochs, ScoreUnits units) {
  std::vector<double> scores;
  scores.reserve(epochs.size());
  for (const Matrix& x : epochs) {
    double score = mse(f(x), x);
    if (units == ScoreUnits::normalized) score /= square(fit_scale(x).scale);
    scores.push_back(score);
  }
  return scores;
}

std::vector<double> detect_scores(const LsteegModel& model, std::span<const Matrix> epochs, bool normalize,
                                  ScoreUnits units) {
  std::vector<double> scores;
  scores.reserve(epochs.size());
  std::vector<Matrix> batch;
  std::vector<double> scale2;
  for (std::size_t start = 0; start < epochs.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, epochs.size() - start);
    batch.clear();
    scale2.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Matrix& raw = epochs[start + k];
      const EpochScale s = fit_scale(raw);
      scale2.push_back(square(s.scale));
      batch.push_back(normalize ? apply_scale(raw, s) : raw);
    }
    const auto out = model.forward_batch(batch);
    for (std::size_t k = 0; k < n; ++k) {
      // Centering cancels in the difference, so errors convert by scale^2.
      const double err = mse(out[k], batch[k]);
      const double micro = normalize ? err * scale2[k] : err;
      scores.push_back(units == ScoreUnits::microvolts ? micro : micro / scale2[k]);
    }
  }
  return scores;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  auto positive = [&](std::size_t k) { return labels[k] == Label::noisy; };
  require(scores.size() == labels.size(), ErrorClass::dimension, "roc_auc: scores and labels differ in length");
  RocCurve roc;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    require(!std::isnan(scores[k]), ErrorClass::numeric, "roc_auc: NaN score");
    positive(k) ? ++roc.n_positive : ++roc.n_negative;
  }
  if (roc.n_positive == 0 || roc.n_negative == 0) {
    fail(ErrorClass::undefined_auc, "roc_auc: undefined AUC, labels contain a single class");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double np = static_cast<double>(roc.n_positive);
  const double nn = static_cast<double>(roc.n_negative);
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});
  // Twice the area in units of 1/(P*N), kept integral so the result is exact.
  std::uint64_t area2 = 0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    std::uint64_t tp_new = tp, fp_new = fp;
    for (; k < order.size() && scores[order[k]] == s; ++k) positive(order[k]) ? ++tp_new : ++fp_new;
    area2 += (fp_new - fp) * (tp_new + tp);
    tp = tp_new;
    fp = fp_new;
    roc.points.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np, s, tp, fp});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * np * nn);
  return roc;
}

ThresholdChoice select_threshold(const RocCurve& roc) {
  require(roc.points.size() >= 2 && roc.n_positive > 0 && roc.n_negative > 0, ErrorClass::usage,
          "select_threshold: ROC curve is empty");
  const auto np = static_cast<std::int64_t>(roc.n_positive);
  const auto nn = static_cast<std::int64_t>(roc.n_negative);
  // J * P * N = tp * N - fp * P, compared as integers.
  auto scaled_j = [&](const RocPoint& p) {
    return static_cast<std::int64_t>(p.true_positives) * nn - static_cast<std::int64_t>(p.false_positives) * np;
  };
  std::size_t best = 1;
  std::int64_t best_j = scaled_j(roc.points[1]);
  for (std::size_t k = 2; k < roc.points.size(); ++k) {
    const std::int64_t j = scaled_j(roc.points[k]);
    if (j > best_j) {
      best_j = j;
      best = k;
    }
  }
  const RocPoint& p = roc.points[best];
  ThresholdChoice out;
  out.threshold = p.threshold;
  out.tpr = p.tpr;
  out.fpr = p.fpr;
  out.youden = p.tpr - p.fpr;
  out.degenerate = roc.points.size() == 2 || best_j <= 0;
  return out;
}

// ---------------------------------------------------------------- correction

RmseSummary evaluate_correction(const EpochMap& f, std::span<const Matrix> inputs, std::span<const Matrix> targets) {
  require(!inputs.empty() && inputs.size() == targets.size(), ErrorClass::dimension,
          "evaluate_correction: need equal, non-zero numbers of inputs and targets");
  RmseSummary s;
  for (std::size_t k = 0; k < inputs.size(); ++k) s.per_epoch.push_back(rmse(f(inputs[k]), targets[k]));
  const double n = static_cast<double>(s.per_epoch.size());
  s.mean = std::accumulate(s.per_epoch.begin(), s.per_epoch.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s.per_epoch) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  return s;
}

RmseSummary evaluate_correction(const LsteegModel& model, std::span<const Matrix> inputs,
                                std::span<const Matrix> targets, bool normalize) {
  require(!inputs.empty() && inputs.size() == targets.size(), ErrorClass::dimension,
          "evaluate_correction: need equal, non-zero numbers of inputs and targets");
  // Batched equivalent of evaluate_correction(model_map(model, normalize), ...).
  std::vector<Matrix> corrected;
  std::vector<Matrix> batch;
  std::vector<EpochScale> scales;
  for (std::size_t start = 0; start < inputs.size(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, inputs.size() - start);
    batch.clear();
    scales.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Matrix& raw = inputs[start + k];
      if (normalize) {
        scales.push_back(fit_scale(raw));
        batch.push_back(apply_scale(raw, scales.back()));
      } else {
        batch.push_back(raw);
      }
    }
    auto out = model.forward_batch(batch);
    for (std::size_t k = 0; k < n; ++k) corrected.push_back(normalize ? invert_scale(out[k], scales[k]) : out[k]);
  }
  std::size_t pos = 0;
  return evaluate_correction([&](const Matrix&) { return corrected[pos++]; }, inputs, targets);
}

// ---------------------------------------------------------------- sweep

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::n_latent: return "n_latent";
    case SweepAxis::n_outer: return "n_outer";
    case SweepAxis::n_inner: return "n_inner";
  }
  return "n_latent";
}

SweepAxis parse_sweep_axis(std::string_view s) {
  for (auto a : {SweepAxis::n_latent, SweepAxis::n_outer, SweepAxis::n_inner}) {
    if (s == to_string(a)) return a;
  }
  fail(ErrorClass::config, "sweep: unknown axis '" + std::string(s) + "' (n_latent, n_outer, n_inner)");
}

std::vector<SweepRow> sweep(SweepAxis axis, std::span<const std::size_t> values, const LsteegConfig& base,
                            const EpochDataset& data, const TrainConfig& cfg) {
  require(!values.empty(), ErrorClass::config, "sweep: no values given");
  std::vector<std::size_t> distinct;
  std::set<std::size_t> seen;
  for (std::size_t v : values) {
    if (seen.insert(v).second) distinct.push_back(v);
  }
  const auto test_idx = select(data, Partition::test, cfg);
  require(!test_idx.empty(), ErrorClass::config, "sweep: empty test partition");

  std::vector<SweepRow> rows;
  for (std::size_t v : distinct) {
    LsteegConfig mc = base;
    switch (axis) {
      case SweepAxis::n_latent: mc.n_latent = v; break;
      case SweepAxis::n_outer: mc.n_outer = v; break;
      case SweepAxis::n_inner: mc.n_inner = v; break;
    }
    const TrainResult r = train(LsteegModel::build(mc), data, cfg);
    rows.push_back({v, evaluate_loss(r.model, data, test_idx, cfg), r.report.train_loss.size(), r.model.param_count()});
  }
  return rows;
}

} // namespace lsteeg
