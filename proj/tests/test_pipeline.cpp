#include "oracles.hpp"

#include "lsteeg/errors.hpp"
#include "lsteeg/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace lsteeg;
using namespace lsteeg::testing;

namespace {

ErrorClass error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  FAIL("expected lsteeg::Error");
  return ErrorClass::format;
}

// 5 subjects x 4 epochs of 0.1 s on 19 channels, split 3/1/1.
EpochDataset small_dataset() {
  EpochDataset ds = tiny_dataset(5, 4, 20, 31);
  split_by_subject(ds, 1);
  return ds;
}

LsteegConfig small_model(std::uint64_t seed = 0) {
  LsteegConfig c;
  c.n_samples = 20;
  c.n_outer = 6;
  c.n_inner = 4;
  c.n_latent = 8;
  c.rng_seed = seed;
  return c;
}

TrainConfig quick_train(std::size_t epochs = 6) {
  TrainConfig t;
  t.max_epochs = epochs;
  t.patience = epochs - 1;
  t.batch_size = 4;
  t.lr = 3e-3;
  t.seed = 4;
  return t;
}

std::vector<Label> random_labels(Rng& rng, std::size_t n) {
  std::vector<Label> labels(n);
  for (auto& l : labels) l = rng.uniform() < 0.5 ? Label::noisy : Label::clean;
  labels[0] = Label::noisy;
  labels[1] = Label::clean;
  return labels;
}

const EpochMap identity = [](const Matrix& x) { return x; };

} // namespace

TEST_CASE("per-epoch scaling round-trips") {
  Rng rng(1);
  Matrix x = random_matrix(rng, 4, 50, 20.0);
  x.row(2).array() += 35.0;
  const EpochScale s = fit_scale(x);
  const Matrix z = apply_scale(x, s);
  CHECK(z.rowwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::sqrt(z.squaredNorm() / static_cast<double>(z.size())) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((invert_scale(z, s) - x).cwiseAbs().maxCoeff() < 1e-12);
  const EpochScale flat = fit_scale(Matrix::Constant(2, 5, 3.0));
  CHECK(flat.scale == 1.0);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.patience = t.max_epochs;
  CHECK(error_of([&] { t.validate(); }) == ErrorClass::config);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK(error_of([&] { t.validate(); }) == ErrorClass::config);
}

TEST_CASE("training is deterministic and restores the best validation weights") {
  const EpochDataset ds = small_dataset();
  const TrainConfig cfg = quick_train();
  const TrainResult a = train(LsteegModel::build(small_model()), ds, cfg);
  const TrainResult b = train(LsteegModel::build(small_model()), ds, cfg);
  CHECK(a.report.train_loss == b.report.train_loss);
  CHECK(a.report.val_loss == b.report.val_loss);
  CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  CHECK(a.report.train_loss.size() <= cfg.max_epochs);
  CHECK(a.report.learning_rate.front() == cfg.lr);

  const double restored = evaluate_loss(a.model, ds, ds.indices(Partition::val), cfg);
  CHECK(restored == doctest::Approx(a.report.best_val_loss).epsilon(1e-12));
  CHECK(a.report.best_val_loss == *std::min_element(a.report.val_loss.begin(), a.report.val_loss.end()));
}

TEST_CASE("patience 0 stops at the first non-improving epoch") {
  const EpochDataset ds = small_dataset();
  TrainConfig cfg = quick_train(40);
  cfg.patience = 0;
  cfg.lr = 2e-2;  // large steps make a non-improving epoch arrive quickly
  const TrainResult r = train(LsteegModel::build(small_model()), ds, cfg);
  const auto& v = r.report.val_loss;
  REQUIRE(r.report.stopped_early);
  for (std::size_t e = 1; e + 1 < v.size(); ++e) CHECK(v[e] < v[e - 1] - cfg.min_delta);
  CHECK(v.back() >= v[v.size() - 2] - cfg.min_delta);
}

TEST_CASE("training rejects empty partitions and mismatched shapes") {
  EpochDataset ds = small_dataset();
  for (auto& p : ds.partitions) p = p == Partition::val ? Partition::test : p;
  CHECK(error_of([&] { train(LsteegModel::build(small_model()), ds, quick_train()); }) == ErrorClass::config);
  LsteegConfig wrong = small_model();
  wrong.n_samples = 21;
  CHECK(error_of([&] { train(LsteegModel::build(wrong), small_dataset(), quick_train()); }) == ErrorClass::dimension);
}

TEST_CASE("detect_scores: identity map scores zero, order does not matter") {
  Rng rng(2);
  std::vector<Matrix> xs;
  for (int k = 0; k < 4; ++k) xs.push_back(random_matrix(rng, 19, 20, 10.0));
  for (double s : detect_scores(identity, xs)) CHECK(s == 0.0);

  const LsteegModel m = LsteegModel::build(small_model(3));
  const auto forward = detect_scores(m, xs);
  std::vector<Matrix> reversed(xs.rbegin(), xs.rend());
  auto backward = detect_scores(m, reversed);
  std::reverse(backward.begin(), backward.end());
  CHECK(forward == backward);
}

TEST_CASE("detect_scores units: normalized equals microvolt score over squared scale") {
  Rng rng(3);
  std::vector<Matrix> xs;
  for (int k = 0; k < 3; ++k) xs.push_back(random_matrix(rng, 19, 20, 5.0 + k));
  const EpochMap halve = [](const Matrix& x) { return Matrix(0.5 * x); };
  const auto uv = detect_scores(halve, xs, ScoreUnits::microvolts);
  const auto norm = detect_scores(halve, xs, ScoreUnits::normalized);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    CHECK(uv[k] == doctest::Approx(mse(0.5 * xs[k], xs[k])).epsilon(1e-12));
    const double scale = fit_scale(xs[k]).scale;
    CHECK(norm[k] == doctest::Approx(uv[k] / (scale * scale)).epsilon(1e-12));
  }
  CHECK(parse_score_units(to_string(ScoreUnits::normalized)) == ScoreUnits::normalized);
  CHECK(error_of([] { parse_score_units("volts"); }) == ErrorClass::config);
}

TEST_CASE("roc_auc: perfect separation, single class, monotone curve") {
  const std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
  const std::vector<Label> labels = {Label::clean, Label::clean, Label::noisy, Label::noisy};
  const RocCurve roc = roc_auc(scores, labels);
  CHECK(roc.auc == 1.0);
  CHECK(roc.points.front().fpr == 0.0);
  CHECK(roc.points.front().tpr == 0.0);
  CHECK(roc.points.back().fpr == 1.0);
  CHECK(roc.points.back().tpr == 1.0);
  for (std::size_t k = 1; k < roc.points.size(); ++k) {
    CHECK(roc.points[k].fpr >= roc.points[k - 1].fpr);
    CHECK(roc.points[k].tpr >= roc.points[k - 1].tpr);
  }
  const std::vector<Label> one_class(4, Label::clean);
  CHECK(error_of([&] { roc_auc(scores, one_class); }) == ErrorClass::undefined_auc);
}

TEST_CASE("roc_auc equals the pairwise oracle exactly, ties included") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const std::size_t n = 2 + rng.index(199);
    const auto labels = random_labels(rng, n);
    std::vector<double> scores(n);
    for (auto& s : scores) s = static_cast<double>(rng.index(seed % 2 == 0 ? 5 : 1000)) * 0.1;
    CHECK(roc_auc(scores, labels).auc == pairwise_auc(scores, labels));
  }
}

TEST_CASE("roc_auc is invariant under strictly monotone transforms") {
  Rng rng(9);
  const auto labels = random_labels(rng, 150);
  std::vector<double> scores(150), transformed(150);
  for (std::size_t k = 0; k < 150; ++k) {
    scores[k] = rng.normal();
    transformed[k] = std::exp(3.0 * scores[k]) + 7.0;
  }
  CHECK(roc_auc(scores, labels).auc == roc_auc(transformed, labels).auc);
}

TEST_CASE("roc_auc of uninformative scores averages 0.5") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    const auto labels = random_labels(rng, 10'000);
    std::vector<double> scores(10'000);
    for (auto& s : scores) s = rng.uniform();
    total += roc_auc(scores, labels).auc;
  }
  CHECK(std::abs(total / 100.0 - 0.5) <= 0.02);
}

TEST_CASE("Youden threshold selection") {
  const std::vector<double> scores = {1, 2, 3, 4};
  const std::vector<Label> labels = {Label::clean, Label::clean, Label::noisy, Label::noisy};
  const ThresholdChoice t = select_threshold(roc_auc(scores, labels));
  CHECK(t.threshold > 2.0);
  CHECK(t.threshold <= 3.0);
  CHECK(t.tpr == 1.0);
  CHECK(t.fpr == 0.0);
  CHECK_FALSE(t.degenerate);

  const std::vector<double> same = {0.4, 0.4, 0.4};
  const std::vector<Label> mixed = {Label::clean, Label::noisy, Label::noisy};
  const ThresholdChoice d = select_threshold(roc_auc(same, mixed));
  CHECK(d.degenerate);
  CHECK(d.threshold == 0.4);
}

TEST_CASE("evaluate_correction closed forms") {
  Rng rng(4);
  std::vector<Matrix> inputs, targets;
  for (int k = 0; k < 5; ++k) {
    targets.push_back(random_matrix(rng, 3, 30, 10.0));
    inputs.push_back(targets.back() + random_matrix(rng, 3, 30, 1.0 + k));
  }
  std::size_t k = 0;
  const EpochMap perfect = [&](const Matrix&) { return targets[k++]; };
  const RmseSummary p = evaluate_correction(perfect, inputs, targets);
  CHECK(p.mean == 0.0);
  CHECK(p.sd == 0.0);

  const RmseSummary clean = evaluate_correction(identity, targets, targets);
  CHECK(clean.mean == 0.0);

  const RmseSummary id = evaluate_correction(identity, inputs, targets);
  double mean = 0.0;
  std::vector<double> direct;
  for (int e = 0; e < 5; ++e) {
    direct.push_back(std::sqrt((inputs[e] - targets[e]).squaredNorm() / 90.0));
    mean += direct.back() / 5.0;
  }
  double var = 0.0;
  for (double d : direct) var += (d - mean) * (d - mean) / 5.0;  // population
  CHECK(id.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(id.sd == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("sweep trains one model per distinct value") {
  const EpochDataset ds = small_dataset();
  const std::vector<std::size_t> values = {4, 2, 4};
  const auto rows = sweep(SweepAxis::n_latent, values, small_model(), ds, quick_train(2));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].value == 4);
  CHECK(rows[1].value == 2);
  CHECK(rows[0].param_count > rows[1].param_count);
  CHECK(rows[0].epochs_run == 2);
  const std::vector<std::size_t> single = {3};
  CHECK(sweep(SweepAxis::n_inner, single, small_model(), ds, quick_train(2)).size() == 1);
  CHECK(parse_sweep_axis(to_string(SweepAxis::n_outer)) == SweepAxis::n_outer);
}
