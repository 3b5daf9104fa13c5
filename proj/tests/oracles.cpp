#include "oracles.hpp"

#include "lsteeg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lsteeg::testing {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

// Central difference of `loss` with respect to every entry of `m`, compared
// against `analytic` (same shape).
template <typename M, typename A>
void compare_entries(M& m, const A& analytic, const std::function<double()>& loss, const std::string& name,
                     GradReport& report) {
  for (Index k = 0; k < m.size(); ++k) {
    double& v = m.data()[k];
    const double saved = v;
    v = saved + kFdStep;
    const double up = loss();
    v = saved - kFdStep;
    const double down = loss();
    v = saved;
    const double numeric = (up - down) / (2.0 * kFdStep);
    const double err = grad_rel_err(analytic.data()[k], numeric);
    ++report.entries;
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst = name + "[" + std::to_string(k) + "]";
    }
  }
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); }

double weighted_sum(const Matrix& g, const Matrix& out) { return g.cwiseProduct(out).sum(); }

} // namespace

double grad_rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
  return std::abs(analytic - numeric) / denom;
}

void GradReport::merge(const GradReport& other) {
  entries += other.entries;
  if (other.max_rel_err > max_rel_err || worst.empty()) {
    max_rel_err = other.max_rel_err;
    worst = other.worst;
  }
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(idx(rows), idx(cols));
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = scale * rng.normal();
  return m;
}

GradReport check_dense_gradients(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = draw(rng, 1, 6), out = draw(rng, 1, 6), batch = draw(rng, 1, 4);
  DenseParams p = DenseParams::init(in, out, rng);
  p.bias = random_matrix(rng, 1, out, 0.5);
  Matrix x = random_matrix(rng, batch, in);
  const Matrix g = random_matrix(rng, batch, out);
  const DenseGrads grads = dense_backward(p, x, g);
  auto loss = [&] { return weighted_sum(g, dense_forward(p, x)); };
  const std::string tag = "dense(seed " + std::to_string(seed) + ").";
  GradReport r;
  compare_entries(p.weight, grads.d_weight, loss, tag + "weight", r);
  compare_entries(p.bias, grads.d_bias, loss, tag + "bias", r);
  compare_entries(x, grads.d_input, loss, tag + "input", r);
  return r;
}

GradReport check_lstm_gradients(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = draw(rng, 1, 4), hidden = draw(rng, 1, 4), steps = draw(rng, 1, 5),
                    batch = draw(rng, 1, 3);
  LstmParams p = LstmParams::init(in, hidden, rng);
  Sequence seq(random_matrix(rng, steps * batch, in), batch);
  Matrix h0 = random_matrix(rng, batch, hidden, 0.5);
  Matrix c0 = random_matrix(rng, batch, hidden, 0.5);
  const Matrix g = random_matrix(rng, steps * batch, hidden);
  const LstmResult fwd = lstm_forward(p, seq, h0, c0);
  const LstmGrads grads = lstm_backward(p, fwd.cache, Sequence(g, batch));
  auto loss = [&] { return weighted_sum(g, lstm_forward(p, seq, h0, c0).outputs.data); };
  const std::string tag = "lstm(seed " + std::to_string(seed) + ").";
  GradReport r;
  compare_entries(p.gate_weights, grads.d_gate_weights, loss, tag + "gate_weights", r);
  compare_entries(p.gate_bias, grads.d_gate_bias, loss, tag + "gate_bias", r);
  compare_entries(seq.data, grads.d_input.data, loss, tag + "input", r);
  compare_entries(h0, grads.d_h0, loss, tag + "h0", r);
  compare_entries(c0, grads.d_c0, loss, tag + "c0", r);
  return r;
}

GradReport check_dropout_gradients(std::uint64_t seed, double p) {
  Rng rng(seed);
  const std::size_t rows = draw(rng, 1, 6), cols = draw(rng, 1, 6);
  Matrix x = random_matrix(rng, rows, cols);
  const Matrix g = random_matrix(rng, rows, cols);
  const std::uint64_t mask_seed = rng.next_u64();
  // The mask depends only on the RNG stream, so re-seeding each evaluation
  // makes the layer a fixed linear map of x.
  auto forward = [&] {
    Rng mask_rng(mask_seed);
    return dropout_forward(x, p, &mask_rng);
  };
  const DropoutResult fwd = forward();
  const Matrix d_input = dropout_backward(g, fwd.mask);
  auto loss = [&] { return weighted_sum(g, forward().output); };
  GradReport r;
  compare_entries(x, d_input, loss, "dropout(seed " + std::to_string(seed) + ").input", r);
  return r;
}

LsteegConfig tiny_model_config() {
  LsteegConfig c;
  c.n_channels = 3;
  c.n_samples = 8;
  c.n_outer = 4;
  c.n_inner = 3;
  c.n_latent = 5;
  c.dropout_p = 0.0;
  return c;
}

GradReport check_model_gradients(std::uint64_t seed, double dropout_p) {
  LsteegConfig cfg = tiny_model_config();
  cfg.dropout_p = dropout_p;
  cfg.rng_seed = seed;
  LsteegModel model = LsteegModel::build(cfg);
  Rng rng(seed ^ 0x5eedULL);
  const std::size_t batch = 2;
  std::vector<Matrix> inputs, targets;
  for (std::size_t k = 0; k < batch; ++k) {
    inputs.push_back(random_matrix(rng, cfg.n_channels, cfg.n_samples));
    targets.push_back(random_matrix(rng, cfg.n_channels, cfg.n_samples));
  }
  const std::uint64_t dropout_seed = rng.next_u64();

  LsteegParams grads = LsteegParams::zeros(cfg);
  {
    Rng drop(dropout_seed);
    model.loss_and_gradient(inputs, targets, dropout_p > 0.0 ? &drop : nullptr, grads);
  }

  // Without dropout the loss is recomputed through the inference path; with
  // dropout the masks must match, so the training forward is reused with a
  // re-seeded generator.
  LsteegParams scratch = LsteegParams::zeros(cfg);
  auto loss = [&]() -> double {
    if (dropout_p == 0.0) {
      const std::vector<Matrix> out = model.forward_batch(inputs);
      double total = 0.0;
      for (std::size_t k = 0; k < batch; ++k) total += (out[k] - targets[k]).squaredNorm();
      return total / static_cast<double>(batch * cfg.n_channels * cfg.n_samples);
    }
    Rng drop(dropout_seed);
    return model.loss_and_gradient(inputs, targets, &drop, scratch);
  };

  const auto names = model.params().shape_table();
  auto params = model.params().tensors();
  const auto grad_tensors = grads.tensors();
  GradReport r;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Eigen::Map<Eigen::ArrayXd> p(params[t].data(), idx(params[t].size()));
    Eigen::Map<const Eigen::ArrayXd> g(grad_tensors[t].data(), idx(grad_tensors[t].size()));
    compare_entries(p, g, loss, "model(seed " + std::to_string(seed) + ")." + names[t].name, r);
  }
  return r;
}

double pairwise_auc(std::span<const double> scores, std::span<const Label> labels) {
  std::uint64_t half_units = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == Label::noisy) {
      ++pos;
    } else {
      ++neg;
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != Label::noisy) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != Label::clean) continue;
      if (scores[i] > scores[j]) half_units += 2;
      if (scores[i] == scores[j]) half_units += 1;
    }
  }
  return static_cast<double>(half_units) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double parseval_ratio(std::span<const double> signal, double fs) {
  const PsdEstimate psd = welch_psd(signal, fs);
  const double df = psd.freqs[1] - psd.freqs[0];
  const double total = psd.power.sum() * df;
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(signal.size());
  double var = 0.0;
  for (double v : signal) var += (v - mean) * (v - mean);
  var /= static_cast<double>(signal.size());
  return total / var;
}

int xcorr_peak_lag(std::span<const double> x, std::span<const double> y, int max_lag) {
  const int n = static_cast<int>(x.size());
  int best_lag = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
      const int s = t + lag;
      if (s >= 0 && s < n) acc += x[static_cast<std::size_t>(t)] * y[static_cast<std::size_t>(s)];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return best_lag;
}

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> sinusoid(double freq, double fs, std::size_t n, double amplitude, double phase) {
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / fs + phase);
  }
  return out;
}

Recording single_channel(std::vector<double> samples, double fs) {
  Recording rec;
  rec.subject_id = "T";
  rec.sample_rate = fs;
  rec.channels = {"Cz"};
  rec.data = Eigen::Map<const Matrix>(samples.data(), 1, idx(samples.size()));
  return rec;
}

CorruptionReport corrupt_each_byte(const std::vector<std::uint8_t>& bytes,
                                   const std::function<void(std::span<const std::uint8_t>)>& load) {
  CorruptionReport r;
  std::vector<std::uint8_t> copy = bytes;
  bool missed = false;
  for (std::size_t k = 0; k < copy.size(); ++k) {
    copy[k] ^= 0xFF;
    ++r.positions;
    try {
      load(copy);
      if (!missed) {
        r.first_missed = k;
        missed = true;
      }
    } catch (const Error&) {
      ++r.detected;
    }
    copy[k] ^= 0xFF;
  }
  return r;
}

EpochDataset tiny_dataset(std::size_t subjects, std::size_t epochs_per_subject, std::size_t samples,
                          std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_subjects = subjects;
  const double epoch_seconds = static_cast<double>(samples) / spec.sample_rate;
  spec.seconds_per_subject = epoch_seconds * static_cast<double>(epochs_per_subject);
  std::vector<Epoch> epochs;
  for (const Recording& rec : gen_clean(spec, seed)) {
    for (Epoch& e : epoch_split(rec, epoch_seconds)) epochs.push_back(std::move(e));
  }
  return inject_artifacts(epochs, spec, seed + 1);
}

} // namespace lsteeg::testing
