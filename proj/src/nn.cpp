#include "lsteeg/nn.hpp"

#include "lsteeg/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lsteeg {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

// tanh via the vectorized exp; Eigen's double tanh is scalar and an order of
// magnitude slower. Saturates cleanly: exp overflow gives +-1.
template <typename Derived>
Matrix tanh(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 - 2.0 / (1.0 + (2.0 * x.array()).exp())).matrix();
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-bound, bound);
}

void fill_uniform(RowVector& v, double bound, Rng& rng) {
  for (Index k = 0; k < v.size(); ++k) v[k] = rng.uniform(-bound, bound);
}

void check_lstm_params(const LstmParams& p) {
  const auto h4 = idx(4 * p.hidden_size);
  require(p.input_size > 0 && p.hidden_size > 0, ErrorClass::config, "lstm: zero-sized layer");
  require(p.gate_weights.rows() == h4 && p.gate_weights.cols() == idx(p.input_size + p.hidden_size) &&
              p.gate_bias.size() == h4,
          ErrorClass::dimension, "lstm: parameter shapes inconsistent with declared sizes");
}

} // namespace

Sequence::Sequence(Matrix d, std::size_t b) : data(std::move(d)), batch(b) {
  require(b > 0 && data.rows() % idx(b) == 0, ErrorClass::dimension,
          "sequence: row count " + std::to_string(data.rows()) + " not a multiple of batch " + std::to_string(b));
}

Sequence Sequence::zeros(std::size_t steps, std::size_t batch, std::size_t features) {
  return Sequence(Matrix::Zero(idx(steps * batch), idx(features)), batch);
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(ErrorClass::numeric, std::string(what) + ": non-finite value");
}

// ---------------------------------------------------------------- dense

DenseParams DenseParams::init(std::size_t in, std::size_t out, Rng& rng) {
  require(in > 0 && out > 0, ErrorClass::config, "dense: zero-sized layer");
  DenseParams p = zeros(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(p.weight, bound, rng);
  fill_uniform(p.bias, bound, rng);
  return p;
}

DenseParams DenseParams::zeros(std::size_t in, std::size_t out) {
  require(in > 0 && out > 0, ErrorClass::config, "dense: zero-sized layer");
  return DenseParams{Matrix::Zero(idx(out), idx(in)), RowVector::Zero(idx(out))};
}

Matrix dense_forward(const DenseParams& p, const Matrix& x) {
  require(x.cols() == p.weight.cols(), ErrorClass::dimension,
          "dense_forward: input has " + std::to_string(x.cols()) + " features, layer expects " +
              std::to_string(p.weight.cols()));
  Matrix y(x.rows(), p.weight.rows());
  y.noalias() = x * p.weight.transpose();
  y.rowwise() += p.bias;
  return y;
}

DenseGrads dense_backward(const DenseParams& p, const Matrix& x, const Matrix& grad_out) {
  require(x.cols() == p.weight.cols() && grad_out.cols() == p.weight.rows() && grad_out.rows() == x.rows(),
          ErrorClass::dimension, "dense_backward: shape mismatch");
  DenseGrads g;
  g.d_weight.noalias() = grad_out.transpose() * x;
  g.d_bias = grad_out.colwise().sum();
  g.d_input.noalias() = grad_out * p.weight;
  return g;
}

// ---------------------------------------------------------------- LSTM

LstmParams LstmParams::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  LstmParams p = zeros(input_size, hidden_size);
  fill_uniform(p.gate_weights, 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size)), rng);
  p.gate_bias.segment(idx(hidden_size), idx(hidden_size)).setOnes();
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  require(input_size > 0 && hidden_size > 0, ErrorClass::config, "lstm: zero-sized layer");
  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.gate_weights = Matrix::Zero(idx(4 * hidden_size), idx(input_size + hidden_size));
  p.gate_bias = RowVector::Zero(idx(4 * hidden_size));
  return p;
}

namespace {

// Runs the recurrence. When cache is non-null every intermediate is stored.
Sequence lstm_run(const LstmParams& p, const Sequence& seq, const Matrix& h0, const Matrix& c0, LstmCache* cache) {
  check_lstm_params(p);
  require(seq.features() == p.input_size, ErrorClass::dimension,
          "lstm_forward: sequence has " + std::to_string(seq.features()) + " features, layer expects " +
              std::to_string(p.input_size));
  const std::size_t steps = seq.steps();
  const std::size_t batch = seq.batch;
  const Index hs = idx(p.hidden_size);
  require(h0.rows() == idx(batch) && h0.cols() == hs && c0.rows() == idx(batch) && c0.cols() == hs,
          ErrorClass::dimension, "lstm_forward: initial state must be batch x hidden");

  Matrix zx(seq.data.rows(), 4 * hs);
  zx.noalias() = seq.data * p.input_weights().transpose();
  zx.rowwise() += p.gate_bias;
  const Matrix wh_t = p.recurrent_weights().transpose();

  Sequence out = Sequence::zeros(steps, batch, p.hidden_size);
  if (cache) {
    cache->params = &p;
    cache->input = seq;
    cache->gates.resize(zx.rows(), 4 * hs);
    cache->cells.resize(zx.rows(), hs);
    cache->tanh_cells.resize(zx.rows(), hs);
    cache->h0 = h0;
    cache->c0 = c0;
  }

  Matrix h = h0;
  Matrix c = c0;
  Matrix z(idx(batch), 4 * hs);
  for (std::size_t t = 0; t < steps; ++t) {
    const Index row = idx(t * batch);
    z = zx.middleRows(row, idx(batch));
    z.noalias() += h * wh_t;
    z.leftCols(2 * hs) = sigmoid(z.leftCols(2 * hs));
    z.middleCols(2 * hs, hs) = tanh(z.middleCols(2 * hs, hs));
    z.rightCols(hs) = sigmoid(z.rightCols(hs));

    c = z.middleCols(hs, hs).cwiseProduct(c) + z.leftCols(hs).cwiseProduct(z.middleCols(2 * hs, hs));
    const Matrix tc = tanh(c);
    h = z.rightCols(hs).cwiseProduct(tc);
    out.step(t) = h;
    if (cache) {
      cache->gates.middleRows(row, idx(batch)) = z;
      cache->cells.middleRows(row, idx(batch)) = c;
      cache->tanh_cells.middleRows(row, idx(batch)) = tc;
    }
  }
  if (cache) cache->hidden = out;
  return out;
}

} // namespace

LstmResult lstm_forward(const LstmParams& p, const Sequence& seq, const Matrix& h0, const Matrix& c0) {
  LstmResult r;
  r.outputs = lstm_run(p, seq, h0, c0, &r.cache);
  return r;
}

LstmResult lstm_forward(const LstmParams& p, const Sequence& seq) {
  const Matrix zero = Matrix::Zero(idx(seq.batch), idx(p.hidden_size));
  return lstm_forward(p, seq, zero, zero);
}

Sequence lstm_infer(const LstmParams& p, const Sequence& seq) {
  const Matrix zero = Matrix::Zero(idx(seq.batch), idx(p.hidden_size));
  return lstm_run(p, seq, zero, zero, nullptr);
}

LstmGrads lstm_backward(const LstmParams& p, const LstmCache& cache, const Sequence& grad_outputs) {
  require(cache.params == &p, ErrorClass::usage, "lstm_backward: cache was produced by a different parameter set");
  check_lstm_params(p);
  const std::size_t steps = cache.input.steps();
  const std::size_t batch = cache.input.batch;
  const Index hs = idx(p.hidden_size);
  const Index b = idx(batch);
  require(cache.gates.rows() == cache.input.data.rows() && cache.gates.cols() == 4 * hs &&
              cache.input.features() == p.input_size && cache.h0.cols() == hs,
          ErrorClass::usage, "lstm_backward: cache does not match parameters");
  require(grad_outputs.batch == batch && grad_outputs.steps() == steps && grad_outputs.features() == p.hidden_size,
          ErrorClass::dimension, "lstm_backward: upstream gradient shape does not match forward outputs");

  const auto wh = p.recurrent_weights();
  Matrix dz(cache.gates.rows(), 4 * hs);
  Matrix dh_next = Matrix::Zero(b, hs);
  Matrix dc_next = Matrix::Zero(b, hs);
  Matrix dh(b, hs), dc(b, hs);

  for (std::size_t tt = steps; tt-- > 0;) {
    const Index row = idx(tt * batch);
    const auto gates = cache.gates.middleRows(row, b).array();
    const auto ig = gates.leftCols(hs);
    const auto fg = gates.middleCols(hs, hs);
    const auto gg = gates.middleCols(2 * hs, hs);
    const auto og = gates.rightCols(hs);
    const auto tc = cache.tanh_cells.middleRows(row, b).array();
    const auto c_prev = tt > 0 ? cache.cells.middleRows(row - b, b) : cache.c0.middleRows(0, b);

    dh = grad_outputs.step(tt) + dh_next;
    dc = dc_next.array() + dh.array() * og * (1.0 - tc.square());

    auto dzt = dz.middleRows(row, b);
    dzt.leftCols(hs) = (dc.array() * gg * ig * (1.0 - ig)).matrix();
    dzt.middleCols(hs, hs) = (dc.array() * c_prev.array() * fg * (1.0 - fg)).matrix();
    dzt.middleCols(2 * hs, hs) = (dc.array() * ig * (1.0 - gg.square())).matrix();
    dzt.rightCols(hs) = (dh.array() * tc * og * (1.0 - og)).matrix();

    dh_next.noalias() = dzt * wh;
    dc_next = (dc.array() * fg).matrix();
  }

  // h_{t-1} for every step, stacked like the input.
  Matrix h_prev(cache.gates.rows(), hs);
  if (steps > 0) {
    h_prev.topRows(b) = cache.h0;
    h_prev.bottomRows(h_prev.rows() - b) = cache.hidden.data.topRows(h_prev.rows() - b);
  }

  LstmGrads g;
  g.d_gate_weights.resize(4 * hs, idx(p.input_size) + hs);
  g.d_gate_weights.leftCols(idx(p.input_size)).noalias() = dz.transpose() * cache.input.data;
  g.d_gate_weights.rightCols(hs).noalias() = dz.transpose() * h_prev;
  g.d_gate_bias = dz.colwise().sum();
  Matrix d_in(dz.rows(), idx(p.input_size));
  d_in.noalias() = dz * p.input_weights();
  g.d_input = Sequence(std::move(d_in), batch);
  g.d_h0 = dh_next;
  g.d_c0 = dc_next;
  return g;
}

// ---------------------------------------------------------------- dropout

void validate_dropout(double p) {
  require(p >= 0.0 && p < 1.0, ErrorClass::config, "dropout: probability must lie in [0, 1), got " + std::to_string(p));
}

DropoutResult dropout_forward(const Matrix& x, double p, Rng* rng) {
  validate_dropout(p);
  if (rng == nullptr || p == 0.0) return {x, Matrix()};
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng->uniform() < p ? 0.0 : keep_scale;
  return {x.cwiseProduct(mask), std::move(mask)};
}

Matrix dropout_backward(const Matrix& grad_out, const Matrix& mask) {
  if (mask.size() == 0) return grad_out;
  require(mask.rows() == grad_out.rows() && mask.cols() == grad_out.cols(), ErrorClass::dimension,
          "dropout_backward: mask shape mismatch");
  return grad_out.cwiseProduct(mask);
}

// ---------------------------------------------------------------- loss

MseResult mse_loss(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorClass::dimension,
          "mse_loss: prediction and target shapes differ");
  require(pred.size() > 0, ErrorClass::dimension, "mse_loss: empty input");
  const double n = static_cast<double>(pred.size());
  Matrix diff = pred - target;
  MseResult r;
  r.loss = diff.squaredNorm() / n;
  r.grad = (2.0 / n) * diff;
  return r;
}

double mse(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorClass::dimension,
          "mse: shapes differ");
  require(pred.size() > 0, ErrorClass::dimension, "mse: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------- Adam

AdamState::AdamState(std::span<const std::size_t> tensor_sizes, AdamConfig cfg) : cfg_(cfg) {
  for (std::size_t n : tensor_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void AdamState::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                     double lr) {
  require(params.size() == m_.size() && grads.size() == m_.size(), ErrorClass::dimension,
          "adam_step: tensor count does not match optimizer state");
  require(lr > 0.0, ErrorClass::config, "adam_step: learning rate must be positive");
  for (std::size_t k = 0; k < m_.size(); ++k) {
    require(params[k].size() == m_[k].size() && grads[k].size() == m_[k].size(), ErrorClass::dimension,
            "adam_step: tensor " + std::to_string(k) + " size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
  using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;
  for (std::size_t k = 0; k < m_.size(); ++k) {
    const Index n = idx(m_[k].size());
    ArrayMap m(m_[k].data(), n);
    ArrayMap v(v_[k].data(), n);
    ConstArrayMap g(grads[k].data(), n);
    ArrayMap theta(params[k].data(), n);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
    theta -= lr * (m / bc1) / ((v / bc2).sqrt() + cfg_.eps);
  }
}

// ---------------------------------------------------------------- schedule

double cosine_lr(const CosineSchedule& s, std::uint64_t t) {
  if (s.t_max == 0) return s.eta_max;
  const double phase = static_cast<double>(t % (2 * s.t_max)) / static_cast<double>(s.t_max);
  return s.eta_min + (s.eta_max - s.eta_min) * (1.0 + std::cos(std::numbers::pi * phase)) / 2.0;
}

} // namespace lsteeg
