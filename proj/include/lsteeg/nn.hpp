#pragma once

// Dense, LSTM, dropout, MSE, Adam and cosine schedule in f64.
//
// Sequences are stored time-major: a batch of B sequences of length T with F
// features is one (T*B) x F matrix whose row t*B + b is item b at step t.
// This lets input projections of every step share one matrix product.

#include "lsteeg/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsteeg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

struct Sequence {
  Matrix data;            // (steps * batch) x features
  std::size_t batch = 1;

  Sequence() = default;
  Sequence(Matrix d, std::size_t b);
  // A single T x F sequence.
  static Sequence single(const Matrix& seq) { return Sequence(seq, 1); }
  static Sequence zeros(std::size_t steps, std::size_t batch, std::size_t features);

  std::size_t steps() const { return batch == 0 ? 0 : static_cast<std::size_t>(data.rows()) / batch; }
  std::size_t features() const { return static_cast<std::size_t>(data.cols()); }
  auto step(std::size_t t) { return data.middleRows(static_cast<Eigen::Index>(t * batch), static_cast<Eigen::Index>(batch)); }
  auto step(std::size_t t) const { return data.middleRows(static_cast<Eigen::Index>(t * batch), static_cast<Eigen::Index>(batch)); }
};

// Throws ErrorClass::numeric when any entry is NaN or infinite.
void check_finite(const Matrix& m, const char* what);

// ---------------------------------------------------------------- dense

struct DenseParams {
  Matrix weight;   // out x in
  RowVector bias;  // out

  std::size_t in_size() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_size() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(weight.size() + bias.size()); }

  // Weight and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
  static DenseParams init(std::size_t in, std::size_t out, Rng& rng);
  static DenseParams zeros(std::size_t in, std::size_t out);
};

struct DenseGrads {
  Matrix d_weight;
  RowVector d_bias;
  Matrix d_input;
};

// x: rows x in -> rows x out
Matrix dense_forward(const DenseParams& p, const Matrix& x);
DenseGrads dense_backward(const DenseParams& p, const Matrix& x, const Matrix& grad_out);

// ---------------------------------------------------------------- LSTM
//
// Standard forget-gate cell, no peepholes:
//   z = W [x_t ; h_{t-1}] + b            (W is 4H x (I+H))
//   i = sigma(z_i)  f = sigma(z_f)  g = tanh(z_g)  o = sigma(z_o)
//   c_t = f * c_{t-1} + i * g
//   h_t = o * tanh(c_t)
// Gate blocks of W and b are stacked in the fixed order [input, forget,
// cell-candidate, output]; columns [0, I) act on x_t, [I, I+H) on h_{t-1}.

enum class Gate : std::size_t { input = 0, forget = 1, cell = 2, output = 3 };

struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Matrix gate_weights;  // 4H x (input_size + H)
  RowVector gate_bias;  // 4H

  std::size_t size() const { return static_cast<std::size_t>(gate_weights.size() + gate_bias.size()); }

  auto input_weights() const { return gate_weights.leftCols(static_cast<Eigen::Index>(input_size)); }
  auto recurrent_weights() const { return gate_weights.rightCols(static_cast<Eigen::Index>(hidden_size)); }

  // Weights ~ U(-1/sqrt(I+H), 1/sqrt(I+H)); bias 0 except forget block = 1.
  static LstmParams init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
};

struct LstmCache {
  const LstmParams* params = nullptr;
  Sequence input;
  Matrix gates;       // (T*B) x 4H, post-activation [i f g o]
  Matrix cells;       // (T*B) x H
  Matrix tanh_cells;  // (T*B) x H
  Sequence hidden;    // (T*B) x H; also the layer output
  Matrix h0, c0;      // B x H
};

struct LstmResult {
  Sequence outputs;
  LstmCache cache;
};

struct LstmGrads {
  Matrix d_gate_weights;
  RowVector d_gate_bias;
  Sequence d_input;
  Matrix d_h0, d_c0;
};

LstmResult lstm_forward(const LstmParams& p, const Sequence& seq, const Matrix& h0, const Matrix& c0);
// Zero initial state.
LstmResult lstm_forward(const LstmParams& p, const Sequence& seq);
// Inference only; skips the cache.
Sequence lstm_infer(const LstmParams& p, const Sequence& seq);
LstmGrads lstm_backward(const LstmParams& p, const LstmCache& cache, const Sequence& grad_outputs);

// ---------------------------------------------------------------- dropout
//
// Inverted dropout: kept activations are scaled by 1/(1-p), so eval mode is
// the identity. Passing rng == nullptr selects eval mode.

struct DropoutResult {
  Matrix output;
  Matrix mask;  // empty in eval mode or when p == 0
};

void validate_dropout(double p);
DropoutResult dropout_forward(const Matrix& x, double p, Rng* rng);
Matrix dropout_backward(const Matrix& grad_out, const Matrix& mask);

// ---------------------------------------------------------------- loss

struct MseResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d pred
};

// Mean over all elements of (pred - target)^2.
MseResult mse_loss(const Matrix& pred, const Matrix& target);
double mse(const Matrix& pred, const Matrix& target);

// ---------------------------------------------------------------- Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  // One (m, v) pair per tensor, sized from the given tensor sizes.
  explicit AdamState(std::span<const std::size_t> tensor_sizes, AdamConfig cfg = {});

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  // Bias-corrected update of every tensor; t is incremented once per call.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads, double lr);

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// ---------------------------------------------------------------- schedule

struct CosineSchedule {
  double eta_max = 5e-4;
  double eta_min = 0.0;
  std::uint64_t t_max = 10;
};

// Periodic cosine without restarts multiplier:
//   eta_min + (eta_max - eta_min) * (1 + cos(pi * (t mod 2 T_max) / T_max)) / 2
double cosine_lr(const CosineSchedule& s, std::uint64_t t);

} // namespace lsteeg
