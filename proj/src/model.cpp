#include "lsteeg/model.hpp"

#include "binary_io.hpp"
#include "lsteeg/errors.hpp"

#include <string>
#include <utility>

namespace lsteeg {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

// epochs (each C x T) -> (T*B) x C
Sequence to_sequence(EpochBatch epochs) {
  const std::size_t batch = epochs.size();
  const Index channels = epochs[0].rows();
  const Index steps = epochs[0].cols();
  Matrix data(steps * idx(batch), channels);
  for (std::size_t b = 0; b < batch; ++b) {
    for (Index t = 0; t < steps; ++t) data.row(t * idx(batch) + idx(b)) = epochs[b].col(t).transpose();
  }
  return Sequence(std::move(data), batch);
}

std::vector<Matrix> from_sequence(const Sequence& seq) {
  std::vector<Matrix> out(seq.batch, Matrix(seq.data.cols(), idx(seq.steps())));
  const Index batch = idx(seq.batch);
  for (std::size_t b = 0; b < seq.batch; ++b) {
    for (Index t = 0; t < idx(seq.steps()); ++t) out[b].col(t) = seq.data.row(t * batch + idx(b)).transpose();
  }
  return out;
}

// (T*B) x F  ->  B x (T*F), column t*F + k
Matrix flatten(const Sequence& seq) {
  const Index batch = idx(seq.batch);
  const Index steps = idx(seq.steps());
  const Index feat = seq.data.cols();
  Matrix flat(batch, steps * feat);
  for (Index t = 0; t < steps; ++t) flat.middleCols(t * feat, feat) = seq.data.middleRows(t * batch, batch);
  return flat;
}

Sequence unflatten(const Matrix& flat, std::size_t steps) {
  const Index batch = flat.rows();
  const Index feat = flat.cols() / idx(steps);
  Matrix data(idx(steps) * batch, feat);
  for (Index t = 0; t < idx(steps); ++t) data.middleRows(t * batch, batch) = flat.middleCols(t * feat, feat);
  return Sequence(std::move(data), static_cast<std::size_t>(batch));
}

void push(std::vector<std::span<double>>& out, Matrix& m) { out.emplace_back(m.data(), static_cast<std::size_t>(m.size())); }
void push(std::vector<std::span<double>>& out, RowVector& v) { out.emplace_back(v.data(), static_cast<std::size_t>(v.size())); }

} // namespace

void LsteegConfig::validate() const {
  require(n_channels >= 1 && n_samples >= 1 && n_outer >= 1 && n_inner >= 1 && n_latent >= 1, ErrorClass::config,
          "LsteegConfig: all dimensions must be >= 1");
  validate_dropout(dropout_p);
}

// ---------------------------------------------------------------- params

LsteegParams LsteegParams::zeros(const LsteegConfig& c) {
  c.validate();
  return LsteegParams{
      LstmParams::zeros(c.n_channels, c.n_outer),
      LstmParams::zeros(c.n_outer, c.n_inner),
      DenseParams::zeros(c.n_inner * c.n_samples, c.n_latent),
      DenseParams::zeros(c.n_latent, c.n_inner * c.n_samples),
      LstmParams::zeros(c.n_inner, c.n_inner),
      LstmParams::zeros(c.n_inner, c.n_outer),
      DenseParams::zeros(c.n_outer, c.n_channels),
  };
}

LsteegParams LsteegParams::init(const LsteegConfig& c, Rng& rng) {
  c.validate();
  // Evaluation order is fixed by the sequenced statements below.
  LsteegParams p;
  p.enc_lstm_outer = LstmParams::init(c.n_channels, c.n_outer, rng);
  p.enc_lstm_inner = LstmParams::init(c.n_outer, c.n_inner, rng);
  p.enc_fc = DenseParams::init(c.n_inner * c.n_samples, c.n_latent, rng);
  p.dec_fc = DenseParams::init(c.n_latent, c.n_inner * c.n_samples, rng);
  p.dec_lstm_inner = LstmParams::init(c.n_inner, c.n_inner, rng);
  p.dec_lstm_outer = LstmParams::init(c.n_inner, c.n_outer, rng);
  p.out_fc = DenseParams::init(c.n_outer, c.n_channels, rng);
  return p;
}

std::vector<std::span<double>> LsteegParams::tensors() {
  std::vector<std::span<double>> t;
  for (LstmParams* l : {&enc_lstm_outer, &enc_lstm_inner}) {
    push(t, l->gate_weights);
    push(t, l->gate_bias);
  }
  for (DenseParams* d : {&enc_fc, &dec_fc}) {
    push(t, d->weight);
    push(t, d->bias);
  }
  for (LstmParams* l : {&dec_lstm_inner, &dec_lstm_outer}) {
    push(t, l->gate_weights);
    push(t, l->gate_bias);
  }
  push(t, out_fc.weight);
  push(t, out_fc.bias);
  return t;
}

std::vector<std::span<const double>> LsteegParams::tensors() const {
  auto mut = const_cast<LsteegParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<LsteegParams::TensorInfo> LsteegParams::shape_table() const {
  std::vector<TensorInfo> out;
  auto add = [&](const std::string& name, const auto& m) {
    out.push_back({name, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  };
  add("enc_lstm_outer.weight", enc_lstm_outer.gate_weights);
  add("enc_lstm_outer.bias", enc_lstm_outer.gate_bias);
  add("enc_lstm_inner.weight", enc_lstm_inner.gate_weights);
  add("enc_lstm_inner.bias", enc_lstm_inner.gate_bias);
  add("enc_fc.weight", enc_fc.weight);
  add("enc_fc.bias", enc_fc.bias);
  add("dec_fc.weight", dec_fc.weight);
  add("dec_fc.bias", dec_fc.bias);
  add("dec_lstm_inner.weight", dec_lstm_inner.gate_weights);
  add("dec_lstm_inner.bias", dec_lstm_inner.gate_bias);
  add("dec_lstm_outer.weight", dec_lstm_outer.gate_weights);
  add("dec_lstm_outer.bias", dec_lstm_outer.gate_bias);
  add("out_fc.weight", out_fc.weight);
  add("out_fc.bias", out_fc.bias);
  return out;
}

std::size_t LsteegParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

void LsteegParams::set_zero() {
  for (auto t : tensors()) std::fill(t.begin(), t.end(), 0.0);
}

// ---------------------------------------------------------------- model

LsteegModel LsteegModel::build(const LsteegConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  return LsteegModel(cfg, LsteegParams::init(cfg, rng));
}

LsteegModel::LsteegModel(const LsteegConfig& cfg, LsteegParams params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const auto expected = LsteegParams::zeros(cfg_).shape_table();
  const auto actual = params_.shape_table();
  for (std::size_t k = 0; k < expected.size(); ++k) {
    require(expected[k].rows == actual[k].rows && expected[k].cols == actual[k].cols, ErrorClass::dimension,
            "LsteegModel: tensor " + expected[k].name + " does not match config");
  }
}

void LsteegModel::check_epoch(const Matrix& epoch, const char* what) const {
  require(epoch.rows() == idx(cfg_.n_channels) && epoch.cols() == idx(cfg_.n_samples), ErrorClass::dimension,
          std::string(what) + ": epoch is " + std::to_string(epoch.rows()) + "x" + std::to_string(epoch.cols()) +
              ", model expects " + std::to_string(cfg_.n_channels) + "x" + std::to_string(cfg_.n_samples));
}

Matrix LsteegModel::encode_batch(EpochBatch epochs) const {
  require(!epochs.empty(), ErrorClass::dimension, "encode: empty batch");
  for (const auto& e : epochs) check_epoch(e, "encode");
  const Sequence x = to_sequence(epochs);
  const Sequence h1 = lstm_infer(params_.enc_lstm_outer, x);
  const Sequence h2 = lstm_infer(params_.enc_lstm_inner, h1);
  return dense_forward(params_.enc_fc, flatten(h2));
}

std::vector<Matrix> LsteegModel::decode_batch(const Matrix& latents) const {
  require(latents.cols() == idx(cfg_.n_latent) && latents.rows() > 0, ErrorClass::dimension,
          "decode: latent batch must be B x " + std::to_string(cfg_.n_latent));
  const Sequence u = unflatten(dense_forward(params_.dec_fc, latents), cfg_.n_samples);
  const Sequence h3 = lstm_infer(params_.dec_lstm_inner, u);
  const Sequence h4 = lstm_infer(params_.dec_lstm_outer, h3);
  return from_sequence(Sequence(dense_forward(params_.out_fc, h4.data), h4.batch));
}

std::vector<Matrix> LsteegModel::forward_batch(EpochBatch epochs) const {
  return decode_batch(encode_batch(epochs));
}

Vector LsteegModel::encode(const Matrix& epoch) const {
  return encode_batch(std::span(&epoch, 1)).row(0).transpose();
}

Matrix LsteegModel::decode(const Vector& z) const {
  return std::move(decode_batch(z.transpose())[0]);
}

Matrix LsteegModel::forward(const Matrix& epoch) const {
  return std::move(forward_batch(std::span(&epoch, 1))[0]);
}

double LsteegModel::loss_and_gradient(EpochBatch inputs, EpochBatch targets, Rng* rng, LsteegParams& grads) const {
  require(!inputs.empty() && inputs.size() == targets.size(), ErrorClass::dimension,
          "loss_and_gradient: inputs and targets must be non-empty and of equal count");
  for (const auto& e : inputs) check_epoch(e, "loss_and_gradient");
  for (const auto& e : targets) check_epoch(e, "loss_and_gradient");
  const double p = cfg_.dropout_p;
  const std::size_t steps = cfg_.n_samples;

  // Forward, keeping every intermediate.
  const Sequence x = to_sequence(inputs);
  const LstmResult l1 = lstm_forward(params_.enc_lstm_outer, x);
  const DropoutResult d1 = dropout_forward(l1.outputs.data, p, rng);
  const LstmResult l2 = lstm_forward(params_.enc_lstm_inner, Sequence(d1.output, x.batch));
  const DropoutResult d2 = dropout_forward(l2.outputs.data, p, rng);
  const Matrix flat = flatten(Sequence(d2.output, x.batch));
  const Matrix z = dense_forward(params_.enc_fc, flat);
  const DropoutResult dz = dropout_forward(z, p, rng);
  const Matrix u = dense_forward(params_.dec_fc, dz.output);
  const DropoutResult du = dropout_forward(u, p, rng);
  const Sequence u_seq = unflatten(du.output, steps);
  const LstmResult l3 = lstm_forward(params_.dec_lstm_inner, u_seq);
  const DropoutResult d3 = dropout_forward(l3.outputs.data, p, rng);
  const LstmResult l4 = lstm_forward(params_.dec_lstm_outer, Sequence(d3.output, x.batch));
  const DropoutResult d4 = dropout_forward(l4.outputs.data, p, rng);
  const Matrix y = dense_forward(params_.out_fc, d4.output);

  const MseResult loss = mse_loss(y, to_sequence(targets).data);
  if (!std::isfinite(loss.loss)) fail(ErrorClass::numeric, "loss_and_gradient: non-finite loss");

  // Backward.
  const DenseGrads g_out = dense_backward(params_.out_fc, d4.output, loss.grad);
  const Sequence g4(dropout_backward(g_out.d_input, d4.mask), x.batch);
  const LstmGrads g_l4 = lstm_backward(params_.dec_lstm_outer, l4.cache, g4);
  const Sequence g3(dropout_backward(g_l4.d_input.data, d3.mask), x.batch);
  const LstmGrads g_l3 = lstm_backward(params_.dec_lstm_inner, l3.cache, g3);
  const Matrix g_u = dropout_backward(flatten(g_l3.d_input), du.mask);
  const DenseGrads g_dec = dense_backward(params_.dec_fc, dz.output, g_u);
  const Matrix g_z = dropout_backward(g_dec.d_input, dz.mask);
  const DenseGrads g_enc = dense_backward(params_.enc_fc, flat, g_z);
  const Sequence g2(dropout_backward(unflatten(g_enc.d_input, steps).data, d2.mask), x.batch);
  const LstmGrads g_l2 = lstm_backward(params_.enc_lstm_inner, l2.cache, g2);
  const Sequence g1(dropout_backward(g_l2.d_input.data, d1.mask), x.batch);
  const LstmGrads g_l1 = lstm_backward(params_.enc_lstm_outer, l1.cache, g1);

  grads.enc_lstm_outer.gate_weights = g_l1.d_gate_weights;
  grads.enc_lstm_outer.gate_bias = g_l1.d_gate_bias;
  grads.enc_lstm_inner.gate_weights = g_l2.d_gate_weights;
  grads.enc_lstm_inner.gate_bias = g_l2.d_gate_bias;
  grads.enc_fc.weight = g_enc.d_weight;
  grads.enc_fc.bias = g_enc.d_bias;
  grads.dec_fc.weight = g_dec.d_weight;
  grads.dec_fc.bias = g_dec.d_bias;
  grads.dec_lstm_inner.gate_weights = g_l3.d_gate_weights;
  grads.dec_lstm_inner.gate_bias = g_l3.d_gate_bias;
  grads.dec_lstm_outer.gate_weights = g_l4.d_gate_weights;
  grads.dec_lstm_outer.gate_bias = g_l4.d_gate_bias;
  grads.out_fc.weight = g_out.d_weight;
  grads.out_fc.bias = g_out.d_bias;
  return loss.loss;
}

// ---------------------------------------------------------------- checkpoint

std::vector<std::uint8_t> serialize_checkpoint(const LsteegModel& model) {
  const LsteegConfig& c = model.config();
  detail::ByteWriter w;
  w.bytes("LSTG");
  w.u32(kCheckpointVersion);
  for (std::size_t v : {c.n_channels, c.n_samples, c.n_outer, c.n_inner, c.n_latent}) w.u64(v);
  w.f64(c.dropout_p);
  w.u64(c.rng_seed);
  const auto table = model.params().shape_table();
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& t : table) {
    w.u64(t.rows);
    w.u64(t.cols);
  }
  for (const auto& t : model.params().tensors()) {
    for (double v : t) w.f64(v);
  }
  w.u64(detail::fnv1a64(w.buffer()));
  return std::move(w.buffer());
}

LsteegModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.bytes(4) != "LSTG") fail(ErrorClass::bad_magic, "checkpoint: bad magic (not an LSTG checkpoint)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorClass::version_mismatch, "checkpoint: version " + std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  LsteegConfig c;
  c.n_channels = r.u64();
  c.n_samples = r.u64();
  c.n_outer = r.u64();
  c.n_inner = r.u64();
  c.n_latent = r.u64();
  c.dropout_p = r.f64();
  c.rng_seed = r.u64();
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  std::uint64_t total = 0;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (cols != 0 && rows > (UINT64_MAX / 8) / cols) fail(ErrorClass::format, "checkpoint: shape overflow");
    shapes.emplace_back(rows, cols);
    total += rows * cols;
  }
  if (total > r.remaining() / 8) fail(ErrorClass::truncated, "checkpoint: file is truncated");
  r.need(total * 8 + 8);
  if (r.remaining() > total * 8 + 8) fail(ErrorClass::format, "checkpoint: trailing bytes after checksum");
  const std::size_t body = bytes.size() - 8;
  detail::ByteReader tail(bytes.subspan(body), "checkpoint");
  if (tail.u64() != detail::fnv1a64(bytes.first(body))) {
    fail(ErrorClass::checksum_mismatch, "checkpoint: checksum mismatch (file corrupted)");
  }

  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorClass::format, std::string("checkpoint: invalid config: ") + e.what());
  }
  LsteegParams params = LsteegParams::zeros(c);
  const auto table = params.shape_table();
  require(table.size() == shapes.size(), ErrorClass::format, "checkpoint: tensor count does not match config");
  for (std::size_t k = 0; k < table.size(); ++k) {
    require(table[k].rows == shapes[k].first && table[k].cols == shapes[k].second, ErrorClass::format,
            "checkpoint: shape of " + table[k].name + " does not match config");
  }
  for (auto t : params.tensors()) {
    for (double& v : t) v = r.f64();
  }
  return LsteegModel(c, std::move(params));
}

void save_checkpoint(const LsteegModel& model, const std::filesystem::path& path) {
  detail::write_file(path, serialize_checkpoint(model));
}

LsteegModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file(path));
}

} // namespace lsteeg
