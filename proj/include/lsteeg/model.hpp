#pragma once

#include "lsteeg/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lsteeg {

struct LsteegConfig {
  std::size_t n_channels = 19;   // N_C
  std::size_t n_samples = 400;   // N_T, 2 s at 200 Hz
  std::size_t n_outer = 50;      // N_o
  std::size_t n_inner = 25;      // N_i
  std::size_t n_latent = 500;    // N_LS
  double dropout_p = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const LsteegConfig&) const = default;
};

// Every trainable tensor of the autoencoder. Also used as the gradient
// container, since gradients mirror parameter shapes.
struct LsteegParams {
  LstmParams enc_lstm_outer;  // N_C -> N_o
  LstmParams enc_lstm_inner;  // N_o -> N_i
  DenseParams enc_fc;         // N_i*N_T -> N_LS
  DenseParams dec_fc;         // N_LS -> N_i*N_T
  LstmParams dec_lstm_inner;  // N_i -> N_i
  LstmParams dec_lstm_outer;  // N_i -> N_o
  DenseParams out_fc;         // N_o -> N_C, shared across timesteps

  struct TensorInfo {
    std::string name;
    std::size_t rows;
    std::size_t cols;
  };

  static LsteegParams zeros(const LsteegConfig& cfg);
  static LsteegParams init(const LsteegConfig& cfg, Rng& rng);

  // Fixed order: for each layer above, weight then bias.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<TensorInfo> shape_table() const;
  std::size_t size() const;
  void set_zero();
};

// One N_C x N_T epoch per entry, laid out channels x time.
using EpochBatch = std::span<const Matrix>;

class LsteegModel {
 public:
  static LsteegModel build(const LsteegConfig& cfg);
  LsteegModel(const LsteegConfig& cfg, LsteegParams params);

  const LsteegConfig& config() const { return cfg_; }
  LsteegParams& params() { return params_; }
  const LsteegParams& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Eval mode (no dropout).
  Vector encode(const Matrix& epoch) const;
  Matrix decode(const Vector& z) const;
  Matrix forward(const Matrix& epoch) const;

  // B x N_LS
  Matrix encode_batch(EpochBatch epochs) const;
  std::vector<Matrix> decode_batch(const Matrix& latents) const;
  std::vector<Matrix> forward_batch(EpochBatch epochs) const;

  // MSE between forward(inputs) and targets over the whole batch, and its
  // gradient accumulated (overwritten) into grads. dropout_rng == nullptr
  // runs without dropout.
  double loss_and_gradient(EpochBatch inputs, EpochBatch targets, Rng* dropout_rng, LsteegParams& grads) const;

 private:
  void check_epoch(const Matrix& epoch, const char* what) const;

  LsteegConfig cfg_;
  LsteegParams params_;
};

// ---------------------------------------------------------------- checkpoint
//
// Little-endian layout:
//   "LSTG" | u32 version | u64 N_C, N_T, N_o, N_i, N_LS | f64 dropout_p |
//   u64 rng_seed | u32 tensor count | (u64 rows, u64 cols) per tensor |
//   f64 payload in LsteegParams::tensors() order | u64 FNV-1a of all
//   preceding bytes

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const LsteegModel& model);
LsteegModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const LsteegModel& model, const std::filesystem::path& path);
LsteegModel load_checkpoint(const std::filesystem::path& path);

} // namespace lsteeg
