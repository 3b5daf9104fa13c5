#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the code path it is checking except
// through the public forward functions it differentiates numerically.

#include "lsteeg/model.hpp"
#include "lsteeg/nn.hpp"
#include "lsteeg/pipeline.hpp"
#include "lsteeg/signal.hpp"
#include "lsteeg/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lsteeg::testing {

// ---------------------------------------------------------------- gradients

inline constexpr double kFdStep = 1e-6;
inline constexpr double kGradTolerance = 1e-5;
// Relative error uses max(|analytic|, |numeric|, kGradFloor) as denominator,
// so entries much smaller than the floor are compared absolutely. Central
// differences at step 1e-6 carry ~1e-10 of roundoff on O(1) losses.
inline constexpr double kGradFloor = 1e-4;

double grad_rel_err(double analytic, double numeric);

struct GradReport {
  double max_rel_err = 0.0;
  std::size_t entries = 0;
  std::string worst;  // which tensor/seed produced max_rel_err

  void merge(const GradReport& other);
  bool ok() const { return entries > 0 && max_rel_err < kGradTolerance; }
};

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

// Each check draws shapes and values from `seed`, uses the scalar loss
// L = sum(G .* output) for a random G (mse for the full model), and compares
// every analytic gradient entry against a central difference.
GradReport check_dense_gradients(std::uint64_t seed);
GradReport check_lstm_gradients(std::uint64_t seed);
GradReport check_dropout_gradients(std::uint64_t seed, double p);
GradReport check_model_gradients(std::uint64_t seed, double dropout_p = 0.0);

LsteegConfig tiny_model_config();  // N_C=3, N_T=8, N_o=4, N_i=3, N_LS=5

// ---------------------------------------------------------------- ROC

// P(score_noisy > score_clean) + 0.5 P(tie) over all (noisy, clean) pairs,
// counted in half-units so the single final division matches exactly.
double pairwise_auc(std::span<const double> scores, std::span<const Label> labels);

// ---------------------------------------------------------------- signal

// Total Welch power (sum of PSD times bin width) over the sample variance.
double parseval_ratio(std::span<const double> signal, double fs);
// Lag (in samples) maximizing the cross-correlation of y against x, searched
// over |lag| <= max_lag.
int xcorr_peak_lag(std::span<const double> x, std::span<const double> y, int max_lag);
double rms(std::span<const double> x);
std::vector<double> sinusoid(double freq, double fs, std::size_t n, double amplitude = 1.0, double phase = 0.0);
Recording single_channel(std::vector<double> samples, double fs);

// ---------------------------------------------------------------- persistence

struct CorruptionReport {
  std::size_t positions = 0;   // byte offsets corrupted (one at a time)
  std::size_t detected = 0;    // of those, how many raised lsteeg::Error
  std::size_t first_missed = 0;
};

// Flips every bit of each byte in turn and reports how many corruptions the
// loader rejects.
CorruptionReport corrupt_each_byte(const std::vector<std::uint8_t>& bytes,
                                   const std::function<void(std::span<const std::uint8_t>)>& load);

// ---------------------------------------------------------------- data

// `n` synthetic epochs of `samples` length from one subject per epoch group.
EpochDataset tiny_dataset(std::size_t subjects, std::size_t epochs_per_subject, std::size_t samples,
                          std::uint64_t seed);

} // namespace lsteeg::testing
