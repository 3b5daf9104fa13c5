#pragma once

// Latent-space analysis over encoder outputs f_E(x_e).
//
// Each operation has an overload on precomputed encodings (E x N_LS, one row
// per epoch) so results can be checked without a model, and a model overload
// that encodes in eval mode first.

#include "lsteeg/model.hpp"
#include "lsteeg/signal.hpp"

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace lsteeg {

// f_E of every epoch in eval mode, one row per epoch (E x N_LS).
Matrix encode_epochs(const LsteegModel& model, std::span<const Matrix> epochs);

struct ActivationSummary {
  std::vector<double> cumulative;  // A_j = sum_e |f_E^j(x_e)|
  std::vector<std::size_t> order;  // dimensions by descending A, ties by index
};

ActivationSummary cumulative_activation(const Matrix& encodings);
ActivationSummary cumulative_activation(const LsteegModel& model, std::span<const Matrix> epochs);

// The K most activated dimensions (first K of summary.order).
std::vector<std::size_t> mads(const ActivationSummary& summary, std::size_t k);

// S^j_{b,c} = sum_e P_{b,c,e} f_E^j(x_e)
struct SpectralActivationMap {
  std::size_t n_dims = 0;
  std::size_t n_bands = 0;
  std::size_t n_channels = 0;
  std::vector<Matrix> maps;  // one bands x channels matrix per dimension

  double at(std::size_t j, std::size_t b, std::size_t c) const {
    return maps[j](static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c));
  }
};

// band_powers[e] is the bands x channels relative power of epoch e.
SpectralActivationMap spectral_activation(const Matrix& encodings, std::span<const Matrix> band_powers);
SpectralActivationMap spectral_activation(const LsteegModel& model, std::span<const Matrix> epochs, double fs,
                                          std::span<const BandDef> bands = standard_bands());

// alpha^j = sum_e x_e f_E^j(x_e). For epochs that are not time-locked the
// sum tends to cancel, so near-zero maps are expected on spontaneous EEG.
Matrix temporal_activation(const Matrix& encodings, std::span<const Matrix> epochs, std::size_t j);
Matrix temporal_activation(const LsteegModel& model, std::span<const Matrix> epochs, std::size_t j);

struct Interpolation {
  std::vector<double> lambdas;    // 0, 1/M, ..., 1
  Matrix latents;                 // (M+1) x N_LS
  std::vector<Matrix> decoded;    // f_D of each latent row
};

// z_m = (1 - m/M) f_E(x_a) + (m/M) f_E(x_b) for m = 0..M; the m = 0 entry is
// prepended so both endpoints' reconstructions are included.
Interpolation interpolate(const LsteegModel& model, const Matrix& x_a, const Matrix& x_b, std::size_t steps);

// mse between consecutive decoded epochs (M values).
std::vector<double> interpolation_step_mse(const Interpolation& path);

// Head-shaped scatter of channel values at the standard 10-20 positions.
void write_topomap_svg(std::ostream& out, std::span<const double> channel_values, const std::string& title);

} // namespace lsteeg
