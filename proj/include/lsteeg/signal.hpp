#pragma once

#include "lsteeg/nn.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsteeg {

// The 19-channel 10-20 montage, in storage order.
inline constexpr std::array<std::string_view, 19> kStandardChannels = {
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz",
    "C4",  "T4",  "T5", "P3", "Pz", "P4", "T6", "O1", "O2"};

std::vector<std::string> standard_channel_labels();

// Electrode row of each standard channel, 0 = Fp line .. 4 = O line.
inline constexpr std::array<int, 19> kChannelRows = {0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4};

struct ScalpPoint {
  double x;  // left (-1) to right (+1)
  double y;  // back (-1) to front (+1)
};

// Flat 2-D head coordinates for the standard channels, for topomaps and
// neighbor lookup.
const std::array<ScalpPoint, 19>& standard_positions();

struct Recording {
  std::string subject_id;
  double sample_rate = 200.0;          // Hz
  std::vector<std::string> channels;   // unique labels
  Matrix data;                         // channels x samples, microvolts

  std::size_t n_channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(data.cols()); }
  double seconds() const { return static_cast<double>(n_samples()) / sample_rate; }
};

struct Epoch {
  std::string subject_id;
  Matrix data;  // channels x samples
};

struct BandDef {
  std::string name;
  double lo = 0.0;  // Hz
  double hi = 0.0;  // Hz
};

// Delta 1-4, Theta 4-8, Alpha 8-13, Beta 13-30, Gamma 30-45 Hz.
const std::vector<BandDef>& standard_bands();
enum class Band : std::size_t { delta = 0, theta = 1, alpha = 2, beta = 3, gamma = 4 };
void validate_bands(std::span<const BandDef> bands, double nyquist);

// ---------------------------------------------------------------- filters

// One biquad, direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

using SosFilter = std::vector<Biquad>;

// Digital Butterworth designs by bilinear transform with prewarping.
SosFilter butter_lowpass(int order, double cutoff_hz, double fs);
SosFilter butter_highpass(int order, double cutoff_hz, double fs);
// High-pass at lo cascaded with low-pass at hi, each of the given order.
SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs);

// Throws ErrorClass::numeric if any section has a pole on/outside the unit circle.
void check_stable(const SosFilter& sos);

// Causal filter from a zero state.
std::vector<double> sosfilt(const SosFilter& sos, std::span<const double> x);
// Zero-phase forward-backward filtering with odd-extension padding and
// steady-state initial conditions.
std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x);

// ---------------------------------------------------------------- recording ops

Recording bandpass(const Recording& rec, double lo_hz = 1.0, double hi_hz = 45.0, int order = 8);
Recording downsample(const Recording& rec, double target_hz = 200.0);
std::vector<Epoch> epoch_split(const Recording& rec, double seconds = 2.0);

// ---------------------------------------------------------------- spectra

struct WelchOptions {
  std::size_t segment = 256;
  double overlap = 0.5;
};

struct PsdEstimate {
  std::vector<double> freqs;  // Hz, 0 .. Nyquist
  Matrix power;               // channels x freqs, uV^2/Hz (one-sided)
};

// Hann-windowed, mean-detrended, one-sided density; segments shorter than
// `segment` samples use one window over the whole signal, zero-padded to
// `segment` FFT points.
PsdEstimate welch_psd(const Matrix& signals, double fs, const WelchOptions& opt = {});
PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& opt = {});

// Integral of the PSD over [lo, hi) by the rectangle rule on the bin grid.
double band_power(std::span<const double> freqs, std::span<const double> psd, double lo, double hi);

// bands x channels; each column sums to 1. All-zero channels get a uniform
// 1/n_bands share.
Matrix relative_band_power(const Matrix& epoch, double fs, std::span<const BandDef> bands = standard_bands(),
                           const WelchOptions& opt = {});

// sqrt(mean((a - b)^2)), microvolts.
double rmse(const Matrix& a, const Matrix& b);

struct AttenuationCurve {
  std::vector<double> freqs;
  std::vector<double> db;  // 10 log10(mean PSD_out / mean PSD_in)
};

// Means are taken over channels and epochs at each frequency.
AttenuationCurve psd_attenuation(std::span<const Matrix> inputs, std::span<const Matrix> outputs, double fs,
                                 const WelchOptions& opt = {});
// Mean dB over bins with lo <= f <= hi.
double mean_attenuation(const AttenuationCurve& curve, double lo, double hi);

} // namespace lsteeg
