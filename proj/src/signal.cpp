#include "lsteeg/signal.hpp"

#include "lsteeg/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <string>

namespace lsteeg {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

// Quality factor of the k-th conjugate pole pair of an analog Butterworth
// prototype of even order n.
double butter_q(int order, int k) {
  return 1.0 / (2.0 * std::sin(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order)));
}

void check_design(int order, double cutoff_hz, double fs, const char* what) {
  require(order >= 2 && order % 2 == 0, ErrorClass::config, std::string(what) + ": order must be even and >= 2");
  require(fs > 0.0 && cutoff_hz > 0.0 && cutoff_hz < fs / 2.0, ErrorClass::config,
          std::string(what) + ": cutoff " + std::to_string(cutoff_hz) + " Hz must lie in (0, Nyquist=" +
              std::to_string(fs / 2.0) + ")");
}

std::array<double, 2> steady_state(const Biquad& s) {
  const double y = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z2 = s.b2 - s.a2 * y;
  const double z1 = s.b1 - s.a1 * y + z2;
  return {z1, z2};
}

double dc_gain(const Biquad& s) { return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2); }

// Filters in place; initial state per section is zi * x0 when zi is given.
void sosfilt_inplace(const SosFilter& sos, std::vector<double>& x, bool steady_start) {
  if (x.empty()) return;
  double level = x.front();
  for (const Biquad& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_start) {
      const auto zi = steady_state(s);
      z1 = zi[0] * level;
      z2 = zi[1] * level;
      level *= dc_gain(s);
    }
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

Recording apply_per_channel(const Recording& rec, const SosFilter& sos) {
  Recording out = rec;
  std::vector<double> row(rec.n_samples());
  for (Index c = 0; c < rec.data.rows(); ++c) {
    for (Index t = 0; t < rec.data.cols(); ++t) row[static_cast<std::size_t>(t)] = rec.data(c, t);
    const auto y = sosfiltfilt(sos, row);
    for (Index t = 0; t < rec.data.cols(); ++t) out.data(c, t) = y[static_cast<std::size_t>(t)];
  }
  return out;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  return w;
}

// Welch estimator with a reusable FFTW plan.
class WelchEngine {
 public:
  WelchEngine(std::size_t n_samples, double fs, const WelchOptions& opt) : fs_(fs) {
    require(fs > 0.0, ErrorClass::config, "welch_psd: sample rate must be positive");
    require(opt.segment >= 2, ErrorClass::config, "welch_psd: segment must be >= 2 samples");
    require(opt.overlap >= 0.0 && opt.overlap < 1.0, ErrorClass::config, "welch_psd: overlap must lie in [0, 1)");
    require(n_samples >= 2, ErrorClass::dimension, "welch_psd: signal needs at least 2 samples");
    nfft_ = opt.segment;
    seg_ = std::min(opt.segment, n_samples);
    const std::size_t step = std::max<std::size_t>(1, seg_ - static_cast<std::size_t>(std::floor(seg_ * opt.overlap)));
    for (std::size_t s = 0; s + seg_ <= n_samples; s += step) starts_.push_back(s);
    window_ = hann(seg_);
    for (double w : window_) window_energy_ += w * w;
    in_ = fftw_alloc_real(nfft_);
    out_ = fftw_alloc_complex(nfft_ / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(nfft_), in_, out_, FFTW_ESTIMATE);
  }
  ~WelchEngine() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  WelchEngine(const WelchEngine&) = delete;
  WelchEngine& operator=(const WelchEngine&) = delete;

  std::size_t n_freqs() const { return nfft_ / 2 + 1; }

  std::vector<double> freqs() const {
    std::vector<double> f(n_freqs());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(k) * fs_ / static_cast<double>(nfft_);
    return f;
  }

  template <typename Row>
  void estimate(const Row& x, double* psd) {
    const std::size_t nf = n_freqs();
    std::fill(psd, psd + nf, 0.0);
    const double scale = 1.0 / (fs_ * window_energy_ * static_cast<double>(starts_.size()));
    for (std::size_t s : starts_) {
      double mean = 0.0;
      for (std::size_t k = 0; k < seg_; ++k) mean += x[s + k];
      mean /= static_cast<double>(seg_);
      for (std::size_t k = 0; k < seg_; ++k) in_[k] = (x[s + k] - mean) * window_[k];
      for (std::size_t k = seg_; k < nfft_; ++k) in_[k] = 0.0;
      fftw_execute(plan_);
      for (std::size_t k = 0; k < nf; ++k) {
        const double p = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
        const bool unpaired = k == 0 || (nfft_ % 2 == 0 && k == nf - 1);
        psd[k] += p * scale * (unpaired ? 1.0 : 2.0);
      }
    }
  }

 private:
  double fs_;
  std::size_t nfft_ = 0;
  std::size_t seg_ = 0;
  std::vector<std::size_t> starts_;
  std::vector<double> window_;
  double window_energy_ = 0.0;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

} // namespace

std::vector<std::string> standard_channel_labels() {
  return {kStandardChannels.begin(), kStandardChannels.end()};
}

const std::array<ScalpPoint, 19>& standard_positions() {
  static const std::array<ScalpPoint, 19> pos = {{
      {-0.31, 0.95}, {0.31, 0.95},                                         // Fp1 Fp2
      {-0.81, 0.59}, {-0.41, 0.53}, {0.0, 0.5}, {0.41, 0.53}, {0.81, 0.59},  // F7 F3 Fz F4 F8
      {-1.0, 0.0}, {-0.5, 0.0}, {0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0},          // T3 C3 Cz C4 T4
      {-0.81, -0.59}, {-0.41, -0.53}, {0.0, -0.5}, {0.41, -0.53}, {0.81, -0.59},  // T5 P3 Pz P4 T6
      {-0.31, -0.95}, {0.31, -0.95},                                       // O1 O2
  }};
  return pos;
}

const std::vector<BandDef>& standard_bands() {
  static const std::vector<BandDef> bands = {
      {"Delta", 1.0, 4.0}, {"Theta", 4.0, 8.0}, {"Alpha", 8.0, 13.0}, {"Beta", 13.0, 30.0}, {"Gamma", 30.0, 45.0}};
  return bands;
}

void validate_bands(std::span<const BandDef> bands, double nyquist) {
  require(!bands.empty(), ErrorClass::config, "bands: empty band list");
  double prev_hi = 0.0;
  for (const auto& b : bands) {
    require(b.lo > 0.0 && b.lo < b.hi && b.hi <= nyquist, ErrorClass::config,
            "bands: " + b.name + " must satisfy 0 < lo < hi <= Nyquist");
    require(b.lo >= prev_hi, ErrorClass::config, "bands: " + b.name + " overlaps or is out of order");
    prev_hi = b.hi;
  }
}

// ---------------------------------------------------------------- filters

SosFilter butter_lowpass(int order, double cutoff_hz, double fs) {
  check_design(order, cutoff_hz, fs, "butter_lowpass");
  const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
  SosFilter sos;
  for (int p = 0; p < order / 2; ++p) {
    const double q = butter_q(order, p);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    const double b0 = k * k * norm;
    sos.push_back({b0, 2.0 * b0, b0, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm});
  }
  check_stable(sos);
  return sos;
}

SosFilter butter_highpass(int order, double cutoff_hz, double fs) {
  check_design(order, cutoff_hz, fs, "butter_highpass");
  const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
  SosFilter sos;
  for (int p = 0; p < order / 2; ++p) {
    const double q = butter_q(order, p);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    sos.push_back({norm, -2.0 * norm, norm, 2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm});
  }
  check_stable(sos);
  return sos;
}

SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs) {
  require(lo_hz < hi_hz, ErrorClass::config, "butter_bandpass: lo must be below hi");
  SosFilter sos = butter_highpass(order, lo_hz, fs);
  const SosFilter lp = butter_lowpass(order, hi_hz, fs);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

void check_stable(const SosFilter& sos) {
  for (const Biquad& s : sos) {
    // Jury conditions for z^2 + a1 z + a2.
    const bool stable = std::isfinite(s.a1) && std::isfinite(s.a2) && std::abs(s.a2) < 1.0 &&
                        std::abs(s.a1) < 1.0 + s.a2;
    if (!stable) fail(ErrorClass::numeric, "filter: unstable second-order section");
  }
}

std::vector<double> sosfilt(const SosFilter& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  sosfilt_inplace(sos, y, false);
  return y;
}

std::vector<double> sosfiltfilt(const SosFilter& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::size_t pad = 3 * (2 * sos.size() + 1);
  pad = std::min(pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  sosfilt_inplace(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  for (double v : ext) {
    if (!std::isfinite(v)) fail(ErrorClass::numeric, "sosfiltfilt: non-finite output");
  }
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// ---------------------------------------------------------------- recording ops

Recording bandpass(const Recording& rec, double lo_hz, double hi_hz, int order) {
  require(hi_hz < rec.sample_rate / 2.0, ErrorClass::config, "bandpass: hi must be below Nyquist");
  return apply_per_channel(rec, butter_bandpass(order, lo_hz, hi_hz, rec.sample_rate));
}

Recording downsample(const Recording& rec, double target_hz) {
  require(target_hz > 0.0 && rec.sample_rate >= target_hz, ErrorClass::config,
          "downsample: target rate must be positive and not above the source rate");
  const double ratio_f = rec.sample_rate / target_hz;
  const auto ratio = static_cast<std::size_t>(std::llround(ratio_f));
  require(std::abs(ratio_f - static_cast<double>(ratio)) < 1e-9, ErrorClass::config,
          "downsample: source rate " + std::to_string(rec.sample_rate) + " is not an integer multiple of " +
              std::to_string(target_hz));
  if (ratio == 1) return rec;
  const Recording filtered = apply_per_channel(rec, butter_lowpass(8, 0.4 * target_hz, rec.sample_rate));
  Recording out = rec;
  out.sample_rate = target_hz;
  const std::size_t n_out = (rec.n_samples() + ratio - 1) / ratio;
  out.data.resize(filtered.data.rows(), idx(n_out));
  for (std::size_t t = 0; t < n_out; ++t) out.data.col(idx(t)) = filtered.data.col(idx(t * ratio));
  return out;
}

std::vector<Epoch> epoch_split(const Recording& rec, double seconds) {
  require(seconds > 0.0, ErrorClass::config, "epoch_split: epoch length must be positive");
  const auto len = static_cast<std::size_t>(std::llround(seconds * rec.sample_rate));
  require(len > 0, ErrorClass::config, "epoch_split: epoch shorter than one sample");
  std::vector<Epoch> out;
  for (std::size_t s = 0; s + len <= rec.n_samples(); s += len) {
    out.push_back({rec.subject_id, rec.data.middleCols(idx(s), idx(len))});
  }
  return out;
}

// ---------------------------------------------------------------- spectra

PsdEstimate welch_psd(const Matrix& signals, double fs, const WelchOptions& opt) {
  WelchEngine engine(static_cast<std::size_t>(signals.cols()), fs, opt);
  PsdEstimate est;
  est.freqs = engine.freqs();
  est.power.resize(signals.rows(), idx(engine.n_freqs()));
  for (Index c = 0; c < signals.rows(); ++c) engine.estimate(signals.row(c), est.power.row(c).data());
  return est;
}

PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& opt) {
  const Eigen::Map<const Matrix> m(signal.data(), 1, idx(signal.size()));
  return welch_psd(Matrix(m), fs, opt);
}

double band_power(std::span<const double> freqs, std::span<const double> psd, double lo, double hi) {
  require(freqs.size() == psd.size() && freqs.size() >= 2, ErrorClass::dimension, "band_power: bad spectrum");
  const double df = freqs[1] - freqs[0];
  double total = 0.0;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] >= lo && freqs[k] < hi) total += psd[k] * df;
  }
  return total;
}

Matrix relative_band_power(const Matrix& epoch, double fs, std::span<const BandDef> bands, const WelchOptions& opt) {
  validate_bands(bands, fs / 2.0);
  const PsdEstimate psd = welch_psd(epoch, fs, opt);
  const Index nb = idx(bands.size());
  Matrix out(nb, epoch.rows());
  for (Index c = 0; c < epoch.rows(); ++c) {
    const std::span<const double> p(psd.power.row(c).data(), psd.freqs.size());
    double total = 0.0;
    for (Index b = 0; b < nb; ++b) {
      const auto& band = bands[static_cast<std::size_t>(b)];
      out(b, c) = band_power(psd.freqs, p, band.lo, band.hi);
      total += out(b, c);
    }
    if (total > 0.0) {
      out.col(c) /= total;
    } else {
      out.col(c).setConstant(1.0 / static_cast<double>(nb));
    }
  }
  return out;
}

double rmse(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0, ErrorClass::dimension,
          "rmse: shapes differ or are empty");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

AttenuationCurve psd_attenuation(std::span<const Matrix> inputs, std::span<const Matrix> outputs, double fs,
                                 const WelchOptions& opt) {
  require(!inputs.empty() && inputs.size() == outputs.size(), ErrorClass::dimension,
          "psd_attenuation: need equal, non-zero numbers of input and output epochs");
  WelchEngine engine(static_cast<std::size_t>(inputs[0].cols()), fs, opt);
  const std::size_t nf = engine.n_freqs();
  std::vector<double> sum_in(nf, 0.0), sum_out(nf, 0.0), buf(nf);
  for (std::size_t e = 0; e < inputs.size(); ++e) {
    require(inputs[e].rows() == outputs[e].rows() && inputs[e].cols() == outputs[e].cols() &&
                inputs[e].cols() == inputs[0].cols(),
            ErrorClass::dimension, "psd_attenuation: epoch shapes differ");
    for (Index c = 0; c < inputs[e].rows(); ++c) {
      engine.estimate(inputs[e].row(c), buf.data());
      for (std::size_t k = 0; k < nf; ++k) sum_in[k] += buf[k];
      engine.estimate(outputs[e].row(c), buf.data());
      for (std::size_t k = 0; k < nf; ++k) sum_out[k] += buf[k];
    }
  }
  AttenuationCurve curve;
  curve.freqs = engine.freqs();
  curve.db.resize(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    // Equal counts on both sides, so the ratio of sums is the ratio of means.
    if (sum_in[k] == 0.0 && sum_out[k] == 0.0) {
      curve.db[k] = 0.0;
    } else {
      curve.db[k] = 10.0 * std::log10(std::max(sum_out[k], 1e-300) / std::max(sum_in[k], 1e-300));
    }
  }
  return curve;
}

double mean_attenuation(const AttenuationCurve& curve, double lo, double hi) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < curve.freqs.size(); ++k) {
    if (curve.freqs[k] >= lo && curve.freqs[k] <= hi) {
      total += curve.db[k];
      ++n;
    }
  }
  require(n > 0, ErrorClass::config, "mean_attenuation: no bins in range");
  return total / static_cast<double>(n);
}

} // namespace lsteeg
