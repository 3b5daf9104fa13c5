#include "lsteeg/synth.hpp"

#include "lsteeg/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

namespace lsteeg {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kO1 = 17;
constexpr std::size_t kO2 = 18;

// Gaussian noise shaped to a 1/f^beta power spectrum, scaled to `rms`.
std::vector<double> pink_noise(std::size_t n, double fs, double beta, double rms, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n < 2 || rms == 0.0) return out;
  double* buf = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf, spec, FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, buf, FFTW_ESTIMATE);
  for (std::size_t k = 0; k < n; ++k) buf[k] = rng.normal();
  fftw_execute(fwd);
  spec[0][0] = spec[0][1] = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    const double g = std::pow(f, -beta / 2.0);
    spec[k][0] *= g;
    spec[k][1] *= g;
  }
  fftw_execute(inv);
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) ss += buf[k] * buf[k];
  const double scale = ss > 0.0 ? rms / std::sqrt(ss / static_cast<double>(n)) : 0.0;
  for (std::size_t k = 0; k < n; ++k) out[k] = buf[k] * scale;
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);
  fftw_free(buf);
  fftw_free(spec);
  return out;
}

// Hann-shaped hump of the given length peaking at 1.
double hump(double tau, double duration) {
  if (tau < 0.0 || tau > duration) return 0.0;
  return 0.5 * (1.0 - std::cos(kTwoPi * tau / duration));
}

// Rectangle with raised-cosine edges of `ramp` seconds, height 1.
double smoothed_rect(double tau, double duration, double ramp) {
  if (tau < 0.0 || tau > duration) return 0.0;
  const double edge = std::min(tau, duration - tau);
  if (edge >= ramp) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * edge / ramp));
}

std::vector<std::size_t> nearest_channels(std::size_t center, std::size_t count) {
  const auto& pos = standard_positions();
  std::vector<std::size_t> order(pos.size());
  std::iota(order.begin(), order.end(), 0);
  auto dist = [&](std::size_t j) {
    const double dx = pos[j].x - pos[center].x;
    const double dy = pos[j].y - pos[center].y;
    return dx * dx + dy * dy;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
  order.resize(std::min(count, order.size()));
  return order;
}

// Adds a 20-45 Hz burst to 3-7 neighboring channels.
void add_muscle(Matrix& x, double fs, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.cols());
  const auto len = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(rng.uniform(0.25, 0.5) * fs)));
  const std::size_t start = rng.index(n - len + 1);
  const std::size_t center = rng.index(static_cast<std::size_t>(x.rows()));
  const std::size_t count = 3 + rng.index(5);
  const SosFilter band = butter_bandpass(4, 20.0, std::min(45.0, 0.45 * fs), fs);
  for (std::size_t ch : nearest_channels(center, count)) {
    std::vector<double> noise(len);
    for (double& v : noise) v = rng.normal();
    noise = sosfiltfilt(band, noise);
    // Tukey taper, 20% of the burst on each side.
    const double ramp = 0.2 * static_cast<double>(len);
    double ss = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      noise[k] *= smoothed_rect(static_cast<double>(k), static_cast<double>(len - 1), ramp);
      ss += noise[k] * noise[k];
    }
    const double burst_rms = std::sqrt(ss / static_cast<double>(len));
    const auto seg = x.row(idx(ch)).segment(idx(start), idx(len));
    const double local_rms = std::sqrt(seg.squaredNorm() / static_cast<double>(len));
    const double gain = burst_rms > 0.0 ? rng.uniform(3.0, 8.0) * std::max(local_rms, 1.0) / burst_rms : 0.0;
    for (std::size_t k = 0; k < len; ++k) x(idx(ch), idx(start + k)) += gain * noise[k];
  }
}

// Step offset of 200-1000 uV on 1-2 channels.
void add_jump(Matrix& x, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.cols());
  const std::size_t n_ch = 1 + rng.index(2);
  std::set<std::size_t> chans;
  while (chans.size() < n_ch) chans.insert(rng.index(static_cast<std::size_t>(x.rows())));
  for (std::size_t ch : chans) {
    const double amp = rng.uniform(200.0, 1000.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const std::size_t onset = n / 10 + rng.index(std::max<std::size_t>(1, 8 * n / 10));
    x.row(idx(ch)).tail(idx(n - onset)).array() += amp;
  }
}

// One blink propagated by the EOG contamination model.
void add_blink(Matrix& x, double fs, const EogCoefficients& coeffs, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.cols());
  const double duration = rng.uniform(0.2, 0.4);
  const double amp = rng.uniform(100.0, 400.0);
  const double span_s = static_cast<double>(n) / fs;
  const double onset = rng.uniform(0.0, std::max(0.0, span_s - duration));
  std::vector<double> veog(n), heog(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) veog[k] = amp * hump(static_cast<double>(k) / fs - onset, duration);
  Recording rec;
  rec.sample_rate = fs;
  rec.data = x;
  x = contaminate_eog(rec, veog, heog, coeffs).data;
}

} // namespace

void SyntheticSpec::validate() const {
  require(n_subjects >= 1, ErrorClass::config, "SyntheticSpec: n_subjects must be >= 1");
  require(seconds_per_subject > 0.0 && sample_rate > 90.0, ErrorClass::config,
          "SyntheticSpec: need positive duration and a sample rate above 90 Hz (45 Hz band edge)");
  for (const auto& a : band_amplitude) {
    require(a.lo >= 0.0 && a.hi >= a.lo, ErrorClass::config, "SyntheticSpec: amplitudes must be >= 0 and ordered");
  }
  require(pink_rms >= 0.0 && max_mixing >= 0.0, ErrorClass::config, "SyntheticSpec: negative noise or mixing");
  require(blink_rate >= 0.0 && saccade_rate >= 0.0 && muscle_rate >= 0.0 && jump_rate >= 0.0, ErrorClass::config,
          "SyntheticSpec: artifact rates must be >= 0");
  require(target_residual >= 0.0 && target_residual < 1.0, ErrorClass::config,
          "SyntheticSpec: target_residual must lie in [0, 1)");
}

EogCoefficients default_eog_coefficients() {
  EogCoefficients c{Vector(19), Vector(19)};
  const auto& pos = standard_positions();
  for (std::size_t j = 0; j < 19; ++j) {
    const double decay = std::exp(-static_cast<double>(kChannelRows[j]) / 1.5);
    const double side = pos[j].x < 0.0 ? 1.0 : (pos[j].x > 0.0 ? -1.0 : 0.0);
    c.a[idx(j)] = 0.8 * decay;
    c.b[idx(j)] = 0.4 * decay * side;
  }
  return c;
}

// ---------------------------------------------------------------- enums

std::string_view to_string(Label l) { return l == Label::clean ? "clean" : "noisy"; }

std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::none: return "none";
    case ArtifactKind::muscle: return "muscle";
    case ArtifactKind::jump: return "jump";
    case ArtifactKind::ocular: return "ocular";
  }
  return "none";
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
    case Partition::unassigned: return "unassigned";
  }
  return "unassigned";
}

Label parse_label(std::string_view s) {
  if (s == "clean") return Label::clean;
  if (s == "noisy") return Label::noisy;
  fail(ErrorClass::format, "unknown label '" + std::string(s) + "'");
}

ArtifactKind parse_artifact_kind(std::string_view s) {
  for (auto k : {ArtifactKind::none, ArtifactKind::muscle, ArtifactKind::jump, ArtifactKind::ocular}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorClass::format, "unknown artifact kind '" + std::string(s) + "'");
}

Partition parse_partition(std::string_view s) {
  for (auto p : {Partition::train, Partition::val, Partition::test, Partition::unassigned}) {
    if (s == to_string(p)) return p;
  }
  fail(ErrorClass::format, "unknown partition '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- dataset

std::vector<std::size_t> EpochDataset::indices(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (partitions[k] == p) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> EpochDataset::indices(Partition p, Label l) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (partitions[k] == p && labels[k] == l) out.push_back(k);
  }
  return out;
}

void EpochDataset::validate() const {
  const std::size_t n = inputs.size();
  require(subjects.size() == n && labels.size() == n && kinds.size() == n && partitions.size() == n,
          ErrorClass::format, "dataset: per-epoch arrays differ in length");
  require(targets.empty() || targets.size() == n, ErrorClass::format, "dataset: target count differs from inputs");
  require(sample_rate > 0.0, ErrorClass::format, "dataset: sample rate must be positive");
  std::map<std::string, Partition> subject_partition;
  for (std::size_t k = 0; k < n; ++k) {
    require(inputs[k].rows() == inputs[0].rows() && inputs[k].cols() == inputs[0].cols(), ErrorClass::dimension,
            "dataset: epoch " + std::to_string(k) + " has a different shape");
    if (!targets.empty()) {
      require(targets[k].rows() == inputs[k].rows() && targets[k].cols() == inputs[k].cols(), ErrorClass::dimension,
              "dataset: target " + std::to_string(k) + " shape differs from its input");
      const bool differs = targets[k] != inputs[k];
      require(differs == (labels[k] == Label::noisy), ErrorClass::format,
              "dataset: epoch " + std::to_string(k) + " label disagrees with its target");
    }
    auto [it, inserted] = subject_partition.emplace(subjects[k], partitions[k]);
    require(inserted || it->second == partitions[k], ErrorClass::format,
            "dataset: subject " + subjects[k] + " spans several partitions");
  }
  if (!channels.empty() && n > 0) {
    require(channels.size() == static_cast<std::size_t>(inputs[0].rows()), ErrorClass::format,
            "dataset: channel label count differs from epoch rows");
  }
}

// ---------------------------------------------------------------- generators

std::vector<Recording> gen_clean(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double fs = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.seconds_per_subject * fs));
  constexpr std::size_t n_ch = kStandardChannels.size();
  const auto& bands = standard_bands();

  Matrix mixing = Matrix::Identity(n_ch, n_ch);
  {
    Rng mix_rng(spec.mixing_seed);
    for (std::size_t r = 0; r < n_ch; ++r) {
      for (std::size_t c = 0; c < n_ch; ++c) {
        if (r != c) mixing(idx(r), idx(c)) = mix_rng.uniform(0.0, spec.max_mixing);
      }
    }
  }

  const Rng root(seed);
  std::vector<Recording> out;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    Rng rng = root.split(s);
    Matrix sources(idx(n_ch), idx(n));
    const double alpha_peak = rng.uniform(9.0, 11.5);
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      std::vector<double> x = pink_noise(n, fs, spec.pink_exponent, spec.pink_rms, rng);
      for (std::size_t b = 0; b < bands.size(); ++b) {
        const bool alpha = b == static_cast<std::size_t>(Band::alpha);
        const double weight = alpha && (ch == kO1 || ch == kO2) ? 2.0 : 1.0;
        for (std::size_t k = 0; k < spec.components_per_band; ++k) {
          const double f = alpha ? std::clamp(alpha_peak + rng.uniform(-1.0, 1.0), bands[b].lo, bands[b].hi)
                                 : rng.uniform(bands[b].lo, bands[b].hi);
          const double amp = weight * rng.uniform(spec.band_amplitude[b].lo, spec.band_amplitude[b].hi);
          const double phase = rng.uniform(0.0, kTwoPi);
          // Slow amplitude modulation (waxing and waning).
          const double mod_f = rng.uniform(0.1, 0.5);
          const double mod_phase = rng.uniform(0.0, kTwoPi);
          for (std::size_t t = 0; t < n; ++t) {
            const double time = static_cast<double>(t) / fs;
            const double envelope = 0.75 + 0.25 * std::sin(kTwoPi * mod_f * time + mod_phase);
            x[t] += amp * envelope * std::sin(kTwoPi * f * time + phase);
          }
        }
      }
      for (std::size_t t = 0; t < n; ++t) sources(idx(ch), idx(t)) = x[t];
    }
    Recording rec;
    char id[16];
    std::snprintf(id, sizeof id, "S%03zu", s + 1);
    rec.subject_id = id;
    rec.sample_rate = fs;
    rec.channels = standard_channel_labels();
    rec.data = mixing * sources;
    out.push_back(bandpass(rec, 1.0, 45.0));
  }
  return out;
}

Recording contaminate_eog(const Recording& rec, std::span<const double> veog, std::span<const double> heog,
                          const EogCoefficients& coeffs) {
  require(veog.size() == rec.n_samples() && heog.size() == rec.n_samples(), ErrorClass::dimension,
          "contaminate_eog: EOG traces must match the recording length");
  require(coeffs.a.size() == idx(rec.n_channels()) && coeffs.b.size() == idx(rec.n_channels()), ErrorClass::dimension,
          "contaminate_eog: one coefficient per channel required");
  Recording out = rec;
  const Eigen::Map<const RowVector> v(veog.data(), idx(veog.size()));
  const Eigen::Map<const RowVector> h(heog.data(), idx(heog.size()));
  for (Index j = 0; j < out.data.rows(); ++j) out.data.row(j) += coeffs.a[j] * v + coeffs.b[j] * h;
  return out;
}

EogTraces gen_eog(std::uint64_t seed, double seconds, double fs, double blink_rate, double saccade_rate) {
  require(seconds >= 0.0 && fs > 0.0, ErrorClass::config, "gen_eog: invalid duration or sample rate");
  require(blink_rate >= 0.0 && saccade_rate >= 0.0, ErrorClass::config, "gen_eog: rates must be >= 0");
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  EogTraces out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, 0};
  const Rng root(seed);

  if (blink_rate > 0.0) {
    Rng rng = root.split(0);
    for (double t = rng.exponential(blink_rate / 60.0); t < seconds; t += rng.exponential(blink_rate / 60.0)) {
      const double duration = rng.uniform(0.2, 0.4);
      const double amp = rng.uniform(100.0, 400.0);
      ++out.n_blinks;
      const auto first = static_cast<std::size_t>(std::ceil(t * fs));
      for (std::size_t k = first; k < n && static_cast<double>(k) / fs <= t + duration; ++k) {
        // Overlapping blinks merge rather than add.
        out.veog[k] = std::max(out.veog[k], amp * hump(static_cast<double>(k) / fs - t, duration));
      }
    }
  }
  if (saccade_rate > 0.0) {
    Rng rng = root.split(1);
    for (double t = rng.exponential(saccade_rate / 60.0); t < seconds; t += rng.exponential(saccade_rate / 60.0)) {
      const double duration = rng.uniform(0.3, 0.8);
      const double amp = rng.uniform(50.0, 150.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      ++out.n_saccades;
      const auto first = static_cast<std::size_t>(std::ceil(t * fs));
      for (std::size_t k = first; k < n && static_cast<double>(k) / fs <= t + duration; ++k) {
        out.heog[k] += amp * smoothed_rect(static_cast<double>(k) / fs - t, duration, 0.03);
      }
    }
  }
  return out;
}

EpochDataset inject_artifacts(const std::vector<Epoch>& epochs, const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  EpochDataset ds;
  ds.sample_rate = spec.sample_rate;
  ds.channels = standard_channel_labels();
  if (epochs.empty()) return ds;
  const double fs = spec.sample_rate;
  const double minutes = static_cast<double>(epochs[0].data.cols()) / fs / 60.0;
  double p_muscle = spec.muscle_rate * minutes;
  double p_jump = spec.jump_rate * minutes;
  double p_ocular = spec.blink_rate * minutes;
  const double total = p_muscle + p_jump + p_ocular;
  if (total > 1.0) {
    p_muscle /= total;
    p_jump /= total;
    p_ocular /= total;
  }
  const EogCoefficients coeffs = default_eog_coefficients();
  const Rng root(seed);

  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const Matrix& clean = epochs[e].data;
    require(clean.rows() == epochs[0].data.rows() && clean.cols() == epochs[0].data.cols(), ErrorClass::dimension,
            "inject_artifacts: epochs differ in shape");
    Rng rng = root.split(e);
    const double u = rng.uniform();
    ArtifactKind kind = ArtifactKind::none;
    if (u < p_muscle) {
      kind = ArtifactKind::muscle;
    } else if (u < p_muscle + p_jump) {
      kind = ArtifactKind::jump;
    } else if (u < p_muscle + p_jump + p_ocular) {
      kind = ArtifactKind::ocular;
    }
    Matrix noisy = clean;
    switch (kind) {
      case ArtifactKind::muscle: add_muscle(noisy, fs, rng); break;
      case ArtifactKind::jump: add_jump(noisy, rng); break;
      case ArtifactKind::ocular:
        require(clean.rows() == 19, ErrorClass::dimension, "inject_artifacts: ocular model needs 19 channels");
        add_blink(noisy, fs, coeffs, rng);
        break;
      case ArtifactKind::none: break;
    }
    const bool injected = noisy != clean;
    ds.inputs.push_back(noisy);
    ds.targets.push_back(injected ? Matrix(clean + spec.target_residual * (noisy - clean)) : clean);
    ds.subjects.push_back(epochs[e].subject_id);
    ds.labels.push_back(injected ? Label::noisy : Label::clean);
    ds.kinds.push_back(injected ? kind : ArtifactKind::none);
    ds.partitions.push_back(Partition::unassigned);
  }
  return ds;
}

void split_by_subject(EpochDataset& ds, std::uint64_t seed, std::array<double, 3> fractions) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  require(fractions[0] >= 0.0 && fractions[1] >= 0.0 && fractions[2] >= 0.0 && std::abs(sum - 1.0) < 1e-9,
          ErrorClass::config, "split_by_subject: fractions must be non-negative and sum to 1");
  const std::set<std::string> uniq(ds.subjects.begin(), ds.subjects.end());
  std::vector<std::string> subjects(uniq.begin(), uniq.end());
  require(subjects.size() >= 5, ErrorClass::config,
          "split_by_subject: need at least 5 subjects to stratify, got " + std::to_string(subjects.size()));

  // Largest-remainder apportionment; ties go to the earlier partition.
  const double n = static_cast<double>(subjects.size());
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double quota = n * fractions[k];
    counts[k] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    rem[k] = quota - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; assigned < subjects.size(); ++k, ++assigned) ++counts[order[k % 3]];

  Rng rng(seed);
  rng.shuffle(subjects);
  std::map<std::string, Partition> assignment;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t c = 0; c < counts[k]; ++c) assignment[subjects[pos++]] = static_cast<Partition>(k);
  }
  for (std::size_t e = 0; e < ds.size(); ++e) ds.partitions[e] = assignment.at(ds.subjects[e]);
}

EpochDataset synthesize_dataset(const SyntheticSpec& spec, std::uint64_t seed, double epoch_seconds,
                                std::array<double, 3> fractions) {
  const Rng root(seed);
  std::vector<Epoch> epochs;
  for (const Recording& rec : gen_clean(spec, root.split(0).next_u64())) {
    for (Epoch& e : epoch_split(rec, epoch_seconds)) epochs.push_back(std::move(e));
  }
  require(!epochs.empty(), ErrorClass::config, "synthesize_dataset: recordings shorter than one epoch");
  EpochDataset ds = inject_artifacts(epochs, spec, root.split(1).next_u64());
  split_by_subject(ds, root.split(2).next_u64(), fractions);
  return ds;
}

} // namespace lsteeg
