#pragma once

// Synthetic EEG, EOG and artifact generation; labeled epoch datasets.

#include "lsteeg/nn.hpp"
#include "lsteeg/signal.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lsteeg {

struct AmplitudeRange {
  double lo = 0.0;  // uV
  double hi = 0.0;
};

struct SyntheticSpec {
  std::size_t n_subjects = 10;
  double seconds_per_subject = 60.0;
  double sample_rate = 200.0;
  // Per standard band (Delta..Gamma): amplitude of each oscillatory component.
  std::array<AmplitudeRange, 5> band_amplitude = {{{4.0, 8.0}, {2.0, 5.0}, {6.0, 12.0}, {1.0, 3.0}, {0.5, 1.5}}};
  std::size_t components_per_band = 3;
  double pink_exponent = 1.0;    // 1/f^beta
  double pink_rms = 3.0;         // uV
  std::uint64_t mixing_seed = 7;
  double max_mixing = 0.2;       // off-diagonal spatial mixing ~ U(0, max_mixing)
  // Artifact rates in events/min of recording. Blinks/saccades drive gen_eog;
  // inject_artifacts turns each rate into a per-epoch injection probability.
  double blink_rate = 0.0;
  double saccade_rate = 0.0;
  double muscle_rate = 0.0;
  double jump_rate = 0.0;
  // Share of each injected artifact's amplitude left in the paired target,
  // in [0, 1). Emulates imperfectly cleaned reference data.
  double target_residual = 0.0;

  void validate() const;
};

struct EogCoefficients {
  Vector a;  // VEOG weight per channel
  Vector b;  // HEOG weight per channel
};

// Parametric frontal-dominant profile over the 19 standard channels:
// a_j = 0.8 exp(-d_j / 1.5) and b_j = +-0.4 exp(-d_j / 1.5), d_j being the
// electrode row distance from Fp1/Fp2; b is positive on the left hemisphere,
// negative on the right, zero on the midline.
EogCoefficients default_eog_coefficients();

enum class Label : std::uint8_t { clean = 0, noisy = 1 };
enum class ArtifactKind : std::uint8_t { none = 0, muscle = 1, jump = 2, ocular = 3 };
enum class Partition : std::uint8_t { train = 0, val = 1, test = 2, unassigned = 3 };

std::string_view to_string(Label l);
std::string_view to_string(ArtifactKind k);
std::string_view to_string(Partition p);
Label parse_label(std::string_view s);
ArtifactKind parse_artifact_kind(std::string_view s);
Partition parse_partition(std::string_view s);

struct EpochDataset {
  double sample_rate = 200.0;
  std::vector<std::string> channels;
  std::vector<Matrix> inputs;           // each channels x samples
  std::vector<Matrix> targets;          // empty, or one per input
  std::vector<std::string> subjects;
  std::vector<Label> labels;
  std::vector<ArtifactKind> kinds;
  std::vector<Partition> partitions;

  std::size_t size() const { return inputs.size(); }
  bool has_targets() const { return !targets.empty(); }
  std::size_t n_channels() const { return inputs.empty() ? channels.size() : static_cast<std::size_t>(inputs[0].rows()); }
  std::size_t n_samples() const { return inputs.empty() ? 0 : static_cast<std::size_t>(inputs[0].cols()); }

  // Indices of entries in partition p (optionally restricted to one label).
  std::vector<std::size_t> indices(Partition p) const;
  std::vector<std::size_t> indices(Partition p, Label l) const;

  // Throws on any broken invariant: parallel array lengths, shapes, one
  // partition per subject, label == noisy <=> input != target.
  void validate() const;
};

std::vector<Recording> gen_clean(const SyntheticSpec& spec, std::uint64_t seed);

Recording contaminate_eog(const Recording& rec, std::span<const double> veog, std::span<const double> heog,
                          const EogCoefficients& coeffs);

struct EogTraces {
  std::vector<double> veog;
  std::vector<double> heog;
  std::size_t n_blinks = 0;
  std::size_t n_saccades = 0;
};

// Blink rate and saccade rate in events/min.
EogTraces gen_eog(std::uint64_t seed, double seconds, double sample_rate, double blink_rate, double saccade_rate);

// Every epoch enters the dataset. With probability rate*epoch_minutes per
// type (capped at 1 over all types) it receives one artifact: muscle burst,
// electrode jump or ocular blink. Untouched epochs are clean with target ==
// input.
EpochDataset inject_artifacts(const std::vector<Epoch>& epochs, const SyntheticSpec& spec, std::uint64_t seed);

// Subjects (not epochs) go 60/20/20 to train/val/test, largest-remainder
// rounding, shuffled with the seed.
void split_by_subject(EpochDataset& dataset, std::uint64_t seed, std::array<double, 3> fractions = {0.6, 0.2, 0.2});

// gen_clean -> epoch_split -> inject_artifacts -> split_by_subject, each
// stage on its own stream derived from `seed`.
EpochDataset synthesize_dataset(const SyntheticSpec& spec, std::uint64_t seed, double epoch_seconds = 2.0,
                                std::array<double, 3> fractions = {0.6, 0.2, 0.2});

// ---------------------------------------------------------------- file format
//
// "LSTD" | u32 version | u64 header length | JSON header (UTF-8) |
// f32 inputs (epoch, channel, time) | f32 targets, same order, when the
// header says has_targets | u64 FNV-1a of all preceding bytes.
// Everything little-endian.

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const EpochDataset& ds, const std::string& spec_json = "{}");
EpochDataset deserialize_dataset(std::span<const std::uint8_t> bytes, std::string* spec_json = nullptr);
void save_dataset(const EpochDataset& ds, const std::filesystem::path& path, const std::string& spec_json = "{}");
EpochDataset load_dataset(const std::filesystem::path& path, std::string* spec_json = nullptr);

} // namespace lsteeg
