#pragma once

// JSON run configuration shared by every CLI command. Parsing is strict:
// unknown keys anywhere are rejected with ErrorClass::config. Serializing a
// RunConfig yields a complete document that parses back to the same values,
// which is what each command writes as resolved_config.json.

#include "lsteeg/model.hpp"
#include "lsteeg/pipeline.hpp"
#include "lsteeg/signal.hpp"
#include "lsteeg/synth.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lsteeg::cli {

struct SynthSection {
  SyntheticSpec spec;
  double epoch_seconds = 2.0;
  std::array<double, 3> split = {0.6, 0.2, 0.2};
};

// Which dataset entries a command reads.
enum class PartitionSelect { train, val, test, all };

struct DetectSection {
  bool normalize = true;
  ScoreUnits score_units = ScoreUnits::microvolts;
  PartitionSelect partition = PartitionSelect::test;
};

struct CorrectSection {
  bool normalize = true;
  PartitionSelect partition = PartitionSelect::test;
};

struct LatentSection {
  std::size_t k = 5;                   // MADs reported and mapped
  std::size_t interpolation_steps = 10;
  PartitionSelect partition = PartitionSelect::test;
};

struct SweepSection {
  SweepAxis axis = SweepAxis::n_latent;
  std::vector<std::size_t> values = {8, 32, 128};
};

struct PsdSection {
  PartitionSelect partition = PartitionSelect::test;
  bool clean_only = true;
  bool normalize = true;
  std::array<double, 2> low_band = {1.0, 8.0};
  std::array<double, 2> high_band = {30.0, 45.0};
};

struct Paths {
  std::string data;
  std::string checkpoint;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  Paths paths;
  SynthSection synth;
  LsteegConfig model;
  TrainConfig train;
  DetectSection detect;
  CorrectSection correct;
  LatentSection latent;
  SweepSection sweep;
  PsdSection psd;
  std::vector<BandDef> bands = standard_bands();
};

std::string_view to_string(PartitionSelect p);
PartitionSelect parse_partition_select(std::string_view s);

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

} // namespace lsteeg::cli
