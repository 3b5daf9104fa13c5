#include "binary_io.hpp"
#include "lsteeg/synth.hpp"

#include <json.hpp>

namespace lsteeg {

using nlohmann::json;

std::vector<std::uint8_t> serialize_dataset(const EpochDataset& ds, const std::string& spec_json) {
  ds.validate();
  json header;
  header["format"] = "lsteeg-dataset";
  header["version"] = kDatasetVersion;
  header["sample_rate"] = ds.sample_rate;
  header["channels"] = ds.channels;
  header["n_epochs"] = ds.size();
  header["n_channels"] = ds.n_channels();
  header["n_samples"] = ds.n_samples();
  header["has_targets"] = ds.has_targets();
  header["subjects"] = ds.subjects;
  json labels = json::array(), kinds = json::array(), parts = json::array();
  for (std::size_t k = 0; k < ds.size(); ++k) {
    labels.push_back(to_string(ds.labels[k]));
    kinds.push_back(to_string(ds.kinds[k]));
    parts.push_back(to_string(ds.partitions[k]));
  }
  header["labels"] = labels;
  header["kinds"] = kinds;
  header["partitions"] = parts;
  try {
    header["spec"] = json::parse(spec_json);
  } catch (const json::exception& e) {
    fail(ErrorClass::config, std::string("dataset: spec is not valid JSON: ") + e.what());
  }
  const std::string text = header.dump();

  detail::ByteWriter w;
  w.bytes("LSTD");
  w.u32(kDatasetVersion);
  w.u64(text.size());
  w.bytes(text);
  auto write_block = [&](const std::vector<Matrix>& block) {
    for (const Matrix& m : block) {
      for (Eigen::Index k = 0; k < m.size(); ++k) w.f32(static_cast<float>(m.data()[k]));
    }
  };
  write_block(ds.inputs);
  if (ds.has_targets()) write_block(ds.targets);
  w.u64(detail::fnv1a64(w.buffer()));
  return std::move(w.buffer());
}

EpochDataset deserialize_dataset(std::span<const std::uint8_t> bytes, std::string* spec_json) {
  detail::ByteReader r(bytes, "dataset");
  if (r.bytes(4) != "LSTD") fail(ErrorClass::bad_magic, "dataset: bad magic (not an LSTD dataset)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    fail(ErrorClass::version_mismatch,
         "dataset: version " + std::to_string(version) + ", expected " + std::to_string(kDatasetVersion));
  }
  const std::uint64_t header_len = r.u64();
  r.need(header_len);
  const std::string_view text = r.bytes(header_len);
  // Checksum before interpreting the header, so corruption is reported as such.
  if (bytes.size() < 8 + r.position()) fail(ErrorClass::truncated, "dataset: file is truncated");

  json header;
  bool header_ok = true;
  try {
    header = json::parse(text);
  } catch (const json::exception&) {
    header_ok = false;
  }
  std::uint64_t n = 0, channels = 0, samples = 0;
  bool has_targets = false;
  if (header_ok) {
    try {
      n = header.at("n_epochs").get<std::uint64_t>();
      channels = header.at("n_channels").get<std::uint64_t>();
      samples = header.at("n_samples").get<std::uint64_t>();
      has_targets = header.at("has_targets").get<bool>();
    } catch (const json::exception&) {
      header_ok = false;
    }
  }
  if (header_ok) {
    const std::uint64_t per_block = n * channels * samples;
    const std::uint64_t payload = per_block * 4 * (has_targets ? 2 : 1);
    if (channels != 0 && samples != 0 && n > UINT64_MAX / channels / samples / 8) {
      fail(ErrorClass::format, "dataset: shape overflow");
    }
    r.need(payload + 8);
    if (r.remaining() > payload + 8) fail(ErrorClass::format, "dataset: trailing bytes after checksum");
  }
  const std::size_t body = bytes.size() - 8;
  detail::ByteReader tail(bytes.subspan(body), "dataset");
  if (tail.u64() != detail::fnv1a64(bytes.first(body))) {
    fail(ErrorClass::checksum_mismatch, "dataset: checksum mismatch (file corrupted)");
  }
  if (!header_ok) fail(ErrorClass::format, "dataset: malformed JSON header");

  EpochDataset ds;
  try {
    ds.sample_rate = header.at("sample_rate").get<double>();
    ds.channels = header.at("channels").get<std::vector<std::string>>();
    ds.subjects = header.at("subjects").get<std::vector<std::string>>();
    for (const auto& s : header.at("labels")) ds.labels.push_back(parse_label(s.get<std::string>()));
    for (const auto& s : header.at("kinds")) ds.kinds.push_back(parse_artifact_kind(s.get<std::string>()));
    for (const auto& s : header.at("partitions")) ds.partitions.push_back(parse_partition(s.get<std::string>()));
    if (spec_json) *spec_json = header.at("spec").dump();
  } catch (const json::exception& e) {
    fail(ErrorClass::format, std::string("dataset: malformed header: ") + e.what());
  }
  auto read_block = [&](std::vector<Matrix>& block) {
    block.assign(n, Matrix(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(samples)));
    for (Matrix& m : block) {
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<double>(r.f32());
    }
  };
  read_block(ds.inputs);
  if (has_targets) read_block(ds.targets);
  ds.validate();
  return ds;
}

void save_dataset(const EpochDataset& ds, const std::filesystem::path& path, const std::string& spec_json) {
  detail::write_file(path, serialize_dataset(ds, spec_json));
}

EpochDataset load_dataset(const std::filesystem::path& path, std::string* spec_json) {
  return deserialize_dataset(detail::read_file(path), spec_json);
}

} // namespace lsteeg
