#include "run_config.hpp"

#include "lsteeg/errors.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lsteeg::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 5> kAmplitudeKeys = {"delta", "theta", "alpha", "beta", "gamma"};

// Strict view of one JSON object: every key must be consumed by get().
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    require(doc_.is_object(), ErrorClass::config, "config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorClass::config, "config: '" + path_ + "." + key + "' has the wrong type: " + e.what());
    }
  }

  bool has(const char* key) const { return doc_.contains(key); }

  const json* sub(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.contains(item.key())) {
        fail(ErrorClass::config, "config: unknown key '" + child(item.key().c_str()) + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_synth(const json& doc, SynthSection& out) {
  Section s(doc, "synth");
  SyntheticSpec& spec = out.spec;
  s.get("n_subjects", spec.n_subjects);
  s.get("seconds_per_subject", spec.seconds_per_subject);
  s.get("sample_rate", spec.sample_rate);
  if (const json* amp = s.sub("band_amplitude")) {
    Section a(*amp, s.child("band_amplitude"));
    for (std::size_t b = 0; b < kAmplitudeKeys.size(); ++b) {
      std::array<double, 2> range = {spec.band_amplitude[b].lo, spec.band_amplitude[b].hi};
      a.get(kAmplitudeKeys[b], range);
      spec.band_amplitude[b] = {range[0], range[1]};
    }
    a.finish();
  }
  s.get("components_per_band", spec.components_per_band);
  s.get("pink_exponent", spec.pink_exponent);
  s.get("pink_rms", spec.pink_rms);
  s.get("mixing_seed", spec.mixing_seed);
  s.get("max_mixing", spec.max_mixing);
  s.get("blink_rate", spec.blink_rate);
  s.get("saccade_rate", spec.saccade_rate);
  s.get("muscle_rate", spec.muscle_rate);
  s.get("jump_rate", spec.jump_rate);
  s.get("target_residual", spec.target_residual);
  s.get("epoch_seconds", out.epoch_seconds);
  s.get("split", out.split);
  s.finish();
}

void parse_model(const json& doc, LsteegConfig& m) {
  Section s(doc, "model");
  s.get("n_channels", m.n_channels);
  s.get("n_samples", m.n_samples);
  s.get("n_outer", m.n_outer);
  s.get("n_inner", m.n_inner);
  s.get("n_latent", m.n_latent);
  s.get("dropout_p", m.dropout_p);
  s.get("rng_seed", m.rng_seed);
  s.finish();
}

void parse_train(const json& doc, TrainConfig& t) {
  Section s(doc, "train");
  s.get("max_epochs", t.max_epochs);
  s.get("batch_size", t.batch_size);
  s.get("lr", t.lr);
  s.get("lr_min", t.lr_min);
  s.get("t_max", t.t_max);
  s.get("patience", t.patience);
  s.get("min_delta", t.min_delta);
  s.get("seed", t.seed);
  std::string mode = t.mode == TrainMode::detection ? "detection" : "correction";
  s.get("mode", mode);
  if (mode == "detection") {
    t.mode = TrainMode::detection;
  } else if (mode == "correction") {
    t.mode = TrainMode::correction;
  } else {
    fail(ErrorClass::config, "config: train.mode must be detection|correction, got '" + mode + "'");
  }
  s.get("normalize", t.normalize);
  s.get("clean_only", t.clean_only);
  s.finish();
}

void get_partition(Section& s, PartitionSelect& p) {
  std::string text(to_string(p));
  s.get("partition", text);
  p = parse_partition_select(text);
}

} // namespace

std::string_view to_string(PartitionSelect p) {
  switch (p) {
    case PartitionSelect::train: return "train";
    case PartitionSelect::val: return "val";
    case PartitionSelect::test: return "test";
    case PartitionSelect::all: return "all";
  }
  return "all";
}

PartitionSelect parse_partition_select(std::string_view s) {
  if (s == "train") return PartitionSelect::train;
  if (s == "val") return PartitionSelect::val;
  if (s == "test") return PartitionSelect::test;
  if (s == "all") return PartitionSelect::all;
  fail(ErrorClass::config, "config: partition must be train|val|test|all, got '" + std::string(s) + "'");
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  if (root.has("seed")) {
    std::uint64_t seed = 0;
    root.get("seed", seed);
    cfg.seed = seed;
  } else {
    root.sub("seed");
  }
  if (const json* p = root.sub("paths")) {
    Section s(*p, "paths");
    s.get("data", cfg.paths.data);
    s.get("checkpoint", cfg.paths.checkpoint);
    s.finish();
  }
  if (const json* p = root.sub("synth")) parse_synth(*p, cfg.synth);
  if (const json* p = root.sub("model")) parse_model(*p, cfg.model);
  if (const json* p = root.sub("train")) parse_train(*p, cfg.train);
  if (const json* p = root.sub("detect")) {
    Section s(*p, "detect");
    s.get("normalize", cfg.detect.normalize);
    std::string units(to_string(cfg.detect.score_units));
    s.get("score_units", units);
    cfg.detect.score_units = parse_score_units(units);
    get_partition(s, cfg.detect.partition);
    s.finish();
  }
  if (const json* p = root.sub("correct")) {
    Section s(*p, "correct");
    s.get("normalize", cfg.correct.normalize);
    get_partition(s, cfg.correct.partition);
    s.finish();
  }
  if (const json* p = root.sub("latent")) {
    Section s(*p, "latent");
    s.get("k", cfg.latent.k);
    s.get("interpolation_steps", cfg.latent.interpolation_steps);
    get_partition(s, cfg.latent.partition);
    s.finish();
  }
  if (const json* p = root.sub("sweep")) {
    Section s(*p, "sweep");
    std::string axis(to_string(cfg.sweep.axis));
    s.get("axis", axis);
    cfg.sweep.axis = parse_sweep_axis(axis);
    s.get("values", cfg.sweep.values);
    s.finish();
  }
  if (const json* p = root.sub("psd")) {
    Section s(*p, "psd");
    get_partition(s, cfg.psd.partition);
    s.get("clean_only", cfg.psd.clean_only);
    s.get("normalize", cfg.psd.normalize);
    s.get("low_band", cfg.psd.low_band);
    s.get("high_band", cfg.psd.high_band);
    s.finish();
  }
  if (const json* p = root.sub("bands")) {
    require(p->is_array(), ErrorClass::config, "config: 'bands' must be an array");
    cfg.bands.clear();
    for (std::size_t k = 0; k < p->size(); ++k) {
      Section s(p->at(k), "bands[" + std::to_string(k) + "]");
      BandDef b;
      s.get("name", b.name);
      s.get("lo", b.lo);
      s.get("hi", b.hi);
      s.finish();
      cfg.bands.push_back(b);
    }
    // The Nyquist check happens where a sample rate is known.
    validate_bands(cfg.bands, std::numeric_limits<double>::infinity());
  }
  root.finish();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorClass::io, "cannot open config " + path);
  std::stringstream text;
  text << f.rdbuf();
  json doc;
  try {
    doc = json::parse(text.str());
  } catch (const json::exception& e) {
    fail(ErrorClass::config, "config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  if (cfg.seed) {
    j["seed"] = *cfg.seed;
  }
  j["paths"] = {{"data", cfg.paths.data}, {"checkpoint", cfg.paths.checkpoint}};

  const SyntheticSpec& spec = cfg.synth.spec;
  ordered_json amp;
  for (std::size_t b = 0; b < kAmplitudeKeys.size(); ++b) {
    amp[kAmplitudeKeys[b]] = {spec.band_amplitude[b].lo, spec.band_amplitude[b].hi};
  }
  j["synth"] = {{"n_subjects", spec.n_subjects},
                {"seconds_per_subject", spec.seconds_per_subject},
                {"sample_rate", spec.sample_rate},
                {"band_amplitude", amp},
                {"components_per_band", spec.components_per_band},
                {"pink_exponent", spec.pink_exponent},
                {"pink_rms", spec.pink_rms},
                {"mixing_seed", spec.mixing_seed},
                {"max_mixing", spec.max_mixing},
                {"blink_rate", spec.blink_rate},
                {"saccade_rate", spec.saccade_rate},
                {"muscle_rate", spec.muscle_rate},
                {"jump_rate", spec.jump_rate},
                {"target_residual", spec.target_residual},
                {"epoch_seconds", cfg.synth.epoch_seconds},
                {"split", cfg.synth.split}};
  const LsteegConfig& m = cfg.model;
  j["model"] = {{"n_channels", m.n_channels}, {"n_samples", m.n_samples}, {"n_outer", m.n_outer},
                {"n_inner", m.n_inner},       {"n_latent", m.n_latent},   {"dropout_p", m.dropout_p},
                {"rng_seed", m.rng_seed}};
  const TrainConfig& t = cfg.train;
  j["train"] = {{"max_epochs", t.max_epochs},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"lr_min", t.lr_min},
                {"t_max", t.t_max},
                {"patience", t.patience},
                {"min_delta", t.min_delta},
                {"seed", t.seed},
                {"mode", t.mode == TrainMode::detection ? "detection" : "correction"},
                {"normalize", t.normalize},
                {"clean_only", t.clean_only}};
  j["detect"] = {{"normalize", cfg.detect.normalize},
                 {"score_units", to_string(cfg.detect.score_units)},
                 {"partition", to_string(cfg.detect.partition)}};
  j["correct"] = {{"normalize", cfg.correct.normalize}, {"partition", to_string(cfg.correct.partition)}};
  j["latent"] = {{"k", cfg.latent.k},
                 {"interpolation_steps", cfg.latent.interpolation_steps},
                 {"partition", to_string(cfg.latent.partition)}};
  j["sweep"] = {{"axis", to_string(cfg.sweep.axis)}, {"values", cfg.sweep.values}};
  j["psd"] = {{"partition", to_string(cfg.psd.partition)},
              {"clean_only", cfg.psd.clean_only},
              {"normalize", cfg.psd.normalize},
              {"low_band", cfg.psd.low_band},
              {"high_band", cfg.psd.high_band}};
  ordered_json bands = ordered_json::array();
  for (const BandDef& b : cfg.bands) bands.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
  j["bands"] = bands;
  return j;
}

} // namespace lsteeg::cli
