#include "run_config.hpp"

#include "lsteeg/errors.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace lsteeg;
using namespace lsteeg::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorClass error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  FAIL("expected lsteeg::Error");
  return ErrorClass::format;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

struct Run {
  int exit_code = -1;
  std::string err;
};

// Runs the CLI with `args`, capturing stderr.
Run run_cli(const fs::path& work, const std::string& args) {
  const fs::path err = work / "stderr.txt";
  const std::string cmd = std::string("\"") + LSTEEG_CLI_PATH + "\" " + args + " 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string error_class_of(const Run& r) {
  const auto pos = r.err.rfind('{');
  if (pos == std::string::npos) return "";
  return json::parse(r.err.substr(pos)).at("error_class").get<std::string>();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lsteeg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmallConfig = R"({
  "synth": {"n_subjects": 5, "seconds_per_subject": 2.0, "epoch_seconds": 0.25,
            "jump_rate": 60, "blink_rate": 60},
  "model": {"n_outer": 6, "n_inner": 4, "n_latent": 8},
  "train": {"max_epochs": 3, "patience": 2, "batch_size": 4},
  "detect": {"partition": "all"},
  "latent": {"k": 3, "interpolation_steps": 4, "partition": "all"},
  "psd": {"partition": "all"}
})";

} // namespace

TEST_CASE("run config: defaults, overrides, and strictness") {
  const RunConfig d = parse_run_config(json::object());
  CHECK_FALSE(d.seed.has_value());
  CHECK(d.model.n_latent == 500);
  CHECK(d.train.lr == 5e-4);

  const RunConfig c = parse_run_config(json::parse(kSmallConfig));
  CHECK(c.synth.spec.n_subjects == 5);
  CHECK(c.synth.epoch_seconds == 0.25);
  CHECK(c.model.n_inner == 4);
  CHECK(c.detect.partition == PartitionSelect::all);

  CHECK(error_of([] { parse_run_config(json::parse(R"({"sed": 1})")); }) == ErrorClass::config);
  CHECK(error_of([] { parse_run_config(json::parse(R"({"model": {"n_latnet": 8}})")); }) == ErrorClass::config);
  CHECK(error_of([] { parse_run_config(json::parse(R"({"train": {"lr": "fast"}})")); }) == ErrorClass::config);
  CHECK(error_of([] { parse_run_config(json::parse(R"({"train": {"mode": "both"}})")); }) == ErrorClass::config);
  CHECK(error_of([] { parse_run_config(json::parse(R"({"detect": {"partition": "dev"}})")); }) ==
        ErrorClass::config);
  CHECK(error_of([] {
          parse_run_config(json::parse(R"({"bands": [{"name": "a", "lo": 5, "hi": 2}]})"));
        }) == ErrorClass::config);
  CHECK(error_of([] {
          parse_run_config(json::parse(R"({"synth": {"band_amplitude": {"kappa": [1, 2]}}})"));
        }) == ErrorClass::config);
}

TEST_CASE("resolved config re-parses to the same document") {
  RunConfig c = parse_run_config(json::parse(kSmallConfig));
  c.seed = 12;
  const auto first = to_json(c);
  const auto second = to_json(parse_run_config(json::parse(first.dump())));
  CHECK(first.dump() == second.dump());
}

TEST_CASE("end to end: synth, train, detect, correct, analyze-latent, eval-psd") {
  const fs::path w = fresh_dir("e2e");
  write(w / "config.json", kSmallConfig);
  const std::string cfg = "--config \"" + (w / "config.json").string() + "\"";

  REQUIRE(run_cli(w, "synth " + cfg + " --seed 5 --out \"" + (w / "data").string() + "\"").exit_code == 0);
  const fs::path data = w / "data" / "dataset.lstd";
  REQUIRE(fs::exists(data));
  CHECK(fs::exists(w / "data" / "resolved_config.json"));
  const std::string data_bytes = slurp(data);

  const std::string d = " --data \"" + data.string() + "\"";
  REQUIRE(run_cli(w, "train " + cfg + d + " --seed 6 --quiet --out \"" + (w / "model").string() + "\"").exit_code == 0);
  const fs::path ckpt = w / "model" / "model.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(w / "model" / "loss_history.csv"));
  const std::string c = d + " --checkpoint \"" + ckpt.string() + "\"";

  REQUIRE(run_cli(w, "detect " + cfg + c + " --out \"" + (w / "det").string() + "\"").exit_code == 0);
  const json summary = json::parse(slurp(w / "det" / "summary.json"));
  CHECK(summary.contains("auc"));
  CHECK(summary.at("auc").get<double>() >= 0.0);
  CHECK(summary.at("auc").get<double>() <= 1.0);
  CHECK(fs::exists(w / "det" / "roc.csv"));

  // Same inputs, second output directory: byte-identical CSVs.
  REQUIRE(run_cli(w, "detect " + cfg + c + " --out \"" + (w / "det2").string() + "\"").exit_code == 0);
  CHECK(slurp(w / "det" / "scores.csv") == slurp(w / "det2" / "scores.csv"));
  CHECK(slurp(w / "det" / "roc.csv") == slurp(w / "det2" / "roc.csv"));

  REQUIRE(run_cli(w, "correct " + cfg + c + " --out \"" + (w / "cor").string() + "\"").exit_code == 0);
  CHECK(fs::exists(w / "cor" / "corrected.lstd"));
  CHECK(json::parse(slurp(w / "cor" / "summary.json")).contains("rmse_mean"));

  REQUIRE(run_cli(w, "analyze-latent " + cfg + c + " --out \"" + (w / "lat").string() + "\"").exit_code == 0);
  CHECK(fs::exists(w / "lat" / "activation.csv"));
  CHECK(fs::exists(w / "lat" / "spectral_activation.csv"));
  CHECK(fs::exists(w / "lat" / "interpolation.csv"));

  REQUIRE(run_cli(w, "eval-psd " + cfg + c + " --out \"" + (w / "psd").string() + "\"").exit_code == 0);
  CHECK(fs::exists(w / "psd" / "attenuation.csv"));

  CHECK(slurp(data) == data_bytes);  // no command mutates its inputs

  // The sidecar alone reproduces the dataset.
  const fs::path resolved = w / "data" / "resolved_config.json";
  REQUIRE(run_cli(w, "synth --config \"" + resolved.string() + "\" --out \"" + (w / "again").string() + "\"")
              .exit_code == 0);
  CHECK(slurp(w / "again" / "dataset.lstd") == data_bytes);
  fs::remove_all(w);
}

TEST_CASE("CLI failures exit non-zero with a machine-readable class") {
  const fs::path w = fresh_dir("errors");
  write(w / "clean.json", R"({"synth": {"n_subjects": 5, "seconds_per_subject": 1.0, "epoch_seconds": 0.25},
                               "model": {"n_outer": 4, "n_inner": 3, "n_latent": 4},
                               "train": {"max_epochs": 2, "patience": 1}})");
  const std::string cfg = "--config \"" + (w / "clean.json").string() + "\"";

  const Run no_seed = run_cli(w, "synth " + cfg + " --out \"" + (w / "x").string() + "\"");
  CHECK(no_seed.exit_code == exit_code(ErrorClass::usage));
  CHECK(error_class_of(no_seed) == "usage");

  write(w / "bad.json", R"({"synth": {"n_subject": 5}})");
  const Run bad = run_cli(w, "synth --config \"" + (w / "bad.json").string() + "\" --seed 1 --out \"" +
                                (w / "x").string() + "\"");
  CHECK(bad.exit_code == exit_code(ErrorClass::config));
  CHECK(error_class_of(bad) == "config");

  REQUIRE(run_cli(w, "synth " + cfg + " --seed 2 --out \"" + (w / "data").string() + "\"").exit_code == 0);
  const fs::path data = w / "data" / "dataset.lstd";
  REQUIRE(run_cli(w, "train " + cfg + " --data \"" + data.string() + "\" --seed 3 --quiet --out \"" +
                        (w / "m").string() + "\"")
              .exit_code == 0);
  const fs::path ckpt = w / "m" / "model.ckpt";

  // Artifact rates are zero: every epoch is clean.
  const Run single = run_cli(w, "detect --data \"" + data.string() + "\" --checkpoint \"" + ckpt.string() +
                                   "\" --out \"" + (w / "d").string() + "\"");
  CHECK(single.exit_code == exit_code(ErrorClass::undefined_auc));
  CHECK(error_class_of(single) == "undefined_auc");

  std::string bytes = slurp(ckpt);
  bytes[bytes.size() / 2] ^= 0x10;
  write(w / "bad.ckpt", bytes);
  const Run corrupt = run_cli(w, "detect --data \"" + data.string() + "\" --checkpoint \"" +
                                    (w / "bad.ckpt").string() + "\" --out \"" + (w / "d2").string() + "\"");
  CHECK(corrupt.exit_code == exit_code(ErrorClass::checksum_mismatch));
  CHECK(error_class_of(corrupt) == "checksum_mismatch");

  const Run missing = run_cli(w, "detect --data \"" + (w / "nope.lstd").string() + "\" --checkpoint \"" +
                                    ckpt.string() + "\" --out \"" + (w / "d3").string() + "\"");
  CHECK(missing.exit_code == exit_code(ErrorClass::io));

  const Run none = run_cli(w, "");
  CHECK(none.exit_code == exit_code(ErrorClass::usage));
  fs::remove_all(w);
}
