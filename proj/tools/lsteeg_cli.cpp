// lsteeg: generate synthetic data, train, score, correct, analyze and sweep.
//
// Every command takes --out DIR and writes resolved_config.json there; that
// file alone reproduces the run (`lsteeg <cmd> --config resolved_config.json
// --out DIR2`). Errors go to stderr as one JSON object and map to a distinct
// exit code per error class.

#include "run_config.hpp"

#include "lsteeg/errors.hpp"
#include "lsteeg/latent.hpp"
#include "lsteeg/model.hpp"
#include "lsteeg/pipeline.hpp"
#include "lsteeg/report.hpp"
#include "lsteeg/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace lsteeg::cli {
namespace {

// Flags shared by all commands; optional ones override the config file.
struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string partition;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::string mode;
  std::optional<std::size_t> n_latent;
  std::optional<std::size_t> n_subjects;
  std::optional<double> seconds;
  std::string score_units;
  std::string axis;
  std::vector<std::size_t> values;
  std::optional<std::size_t> k;
  std::optional<std::size_t> steps;
  bool quiet = false;
};

enum class Command { synth, train, detect, correct, analyze_latent, sweep, eval_psd };

std::string command_name(Command c) {
  switch (c) {
    case Command::synth: return "synth";
    case Command::train: return "train";
    case Command::detect: return "detect";
    case Command::correct: return "correct";
    case Command::analyze_latent: return "analyze-latent";
    case Command::sweep: return "sweep";
    case Command::eval_psd: return "eval-psd";
  }
  return "";
}

bool needs_seed(Command c) { return c == Command::synth || c == Command::train || c == Command::sweep; }

RunConfig resolve(Command cmd, const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) cfg.seed = o.seed;
  if (needs_seed(cmd)) {
    require(cfg.seed.has_value(), ErrorClass::usage,
            command_name(cmd) + ": --seed is required (or a top-level \"seed\" in the config)");
    cfg.train.seed = *cfg.seed;
    cfg.model.rng_seed = *cfg.seed;
  }
  if (!o.data.empty()) cfg.paths.data = o.data;
  if (!o.checkpoint.empty()) cfg.paths.checkpoint = o.checkpoint;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.lr) cfg.train.lr = *o.lr;
  if (!o.mode.empty()) {
    require(o.mode == "detection" || o.mode == "correction", ErrorClass::config,
            "--mode must be detection|correction");
    cfg.train.mode = o.mode == "detection" ? TrainMode::detection : TrainMode::correction;
  }
  if (o.n_latent) cfg.model.n_latent = *o.n_latent;
  if (o.n_subjects) cfg.synth.spec.n_subjects = *o.n_subjects;
  if (o.seconds) cfg.synth.spec.seconds_per_subject = *o.seconds;
  if (!o.score_units.empty()) cfg.detect.score_units = parse_score_units(o.score_units);
  if (!o.axis.empty()) cfg.sweep.axis = parse_sweep_axis(o.axis);
  if (!o.values.empty()) cfg.sweep.values = o.values;
  if (o.k) cfg.latent.k = *o.k;
  if (o.steps) cfg.latent.interpolation_steps = *o.steps;
  if (!o.partition.empty()) {
    const PartitionSelect p = parse_partition_select(o.partition);
    cfg.detect.partition = cfg.correct.partition = cfg.latent.partition = cfg.psd.partition = p;
  }
  return cfg;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

template <typename Writer>
void write_csv(const fs::path& path, Writer&& writer) {
  std::ostringstream s;
  writer(s);
  write_text_file(path, s.str());
}

const std::string& require_path(const std::string& p, const char* what) {
  require(!p.empty(), ErrorClass::usage, std::string("missing --") + what + " (or paths." + what + " in the config)");
  return p;
}

EpochDataset load_data(const RunConfig& cfg) { return load_dataset(require_path(cfg.paths.data, "data")); }

LsteegModel load_model(const RunConfig& cfg) {
  return load_checkpoint(require_path(cfg.paths.checkpoint, "checkpoint"));
}

std::vector<std::size_t> select(const EpochDataset& ds, PartitionSelect p) {
  std::vector<std::size_t> out;
  if (p == PartitionSelect::all) {
    for (std::size_t k = 0; k < ds.size(); ++k) out.push_back(k);
  } else {
    const Partition part = p == PartitionSelect::train ? Partition::train
                           : p == PartitionSelect::val ? Partition::val
                                                       : Partition::test;
    out = ds.indices(part);
  }
  require(!out.empty(), ErrorClass::config, "partition '" + std::string(to_string(p)) + "' is empty");
  return out;
}

std::vector<Matrix> gather(const std::vector<Matrix>& all, const std::vector<std::size_t>& which) {
  std::vector<Matrix> out;
  out.reserve(which.size());
  for (std::size_t k : which) out.push_back(all[k]);
  return out;
}

void check_shapes(const LsteegModel& model, const EpochDataset& ds) {
  const LsteegConfig& c = model.config();
  require(ds.n_channels() == c.n_channels && ds.n_samples() == c.n_samples, ErrorClass::dimension,
          "dataset epochs are " + std::to_string(ds.n_channels()) + "x" + std::to_string(ds.n_samples()) +
              " but the checkpoint expects " + std::to_string(c.n_channels) + "x" + std::to_string(c.n_samples));
}

std::string spec_json(const RunConfig& cfg) { return to_json(cfg)["synth"].dump(); }

// ---------------------------------------------------------------- commands

void run_synth(const RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds =
      synthesize_dataset(cfg.synth.spec, *cfg.seed, cfg.synth.epoch_seconds, cfg.synth.split);
  save_dataset(ds, out / "dataset.lstd", spec_json(cfg));
  ordered_json summary;
  summary["n_epochs"] = ds.size();
  summary["n_channels"] = ds.n_channels();
  summary["n_samples"] = ds.n_samples();
  for (Partition p : {Partition::train, Partition::val, Partition::test}) {
    summary[std::string(to_string(p))] = {{"clean", ds.indices(p, Label::clean).size()},
                                          {"noisy", ds.indices(p, Label::noisy).size()}};
  }
  write_json(out / "summary.json", summary);
}

void run_train(RunConfig& cfg, const fs::path& out, bool quiet) {
  const EpochDataset ds = load_data(cfg);
  cfg.model.n_channels = ds.n_channels();
  cfg.model.n_samples = ds.n_samples();
  const LsteegModel init = LsteegModel::build(cfg.model);
  const TrainResult r = train(init, ds, cfg.train, [quiet](std::size_t e, double tl, double vl) {
    if (!quiet) std::fprintf(stderr, "epoch %zu train %.6g val %.6g\n", e, tl, vl);
  });
  save_checkpoint(r.model, out / "model.ckpt");
  write_csv(out / "loss_history.csv", [&](std::ostream& s) { write_loss_history_csv(s, r.report); });
  write_text_file(out / "metrics.json", metric_summary_json(r.report));
}

void run_detect(const RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds = load_data(cfg);
  const LsteegModel model = load_model(cfg);
  check_shapes(model, ds);
  const auto which = select(ds, cfg.detect.partition);
  const std::vector<Matrix> epochs = gather(ds.inputs, which);
  std::vector<Label> labels;
  for (std::size_t k : which) labels.push_back(ds.labels[k]);
  const std::vector<double> scores = detect_scores(model, epochs, cfg.detect.normalize, cfg.detect.score_units);
  write_csv(out / "scores.csv", [&](std::ostream& s) { write_scores_csv(s, scores, labels); });
  const RocCurve roc = roc_auc(scores, labels);
  const ThresholdChoice t = select_threshold(roc);
  write_csv(out / "roc.csv", [&](std::ostream& s) { write_roc_csv(s, roc); });
  ordered_json summary;
  summary["auc"] = roc.auc;
  summary["threshold"] = t.threshold;
  summary["tpr"] = t.tpr;
  summary["fpr"] = t.fpr;
  summary["youden"] = t.youden;
  summary["threshold_degenerate"] = t.degenerate;
  summary["n_positive"] = roc.n_positive;
  summary["n_negative"] = roc.n_negative;
  summary["score_units"] = to_string(cfg.detect.score_units);
  write_json(out / "summary.json", summary);
}

void run_correct(const RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds = load_data(cfg);
  const LsteegModel model = load_model(cfg);
  check_shapes(model, ds);
  const auto which = select(ds, cfg.correct.partition);
  const EpochMap f = model_map(model, cfg.correct.normalize);

  EpochDataset corrected;
  corrected.sample_rate = ds.sample_rate;
  corrected.channels = ds.channels;
  for (std::size_t k : which) {
    corrected.inputs.push_back(f(ds.inputs[k]));
    corrected.subjects.push_back(ds.subjects[k]);
    corrected.partitions.push_back(ds.partitions[k]);
    // Labels and kinds describe the epoch the correction was derived from.
    corrected.labels.push_back(ds.labels[k]);
    corrected.kinds.push_back(ds.kinds[k]);
  }
  save_dataset(corrected, out / "corrected.lstd", "{}");

  ordered_json summary;
  summary["n_epochs"] = which.size();
  if (ds.has_targets()) {
    const std::vector<Matrix> inputs = gather(ds.inputs, which);
    const std::vector<Matrix> targets = gather(ds.targets, which);
    std::size_t pos = 0;
    const RmseSummary r =
        evaluate_correction([&](const Matrix&) { return corrected.inputs[pos++]; }, inputs, targets);
    const RmseSummary identity = evaluate_correction([](const Matrix& x) { return x; }, inputs, targets);
    write_csv(out / "rmse.csv", [&](std::ostream& s) { write_rmse_csv(s, r); });
    summary["rmse_mean"] = r.mean;
    summary["rmse_sd"] = r.sd;
    summary["identity_rmse_mean"] = identity.mean;
    summary["identity_rmse_sd"] = identity.sd;
  }
  write_json(out / "summary.json", summary);
}

void run_analyze_latent(const RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds = load_data(cfg);
  const LsteegModel model = load_model(cfg);
  check_shapes(model, ds);
  const auto which = select(ds, cfg.latent.partition);
  const std::vector<Matrix> epochs = gather(ds.inputs, which);
  // The encoder sees what it saw in training: normalized epochs.
  std::vector<Matrix> normalized;
  for (const Matrix& x : epochs) normalized.push_back(apply_scale(x, fit_scale(x)));

  const Matrix encodings = encode_epochs(model, normalized);
  const ActivationSummary a = cumulative_activation(encodings);
  const std::vector<std::size_t> top = mads(a, cfg.latent.k);
  write_csv(out / "activation.csv", [&](std::ostream& s) { write_activation_csv(s, a); });

  std::vector<Matrix> powers;
  for (const Matrix& x : epochs) powers.push_back(relative_band_power(x, ds.sample_rate, cfg.bands));
  const SpectralActivationMap smap = spectral_activation(encodings, powers);
  write_csv(out / "spectral_activation.csv",
            [&](std::ostream& s) { write_spectral_csv(s, smap, cfg.bands, ds.channels); });

  const bool standard_montage = ds.channels == standard_channel_labels();
  std::ostringstream topo;
  topo << "mad_rank,dim,band,channel,value\n";
  for (std::size_t rank = 0; rank < top.size(); ++rank) {
    const std::size_t j = top[rank];
    for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
      std::vector<double> values(ds.channels.size());
      for (std::size_t c = 0; c < values.size(); ++c) {
        values[c] = smap.at(j, b, c);
        topo << rank << ',' << j << ',' << cfg.bands[b].name << ',' << ds.channels[c] << ','
             << format_double(values[c]) << '\n';
      }
      if (standard_montage) {
        std::ostringstream svg;
        write_topomap_svg(svg, values, "dim " + std::to_string(j) + " " + cfg.bands[b].name);
        write_text_file(out / "topomaps" / ("mad" + std::to_string(rank) + "_" + cfg.bands[b].name + ".svg"),
                        svg.str());
      }
    }
    const Matrix alpha = temporal_activation(encodings, normalized, j);
    write_csv(out / ("temporal_activation_mad" + std::to_string(rank) + ".csv"), [&](std::ostream& s) {
      s << "channel";
      for (Eigen::Index t = 0; t < alpha.cols(); ++t) s << ",t" << t;
      s << '\n';
      for (Eigen::Index c = 0; c < alpha.rows(); ++c) {
        s << ds.channels[static_cast<std::size_t>(c)];
        for (Eigen::Index t = 0; t < alpha.cols(); ++t) s << ',' << format_double(alpha(c, t));
        s << '\n';
      }
    });
  }
  write_text_file(out / "topomap.csv", topo.str());

  // Interpolate between the first and last selected epochs.
  const Interpolation path =
      interpolate(model, normalized.front(), normalized.back(), cfg.latent.interpolation_steps);
  write_csv(out / "interpolation.csv", [&](std::ostream& s) { write_interpolation_csv(s, path); });

  ordered_json summary;
  summary["n_epochs"] = which.size();
  summary["mads"] = top;
  summary["interpolation_from"] = which.front();
  summary["interpolation_to"] = which.back();
  write_json(out / "summary.json", summary);
}

void run_sweep(RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds = load_data(cfg);
  cfg.model.n_channels = ds.n_channels();
  cfg.model.n_samples = ds.n_samples();
  const std::vector<SweepRow> rows = sweep(cfg.sweep.axis, cfg.sweep.values, cfg.model, ds, cfg.train);
  write_csv(out / "sweep.csv", [&](std::ostream& s) { write_sweep_csv(s, cfg.sweep.axis, rows); });
}

void run_eval_psd(const RunConfig& cfg, const fs::path& out) {
  const EpochDataset ds = load_data(cfg);
  const LsteegModel model = load_model(cfg);
  check_shapes(model, ds);
  std::vector<std::size_t> which = select(ds, cfg.psd.partition);
  if (cfg.psd.clean_only) std::erase_if(which, [&](std::size_t k) { return ds.labels[k] != Label::clean; });
  require(!which.empty(), ErrorClass::config, "eval-psd: no epochs selected");
  const std::vector<Matrix> inputs = gather(ds.inputs, which);
  const EpochMap f = model_map(model, cfg.psd.normalize);
  std::vector<Matrix> outputs;
  for (const Matrix& x : inputs) outputs.push_back(f(x));
  const AttenuationCurve curve = psd_attenuation(inputs, outputs, ds.sample_rate);
  write_csv(out / "attenuation.csv", [&](std::ostream& s) { write_attenuation_csv(s, curve); });
  ordered_json summary;
  summary["n_epochs"] = which.size();
  summary["mean_attenuation_low_db"] = mean_attenuation(curve, cfg.psd.low_band[0], cfg.psd.low_band[1]);
  summary["mean_attenuation_high_db"] = mean_attenuation(curve, cfg.psd.high_band[0], cfg.psd.high_band[1]);
  write_json(out / "summary.json", summary);
}

void run(Command cmd, const Options& o) {
  RunConfig cfg = resolve(cmd, o);
  const fs::path out(o.out);
  fs::create_directories(out);
  switch (cmd) {
    case Command::synth: run_synth(cfg, out); break;
    case Command::train: run_train(cfg, out, o.quiet); break;
    case Command::detect: run_detect(cfg, out); break;
    case Command::correct: run_correct(cfg, out); break;
    case Command::analyze_latent: run_analyze_latent(cfg, out); break;
    case Command::sweep: run_sweep(cfg, out); break;
    case Command::eval_psd: run_eval_psd(cfg, out); break;
  }
  // Written last so it reflects values filled in from the data (e.g. N_C, N_T).
  write_json(out / "resolved_config.json", to_json(cfg));
}

int report_error(std::string_view cls, const std::string& message, int code) {
  ordered_json j;
  j["error_class"] = cls;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

} // namespace
} // namespace lsteeg::cli

int main(int argc, char** argv) {
  using namespace lsteeg;
  using namespace lsteeg::cli;

  CLI::App app{"LSTM autoencoder for EEG artifact detection and correction"};
  app.require_subcommand(1);
  Options o;
  std::optional<Command> chosen;

  auto add = [&](Command cmd, const std::string& help) {
    CLI::App* sub = app.add_subcommand(command_name(cmd), help);
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Random seed (required for synth, train, sweep)");
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->callback([&chosen, cmd] { chosen = cmd; });
    return sub;
  };

  CLI::App* synth = add(Command::synth, "Generate a labeled synthetic dataset");
  synth->add_option("--subjects", o.n_subjects, "Number of subjects");
  synth->add_option("--seconds", o.seconds, "Seconds of recording per subject");

  CLI::App* train = add(Command::train, "Train a model and write a checkpoint");
  train->add_option("--data", o.data, "Dataset file");
  train->add_option("--mode", o.mode, "detection | correction");
  train->add_option("--max-epochs", o.max_epochs, "Training epoch budget");
  train->add_option("--batch-size", o.batch_size, "Minibatch size");
  train->add_option("--lr", o.lr, "Peak learning rate");
  train->add_option("--n-latent", o.n_latent, "Latent size N_LS");
  train->add_flag("--quiet", o.quiet, "No per-epoch progress on stderr");

  for (auto [cmd, help] : {std::pair{Command::detect, "Score epochs and compute ROC/AUC"},
                           std::pair{Command::correct, "Write corrected epochs and RMSE summary"},
                           std::pair{Command::analyze_latent, "Latent activations, maps and interpolation"},
                           std::pair{Command::eval_psd, "PSD attenuation of reconstructions"}}) {
    CLI::App* sub = add(cmd, help);
    sub->add_option("--data", o.data, "Dataset file");
    sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
    sub->add_option("--partition", o.partition, "train | val | test | all");
    if (cmd == Command::detect) sub->add_option("--score-units", o.score_units, "microvolts | normalized");
    if (cmd == Command::analyze_latent) {
      sub->add_option("--k", o.k, "Number of most activated dimensions");
      sub->add_option("--steps", o.steps, "Interpolation steps M");
    }
  }

  CLI::App* sw = add(Command::sweep, "Train one model per hyperparameter value");
  sw->add_option("--data", o.data, "Dataset file");
  sw->add_option("--axis", o.axis, "n_latent | n_outer | n_inner");
  sw->add_option("--values", o.values, "Values to sweep")->delimiter(',');
  sw->add_option("--max-epochs", o.max_epochs, "Training epoch budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(error_class_name(ErrorClass::usage), e.what(), exit_code(ErrorClass::usage));
  }

  try {
    run(*chosen, o);
  } catch (const Error& e) {
    return report_error(error_class_name(e.error_class()), e.what(), exit_code(e.error_class()));
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(error_class_name(ErrorClass::io), e.what(), exit_code(ErrorClass::io));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
