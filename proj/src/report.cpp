#include "lsteeg/report.hpp"

#include "lsteeg/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace lsteeg {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_loss_history_csv(std::ostream& out, const MetricReport& r) {
  out << "epoch,train_loss,val_loss,learning_rate\n";
  for (std::size_t k = 0; k < r.train_loss.size(); ++k) {
    out << k << ',' << format_double(r.train_loss[k]) << ',' << format_double(r.val_loss[k]) << ','
        << format_double(r.learning_rate[k]) << '\n';
  }
}

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "threshold,fpr,tpr,true_positives,false_positives\n";
  for (const RocPoint& p : roc.points) {
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
        << p.true_positives << ',' << p.false_positives << '\n';
  }
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, std::span<const SweepRow> rows) {
  out << to_string(axis) << ",test_mse,epochs_run,param_count\n";
  for (const SweepRow& r : rows) {
    out << r.value << ',' << format_double(r.test_mse) << ',' << r.epochs_run << ',' << r.param_count << '\n';
  }
}

void write_activation_csv(std::ostream& out, const ActivationSummary& a) {
  out << "rank,dim,cumulative_activation\n";
  for (std::size_t k = 0; k < a.order.size(); ++k) {
    out << k << ',' << a.order[k] << ',' << format_double(a.cumulative[a.order[k]]) << '\n';
  }
}

void write_spectral_csv(std::ostream& out, const SpectralActivationMap& s, std::span<const BandDef> bands,
                        std::span<const std::string> channels) {
  require(bands.size() == s.n_bands && channels.size() == s.n_channels, ErrorClass::dimension,
          "spectral csv: band/channel names do not match the map");
  out << "dim,band,channel,value\n";
  for (std::size_t j = 0; j < s.n_dims; ++j) {
    for (std::size_t b = 0; b < s.n_bands; ++b) {
      for (std::size_t c = 0; c < s.n_channels; ++c) {
        out << j << ',' << bands[b].name << ',' << channels[c] << ',' << format_double(s.at(j, b, c)) << '\n';
      }
    }
  }
}

void write_interpolation_csv(std::ostream& out, const Interpolation& path) {
  const std::vector<double> steps = interpolation_step_mse(path);
  out << "step,lambda,mse_to_previous\n";
  for (std::size_t m = 0; m < path.lambdas.size(); ++m) {
    out << m << ',' << format_double(path.lambdas[m]) << ',';
    if (m > 0) out << format_double(steps[m - 1]);
    out << '\n';
  }
}

void write_attenuation_csv(std::ostream& out, const AttenuationCurve& c) {
  out << "frequency_hz,attenuation_db\n";
  for (std::size_t k = 0; k < c.freqs.size(); ++k) {
    out << format_double(c.freqs[k]) << ',' << format_double(c.db[k]) << '\n';
  }
}

void write_scores_csv(std::ostream& out, std::span<const double> scores, std::span<const Label> labels) {
  require(labels.empty() || labels.size() == scores.size(), ErrorClass::dimension,
          "scores csv: one label per score required");
  out << "epoch,score" << (labels.empty() ? "" : ",label") << '\n';
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out << k << ',' << format_double(scores[k]);
    if (!labels.empty()) out << ',' << to_string(labels[k]);
    out << '\n';
  }
}

void write_rmse_csv(std::ostream& out, const RmseSummary& r) {
  out << "epoch,rmse\n";
  for (std::size_t k = 0; k < r.per_epoch.size(); ++k) out << k << ',' << format_double(r.per_epoch[k]) << '\n';
}

std::string metric_summary_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["epochs_run"] = r.train_loss.size();
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  j["final_train_loss"] = r.train_loss.empty() ? 0.0 : r.train_loss.back();
  j["stopped_early"] = r.stopped_early;
  if (r.rmse_mean) j["rmse_mean"] = *r.rmse_mean;
  if (r.rmse_sd) j["rmse_sd"] = *r.rmse_sd;
  if (r.roc) {
    j["auc"] = r.roc->auc;
    j["n_positive"] = r.roc->n_positive;
    j["n_negative"] = r.roc->n_negative;
  }
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorClass::io, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) fail(ErrorClass::io, "write failed: " + path.string());
}

} // namespace lsteeg
