#pragma once

// CSV / JSON writers for run outputs. Doubles are written with 17
// significant digits so files round-trip exactly.

#include "lsteeg/latent.hpp"
#include "lsteeg/pipeline.hpp"

#include <filesystem>
#include <ostream>
#include <string>

namespace lsteeg {

std::string format_double(double v);

void write_loss_history_csv(std::ostream& out, const MetricReport& r);
void write_roc_csv(std::ostream& out, const RocCurve& roc);
void write_sweep_csv(std::ostream& out, SweepAxis axis, std::span<const SweepRow> rows);
void write_activation_csv(std::ostream& out, const ActivationSummary& a);
// Long format: dim,band,channel,value.
void write_spectral_csv(std::ostream& out, const SpectralActivationMap& s, std::span<const BandDef> bands,
                        std::span<const std::string> channels);
void write_interpolation_csv(std::ostream& out, const Interpolation& path);
void write_attenuation_csv(std::ostream& out, const AttenuationCurve& c);
void write_scores_csv(std::ostream& out, std::span<const double> scores, std::span<const Label> labels);
void write_rmse_csv(std::ostream& out, const RmseSummary& r);

// Summary of a MetricReport (scalars only; curves go to their CSVs).
std::string metric_summary_json(const MetricReport& r);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace lsteeg
