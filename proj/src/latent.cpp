#include "lsteeg/latent.hpp"

#include "lsteeg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace lsteeg {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

// Diverging blue-white-red for values scaled to [-1, 1].
std::string color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (v >= 0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - v)));
  } else {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + v)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

} // namespace

Matrix encode_epochs(const LsteegModel& model, std::span<const Matrix> epochs) {
  require(!epochs.empty(), ErrorClass::dimension, "latent: no epochs");
  Matrix z(idx(epochs.size()), idx(model.config().n_latent));
  constexpr std::size_t batch = 32;
  for (std::size_t start = 0; start < epochs.size(); start += batch) {
    const std::size_t n = std::min(batch, epochs.size() - start);
    z.middleRows(idx(start), idx(n)) = model.encode_batch(epochs.subspan(start, n));
  }
  return z;
}

ActivationSummary cumulative_activation(const Matrix& encodings) {
  ActivationSummary s;
  s.cumulative.resize(static_cast<std::size_t>(encodings.cols()));
  for (Index j = 0; j < encodings.cols(); ++j) s.cumulative[static_cast<std::size_t>(j)] = encodings.col(j).cwiseAbs().sum();
  s.order.resize(s.cumulative.size());
  std::iota(s.order.begin(), s.order.end(), 0);
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t a, std::size_t b) { return s.cumulative[a] > s.cumulative[b]; });
  return s;
}

ActivationSummary cumulative_activation(const LsteegModel& model, std::span<const Matrix> epochs) {
  return cumulative_activation(encode_epochs(model, epochs));
}

std::vector<std::size_t> mads(const ActivationSummary& summary, std::size_t k) {
  require(k <= summary.order.size(), ErrorClass::config,
          "mads: K=" + std::to_string(k) + " exceeds the latent size " + std::to_string(summary.order.size()));
  return {summary.order.begin(), summary.order.begin() + static_cast<std::ptrdiff_t>(k)};
}

SpectralActivationMap spectral_activation(const Matrix& encodings, std::span<const Matrix> band_powers) {
  require(encodings.rows() == idx(band_powers.size()) && !band_powers.empty(), ErrorClass::dimension,
          "spectral_activation: one band-power matrix per encoded epoch required");
  SpectralActivationMap s;
  s.n_dims = static_cast<std::size_t>(encodings.cols());
  s.n_bands = static_cast<std::size_t>(band_powers[0].rows());
  s.n_channels = static_cast<std::size_t>(band_powers[0].cols());
  s.maps.assign(s.n_dims, Matrix::Zero(band_powers[0].rows(), band_powers[0].cols()));
  for (std::size_t e = 0; e < band_powers.size(); ++e) {
    require(band_powers[e].rows() == idx(s.n_bands) && band_powers[e].cols() == idx(s.n_channels),
            ErrorClass::dimension, "spectral_activation: band-power shapes differ");
    for (std::size_t j = 0; j < s.n_dims; ++j) s.maps[j] += encodings(idx(e), idx(j)) * band_powers[e];
  }
  return s;
}

SpectralActivationMap spectral_activation(const LsteegModel& model, std::span<const Matrix> epochs, double fs,
                                          std::span<const BandDef> bands) {
  std::vector<Matrix> powers;
  powers.reserve(epochs.size());
  for (const Matrix& e : epochs) powers.push_back(relative_band_power(e, fs, bands));
  return spectral_activation(encode_epochs(model, epochs), powers);
}

Matrix temporal_activation(const Matrix& encodings, std::span<const Matrix> epochs, std::size_t j) {
  require(encodings.rows() == idx(epochs.size()) && !epochs.empty(), ErrorClass::dimension,
          "temporal_activation: one encoding row per epoch required");
  require(j < static_cast<std::size_t>(encodings.cols()), ErrorClass::config,
          "temporal_activation: dimension index out of range");
  Matrix alpha = Matrix::Zero(epochs[0].rows(), epochs[0].cols());
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    require(epochs[e].rows() == alpha.rows() && epochs[e].cols() == alpha.cols(), ErrorClass::dimension,
            "temporal_activation: epoch shapes differ");
    alpha += encodings(idx(e), idx(j)) * epochs[e];
  }
  return alpha;
}

Matrix temporal_activation(const LsteegModel& model, std::span<const Matrix> epochs, std::size_t j) {
  return temporal_activation(encode_epochs(model, epochs), epochs, j);
}

Interpolation interpolate(const LsteegModel& model, const Matrix& x_a, const Matrix& x_b, std::size_t steps) {
  require(steps >= 1, ErrorClass::config, "interpolate: M must be >= 1");
  const Vector za = model.encode(x_a);
  const Vector zb = model.encode(x_b);
  Interpolation out;
  out.latents.resize(idx(steps + 1), za.size());
  for (std::size_t m = 0; m <= steps; ++m) {
    const double lambda = static_cast<double>(m) / static_cast<double>(steps);
    out.lambdas.push_back(lambda);
    out.latents.row(idx(m)) = ((1.0 - lambda) * za + lambda * zb).transpose();
  }
  out.decoded = model.decode_batch(out.latents);
  return out;
}

std::vector<double> interpolation_step_mse(const Interpolation& path) {
  std::vector<double> out;
  for (std::size_t m = 1; m < path.decoded.size(); ++m) out.push_back(mse(path.decoded[m], path.decoded[m - 1]));
  return out;
}

void write_topomap_svg(std::ostream& out, std::span<const double> values, const std::string& title) {
  const auto& pos = standard_positions();
  require(values.size() == pos.size(), ErrorClass::dimension, "topomap: expects one value per standard channel");
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) vmax = 1.0;
  constexpr double size = 240.0, center = 120.0, radius = 100.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20 << "\">\n";
  out << "<text x=\"" << center << "\" y=\"14\" text-anchor=\"middle\" font-size=\"12\">" << title << "</text>\n";
  out << "<circle cx=\"" << center << "\" cy=\"" << center + 20 << "\" r=\"" << radius + 10
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < pos.size(); ++k) {
    const double x = center + radius * pos[k].x;
    const double y = center + 20 - radius * pos[k].y;
    out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"12\" fill=\"" << color(values[k] / vmax)
        << "\" stroke=\"gray\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << y + 4 << "\" text-anchor=\"middle\" font-size=\"8\">"
        << kStandardChannels[k] << "</text>\n";
  }
  out << "</svg>\n";
}

} // namespace lsteeg
