#pragma once

// Scalp topography on the LED lattice: inverse-distance interpolation from
// electrodes, a spherical Gaussian blur standing in for the diffuser cap,
// and the diverging LED colormap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teegi/geometry.hpp"

namespace teegi {

struct Rgb {
  std::uint8_t r{0}, g{0}, b{0};
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class Polarity {
  ErdRed,  // desynchronization red, synchronization blue
  ErdBlue,
};

struct TopomapConfig {
  double idw_exponent{2.0};
  double snap_radius{1e-6};     // rad
  std::size_t neighbor_count{0};  // 0 = every electrode
  double blur_sigma{0.0};       // rad, 0 disables the blur
  double value_range{100.0};    // percent at full brightness
  Polarity polarity{Polarity::ErdRed};

  void validate() const {
    if (!(idw_exponent > 0.0)) throw std::invalid_argument("topomap: idw_exponent must be > 0");
    if (!(snap_radius >= 0.0)) throw std::invalid_argument("topomap: snap_radius must be >= 0");
    if (!(blur_sigma >= 0.0)) throw std::invalid_argument("topomap: blur_sigma must be >= 0");
    if (!(value_range > 0.0)) throw std::invalid_argument("topomap: value_range must be > 0");
  }
};

struct LedField {
  std::vector<double> values;
  std::vector<Rgb> colors;
};

namespace detail {

// Normalized IDW weights of every electrode for one query point.
inline std::vector<double> idw_weights(std::span<const ScalpPoint> electrodes, const ScalpPoint& q,
                                       const TopomapConfig& cfg) {
  const std::size_t n = electrodes.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = geodesic_distance_unchecked(electrodes[i], q);

  std::vector<double> w(n, 0.0);
  const auto nearest = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
  if (dist[nearest] <= cfg.snap_radius) {
    w[nearest] = 1.0;
    return w;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = (cfg.neighbor_count == 0 || cfg.neighbor_count >= n) ? n : cfg.neighbor_count;
  if (k < n) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  double total = 0.0;
  for (auto i : order) {
    w[i] = 1.0 / std::pow(dist[i], cfg.idw_exponent);
    total += w[i];
  }
  for (auto i : order) w[i] /= total;
  return w;
}

}  // namespace detail

/// Interpolated value at one scalp point.
inline double interpolate_at(std::span<const double> values, const ElectrodeMontage& montage, const ScalpPoint& q,
                             const TopomapConfig& cfg = {}) {
  if (montage.empty()) throw std::invalid_argument("interpolate: empty montage");
  if (values.size() != montage.size()) throw std::invalid_argument("interpolate: value count != electrode count");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("interpolate: non-finite electrode value");
  }
  require_unit(q, "interpolate");
  const auto pos = montage.positions();
  const auto w = detail::idw_weights(pos, q, cfg);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * values[i];
  return acc;
}

inline std::vector<double> interpolate(std::span<const double> values, const ElectrodeMontage& montage,
                                       const LedLattice& lattice, const TopomapConfig& cfg = {}) {
  std::vector<double> out;
  out.reserve(lattice.size());
  for (const auto& q : lattice.points()) out.push_back(interpolate_at(values, montage, q, cfg));
  return out;
}

/// Diverging map: 0 is off, negative ramps to full red at -range and
/// positive to full blue at +range (swapped by Polarity::ErdBlue).
inline Rgb colormap(double v, double range = 100.0, Polarity polarity = Polarity::ErdRed) {
  if (!(range > 0.0)) throw std::invalid_argument("colormap: range must be > 0");
  if (!std::isfinite(v) || v == 0.0) return {};
  const double level = std::min(std::abs(v) / range, 1.0);
  const auto c = static_cast<std::uint8_t>(std::lround(level * 255.0));
  const bool red = (v < 0.0) == (polarity == Polarity::ErdRed);
  return red ? Rgb{c, 0, 0} : Rgb{0, 0, c};
}

/// Gaussian kernel over geodesic distance on the lattice, balanced to be
/// doubly stochastic: rows sum to one (constants survive) and columns sum to
/// one (total brightness survives), which plain row normalization breaks
/// near the rim.
class DiffusionKernel {
 public:
  DiffusionKernel(const LedLattice& lattice, double sigma) : n_(lattice.size()), sigma_(sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("diffuse: blur_sigma must be >= 0");
    if (sigma == 0.0) return;
    weights_.assign(n_ * n_, 0.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double d = geodesic_distance_unchecked(lattice[i], lattice[j]);
        weights_[i * n_ + j] = std::exp(-d * d * inv);
      }
    }
    // Symmetric Sinkhorn scaling: find x with x_i·(W x)_i = 1, then use
    // diag(x)·W·diag(x).
    std::vector<double> x(n_, 1.0), wx(n_);
    for (int iter = 0; iter < 10000; ++iter) {
      double worst = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += weights_[i * n_ + j] * x[j];
        wx[i] = acc;
        worst = std::max(worst, std::abs(x[i] * acc - 1.0));
      }
      if (worst < 1e-13) break;
      for (std::size_t i = 0; i < n_; ++i) x[i] = std::sqrt(x[i] / wx[i]);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        weights_[i * n_ + j] *= x[i] * x[j];
        total += weights_[i * n_ + j];
      }
      for (std::size_t j = 0; j < n_; ++j) weights_[i * n_ + j] /= total;
    }
  }

  double sigma() const noexcept { return sigma_; }
  bool identity() const noexcept { return sigma_ == 0.0; }
  double weight(std::size_t i, std::size_t j) const { return identity() ? (i == j ? 1.0 : 0.0) : weights_[i * n_ + j]; }

  std::vector<double> apply(std::span<const double> field) const {
    if (field.size() != n_) throw std::invalid_argument("diffuse: field size != lattice size");
    if (identity()) return {field.begin(), field.end()};
    std::vector<double> out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = &weights_[i * n_];
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j) acc += row[j] * field[j];
      out[i] = acc;
    }
    return out;
  }

 private:
  std::size_t n_;
  double sigma_;
  std::vector<double> weights_;
};

inline std::vector<double> diffuse(std::span<const double> field, const LedLattice& lattice, double blur_sigma) {
  return DiffusionKernel(lattice, blur_sigma).apply(field);
}

/// Precomputed electrode-to-LED pipeline: interpolate, diffuse, colormap.
class TopomapRenderer {
 public:
  TopomapRenderer(const ElectrodeMontage& montage, const LedLattice& lattice, TopomapConfig cfg = {})
      : cfg_(cfg), n_electrodes_(montage.size()), n_leds_(lattice.size()), kernel_(lattice, cfg.blur_sigma) {
    cfg_.validate();
    if (montage.empty()) throw std::invalid_argument("interpolate: empty montage");
    const auto pos = montage.positions();
    weights_.reserve(n_leds_ * n_electrodes_);
    for (const auto& q : lattice.points()) {
      const auto w = detail::idw_weights(pos, q, cfg_);
      weights_.insert(weights_.end(), w.begin(), w.end());
    }
  }

  const TopomapConfig& config() const noexcept { return cfg_; }
  std::size_t led_count() const noexcept { return n_leds_; }

  std::vector<double> interpolate(std::span<const double> values) const {
    if (values.size() != n_electrodes_) throw std::invalid_argument("interpolate: value count != electrode count");
    std::vector<double> out(n_leds_, 0.0);
    for (std::size_t i = 0; i < n_leds_; ++i) {
      const double* row = &weights_[i * n_electrodes_];
      double acc = 0.0;
      for (std::size_t e = 0; e < n_electrodes_; ++e) acc += row[e] * values[e];
      out[i] = acc;
    }
    return out;
  }

  LedField render(std::span<const double> electrode_values) const {
    LedField f;
    f.values = kernel_.apply(interpolate(electrode_values));
    f.colors.reserve(f.values.size());
    for (double v : f.values) f.colors.push_back(colormap(v, cfg_.value_range, cfg_.polarity));
    return f;
  }

  LedField blank() const { return {std::vector<double>(n_leds_, 0.0), std::vector<Rgb>(n_leds_)}; }

 private:
  TopomapConfig cfg_;
  std::size_t n_electrodes_;
  std::size_t n_leds_;
  DiffusionKernel kernel_;
  std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// PPM dump

/// Binary PPM (P6) of the top-down view: nose up, the subject's left ear on
/// the image's left. One filled disc per LED on a black background with a
/// grey head outline.
inline std::string render_ppm(std::span<const Rgb> colors, const LedLattice& lattice, int size = 256) {
  if (colors.size() != lattice.size()) throw std::invalid_argument("render_ppm: color count != lattice size");
  if (size < 16) throw std::invalid_argument("render_ppm: image too small");
  const double c = (size - 1) / 2.0;
  const double scale = 0.45 * size / (std::numbers::pi / 2.0);
  const double disc = std::max(1.5, size / 70.0);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(size) * size * 3, 0);
  auto put = [&](int x, int y, Rgb col) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    auto* p = &px[(static_cast<std::size_t>(y) * size + x) * 3];
    p[0] = col.r;
    p[1] = col.g;
    p[2] = col.b;
  };
  const Rgb outline{64, 64, 64};
  const double rim = scale * std::numbers::pi / 2.0 + disc + 1.0;
  for (int k = 0; k < 4 * size; ++k) {
    const double a = 2.0 * std::numbers::pi * k / (4.0 * size);
    put(static_cast<int>(std::lround(c + rim * std::cos(a))), static_cast<int>(std::lround(c + rim * std::sin(a))),
        outline);
  }
  for (int k = 0; k < static_cast<int>(size / 30) + 2; ++k) {
    put(static_cast<int>(std::lround(c)), static_cast<int>(std::lround(c - rim)) - k, outline);
  }
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto uv = azimuthal_projection(lattice[i]);
    const double x = c - uv.v * scale;
    const double y = c - uv.u * scale;
    const int r = static_cast<int>(std::ceil(disc));
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int px_x = static_cast<int>(std::lround(x)) + dx;
        const int px_y = static_cast<int>(std::lround(y)) + dy;
        if (std::hypot(px_x - x, px_y - y) <= disc) put(px_x, px_y, colors[i]);
      }
    }
  }
  std::string out = "P6\n" + std::to_string(size) + " " + std::to_string(size) + "\n255\n";
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

}  // namespace teegi
