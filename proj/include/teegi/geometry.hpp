#pragma once

// Hemispherical scalp geometry: points on the upper unit hemisphere, electrode
// montages, the deterministic LED lattice and the top-down projection.
//
// Axis convention: +x = nose, +y = left ear, +z = vertex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "teegi/error.hpp"

namespace teegi {

inline constexpr double kUnitTolerance = 1e-6;

struct ScalpPoint {
  double x{0.0};
  double y{0.0};
  double z{1.0};

  friend bool operator==(const ScalpPoint&, const ScalpPoint&) = default;
};

inline double norm(const ScalpPoint& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

inline void require_unit(const ScalpPoint& p, std::string_view what) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
      std::abs(norm(p) - 1.0) > kUnitTolerance) {
    throw std::invalid_argument(std::string(what) + ": point is not a unit vector");
  }
}

/// Point from spherical 10-20 style angles: inclination from the vertex and
/// azimuth from the nose toward the left ear, both in degrees.
inline ScalpPoint from_spherical_deg(double inclination_deg, double azimuth_deg) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double th = inclination_deg * deg;
  const double ph = azimuth_deg * deg;
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

/// Left/right reflection (y -> -y).
inline ScalpPoint mirror(const ScalpPoint& p) { return {p.x, -p.y, p.z}; }

/// Great-circle angle between two unit vectors, in [0, pi].
inline double geodesic_distance(const ScalpPoint& a, const ScalpPoint& b) {
  require_unit(a, "geodesic_distance");
  require_unit(b, "geodesic_distance");
  const double dot = a.x * b.x + a.y * b.y + a.z * b.z;
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

// Unchecked variant for inner loops over already validated points.
inline double geodesic_distance_unchecked(const ScalpPoint& a, const ScalpPoint& b) noexcept {
  const double dot = a.x * b.x + a.y * b.y + a.z * b.z;
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

struct PlanarPoint {
  double u{0.0};
  double v{0.0};
};

/// Polar azimuthal-equidistant projection: radius is the inclination, angle
/// is the azimuth. The vertex maps to the origin, +u points at the nose and
/// +v toward the left ear.
inline PlanarPoint azimuthal_projection(const ScalpPoint& p) {
  require_unit(p, "azimuthal_projection");
  if (p.z < -kUnitTolerance) throw std::invalid_argument("azimuthal_projection: point below the rim");
  const double inclination = std::acos(std::clamp(p.z, -1.0, 1.0));
  const double r_xy = std::hypot(p.x, p.y);
  if (r_xy == 0.0) return {0.0, 0.0};
  return {inclination * (p.x / r_xy), inclination * (p.y / r_xy)};
}

// ---------------------------------------------------------------------------
// LED lattice

class LedLattice {
 public:
  static constexpr std::size_t kDefaultSize = 402;

  LedLattice() = default;

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<ScalpPoint>& points() const noexcept { return points_; }
  const ScalpPoint& operator[](std::size_t i) const { return points_[i]; }
  std::string_view scheme() const noexcept { return "fibonacci-hemisphere-v1"; }

 private:
  explicit LedLattice(std::vector<ScalpPoint> pts) : points_(std::move(pts)) {}
  friend LedLattice generate_lattice(std::size_t n);

  std::vector<ScalpPoint> points_;
};

/// Fibonacci spiral over the upper hemisphere. Heights are spaced uniformly
/// in z (equal area), azimuths advance by the golden angle. Index order is
/// the wire order of the LEDs. A single point is placed at the vertex.
inline LedLattice generate_lattice(std::size_t n) {
  if (n == 0) throw std::invalid_argument("generate_lattice: n must be >= 1");
  std::vector<ScalpPoint> pts;
  pts.reserve(n);
  if (n == 1) {
    pts.push_back({0.0, 0.0, 1.0});
    return LedLattice(std::move(pts));
  }
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return LedLattice(std::move(pts));
}

// ---------------------------------------------------------------------------
// Electrode montages

struct Electrode {
  std::string label;
  ScalpPoint position;
};

class ElectrodeMontage {
 public:
  ElectrodeMontage() = default;

  ElectrodeMontage(std::string name, std::vector<Electrode> entries)
      : name_(std::move(name)), entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries_) {
      if (e.label.empty()) throw std::invalid_argument("montage: empty electrode label");
      if (!seen.insert(e.label).second) {
        throw std::invalid_argument("montage: duplicate electrode label '" + e.label + "'");
      }
      require_unit(e.position, "montage");
      if (e.position.z < -kUnitTolerance) {
        throw std::invalid_argument("montage: electrode '" + e.label + "' below the rim");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Electrode>& entries() const noexcept { return entries_; }
  const Electrode& operator[](std::size_t i) const { return entries_[i]; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].label == label) return i;
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view label) const {
    if (auto i = index_of(label)) return *i;
    throw std::invalid_argument("montage '" + name_ + "' lacks electrode " + std::string(label));
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.label);
    return out;
  }

  std::vector<ScalpPoint> positions() const {
    std::vector<ScalpPoint> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.position);
    return out;
  }

 private:
  std::string name_;
  std::vector<Electrode> entries_;
};

/// Electrodes required by the classifier and the synthetic generator.
inline constexpr std::string_view kRequiredElectrodes[] = {"C3", "C4", "Cz", "O1", "O2"};

inline void require_classifier_electrodes(const ElectrodeMontage& m) {
  for (auto label : kRequiredElectrodes) m.require(label);
}

/// 10-20 mirror label: odd numbers are left, even numbers right, 'z' is midline.
inline std::string mirror_label(std::string_view label) {
  std::string out(label);
  if (out.empty()) return out;
  const char last = out.back();
  if (last >= '0' && last <= '9') {
    std::size_t start = out.size();
    while (start > 0 && out[start - 1] >= '0' && out[start - 1] <= '9') --start;
    const int num = std::stoi(out.substr(start));
    const int mirrored = (num % 2 == 1) ? num + 1 : num - 1;
    out = out.substr(0, start) + std::to_string(mirrored);
  }
  return out;
}

/// Reflect every electrode across the midsagittal plane and swap labels to
/// their contralateral counterparts. Row order is kept.
inline ElectrodeMontage mirror_montage(const ElectrodeMontage& m) {
  std::vector<Electrode> out;
  out.reserve(m.size());
  for (const auto& e : m.entries()) out.push_back({mirror_label(e.label), mirror(e.position)});
  return ElectrodeMontage(m.name() + "-mirrored", std::move(out));
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Splits text into lines, stripping a UTF-8 BOM and trailing CR.
inline std::vector<std::string> split_lines(std::string_view text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(start, nl - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == text.size()) break;
    start = nl + 1;
  }
  return lines;
}

}  // namespace detail

/// Parse a montage CSV (`label,inclination_deg,azimuth_deg`).
inline ElectrodeMontage load_montage(std::string_view text, std::string name = "montage") {
  const auto lines = detail::split_lines(text);
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<Electrode> entries;
  std::unordered_set<std::string> seen;
  for (const auto& raw : lines) {
    ++lineno;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_csv_row(line);
    if (!header_seen) {
      if (cells.size() != 3 || cells[0] != "label" || cells[1] != "inclination_deg" ||
          cells[2] != "azimuth_deg") {
        throw ParseError(lineno, "expected header 'label,inclination_deg,azimuth_deg'");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) throw ParseError(lineno, "expected 3 columns, got " + std::to_string(cells.size()));
    if (cells[0].empty()) throw ParseError(lineno, "empty label");
    const auto incl = detail::parse_double(cells[1]);
    const auto az = detail::parse_double(cells[2]);
    if (!incl || !az) throw ParseError(lineno, "non-numeric angle");
    if (*incl < 0.0 || *incl > 90.0) {
      throw ParseError(lineno, "inclination " + cells[1] + " outside [0, 90] degrees");
    }
    if (!seen.insert(cells[0]).second) throw ParseError(lineno, "duplicate label '" + cells[0] + "'");
    entries.push_back({cells[0], from_spherical_deg(*incl, *az)});
  }
  if (!header_seen) throw ParseError(lineno, "missing header");
  return ElectrodeMontage(std::move(name), std::move(entries));
}

}  // namespace teegi
