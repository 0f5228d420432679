#pragma once

// Band-pass filtering, band power, baselines and signed ERD/ERS percentages.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teegi/signal.hpp"

namespace teegi {

struct BandSpec {
  double low{8.0};
  double high{12.0};
  std::string name{"mu"};

  void validate(double sample_rate) const {
    if (!(low > 0.0 && low < high && high < sample_rate / 2.0)) {
      throw std::invalid_argument("band '" + name + "' invalid for sample rate " + std::to_string(sample_rate) +
                                  " (need 0 < low < high < fs/2)");
    }
  }
};

// ---------------------------------------------------------------------------
// IIR

struct BiquadCoeffs {
  double b0{1.0}, b1{0.0}, b2{0.0};
  double a1{0.0}, a2{0.0};

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

/// Transposed direct form II section.
struct Biquad {
  BiquadCoeffs c;
  double s1{0.0}, s2{0.0};

  double operator()(double x) noexcept {
    const double y = c.b0 * x + s1;
    s1 = c.b1 * x - c.a1 * y + s2;
    s2 = c.b2 * x - c.a2 * y;
    return y;
  }
};

/// 4th-order Butterworth band-pass as two biquads. The 2nd-order analog
/// low-pass prototype is mapped to a band-pass around the prewarped edges
/// and discretized with the bilinear transform. Each section has one zero at
/// DC and one at Nyquist and is scaled to unit gain at the band center.
inline std::array<BiquadCoeffs, 2> design_butterworth_bandpass(const BandSpec& band, double fs) {
  band.validate(fs);
  using cd = std::complex<double>;
  const double k = 2.0 * fs;
  const double w1 = k * std::tan(std::numbers::pi * band.low / fs);
  const double w2 = k * std::tan(std::numbers::pi * band.high / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  const cd proto = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
  const cd half = proto * bw / 2.0;
  const cd root = std::sqrt(half * half - w0 * w0);
  const std::array<cd, 2> analog{half + root, half - root};

  const double omega0 = 2.0 * std::atan(w0 / k);
  std::array<BiquadCoeffs, 2> out;
  for (std::size_t i = 0; i < 2; ++i) {
    const cd zp = (k + analog[i]) / (k - analog[i]);
    BiquadCoeffs c;
    c.b0 = 1.0;
    c.b1 = 0.0;
    c.b2 = -1.0;
    c.a1 = -2.0 * zp.real();
    c.a2 = std::norm(zp);
    const double g = 1.0 / std::abs(c.response(omega0));
    c.b0 *= g;
    c.b2 *= g;
    out[i] = c;
  }
  return out;
}

/// Causal per-channel band-pass; state carries over between calls.
class BandpassFilter {
 public:
  BandpassFilter(const BandSpec& band, double sample_rate, std::size_t channels)
      : band_(band), fs_(sample_rate) {
    const auto coeffs = design_butterworth_bandpass(band, sample_rate);
    sections_.resize(channels);
    for (auto& ch : sections_) ch = {Biquad{coeffs[0]}, Biquad{coeffs[1]}};
  }

  const BandSpec& band() const noexcept { return band_; }
  std::size_t channels() const noexcept { return sections_.size(); }

  double process(std::size_t channel, double x) noexcept {
    auto& s = sections_[channel];
    return s[1](s[0](x));
  }

  SampleChunk process(const SampleChunk& in) {
    if (in.channel_count() != sections_.size()) throw std::invalid_argument("bandpass: channel count mismatch");
    if (in.sample_rate != fs_) throw std::invalid_argument("bandpass: sample rate mismatch");
    SampleChunk out = in;
    for (std::size_t c = 0; c < in.channel_count(); ++c) {
      for (auto& v : out.samples[c]) v = process(c, v);
    }
    return out;
  }

  void reset() noexcept {
    for (auto& ch : sections_) {
      for (auto& b : ch) b.s1 = b.s2 = 0.0;
    }
  }

 private:
  BandSpec band_;
  double fs_;
  std::vector<std::array<Biquad, 2>> sections_;
};

/// Filter a whole chunk list with one stateful filter.
inline std::vector<SampleChunk> bandpass(const std::vector<SampleChunk>& stream, const BandSpec& band) {
  std::vector<SampleChunk> out;
  if (stream.empty()) return out;
  BandpassFilter f(band, stream.front().sample_rate, stream.front().channel_count());
  out.reserve(stream.size());
  for (const auto& c : stream) out.push_back(f.process(c));
  return out;
}

// ---------------------------------------------------------------------------
// Power, baseline, ERD

/// Mean square over the window.
inline double band_power(std::span<const double> window) {
  if (window.empty()) throw std::invalid_argument("band_power: empty window");
  double acc = 0.0;
  for (double v : window) acc += v * v;
  return acc / static_cast<double>(window.size());
}

struct BandPowerFrame {
  double t{0.0};
  BandSpec band;
  std::vector<double> power;  // µV², montage order
};

struct BaselineState {
  std::vector<double> baseline;  // µV²
  double tau{30.0};              // s
  bool initialized{false};
  double last_t{0.0};
};

/// Exponential moving average toward the frame powers. The first frame
/// initializes the reference; a frozen update only advances the clock.
inline BaselineState update_baseline(BaselineState state, const BandPowerFrame& frame, bool frozen = false) {
  if (!(state.tau > 0.0)) throw std::invalid_argument("update_baseline: tau must be > 0");
  if (!state.initialized) {
    state.baseline = frame.power;
    state.initialized = true;
    state.last_t = frame.t;
    return state;
  }
  if (frame.power.size() != state.baseline.size()) {
    throw std::invalid_argument("update_baseline: electrode count mismatch");
  }
  const double dt = frame.t - state.last_t;
  state.last_t = frame.t;
  if (frozen || !(dt > 0.0)) return state;
  const double alpha = std::min(1.0, dt / state.tau);
  for (std::size_t i = 0; i < state.baseline.size(); ++i) {
    state.baseline[i] += alpha * (frame.power[i] - state.baseline[i]);
  }
  return state;
}

inline constexpr double kErdMin = -100.0;
inline constexpr double kErdMax = 400.0;
inline constexpr double kBaselineEpsilon = 1e-9;

struct ErdValue {
  double percent{0.0};
  bool valid{true};
};

/// 100·(P−B)/B clamped to [−100, 400]. Negative is desynchronization.
inline ErdValue compute_erd(double power, double baseline) {
  if (!(baseline >= kBaselineEpsilon) || !std::isfinite(power) || !std::isfinite(baseline)) return {0.0, false};
  const double s = 100.0 * (power - baseline) / baseline;
  return {std::clamp(s, kErdMin, kErdMax), true};
}

struct ErdFrame {
  double t{0.0};
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<bool> valid;

  std::size_t size() const noexcept { return values.size(); }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return i;
    }
    return std::nullopt;
  }

  bool all_valid() const noexcept {
    return std::all_of(valid.begin(), valid.end(), [](bool v) { return v; });
  }
};

/// True when the chunk is clean: every sample finite and within ±threshold.
inline bool artifact_gate(const SampleChunk& chunk, double threshold_uv = 100.0) {
  if (!(threshold_uv > 0.0)) throw std::invalid_argument("artifact_gate: threshold must be > 0");
  for (const auto& row : chunk.samples) {
    for (double v : row) {
      if (!std::isfinite(v) || std::abs(v) > threshold_uv) return false;
    }
  }
  return true;
}

}  // namespace teegi
