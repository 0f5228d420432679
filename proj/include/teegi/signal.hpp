#pragma once

// EEG sample streams: the scripted synthetic generator and CSV replay.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teegi/error.hpp"
#include "teegi/geometry.hpp"

namespace teegi {

/// A block of multichannel samples. `samples[c][i]` is channel c, sample i,
/// in microvolts. Rows share one length.
struct SampleChunk {
  double start_time{0.0};
  double sample_rate{0.0};
  std::vector<std::string> channels;
  std::vector<std::vector<double>> samples;
  // Global index of the first sample in the stream.
  std::uint64_t first_index{0};

  std::size_t length() const noexcept { return samples.empty() ? 0 : samples.front().size(); }
  std::size_t channel_count() const noexcept { return samples.size(); }
};

/// Pull-based stream of chunks. Single consumer.
class ChunkSource {
 public:
  virtual ~ChunkSource() = default;
  virtual std::optional<SampleChunk> next() = 0;
  virtual double sample_rate() const = 0;
  virtual const std::vector<std::string>& channels() const = 0;
};

// ---------------------------------------------------------------------------
// Scenario scripts

enum class EventKind { EyesClosed, EyesOpen, MoveLeftHand, MoveRightHand, MoveFeet, Rest };

inline constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::EyesClosed: return "eyes_closed";
    case EventKind::EyesOpen: return "eyes_open";
    case EventKind::MoveLeftHand: return "move_left_hand";
    case EventKind::MoveRightHand: return "move_right_hand";
    case EventKind::MoveFeet: return "move_feet";
    case EventKind::Rest: return "rest";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::EyesClosed, EventKind::EyesOpen, EventKind::MoveLeftHand,
                 EventKind::MoveRightHand, EventKind::MoveFeet, EventKind::Rest}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline constexpr bool is_movement(EventKind k) {
  return k == EventKind::MoveLeftHand || k == EventKind::MoveRightHand || k == EventKind::MoveFeet;
}

struct ScenarioEvent {
  double t{0.0};
  EventKind kind{EventKind::Rest};
  double duration{0.0};  // movements only
};

using Scenario = std::vector<ScenarioEvent>;

inline void validate_scenario(const Scenario& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& e = s[i];
    if (!std::isfinite(e.t) || e.t < 0.0) throw std::invalid_argument("scenario: event time must be >= 0");
    if (is_movement(e.kind) && !(e.duration > 0.0)) {
      throw std::invalid_argument("scenario: movement duration must be > 0");
    }
    if (i > 0 && e.t < s[i - 1].t) throw std::invalid_argument("scenario: events not sorted by time");
  }
}

/// JSON Lines: one `{"t": .., "kind": .., ["duration": ..]}` object per line.
inline Scenario parse_scenario(std::string_view text) {
  Scenario out;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(i + 1, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t") || !j["t"].is_number() || !j.contains("kind") ||
        !j["kind"].is_string()) {
      throw ParseError(i + 1, "event needs numeric 't' and string 'kind'");
    }
    ScenarioEvent ev;
    ev.t = j["t"].get<double>();
    const auto kind = event_kind_from_string(j["kind"].get<std::string>());
    if (!kind) throw ParseError(i + 1, "unknown event kind '" + j["kind"].get<std::string>() + "'");
    ev.kind = *kind;
    if (is_movement(ev.kind)) {
      if (!j.contains("duration") || !j["duration"].is_number()) {
        throw ParseError(i + 1, "movement event needs numeric 'duration'");
      }
      ev.duration = j["duration"].get<double>();
    }
    out.push_back(ev);
  }
  return out;
}

inline std::string write_scenario(const Scenario& s) {
  std::string out;
  for (const auto& e : s) {
    nlohmann::ordered_json j;
    j["t"] = e.t;
    j["kind"] = std::string(to_string(e.kind));
    if (is_movement(e.kind)) j["duration"] = e.duration;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pink noise

/// 1/f noise: Gaussian white noise through Paul Kellet's refined pinking
/// filter. Output is scaled to unit RMS in the stationary limit. The filter
/// is defined relative to the sample rate, so the 1/f region spans roughly
/// 2e-4·fs up to Nyquist.
class PinkNoise {
 public:
  explicit PinkNoise(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x7ee91u};
    rng_.seed(seq);
  }

  double operator()() { return filter(white_(rng_)) * inv_rms(); }

 private:
  double filter(double w) noexcept {
    b_[0] = 0.99886 * b_[0] + w * 0.0555179;
    b_[1] = 0.99332 * b_[1] + w * 0.0750759;
    b_[2] = 0.96900 * b_[2] + w * 0.1538520;
    b_[3] = 0.86650 * b_[3] + w * 0.3104856;
    b_[4] = 0.55000 * b_[4] + w * 0.5329522;
    b_[5] = -0.7616 * b_[5] - w * 0.0168980;
    const double out = b_[0] + b_[1] + b_[2] + b_[3] + b_[4] + b_[5] + b_[6] + w * 0.5362;
    b_[6] = w * 0.115926;
    return out;
  }

  // Stationary output RMS for unit-variance input, from the impulse response.
  static double inv_rms() {
    static const double value = [] {
      PinkNoise probe(0);
      double energy = 0.0;
      double x = 1.0;
      for (int i = 0; i < 200000; ++i) {
        const double h = probe.filter(x);
        energy += h * h;
        x = 0.0;
      }
      return 1.0 / std::sqrt(energy);
    }();
    return value;
  }

  std::mt19937_64 rng_;
  std::normal_distribution<double> white_{0.0, 1.0};
  std::array<double, 7> b_{};
};

/// Unit-RMS pink noise sequence, deterministic per seed.
inline std::vector<double> pink_noise(std::uint64_t seed, std::size_t n_samples, double sample_rate) {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("pink_noise: sample_rate must be > 0");
  PinkNoise gen(seed);
  std::vector<double> out(n_samples);
  for (auto& v : out) v = gen();
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SpikeInjection {
  double t{0.0};
  std::string label;
  double amplitude{0.0};  // µV, added to one sample
};

struct SynthConfig {
  double noise_rms{10.0};
  double rhythm_hz{10.0};
  double alpha_open{5.0};
  double alpha_closed{20.0};
  double mu_rest{10.0};
  double mu_active{3.0};
  double mu_rebound{15.0};
  double rebound_s{1.0};
  double leakage_lambda{0.5};  // rad
  std::uint64_t seed{1};
  std::vector<SpikeInjection> spikes;
};

/// Scripted EEG stand-in. Each channel is independent pink noise plus 10 Hz
/// rhythms: occipital alpha focal at O1/O2 and sensorimotor mu focal at
/// C3/C4/Cz. Non-focal electrodes pick up every focal source attenuated by
/// exp(-d/lambda). A focal electrode carries only its own source.
class SyntheticSource final : public ChunkSource {
 public:
  SyntheticSource(Scenario scenario, const ElectrodeMontage& montage, double sample_rate, double duration,
                  std::size_t chunk_len, SynthConfig cfg = {})
      : cfg_(std::move(cfg)), fs_(sample_rate), chunk_len_(chunk_len) {
    if (!(sample_rate >= 128.0 && sample_rate <= 1024.0)) {
      throw std::invalid_argument("synthesize: sample_rate must lie in [128, 1024] Hz");
    }
    if (!(duration > 0.0)) throw std::invalid_argument("synthesize: duration must be > 0");
    if (chunk_len == 0) throw std::invalid_argument("synthesize: chunk_len must be >= 1");
    if (!(cfg_.leakage_lambda > 0.0)) throw std::invalid_argument("synthesize: leakage_lambda must be > 0");
    validate_scenario(scenario);
    require_classifier_electrodes(montage);

    labels_ = montage.labels();
    total_ = static_cast<std::uint64_t>(std::llround(duration * sample_rate));
    build_timeline(scenario);

    const std::size_t n = montage.size();
    for (std::size_t c = 0; c < n; ++c) noise_.emplace_back(cfg_.seed, c);

    const std::array<std::string_view, 2> alpha_sites{"O1", "O2"};
    const std::array<std::string_view, 3> mu_sites{"C3", "C4", "Cz"};
    auto add_family = [&](auto sites, Family fam) {
      std::vector<std::size_t> focal_idx;
      for (auto s : sites) focal_idx.push_back(montage.require(s));
      for (std::size_t k = 0; k < focal_idx.size(); ++k) {
        Source src;
        src.family = fam;
        src.site = std::string(sites[k]);
        src.gain.resize(n);
        const auto& fp = montage[focal_idx[k]].position;
        for (std::size_t c = 0; c < n; ++c) {
          if (c == focal_idx[k]) {
            src.gain[c] = 1.0;
          } else if (std::find(focal_idx.begin(), focal_idx.end(), c) != focal_idx.end()) {
            src.gain[c] = 0.0;
          } else {
            src.gain[c] = std::exp(-geodesic_distance(fp, montage[c].position) / cfg_.leakage_lambda);
          }
        }
        sources_.push_back(std::move(src));
      }
    };
    add_family(alpha_sites, Family::Alpha);
    add_family(mu_sites, Family::Mu);

    for (const auto& sp : cfg_.spikes) {
      const auto c = montage.require(sp.label);
      spikes_.push_back({static_cast<std::uint64_t>(std::llround(sp.t * fs_)), c, sp.amplitude});
    }
  }

  double sample_rate() const override { return fs_; }
  const std::vector<std::string>& channels() const override { return labels_; }
  std::uint64_t total_samples() const noexcept { return total_; }

  std::optional<SampleChunk> next() override {
    if (pos_ >= total_) return std::nullopt;
    const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(chunk_len_, total_ - pos_));
    SampleChunk chunk;
    chunk.first_index = pos_;
    chunk.start_time = static_cast<double>(pos_) / fs_;
    chunk.sample_rate = fs_;
    chunk.channels = labels_;
    chunk.samples.assign(labels_.size(), std::vector<double>(len));
    std::vector<double> amp(sources_.size());
    for (std::size_t i = 0; i < len; ++i) {
      const std::uint64_t n = pos_ + i;
      const double t = static_cast<double>(n) / fs_;
      const double carrier = std::sin(2.0 * std::numbers::pi * cfg_.rhythm_hz * t);
      for (std::size_t s = 0; s < sources_.size(); ++s) amp[s] = amplitude(sources_[s], t) * carrier;
      for (std::size_t c = 0; c < labels_.size(); ++c) {
        double v = cfg_.noise_rms * noise_[c]();
        for (std::size_t s = 0; s < sources_.size(); ++s) v += sources_[s].gain[c] * amp[s];
        chunk.samples[c][i] = v;
      }
      for (const auto& sp : spikes_) {
        if (sp.index == n) chunk.samples[sp.channel][i] += sp.amplitude;
      }
    }
    pos_ += len;
    return chunk;
  }

  /// Scripted ground truth at time t.
  bool eyes_closed_at(double t) const {
    bool closed = false;
    for (const auto& [when, state] : eye_changes_) {
      if (when <= t) closed = state;
    }
    return closed;
  }

 private:
  enum class Family { Alpha, Mu };

  struct Source {
    Family family;
    std::string site;
    std::vector<double> gain;
  };

  struct Interval {
    std::string site;
    double start;
    double end;
  };

  struct Spike {
    std::uint64_t index;
    std::size_t channel;
    double amplitude;
  };

  void build_timeline(const Scenario& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& e = s[i];
      if (e.kind == EventKind::EyesClosed) eye_changes_.push_back({e.t, true});
      if (e.kind == EventKind::EyesOpen) eye_changes_.push_back({e.t, false});
      if (!is_movement(e.kind)) continue;
      double end = e.t + e.duration;
      // An explicit rest event cuts a movement short.
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        if (s[j].kind == EventKind::Rest && s[j].t > e.t) {
          end = std::min(end, s[j].t);
          break;
        }
      }
      const char* site = e.kind == EventKind::MoveLeftHand ? "C4" : e.kind == EventKind::MoveRightHand ? "C3" : "Cz";
      movements_.push_back({site, e.t, end});
    }
  }

  double amplitude(const Source& src, double t) const {
    if (src.family == Family::Alpha) return eyes_closed_at(t) ? cfg_.alpha_closed : cfg_.alpha_open;
    bool active = false;
    bool rebound = false;
    for (const auto& m : movements_) {
      if (m.site != src.site) continue;
      if (t >= m.start && t < m.end) active = true;
      else if (t >= m.end && t < m.end + cfg_.rebound_s) rebound = true;
    }
    if (active) return cfg_.mu_active;
    if (rebound) return cfg_.mu_rebound;
    return cfg_.mu_rest;
  }

  SynthConfig cfg_;
  double fs_;
  std::size_t chunk_len_;
  std::vector<std::string> labels_;
  std::uint64_t total_{0};
  std::uint64_t pos_{0};
  std::vector<PinkNoise> noise_;
  std::vector<Source> sources_;
  std::vector<std::pair<double, bool>> eye_changes_;
  std::vector<Interval> movements_;
  std::vector<Spike> spikes_;
};

/// Drain any source into a list of chunks.
inline std::vector<SampleChunk> collect(ChunkSource& src) {
  std::vector<SampleChunk> out;
  while (auto c = src.next()) out.push_back(std::move(*c));
  return out;
}

inline std::vector<SampleChunk> synthesize(const Scenario& scenario, const ElectrodeMontage& montage,
                                           double sample_rate, double duration, std::size_t chunk_len,
                                           SynthConfig cfg = {}) {
  SyntheticSource src(scenario, montage, sample_rate, duration, chunk_len, std::move(cfg));
  return collect(src);
}

/// Concatenate chunk rows back into one channel-major matrix.
inline std::vector<std::vector<double>> concatenate(const std::vector<SampleChunk>& chunks) {
  std::vector<std::vector<double>> out;
  for (const auto& ch : chunks) {
    if (out.empty()) out.resize(ch.channel_count());
    for (std::size_t c = 0; c < ch.channel_count(); ++c) {
      out[c].insert(out[c].end(), ch.samples[c].begin(), ch.samples[c].end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV recordings

inline std::string write_recording_csv(const std::vector<SampleChunk>& chunks) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  if (chunks.empty()) return "t\n";
  os << 't';
  for (const auto& l : chunks.front().channels) os << ',' << l;
  os << '\n';
  for (const auto& ch : chunks) {
    for (std::size_t i = 0; i < ch.length(); ++i) {
      os << static_cast<double>(ch.first_index + i) / ch.sample_rate;
      for (std::size_t c = 0; c < ch.channel_count(); ++c) os << ',' << ch.samples[c][i];
      os << '\n';
    }
  }
  return os.str();
}

class ReplaySource final : public ChunkSource {
 public:
  ReplaySource(std::string_view text, std::size_t chunk_len) : chunk_len_(chunk_len) {
    if (chunk_len == 0) throw std::invalid_argument("replay_csv: chunk_len must be >= 1");
    const auto lines = detail::split_lines(text);
    std::size_t lineno = 0;
    bool header = false;
    for (const auto& raw : lines) {
      ++lineno;
      const auto line = detail::trim(raw);
      if (line.empty()) continue;
      const auto cells = detail::split_csv_row(line);
      if (!header) {
        if (cells.size() < 2 || cells[0] != "t") throw ParseError(lineno, "expected header 't,<label>,...'");
        labels_.assign(cells.begin() + 1, cells.end());
        for (const auto& l : labels_) {
          if (l.empty()) throw ParseError(lineno, "empty channel label");
        }
        data_.resize(labels_.size());
        header = true;
        continue;
      }
      if (cells.size() != labels_.size() + 1) {
        throw ParseError(lineno, "ragged row: expected " + std::to_string(labels_.size() + 1) + " columns, got " +
                                     std::to_string(cells.size()));
      }
      const auto t = detail::parse_double(cells[0]);
      if (!t) throw ParseError(lineno, "non-numeric time");
      if (!times_.empty() && !(*t > times_.back())) throw ParseError(lineno, "time column is not strictly increasing");
      times_.push_back(*t);
      for (std::size_t c = 0; c < labels_.size(); ++c) {
        const auto v = detail::parse_double(cells[c + 1]);
        if (!v) throw ParseError(lineno, "non-numeric sample in column " + std::to_string(c + 2));
        data_[c].push_back(*v);
      }
    }
    if (!header) throw ParseError(lineno, "missing header");
    if (times_.size() < 2) throw ParseError(lineno, "need at least two samples to infer the sample rate");
    std::vector<double> deltas;
    deltas.reserve(times_.size() - 1);
    for (std::size_t i = 1; i < times_.size(); ++i) deltas.push_back(times_[i] - times_[i - 1]);
    const auto mid = deltas.begin() + static_cast<std::ptrdiff_t>(deltas.size() / 2);
    std::nth_element(deltas.begin(), mid, deltas.end());
    double median = *mid;
    if (deltas.size() % 2 == 0) {
      const double lower = *std::max_element(deltas.begin(), mid);
      median = 0.5 * (median + lower);
    }
    fs_ = 1.0 / median;
  }

  double sample_rate() const override { return fs_; }
  const std::vector<std::string>& channels() const override { return labels_; }
  std::size_t total_samples() const noexcept { return times_.size(); }

  std::optional<SampleChunk> next() override {
    if (pos_ >= times_.size()) return std::nullopt;
    const std::size_t len = std::min(chunk_len_, times_.size() - pos_);
    SampleChunk chunk;
    chunk.first_index = pos_;
    chunk.start_time = times_[pos_];
    chunk.sample_rate = fs_;
    chunk.channels = labels_;
    chunk.samples.resize(labels_.size());
    for (std::size_t c = 0; c < labels_.size(); ++c) {
      chunk.samples[c].assign(data_[c].begin() + static_cast<std::ptrdiff_t>(pos_),
                              data_[c].begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    }
    pos_ += len;
    return chunk;
  }

 private:
  std::size_t chunk_len_;
  std::vector<std::string> labels_;
  std::vector<double> times_;
  std::vector<std::vector<double>> data_;
  double fs_{0.0};
  std::size_t pos_{0};
};

inline std::vector<SampleChunk> replay_csv(std::string_view text, std::size_t chunk_len) {
  ReplaySource src(text, chunk_len);
  return collect(src);
}

}  // namespace teegi
