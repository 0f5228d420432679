#pragma once

// Run configuration: one JSON document, every tunable under a namespaced key.
//
// {
//   "source":   {"scenario": "path.jsonl"} | {"replay": "path.csv"},
//   "montage":  "path.csv",
//   "sample_rate": 512, "chunk_len": 32, "duration": 12, "seed": 1,
//   "tick_rate": 30, "mode": "avatar", "offline": false, "log": "state.jsonl",
//   "puppet":   {"target": "127.0.0.1:5454"},
//   "ui":       {"port": 8765, "bind": "127.0.0.1"},
//   "synth":      {...SynthConfig},
//   "dsp":        {"mu": {"low": 8, "high": 12}, "alpha": {...}, "window_s": 1, "hop_rate": 30,
//                  "tau_s": 30, "fixed_baseline": false, "artifact_threshold_uv": 100},
//   "classifier": {...ClassifierConfig},
//   "topomap":    {...TopomapConfig},
//   "avatar":     {...AvatarConfig servo/puppet fields}
// }
//
// Relative paths resolve against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "teegi/avatar.hpp"
#include "teegi/error.hpp"
#include "teegi/net.hpp"
#include "teegi/pipeline.hpp"
#include "teegi/signal.hpp"

namespace teegi {

enum class SourceKind { Synthetic, Replay };

struct RunConfig {
  SourceKind source{SourceKind::Synthetic};
  std::filesystem::path source_path;
  std::filesystem::path montage_path;
  double sample_rate{512.0};
  std::size_t chunk_len{32};
  std::optional<double> duration;
  std::uint64_t seed{1};
  double tick_rate{30.0};
  Mode mode{Mode::Avatar};
  bool offline{false};
  std::optional<std::filesystem::path> log_path;
  std::optional<net::Endpoint> puppet_target;
  std::optional<net::Endpoint> ui_endpoint;
  SynthConfig synth;
  ProcessorConfig processor;
  AvatarConfig avatar;

  /// Check invariants that do not depend on the JSON layer.
  void validate() const {
    if (source_path.empty()) throw ConfigError("source", "no source configured");
    if (!std::filesystem::exists(source_path)) throw ConfigError("source", "file not found: " + source_path.string());
    if (montage_path.empty()) throw ConfigError("montage", "missing");
    if (!std::filesystem::exists(montage_path)) throw ConfigError("montage", "file not found: " + montage_path.string());
    if (!(tick_rate >= 1.0 && tick_rate <= 120.0)) throw ConfigError("tick_rate", "must lie in [1, 120] Hz");
    if (chunk_len == 0) throw ConfigError("chunk_len", "must be >= 1");
    if (source == SourceKind::Synthetic) {
      if (!(sample_rate >= 128.0 && sample_rate <= 1024.0)) throw ConfigError("sample_rate", "must lie in [128, 1024] Hz");
      if (!duration) throw ConfigError("duration", "required for a synthetic source");
    }
    if (duration && !(*duration > 0.0)) throw ConfigError("duration", "must be > 0");
    try {
      processor.classifier.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("classifier", e.what());
    }
    try {
      avatar.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("avatar", e.what());
    }
    if (!(processor.window_s > 0.0)) throw ConfigError("dsp.window_s", "must be > 0");
    if (!(processor.hop_rate > 0.0)) throw ConfigError("dsp.hop_rate", "must be > 0");
    if (!(processor.tau_s > 0.0)) throw ConfigError("dsp.tau_s", "must be > 0");
    if (!(processor.artifact_threshold_uv > 0.0)) throw ConfigError("dsp.artifact_threshold_uv", "must be > 0");
  }
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where.empty() ? key : where + "." + key, std::string("wrong type: ") + e.what());
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root[key].is_object()) throw ConfigError(key, "must be an object");
  return root[key];
}

inline BandSpec read_band(const json& obj, const char* key, BandSpec band, const std::string& where) {
  if (!obj.contains(key)) return band;
  const auto& b = obj[key];
  if (!b.is_object()) throw ConfigError(where + "." + key, "must be an object");
  reject_unknown(b, where + "." + key, {"low", "high"});
  read(b, "low", band.low, where + "." + key);
  read(b, "high", band.high, where + "." + key);
  return band;
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using detail::read;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config", "top level must be an object");
  detail::reject_unknown(root, "",
                         {"source", "montage", "sample_rate", "chunk_len", "duration", "seed", "tick_rate", "mode",
                          "offline", "log", "puppet", "ui", "synth", "dsp", "classifier", "topomap", "avatar"});

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  RunConfig cfg;
  const auto& src = detail::section(root, "source");
  const bool has_scenario = src.contains("scenario");
  const bool has_replay = src.contains("replay");
  detail::reject_unknown(src, "source", {"scenario", "replay"});
  if (has_scenario == has_replay) throw ConfigError("source", "exactly one of 'scenario' or 'replay' is required");
  std::string source_path;
  read(src, has_scenario ? "scenario" : "replay", source_path, "source");
  cfg.source = has_scenario ? SourceKind::Synthetic : SourceKind::Replay;
  cfg.source_path = resolve(source_path);

  std::string montage;
  read(root, "montage", montage, "");
  if (!montage.empty()) cfg.montage_path = resolve(montage);

  read(root, "sample_rate", cfg.sample_rate, "");
  read(root, "chunk_len", cfg.chunk_len, "");
  if (root.contains("duration")) {
    double d = 0.0;
    read(root, "duration", d, "");
    cfg.duration = d;
  }
  read(root, "seed", cfg.seed, "");
  read(root, "tick_rate", cfg.tick_rate, "");
  if (root.contains("mode")) {
    std::string m;
    read(root, "mode", m, "");
    const auto mode = mode_from_string(m);
    if (!mode) throw ConfigError("mode", "must be 'avatar' or 'puppet'");
    cfg.mode = *mode;
  }
  read(root, "offline", cfg.offline, "");
  if (root.contains("log")) {
    std::string l;
    read(root, "log", l, "");
    cfg.log_path = resolve(l);
  }
  try {
    const auto& puppet = detail::section(root, "puppet");
    detail::reject_unknown(puppet, "puppet", {"target"});
    if (puppet.contains("target")) {
      std::string t;
      read(puppet, "target", t, "puppet");
      cfg.puppet_target = net::parse_endpoint(t);
    }
    const auto& ui = detail::section(root, "ui");
    detail::reject_unknown(ui, "ui", {"port", "bind"});
    if (ui.contains("port")) {
      net::Endpoint e;
      read(ui, "bind", e.host, "ui");
      int port = 0;
      read(ui, "port", port, "ui");
      if (port < 0 || port > 65535) throw ConfigError("ui.port", "out of range");
      e.port = static_cast<std::uint16_t>(port);
      cfg.ui_endpoint = e;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("puppet.target", e.what());
  }

  const auto& synth = detail::section(root, "synth");
  detail::reject_unknown(synth, "synth",
                         {"noise_rms", "rhythm_hz", "alpha_open", "alpha_closed", "mu_rest", "mu_active", "mu_rebound",
                          "rebound_s", "leakage_lambda", "spikes"});
  read(synth, "noise_rms", cfg.synth.noise_rms, "synth");
  read(synth, "rhythm_hz", cfg.synth.rhythm_hz, "synth");
  read(synth, "alpha_open", cfg.synth.alpha_open, "synth");
  read(synth, "alpha_closed", cfg.synth.alpha_closed, "synth");
  read(synth, "mu_rest", cfg.synth.mu_rest, "synth");
  read(synth, "mu_active", cfg.synth.mu_active, "synth");
  read(synth, "mu_rebound", cfg.synth.mu_rebound, "synth");
  read(synth, "rebound_s", cfg.synth.rebound_s, "synth");
  read(synth, "leakage_lambda", cfg.synth.leakage_lambda, "synth");
  if (synth.contains("spikes")) {
    if (!synth["spikes"].is_array()) throw ConfigError("synth.spikes", "must be an array");
    for (const auto& s : synth["spikes"]) {
      if (!s.is_object()) throw ConfigError("synth.spikes", "entries must be objects");
      SpikeInjection sp;
      read(s, "t", sp.t, "synth.spikes");
      read(s, "label", sp.label, "synth.spikes");
      read(s, "amplitude", sp.amplitude, "synth.spikes");
      cfg.synth.spikes.push_back(sp);
    }
  }

  const auto& dsp = detail::section(root, "dsp");
  detail::reject_unknown(dsp, "dsp",
                         {"mu", "alpha", "window_s", "hop_rate", "tau_s", "fixed_baseline", "artifact_threshold_uv"});
  cfg.processor.mu = detail::read_band(dsp, "mu", cfg.processor.mu, "dsp");
  cfg.processor.alpha = detail::read_band(dsp, "alpha", cfg.processor.alpha, "dsp");
  read(dsp, "window_s", cfg.processor.window_s, "dsp");
  read(dsp, "hop_rate", cfg.processor.hop_rate, "dsp");
  read(dsp, "tau_s", cfg.processor.tau_s, "dsp");
  read(dsp, "fixed_baseline", cfg.processor.fixed_baseline, "dsp");
  read(dsp, "artifact_threshold_uv", cfg.processor.artifact_threshold_uv, "dsp");

  const auto& cls = detail::section(root, "classifier");
  detail::reject_unknown(cls, "classifier", {"erd_enter", "erd_exit", "alpha_enter", "alpha_exit", "debounce_frames"});
  read(cls, "erd_enter", cfg.processor.classifier.erd_enter, "classifier");
  read(cls, "erd_exit", cfg.processor.classifier.erd_exit, "classifier");
  read(cls, "alpha_enter", cfg.processor.classifier.alpha_enter, "classifier");
  read(cls, "alpha_exit", cfg.processor.classifier.alpha_exit, "classifier");
  read(cls, "debounce_frames", cfg.processor.classifier.debounce_frames, "classifier");

  const auto& topo = detail::section(root, "topomap");
  detail::reject_unknown(topo, "topomap",
                         {"idw_exponent", "snap_radius", "neighbor_count", "blur_sigma", "value_range", "erd_color"});
  auto& tc = cfg.avatar.topomap;
  read(topo, "idw_exponent", tc.idw_exponent, "topomap");
  read(topo, "snap_radius", tc.snap_radius, "topomap");
  read(topo, "neighbor_count", tc.neighbor_count, "topomap");
  read(topo, "blur_sigma", tc.blur_sigma, "topomap");
  read(topo, "value_range", tc.value_range, "topomap");
  if (topo.contains("erd_color")) {
    std::string c;
    read(topo, "erd_color", c, "topomap");
    if (c == "red") tc.polarity = Polarity::ErdRed;
    else if (c == "blue") tc.polarity = Polarity::ErdBlue;
    else throw ConfigError("topomap.erd_color", "must be 'red' or 'blue'");
  }

  const auto& av = detail::section(root, "avatar");
  detail::reject_unknown(av, "avatar",
                         {"rest_deg", "raised_deg", "max_deg", "slew_deg_per_s", "focal_decay_rad", "puppet_magnitude"});
  read(av, "rest_deg", cfg.avatar.rest_deg, "avatar");
  read(av, "raised_deg", cfg.avatar.raised_deg, "avatar");
  read(av, "max_deg", cfg.avatar.max_deg, "avatar");
  read(av, "slew_deg_per_s", cfg.avatar.slew_deg_per_s, "avatar");
  read(av, "focal_decay_rad", cfg.avatar.focal_decay_rad, "avatar");
  read(av, "puppet_magnitude", cfg.avatar.puppet_magnitude, "avatar");
  cfg.avatar.tick_rate = cfg.tick_rate;
  cfg.synth.seed = cfg.seed;
  return cfg;
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config", "file not found: " + path.string());
  return parse_run_config(read_text_file(path), path.parent_path());
}

}  // namespace teegi
