#pragma once

// End-to-end host: source -> processor -> avatar -> {puppet datagram, UI
// broadcast, state log} at the tick rate.
//
// Offline runs are single-threaded on a simulated clock and reproducible.
// Real-time runs use three roles: a producer thread pacing the source to the
// wall clock and running the DSP chain, the tick loop (caller's thread) that
// owns the avatar, and an I/O thread draining a bounded queue of outbound
// work. The tick loop only ever consumes the newest pending frame.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "teegi/avatar.hpp"
#include "teegi/bridge.hpp"
#include "teegi/config.hpp"
#include "teegi/net.hpp"
#include "teegi/pipeline.hpp"
#include "teegi/protocol.hpp"
#include "teegi/signal.hpp"

namespace teegi {

struct StateLogRecord {
  double t{0.0};
  std::uint32_t seq{0};
  Mode mode{Mode::Avatar};
  MotorState mental{MotorState::Rest};
  bool eyes_closed{false};
  std::array<double, 4> servos{};
  std::vector<std::string> labels;
  std::vector<double> erd;

  std::string to_json_line() const {
    nlohmann::ordered_json j;
    j["t"] = t;
    j["seq"] = seq;
    j["mode"] = to_string(mode);
    j["mental"] = to_string(mental);
    j["eyes_closed"] = eyes_closed;
    j["servos"] = servos;
    nlohmann::ordered_json e = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < labels.size(); ++i) e[labels[i]] = erd[i];
    j["erd"] = e;
    return j.dump();
  }

  static StateLogRecord from_json_line(std::string_view line) {
    const auto j = nlohmann::ordered_json::parse(line);
    StateLogRecord r;
    r.t = j.at("t").get<double>();
    r.seq = j.at("seq").get<std::uint32_t>();
    r.mode = mode_from_string(j.at("mode").get<std::string>()).value();
    r.mental = motor_state_from_string(j.at("mental").get<std::string>()).value();
    r.eyes_closed = j.at("eyes_closed").get<bool>();
    r.servos = j.at("servos").get<std::array<double, 4>>();
    for (auto it = j.at("erd").begin(); it != j.at("erd").end(); ++it) {
      r.labels.push_back(it.key());
      r.erd.push_back(it.value().get<double>());
    }
    return r;
  }
};

struct TickInfo {
  double t;
  std::uint32_t seq;
  const AvatarState& state;
  const ProcessedFrame* frame;  // newest frame consumed this tick, if any
  const FrameBytes& datagram;
};

using TickObserver = std::function<void(const TickInfo&)>;

struct RunStats {
  std::uint64_t ticks{0};
  std::uint64_t frames{0};
  std::uint64_t frames_skipped{0};
  double simulated_s{0.0};
  double wall_s{0.0};
  double max_drift_s{0.0};
  std::vector<double> tick_latency_ms;  // frame pickup -> encoded datagram
  std::uint64_t datagrams_sent{0};
  std::uint64_t send_failures{0};
  std::uint64_t io_overruns{0};

  double latency_percentile_ms(double q) const {
    if (tick_latency_ms.empty()) return 0.0;
    auto v = tick_latency_ms;
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
  }
};

inline std::unique_ptr<ChunkSource> make_source(const RunConfig& cfg, const ElectrodeMontage& montage) {
  const auto text = read_text_file(cfg.source_path);
  if (cfg.source == SourceKind::Synthetic) {
    return std::make_unique<SyntheticSource>(parse_scenario(text), montage, cfg.sample_rate, cfg.duration.value(),
                                             cfg.chunk_len, cfg.synth);
  }
  auto src = std::make_unique<ReplaySource>(text, cfg.chunk_len);
  if (src->channels() != montage.labels()) {
    throw ConfigError("source", "recording channels do not match the montage labels and order");
  }
  return src;
}

class Orchestrator {
 public:
  explicit Orchestrator(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.synth.seed = cfg_.seed;
    cfg_.avatar.tick_rate = cfg_.tick_rate;
    cfg_.validate();
    try {
      montage_ = load_montage(read_text_file(cfg_.montage_path), cfg_.montage_path.stem().string());
      require_classifier_electrodes(montage_);
    } catch (const std::exception& e) {
      throw ConfigError("montage", e.what());
    }
    try {
      source_ = make_source(cfg_, montage_);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("source", e.what());
    }
    try {
      processor_ = std::make_unique<EegProcessor>(cfg_.processor, montage_.labels(), source_->sample_rate());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dsp", e.what());
    }
    avatar_ = std::make_unique<Avatar>(montage_, generate_lattice(kWireLedCount), cfg_.avatar, cfg_.mode);
    if (cfg_.puppet_target) sender_ = std::make_unique<net::UdpSender>(*cfg_.puppet_target);
    if (cfg_.ui_endpoint) bridge_ = std::make_unique<UiBridge>(*cfg_.ui_endpoint);
  }

  const RunConfig& config() const noexcept { return cfg_; }
  const ElectrodeMontage& montage() const noexcept { return montage_; }
  const Avatar& avatar() const noexcept { return *avatar_; }
  std::optional<std::uint16_t> ui_port() const {
    return bridge_ ? std::optional<std::uint16_t>(bridge_->port()) : std::nullopt;
  }
  UiBridge* bridge() noexcept { return bridge_.get(); }

  /// Settable from a signal handler.
  std::atomic<bool>& stop_flag() noexcept { return stop_; }
  void request_stop() noexcept { stop_ = true; }

  RunStats run(const TickObserver& observer = {}) {
    std::ofstream log;
    if (cfg_.log_path) {
      log.open(*cfg_.log_path, std::ios::binary | std::ios::trunc);
      if (!log) throw std::runtime_error("cannot open log " + cfg_.log_path->string());
    }
    RunStats stats = cfg_.offline ? run_offline(log, observer) : run_realtime(log, observer);
    if (log.is_open()) log.flush();
    return stats;
  }

 private:
  std::uint64_t tick_limit() const {
    if (!cfg_.duration) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(std::floor(*cfg_.duration * cfg_.tick_rate + 1e-9));
  }

  StateLogRecord make_record(double t, std::uint32_t seq) const {
    const auto& s = avatar_->state();
    StateLogRecord r;
    r.t = t;
    r.seq = seq;
    r.mode = s.mode;
    r.mental = s.mental.motor;
    r.eyes_closed = s.mental.eyes_closed;
    r.servos = s.servo_angles;
    r.labels = montage_.labels();
    r.erd = avatar_->displayed_electrode_values();
    return r;
  }

  void apply_commands() {
    if (!bridge_) return;
    for (auto& cmd : bridge_->drain_commands()) {
      if (auto* m = std::get_if<SetModeCommand>(&cmd.body)) {
        avatar_->set_mode(m->mode);
      } else if (auto* a = std::get_if<PuppetActionCommand>(&cmd.body)) {
        try {
          avatar_->apply_puppet_action(a->action);
        } catch (const InvalidState&) {
          bridge_->reply(cmd.client, error_message("invalid-state"));
        }
      }
    }
  }

  // Step the avatar and encode; returns the datagram and the processing time.
  std::pair<FrameBytes, double> tick(const ProcessedFrame* frame, std::uint32_t seq) {
    const auto t0 = std::chrono::steady_clock::now();
    apply_commands();
    if (frame != nullptr) {
      avatar_->step(&frame->mental, &frame->erd);
    } else {
      avatar_->step(nullptr, nullptr);
    }
    auto bytes = encode(avatar_->state(), seq);
    const auto t1 = std::chrono::steady_clock::now();
    return {bytes, std::chrono::duration<double, std::milli>(t1 - t0).count()};
  }

  RunStats run_offline(std::ofstream& log, const TickObserver& observer) {
    RunStats stats;
    const auto wall0 = std::chrono::steady_clock::now();
    const double fs = source_->sample_rate();
    std::deque<ProcessedFrame> pending;
    bool exhausted = false;
    const auto limit = tick_limit();
    for (std::uint64_t k = 1; k <= limit && !stop_; ++k) {
      const auto needed = static_cast<std::uint64_t>(std::floor(static_cast<double>(k) * fs / cfg_.tick_rate + 1e-9));
      while (processor_->samples_consumed() < needed && !exhausted) {
        auto chunk = source_->next();
        if (!chunk) {
          exhausted = true;
          break;
        }
        for (auto& f : processor_->push(*chunk)) pending.push_back(std::move(f));
      }
      if (processor_->samples_consumed() < needed) break;

      std::optional<ProcessedFrame> latest;
      while (!pending.empty() && pending.front().end_sample <= needed) {
        if (latest) ++stats.frames_skipped;
        latest = std::move(pending.front());
        pending.pop_front();
        ++stats.frames;
      }
      const auto seq = static_cast<std::uint32_t>(k);
      const double t = static_cast<double>(k) / cfg_.tick_rate;
      auto [bytes, ms] = tick(latest ? &*latest : nullptr, seq);
      if (latest) stats.tick_latency_ms.push_back(ms);
      emit(bytes, seq, t, log, stats);
      if (observer) observer(TickInfo{t, seq, avatar_->state(), latest ? &*latest : nullptr, bytes});
      ++stats.ticks;
      stats.simulated_s = t;
    }
    stats.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return stats;
  }

  void emit(const FrameBytes& bytes, std::uint32_t seq, double t, std::ofstream& log, RunStats& stats) {
    if (sender_) {
      if (sender_->send(bytes)) ++stats.datagrams_sent;
      else ++stats.send_failures;
    }
    if (bridge_) bridge_->broadcast(state_message(avatar_->state(), seq));
    if (log.is_open()) log << make_record(t, seq).to_json_line() << '\n';
  }

  struct IoJob {
    FrameBytes bytes;
    std::string ui_line;
    std::string log_line;
  };

  RunStats run_realtime(std::ofstream& log, const TickObserver& observer) {
    using clock = std::chrono::steady_clock;
    RunStats stats;
    const double fs = source_->sample_rate();
    const auto start = clock::now() + std::chrono::milliseconds(5);

    // Producer -> tick loop: newest frame only.
    std::mutex slot_mutex;
    std::optional<ProcessedFrame> slot;
    std::uint64_t produced = 0;
    std::atomic<bool> source_done{false};

    std::thread producer([&] {
      try {
        while (!stop_) {
          auto chunk = source_->next();
          if (!chunk) break;
          const double end_t = static_cast<double>(chunk->first_index + chunk->length()) / fs;
          std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                    std::chrono::duration<double>(end_t)));
          auto frames = processor_->push(*chunk);
          if (frames.empty()) continue;
          std::lock_guard lock(slot_mutex);
          produced += frames.size();
          slot = std::move(frames.back());
        }
      } catch (...) {
        stop_ = true;
      }
      source_done = true;
    });

    // Tick loop -> I/O thread: bounded queue.
    constexpr std::size_t kQueueCapacity = 256;
    std::mutex io_mutex;
    std::condition_variable io_cv;
    std::deque<IoJob> io_queue;
    bool io_done = false;
    std::thread io([&] {
      while (true) {
        IoJob job;
        {
          std::unique_lock lock(io_mutex);
          io_cv.wait(lock, [&] { return io_done || !io_queue.empty(); });
          if (io_queue.empty()) return;
          job = std::move(io_queue.front());
          io_queue.pop_front();
        }
        if (sender_) {
          if (sender_->send(job.bytes)) ++stats.datagrams_sent;
          else ++stats.send_failures;
        }
        if (bridge_) bridge_->broadcast(std::move(job.ui_line));
        if (log.is_open()) log << job.log_line << '\n';
      }
    });

    const auto limit = tick_limit();
    std::uint64_t consumed_total = 0;
    for (std::uint64_t k = 1; k <= limit && !stop_; ++k) {
      const auto deadline =
          start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(k / cfg_.tick_rate));
      std::this_thread::sleep_until(deadline);
      const double drift = std::chrono::duration<double>(clock::now() - deadline).count();
      stats.max_drift_s = std::max(stats.max_drift_s, drift);

      std::optional<ProcessedFrame> latest;
      bool done_and_drained = false;
      {
        std::lock_guard lock(slot_mutex);
        if (slot) {
          latest = std::move(slot);
          slot.reset();
          stats.frames_skipped += produced - consumed_total - 1;
          consumed_total = produced;
        } else if (source_done) {
          done_and_drained = true;
        }
      }
      if (done_and_drained) break;

      const auto seq = static_cast<std::uint32_t>(k);
      const double t = static_cast<double>(k) / cfg_.tick_rate;
      auto [bytes, ms] = tick(latest ? &*latest : nullptr, seq);
      if (latest) {
        stats.tick_latency_ms.push_back(ms);
        ++stats.frames;
      }
      IoJob job{bytes, bridge_ ? state_message(avatar_->state(), seq) : std::string(),
                log.is_open() ? make_record(t, seq).to_json_line() : std::string()};
      {
        std::lock_guard lock(io_mutex);
        if (io_queue.size() >= kQueueCapacity) {
          ++stats.io_overruns;
        } else {
          io_queue.push_back(std::move(job));
        }
      }
      io_cv.notify_one();
      if (observer) observer(TickInfo{t, seq, avatar_->state(), latest ? &*latest : nullptr, bytes});
      ++stats.ticks;
      stats.simulated_s = t;
    }

    stop_ = true;
    producer.join();
    {
      std::lock_guard lock(io_mutex);
      io_done = true;
    }
    io_cv.notify_one();
    io.join();
    stats.wall_s = std::chrono::duration<double>(clock::now() - start).count();
    return stats;
  }

  RunConfig cfg_;
  ElectrodeMontage montage_;
  std::unique_ptr<ChunkSource> source_;
  std::unique_ptr<EegProcessor> processor_;
  std::unique_ptr<Avatar> avatar_;
  std::unique_ptr<net::UdpSender> sender_;
  std::unique_ptr<UiBridge> bridge_;
  std::atomic<bool> stop_{false};
};

}  // namespace teegi
