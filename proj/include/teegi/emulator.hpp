#pragma once

// Software stand-in for the embedded puppet board: receives frames over UDP
// on its own thread and keeps the last accepted one on display.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "teegi/net.hpp"
#include "teegi/protocol.hpp"
#include "teegi/topomap.hpp"

namespace teegi {

struct EmulatorOptions {
  net::Endpoint listen{"127.0.0.1", kDefaultPuppetPort};
  std::optional<std::filesystem::path> dump_dir;
  double dump_period_s{1.0};
};

class PuppetEmulator {
 public:
  explicit PuppetEmulator(EmulatorOptions opts)
      : opts_(std::move(opts)), socket_(opts_.listen), lattice_(generate_lattice(kWireLedCount)) {
    if (opts_.dump_dir) std::filesystem::create_directories(*opts_.dump_dir);
  }

  ~PuppetEmulator() { stop(); }

  PuppetEmulator(const PuppetEmulator&) = delete;
  PuppetEmulator& operator=(const PuppetEmulator&) = delete;

  std::uint16_t port() const { return socket_.port(); }

  void start() {
    if (thread_.joinable()) return;
    running_ = true;
    epoch_ = std::chrono::steady_clock::now();
    thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    running_ = false;
    if (thread_.joinable()) thread_.join();
  }

  EmulatorState snapshot() const {
    std::lock_guard lock(mutex_);
    return state_;
  }

  std::uint64_t dumps_written() const noexcept { return dumps_; }

 private:
  void loop() {
    double last_dump = -1e9;
    while (running_) {
      auto dgram = socket_.receive(std::chrono::milliseconds(50));
      if (!dgram) continue;
      const double now = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
      std::optional<PuppetFrame> to_dump;
      {
        std::lock_guard lock(mutex_);
        const auto before = state_.accepted;
        state_ = emulator_ingest(std::move(state_), *dgram, now);
        if (opts_.dump_dir && state_.accepted != before && now - last_dump >= opts_.dump_period_s) {
          to_dump = state_.displayed;
          last_dump = now;
        }
      }
      if (to_dump) dump(*to_dump);
    }
  }

  void dump(const PuppetFrame& f) {
    std::vector<Rgb> colors(kWireLedCount);
    for (std::size_t i = 0; i < kWireLedCount; ++i) colors[i] = f.led(i);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%010u.ppm", f.seq);
    std::ofstream out(*opts_.dump_dir / name, std::ios::binary);
    out << render_ppm(colors, lattice_);
    ++dumps_;
  }

  EmulatorOptions opts_;
  net::UdpReceiver socket_;
  LedLattice lattice_;
  mutable std::mutex mutex_;
  EmulatorState state_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> dumps_{0};
  std::chrono::steady_clock::time_point epoch_;
  std::thread thread_;
};

}  // namespace teegi
