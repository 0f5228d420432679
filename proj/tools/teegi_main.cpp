// teegi: host pipeline, puppet emulator and offline renderers.
//
//   teegi run --config <path> [--offline] [--duration s] [--log <path>] [--seed n]
//   teegi emulate --listen <addr:port> [--dump-ppm dir]
//   teegi render --erd <csv> --out <ppm> [--montage <csv>]
//   teegi projection --out <json>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "teegi/config.hpp"
#include "teegi/emulator.hpp"
#include "teegi/orchestrator.hpp"
#include "teegi/topomap.hpp"

#ifndef TEEGI_DATA_DIR
#define TEEGI_DATA_DIR "data"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool>* g_stop = nullptr;
std::atomic<bool> g_local_stop{false};

void on_signal(int) {
  if (g_stop) g_stop->store(true);
  g_local_stop.store(true);
}

std::vector<double> load_erd_csv(const std::string& text, const teegi::ElectrodeMontage& montage) {
  using teegi::ParseError;
  std::vector<double> values(montage.size(), 0.0);
  std::vector<bool> seen(montage.size(), false);
  const auto lines = teegi::detail::split_lines(text);
  bool header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = teegi::detail::trim(lines[i]);
    if (line.empty()) continue;
    const auto cells = teegi::detail::split_csv_row(line);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "label" || cells[1] != "value") {
        throw ParseError(i + 1, "expected header 'label,value'");
      }
      header = true;
      continue;
    }
    if (cells.size() != 2) throw ParseError(i + 1, "expected 2 columns");
    const auto idx = montage.index_of(cells[0]);
    if (!idx) throw ParseError(i + 1, "electrode '" + cells[0] + "' not in montage");
    const auto v = teegi::detail::parse_double(cells[1]);
    if (!v) throw ParseError(i + 1, "non-numeric value");
    values[*idx] = *v;
    seen[*idx] = true;
  }
  if (!header) throw ParseError(lines.size(), "missing header");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ParseError(lines.size(), "no value for electrode " + montage[i].label);
  }
  return values;
}

int cmd_run(const std::string& config_path, bool offline, std::optional<double> duration,
            std::optional<std::string> log_path, std::optional<std::uint64_t> seed) {
  teegi::RunConfig cfg;
  std::unique_ptr<teegi::Orchestrator> orch;
  try {
    cfg = teegi::load_run_config(config_path);
    if (offline) cfg.offline = true;
    if (duration) cfg.duration = *duration;
    if (log_path) cfg.log_path = *log_path;
    if (seed) cfg.seed = *seed;
    orch = std::make_unique<teegi::Orchestrator>(cfg);
  } catch (const teegi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  g_stop = &orch->stop_flag();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (auto port = orch->ui_port()) std::cerr << "ui bridge listening on port " << *port << "\n";
  try {
    const auto stats = orch->run();
    g_stop = nullptr;
    std::cerr << "ticks " << stats.ticks << ", frames " << stats.frames << ", simulated " << stats.simulated_s
              << " s in " << stats.wall_s << " s wall, p99 tick latency " << stats.latency_percentile_ms(0.99)
              << " ms, max drift " << stats.max_drift_s * 1000.0 << " ms\n";
  } catch (const std::exception& e) {
    g_stop = nullptr;
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_emulate(const std::string& listen, std::optional<std::string> dump_dir, double dump_period,
                std::optional<double> duration) {
  teegi::EmulatorOptions opts;
  try {
    opts.listen = teegi::net::parse_endpoint(listen);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (dump_dir) opts.dump_dir = *dump_dir;
  opts.dump_period_s = dump_period;
  try {
    teegi::PuppetEmulator emu(opts);
    emu.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "emulator listening on " << opts.listen.host << ":" << emu.port() << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t last_report = 0;
    while (!g_local_stop) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      const auto s = emu.snapshot();
      if (s.accepted >= last_report + 30) {
        last_report = s.accepted;
        std::cerr << "seq " << s.last_seq << " accepted " << s.accepted << " dropped " << s.dropped << " errors "
                  << s.errors << "\n";
      }
      if (duration && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= *duration) break;
    }
    emu.stop();
    const auto s = emu.snapshot();
    std::cout << "accepted " << s.accepted << " dropped " << s.dropped << " errors " << s.errors << " last_seq "
              << s.last_seq << "\n";
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_render(const std::string& erd_path, const std::string& out_path, const std::string& montage_path,
               double blur, int size) {
  try {
    const auto montage = teegi::load_montage(teegi::read_text_file(montage_path));
    const auto values = load_erd_csv(teegi::read_text_file(erd_path), montage);
    const auto lattice = teegi::generate_lattice(teegi::LedLattice::kDefaultSize);
    teegi::TopomapConfig tc;
    tc.blur_sigma = blur;
    teegi::TopomapRenderer renderer(montage, lattice, tc);
    const auto field = renderer.render(values);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << teegi::render_ppm(field.colors, lattice, size);
  } catch (const teegi::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_projection(const std::string& out_path, std::size_t n) {
  try {
    const auto lattice = teegi::generate_lattice(n);
    nlohmann::ordered_json j;
    j["n"] = n;
    auto uv = nlohmann::ordered_json::array();
    for (const auto& p : lattice.points()) {
      const auto q = teegi::azimuthal_projection(p);
      uv.push_back({q.u, q.v});
    }
    j["uv"] = uv;
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << j.dump() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tangible EEG avatar host, puppet emulator and renderers"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the host pipeline");
  std::string config_path;
  bool offline = false;
  std::optional<double> duration;
  std::optional<std::string> log_path;
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_flag("--offline", offline, "Run as fast as possible on a simulated clock");
  run->add_option("--duration", duration, "Seconds of signal to process");
  run->add_option("--log", log_path, "State log output (JSON Lines)");
  run->add_option("--seed", seed, "Noise seed for the synthetic source");

  auto* emulate = app.add_subcommand("emulate", "Run the puppet emulator");
  std::string listen = "127.0.0.1:5454";
  std::optional<std::string> dump_dir;
  double dump_period = 1.0;
  std::optional<double> emu_duration;
  emulate->add_option("--listen", listen, "Listen address host:port");
  emulate->add_option("--dump-ppm", dump_dir, "Directory for periodic PPM dumps of the LED field");
  emulate->add_option("--dump-period", dump_period, "Seconds between PPM dumps");
  emulate->add_option("--duration", emu_duration, "Exit after this many seconds");

  auto* render = app.add_subcommand("render", "Render one ERD topomap to PPM");
  std::string erd_path, out_path;
  std::string montage_path = std::string(TEEGI_DATA_DIR) + "/montages/standard_32.csv";
  double blur = 0.0;
  int size = 256;
  render->add_option("--erd", erd_path, "CSV with header label,value")->required();
  render->add_option("--out", out_path, "Output PPM path")->required();
  render->add_option("--montage", montage_path, "Montage CSV");
  render->add_option("--blur", blur, "Diffusion blur sigma (rad)");
  render->add_option("--size", size, "Image edge in pixels");

  auto* projection = app.add_subcommand("projection", "Export the LED lattice projection table");
  std::string proj_out;
  std::size_t n = teegi::LedLattice::kDefaultSize;
  projection->add_option("--out", proj_out, "Output JSON path")->required();
  projection->add_option("--n", n, "Lattice size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config_path, offline, duration, log_path, seed);
  if (*emulate) return cmd_emulate(listen, dump_dir, dump_period, emu_duration);
  if (*render) return cmd_render(erd_path, out_path, montage_path, blur, size);
  if (*projection) return cmd_projection(proj_out, n);
  return kExitConfig;
}
