#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "teegi/pipeline.hpp"

using namespace teegi;

namespace {

constexpr double kFs = 512.0;

std::vector<ProcessedFrame> process(const Scenario& s, double duration, std::size_t chunk, SynthConfig synth = {},
                                    ProcessorConfig cfg = {}, double scale = 1.0) {
  const auto m = oracle::montage32();
  auto chunks = synthesize(s, m, kFs, duration, chunk, synth);
  EegProcessor proc(cfg, m.labels(), kFs);
  std::vector<ProcessedFrame> out;
  for (auto& c : chunks) {
    for (auto& row : c.samples) {
      for (auto& v : row) v *= scale;
    }
    for (auto& f : proc.push(c)) out.push_back(std::move(f));
  }
  return out;
}

double erd_at(const ProcessedFrame& f, const char* label) { return f.erd.values[*f.erd.index_of(label)]; }

const ProcessedFrame& frame_near(const std::vector<ProcessedFrame>& frames, double t) {
  const ProcessedFrame* best = &frames.front();
  for (const auto& f : frames) {
    if (std::abs(f.t - t) < std::abs(best->t - t)) best = &f;
  }
  return *best;
}

}  // namespace

TEST(Processor, FrameScheduleIsThirtyHertzAfterFirstWindow) {
  const auto frames = process({}, 4.0, 32);
  ASSERT_FALSE(frames.empty());
  EXPECT_GE(frames.front().end_sample, 512u);
  EXPECT_LT(frames.front().t, 1.0 + 1.0 / 30.0 + 1e-9);
  // 4 s of data, frames from t=1 s onward at 30 Hz
  EXPECT_NEAR(static_cast<double>(frames.size()), 3.0 * 30.0 + 1.0, 1.0);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double dt = frames[i].t - frames[i - 1].t;
    EXPECT_NEAR(dt, 1.0 / 30.0, 1.0 / kFs + 1e-12);
  }
}

TEST(Processor, ChunkSizeIndependence) {
  Scenario s{{2, EventKind::EyesClosed, 0}, {3, EventKind::MoveLeftHand, 2}};
  const auto a = process(s, 8.0, 32);
  const auto b = process(s, 8.0, 512);
  const auto c = process(s, 8.0, 7);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].end_sample, b[i].end_sample);
    EXPECT_EQ(a[i].mental, b[i].mental);
    for (std::size_t e = 0; e < a[i].erd.values.size(); ++e) {
      ASSERT_NEAR(a[i].erd.values[e], b[i].erd.values[e], 1e-6);
      ASSERT_NEAR(a[i].erd.values[e], c[i].erd.values[e], 1e-6);
    }
  }
}

TEST(Processor, BandPowerTracksOracleOnWindow) {
  const auto m = oracle::montage32();
  const auto chunks = synthesize({}, m, kFs, 5.0, 64);
  EegProcessor proc({}, m.labels(), kFs);
  std::vector<ProcessedFrame> frames;
  for (const auto& c : chunks) {
    for (auto& f : proc.push(c)) frames.push_back(std::move(f));
  }
  const auto raw = concatenate(chunks);
  const auto& last = frames.back();
  const auto cz = m.require("Cz");
  const std::vector<double> win(raw[cz].begin() + static_cast<std::ptrdiff_t>(last.end_sample - 512),
                                raw[cz].begin() + static_cast<std::ptrdiff_t>(last.end_sample));
  const double ref = oracle::dft_band_power(win, kFs, 8.0, 12.0);
  // Filter skirts pass a little out-of-band noise; the 10 Hz rhythm dominates.
  EXPECT_NEAR(last.mu_power.power[cz], ref, 0.25 * ref);
}

TEST(Processor, MovementDesynchronizesFocalElectrode) {
  const auto frames = process({{4, EventKind::MoveLeftHand, 2}}, 9.0, 32);
  const auto& mid = frame_near(frames, 5.8);
  EXPECT_LT(erd_at(mid, "C4"), -50.0);
  EXPECT_GT(erd_at(mid, "C3"), -30.0);
  // ERS after the movement ends at 6 s
  double peak = -100.0;
  for (const auto& f : frames) {
    if (f.t > 6.0 && f.t < 8.0) peak = std::max(peak, erd_at(f, "C4"));
  }
  EXPECT_GT(peak, 20.0);
}

TEST(Processor, ScaleInvariantErd) {
  Scenario s{{3, EventKind::MoveRightHand, 2}};
  const auto a = process(s, 6.0, 32, {}, {}, 1.0);
  const auto b = process(s, 6.0, 32, {}, {}, 0.25);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t e = 0; e < a[i].erd.values.size(); ++e) {
      ASSERT_NEAR(a[i].erd.values[e], b[i].erd.values[e], 1e-6);
    }
  }
}

TEST(Processor, EyesClosedRaisesAlphaRatioAndCommits) {
  const auto frames = process({{3, EventKind::EyesClosed, 0}}, 6.0, 32);
  EXPECT_LT(frame_near(frames, 2.5).alpha_ratio, 1.5);
  EXPECT_GT(frame_near(frames, 4.5).alpha_ratio, 4.0);
  EXPECT_TRUE(frames.back().mental.eyes_closed);
  EXPECT_FALSE(frame_near(frames, 2.9).mental.eyes_closed);
}

TEST(Processor, GatedFramesLeaveBaselineAlone) {
  SynthConfig synth;
  synth.spikes.push_back({3.0, "Fz", 400.0});
  const auto m = oracle::montage32();
  const auto chunks = synthesize({}, m, kFs, 6.0, 32, synth);
  EegProcessor proc({}, m.labels(), kFs);
  std::vector<double> before;
  bool saw_gated = false;
  bool checked = false;
  for (const auto& c : chunks) {
    for (const auto& f : proc.push(c)) {
      if (f.gated) {
        if (!saw_gated) before = proc.mu_baseline().baseline;
        saw_gated = true;
        EXPECT_FALSE(f.erd.all_valid());
        EXPECT_TRUE(std::isnan(f.alpha_ratio));
        EXPECT_EQ(proc.mu_baseline().baseline, before);
        checked = true;
      }
    }
  }
  EXPECT_TRUE(saw_gated);
  EXPECT_TRUE(checked);
}

TEST(Processor, GatedWindowSpansOneSecond) {
  SynthConfig synth;
  synth.spikes.push_back({3.0, "Fz", 400.0});
  const auto frames = process({}, 6.0, 32, synth);
  double first = 1e9, last = -1e9;
  for (const auto& f : frames) {
    if (f.gated) {
      first = std::min(first, f.t);
      last = std::max(last, f.t);
    }
  }
  // The chunk holding the spike is rejected; frames stay gated until it leaves the window.
  EXPECT_GE(first, 3.0 - 32.0 / kFs);
  EXPECT_LE(first, 3.0 + 1.0 / 30.0 + 32.0 / kFs);
  EXPECT_NEAR(last - first, 1.0, 0.1);
}

TEST(Processor, FixedBaselineNeverMoves) {
  ProcessorConfig cfg;
  cfg.fixed_baseline = true;
  const auto m = oracle::montage32();
  const auto chunks = synthesize({{2, EventKind::EyesClosed, 0}}, m, kFs, 5.0, 32);
  EegProcessor proc(cfg, m.labels(), kFs);
  std::vector<double> first;
  for (const auto& c : chunks) {
    for (const auto& f : proc.push(c)) {
      (void)f;
      if (first.empty()) first = proc.alpha_baseline().baseline;
      EXPECT_EQ(proc.alpha_baseline().baseline, first);
    }
  }
}

TEST(Processor, RejectsMismatchedInput) {
  const auto m = oracle::montage32();
  EegProcessor proc({}, m.labels(), kFs);
  SampleChunk c;
  c.sample_rate = kFs;
  c.channels = {"C3"};
  c.samples = {std::vector<double>(8, 0.0)};
  EXPECT_THROW(proc.push(c), std::invalid_argument);
  EXPECT_THROW(EegProcessor({}, {"C3", "C4", "O1", "O2"}, kFs), std::invalid_argument);
}
