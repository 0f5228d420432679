#pragma once

// Streaming chain from raw chunks to classified ERD frames:
// gate -> band-pass (mu, alpha) -> sliding band power -> baseline -> ERD -> classify.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "teegi/classifier.hpp"
#include "teegi/dsp.hpp"

namespace teegi {

struct ProcessorConfig {
  BandSpec mu{8.0, 12.0, "mu"};
  BandSpec alpha{8.0, 12.0, "alpha"};
  double window_s{1.0};
  double hop_rate{30.0};  // frames per second
  double tau_s{30.0};
  bool fixed_baseline{false};
  double artifact_threshold_uv{100.0};
  ClassifierConfig classifier;
};

struct ProcessedFrame {
  std::uint64_t end_sample{0};  // samples consumed when the frame was taken
  double t{0.0};
  BandPowerFrame mu_power;
  BandPowerFrame alpha_power;
  ErdFrame erd;  // mu band, drives classification and the display
  double alpha_ratio{1.0};
  bool gated{false};
  MentalState mental;
};

class EegProcessor {
 public:
  EegProcessor(ProcessorConfig cfg, std::vector<std::string> labels, double sample_rate)
      : cfg_(std::move(cfg)),
        labels_(std::move(labels)),
        fs_(sample_rate),
        mu_filter_(cfg_.mu, sample_rate, labels_.size()),
        alpha_filter_(cfg_.alpha, sample_rate, labels_.size()) {
    cfg_.classifier.validate();
    if (!(cfg_.window_s > 0.0)) throw std::invalid_argument("processor: window_s must be > 0");
    if (!(cfg_.hop_rate > 0.0)) throw std::invalid_argument("processor: hop_rate must be > 0");
    if (!(cfg_.artifact_threshold_uv > 0.0)) throw std::invalid_argument("processor: artifact threshold must be > 0");
    window_ = static_cast<std::size_t>(std::llround(cfg_.window_s * fs_));
    if (window_ == 0) throw std::invalid_argument("processor: window shorter than one sample");
    o1_ = index_of("O1");
    o2_ = index_of("O2");
    for (auto label : {"C3", "C4", "Cz"}) index_of(label);
    mu_ring_.assign(labels_.size(), std::vector<double>(window_, 0.0));
    alpha_ring_.assign(labels_.size(), std::vector<double>(window_, 0.0));
    dirty_ring_.assign(window_, 0);
    mu_base_.tau = alpha_base_.tau = cfg_.tau_s;
    last_erd_.labels = labels_;
    last_erd_.values.assign(labels_.size(), 0.0);
    last_erd_.valid.assign(labels_.size(), false);
    schedule_next();
  }

  const ProcessorConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  double sample_rate() const noexcept { return fs_; }
  const ClassifierState& classifier_state() const noexcept { return cls_; }
  const BaselineState& mu_baseline() const noexcept { return mu_base_; }
  const BaselineState& alpha_baseline() const noexcept { return alpha_base_; }
  std::uint64_t samples_consumed() const noexcept { return consumed_; }

  /// Feed one chunk; returns every frame that became due inside it.
  std::vector<ProcessedFrame> push(const SampleChunk& chunk) {
    if (chunk.channels != labels_) throw std::invalid_argument("processor: chunk channels do not match montage");
    if (chunk.sample_rate != fs_) throw std::invalid_argument("processor: chunk sample rate mismatch");
    if (!origin_set_) {
      origin_ = chunk.start_time - static_cast<double>(chunk.first_index) / fs_;
      origin_set_ = true;
    }
    const bool clean = artifact_gate(chunk, cfg_.artifact_threshold_uv);
    std::vector<ProcessedFrame> frames;
    const std::size_t n_ch = labels_.size();
    for (std::size_t i = 0; i < chunk.length(); ++i) {
      const std::size_t slot = static_cast<std::size_t>(consumed_ % window_);
      for (std::size_t c = 0; c < n_ch; ++c) {
        // Rejected samples enter the filters as zeros so nothing non-finite
        // reaches the filter state.
        const double x = clean ? chunk.samples[c][i] : 0.0;
        mu_ring_[c][slot] = mu_filter_.process(c, x);
        alpha_ring_[c][slot] = alpha_filter_.process(c, x);
      }
      dirty_count_ -= dirty_ring_[slot];
      dirty_ring_[slot] = clean ? 0 : 1;
      dirty_count_ += dirty_ring_[slot];
      ++consumed_;
      if (consumed_ == next_frame_sample_) {
        frames.push_back(make_frame());
        schedule_next();
      }
    }
    return frames;
  }

 private:
  std::size_t index_of(const char* label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) return i;
    }
    throw std::invalid_argument(std::string("processor: montage lacks electrode ") + label);
  }

  void schedule_next() {
    // Frame j closes after floor(j·fs/hop) samples; skip frames whose
    // window is not yet full.
    do {
      ++frame_index_;
      next_frame_sample_ = static_cast<std::uint64_t>(
          std::floor(static_cast<double>(frame_index_) * fs_ / cfg_.hop_rate + 1e-9));
    } while (next_frame_sample_ < window_ || next_frame_sample_ <= consumed_);
  }

  ProcessedFrame make_frame() {
    ProcessedFrame f;
    f.end_sample = consumed_;
    f.t = origin_ + static_cast<double>(consumed_) / fs_;
    f.mu_power = {f.t, cfg_.mu, powers(mu_ring_)};
    f.alpha_power = {f.t, cfg_.alpha, powers(alpha_ring_)};
    f.gated = dirty_count_ > 0;

    if (f.gated) {
      f.erd = last_erd_;
      f.erd.t = f.t;
      std::fill(f.erd.valid.begin(), f.erd.valid.end(), false);
      f.alpha_ratio = std::nan("");
      cls_ = classify(f.erd, f.alpha_ratio, cfg_.classifier, cls_);
      f.mental = cls_.committed;
      last_erd_ = f.erd;
      return f;
    }

    if (!mu_base_.initialized) {
      mu_base_ = update_baseline(mu_base_, f.mu_power);
      alpha_base_ = update_baseline(alpha_base_, f.alpha_power);
    }

    f.erd.t = f.t;
    f.erd.labels = labels_;
    f.erd.values.resize(labels_.size());
    f.erd.valid.resize(labels_.size());
    for (std::size_t c = 0; c < labels_.size(); ++c) {
      const auto e = compute_erd(f.mu_power.power[c], mu_base_.baseline[c]);
      f.erd.values[c] = e.percent;
      f.erd.valid[c] = e.valid;
    }
    f.alpha_ratio = 0.5 * (ratio(f.alpha_power.power[o1_], alpha_base_.baseline[o1_]) +
                           ratio(f.alpha_power.power[o2_], alpha_base_.baseline[o2_]));

    cls_ = classify(f.erd, f.alpha_ratio, cfg_.classifier, cls_);
    f.mental = cls_.committed;

    const bool frozen = cfg_.fixed_baseline || cls_.committed.motor != MotorState::Rest;
    mu_base_ = update_baseline(mu_base_, f.mu_power, frozen);
    alpha_base_ = update_baseline(alpha_base_, f.alpha_power, frozen);
    last_erd_ = f.erd;
    return f;
  }

  static double ratio(double p, double b) { return b >= kBaselineEpsilon ? p / b : std::nan(""); }

  std::vector<double> powers(const std::vector<std::vector<double>>& ring) const {
    std::vector<double> out(ring.size());
    for (std::size_t c = 0; c < ring.size(); ++c) out[c] = band_power(ring[c]);
    return out;
  }

  ProcessorConfig cfg_;
  std::vector<std::string> labels_;
  double fs_;
  BandpassFilter mu_filter_;
  BandpassFilter alpha_filter_;
  std::size_t window_{0};
  std::size_t o1_{0}, o2_{0};
  std::vector<std::vector<double>> mu_ring_;
  std::vector<std::vector<double>> alpha_ring_;
  std::vector<std::uint8_t> dirty_ring_;
  std::size_t dirty_count_{0};
  std::uint64_t consumed_{0};
  std::uint64_t frame_index_{0};
  std::uint64_t next_frame_sample_{0};
  double origin_{0.0};
  bool origin_set_{false};
  BaselineState mu_base_;
  BaselineState alpha_base_;
  ClassifierState cls_;
  ErdFrame last_erd_;
};

}  // namespace teegi
