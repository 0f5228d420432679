#pragma once

// The avatar state machine: operating mode, slew-limited limb servos, eye
// matrices, the LED field, and the puppet-mode forward model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "teegi/classifier.hpp"
#include "teegi/error.hpp"
#include "teegi/geometry.hpp"
#include "teegi/topomap.hpp"

namespace teegi {

enum class Mode { Avatar, Puppet };

inline constexpr std::string_view to_string(Mode m) { return m == Mode::Avatar ? "avatar" : "puppet"; }

inline std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "avatar") return Mode::Avatar;
  if (s == "puppet") return Mode::Puppet;
  return std::nullopt;
}

enum class PuppetAction { MoveLeftHand, MoveRightHand, MoveFeet, CloseEyes, OpenEyes, Release };

inline constexpr std::string_view to_string(PuppetAction a) {
  switch (a) {
    case PuppetAction::MoveLeftHand: return "move_left_hand";
    case PuppetAction::MoveRightHand: return "move_right_hand";
    case PuppetAction::MoveFeet: return "move_feet";
    case PuppetAction::CloseEyes: return "close_eyes";
    case PuppetAction::OpenEyes: return "open_eyes";
    case PuppetAction::Release: return "release";
  }
  return "?";
}

inline std::optional<PuppetAction> puppet_action_from_string(std::string_view s) {
  for (auto a : {PuppetAction::MoveLeftHand, PuppetAction::MoveRightHand, PuppetAction::MoveFeet,
                 PuppetAction::CloseEyes, PuppetAction::OpenEyes, PuppetAction::Release}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

// Servo slots in wire order.
enum Servo : std::size_t { kLeftHand = 0, kRightHand = 1, kLeftFoot = 2, kRightFoot = 3 };

enum class Eyes { Open, Closed };

/// 8×8 monochrome bitmap, one byte per row, MSB is the leftmost column.
using EyeBitmap = std::array<std::uint8_t, 8>;

inline constexpr EyeBitmap kEyeOpenBitmap{0x3C, 0x42, 0x81, 0x99, 0x99, 0x81, 0x42, 0x3C};
inline constexpr EyeBitmap kEyeClosedBitmap{0x00, 0x00, 0x00, 0x00, 0xFF, 0x00, 0x00, 0x00};

inline constexpr const EyeBitmap& eye_bitmap(Eyes e) { return e == Eyes::Closed ? kEyeClosedBitmap : kEyeOpenBitmap; }

struct AvatarConfig {
  double rest_deg{0.0};
  double raised_deg{60.0};
  double max_deg{300.0};
  double slew_deg_per_s{200.0};
  double tick_rate{30.0};
  double focal_decay_rad{0.3};
  double puppet_magnitude{80.0};
  TopomapConfig topomap;

  double max_step_deg() const noexcept { return slew_deg_per_s / tick_rate; }

  void validate() const {
    if (!(max_deg > 0.0 && max_deg <= 300.0)) throw std::invalid_argument("avatar: max_deg must lie in (0, 300]");
    if (!(rest_deg >= 0.0 && rest_deg <= max_deg)) throw std::invalid_argument("avatar: rest_deg out of range");
    if (!(raised_deg >= 0.0 && raised_deg <= max_deg)) throw std::invalid_argument("avatar: raised_deg out of range");
    if (!(slew_deg_per_s > 0.0)) throw std::invalid_argument("avatar: slew must be > 0");
    if (!(tick_rate >= 1.0 && tick_rate <= 120.0)) throw std::invalid_argument("avatar: tick_rate must lie in [1, 120]");
    if (!(focal_decay_rad > 0.0)) throw std::invalid_argument("avatar: focal_decay_rad must be > 0");
    topomap.validate();
  }
};

struct AvatarState {
  Mode mode{Mode::Avatar};
  std::array<double, 4> servo_angles{};
  std::array<double, 4> servo_targets{};
  Eyes eyes{Eyes::Open};
  std::array<EyeBitmap, 2> eye_bitmaps{kEyeOpenBitmap, kEyeOpenBitmap};
  LedField led_field;
  MentalState mental;
  std::uint64_t tick{0};
  // Forward-model pattern currently shown in puppet mode, per electrode.
  std::vector<double> motor_pattern;
  std::vector<double> eye_pattern;
};

/// Decaying focal pattern: magnitude·exp(−d/decay) around one electrode.
inline std::vector<double> focal_pattern(const ElectrodeMontage& montage, std::string_view site, double magnitude,
                                         double decay_rad) {
  const auto& focus = montage[montage.require(site)].position;
  std::vector<double> out(montage.size());
  for (std::size_t i = 0; i < montage.size(); ++i) {
    out[i] = magnitude * std::exp(-geodesic_distance(montage[i].position, focus) / decay_rad);
  }
  return out;
}

class Avatar {
 public:
  Avatar(ElectrodeMontage montage, const LedLattice& lattice, AvatarConfig cfg = {}, Mode initial = Mode::Avatar)
      : montage_(std::move(montage)), cfg_(std::move(cfg)), renderer_(montage_, lattice, cfg_.topomap) {
    cfg_.validate();
    require_classifier_electrodes(montage_);
    state_.mode = initial;
    state_.servo_angles.fill(cfg_.rest_deg);
    state_.servo_targets.fill(cfg_.rest_deg);
    state_.led_field = renderer_.blank();
    clear_patterns();
    last_erd_.assign(montage_.size(), 0.0);
  }

  const AvatarState& state() const noexcept { return state_; }
  const AvatarConfig& config() const noexcept { return cfg_; }
  const ElectrodeMontage& montage() const noexcept { return montage_; }
  const TopomapRenderer& renderer() const noexcept { return renderer_; }

  /// Switch operating mode. The display, limbs and eyes return to neutral;
  /// setting the current mode again changes nothing.
  void set_mode(Mode mode) {
    if (mode == state_.mode) return;
    state_.mode = mode;
    state_.servo_targets.fill(cfg_.rest_deg);
    set_eyes(Eyes::Open);
    state_.led_field = renderer_.blank();
    state_.mental = MentalState{MotorState::Rest, false, state_.mental.t};
    clear_patterns();
    std::fill(last_erd_.begin(), last_erd_.end(), 0.0);
  }

  /// Forward model of a puppet manipulation: returns the action's canonical
  /// per-electrode pattern and updates limb targets or eyes.
  std::vector<double> apply_puppet_action(PuppetAction action) {
    if (state_.mode != Mode::Puppet) throw InvalidState("invalid-state: puppet actions require puppet mode");
    const double mag = cfg_.puppet_magnitude;
    const double decay = cfg_.focal_decay_rad;
    std::vector<double> pattern(montage_.size(), 0.0);
    auto raise_only = [&](std::initializer_list<std::size_t> limbs) {
      state_.servo_targets.fill(cfg_.rest_deg);
      for (auto l : limbs) state_.servo_targets[l] = cfg_.raised_deg;
    };
    switch (action) {
      case PuppetAction::MoveLeftHand:
        pattern = focal_pattern(montage_, "C4", -mag, decay);
        raise_only({kLeftHand});
        state_.motor_pattern = pattern;
        break;
      case PuppetAction::MoveRightHand:
        pattern = focal_pattern(montage_, "C3", -mag, decay);
        raise_only({kRightHand});
        state_.motor_pattern = pattern;
        break;
      case PuppetAction::MoveFeet:
        pattern = focal_pattern(montage_, "Cz", -mag, decay);
        raise_only({kLeftFoot, kRightFoot});
        state_.motor_pattern = pattern;
        break;
      case PuppetAction::CloseEyes: {
        const auto o1 = focal_pattern(montage_, "O1", mag, decay);
        const auto o2 = focal_pattern(montage_, "O2", mag, decay);
        for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = std::max(o1[i], o2[i]);
        state_.eye_pattern = pattern;
        set_eyes(Eyes::Closed);
        break;
      }
      case PuppetAction::OpenEyes:
        std::fill(state_.eye_pattern.begin(), state_.eye_pattern.end(), 0.0);
        set_eyes(Eyes::Open);
        break;
      case PuppetAction::Release:
        clear_patterns();
        state_.servo_targets.fill(cfg_.rest_deg);
        set_eyes(Eyes::Open);
        break;
    }
    return pattern;
  }

  /// Advance one tick. In avatar mode `mental` and `erd` drive the output
  /// (either may be absent when no new data arrived); in puppet mode they
  /// are ignored and the forward-model pattern is displayed.
  const AvatarState& step(const MentalState* mental, const ErdFrame* erd) {
    if (state_.mode == Mode::Avatar) {
      if (erd != nullptr) {
        if (erd->values.size() != montage_.size()) throw std::invalid_argument("avatar: ERD frame size mismatch");
        last_erd_ = erd->values;
      }
      if (mental != nullptr) state_.mental = *mental;
      state_.servo_targets = targets_for(state_.mental.motor);
      set_eyes(state_.mental.eyes_closed ? Eyes::Closed : Eyes::Open);
      state_.led_field = renderer_.render(last_erd_);
    } else {
      std::vector<double> combined(montage_.size());
      for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = state_.motor_pattern[i] + state_.eye_pattern[i];
      state_.led_field = renderer_.render(combined);
    }
    const double max_step = cfg_.max_step_deg();
    for (std::size_t s = 0; s < 4; ++s) {
      const double gap = state_.servo_targets[s] - state_.servo_angles[s];
      // Land exactly on the target instead of accumulating rounding error.
      const double next = std::abs(gap) <= max_step * (1.0 + 1e-9)
                              ? state_.servo_targets[s]
                              : state_.servo_angles[s] + std::clamp(gap, -max_step, max_step);
      state_.servo_angles[s] = std::clamp(next, 0.0, cfg_.max_deg);
    }
    ++state_.tick;
    return state_;
  }

  /// Electrode values currently feeding the display.
  std::vector<double> displayed_electrode_values() const {
    if (state_.mode == Mode::Avatar) return last_erd_;
    std::vector<double> combined(montage_.size());
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = state_.motor_pattern[i] + state_.eye_pattern[i];
    return combined;
  }

 private:
  std::array<double, 4> targets_for(MotorState m) const {
    std::array<double, 4> t;
    t.fill(cfg_.rest_deg);
    switch (m) {
      case MotorState::LeftHand: t[kLeftHand] = cfg_.raised_deg; break;
      case MotorState::RightHand: t[kRightHand] = cfg_.raised_deg; break;
      case MotorState::Feet:
        t[kLeftFoot] = cfg_.raised_deg;
        t[kRightFoot] = cfg_.raised_deg;
        break;
      case MotorState::Rest: break;
    }
    return t;
  }

  void set_eyes(Eyes e) {
    state_.eyes = e;
    state_.eye_bitmaps = {eye_bitmap(e), eye_bitmap(e)};
  }

  void clear_patterns() {
    state_.motor_pattern.assign(montage_.size(), 0.0);
    state_.eye_pattern.assign(montage_.size(), 0.0);
  }

  ElectrodeMontage montage_;
  AvatarConfig cfg_;
  TopomapRenderer renderer_;
  AvatarState state_;
  std::vector<double> last_erd_;
};

}  // namespace teegi
