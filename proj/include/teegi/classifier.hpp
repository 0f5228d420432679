#pragma once

// Debounced threshold classifier over mu-band ERD and occipital alpha ratio.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "teegi/dsp.hpp"

namespace teegi {

enum class MotorState { Rest, LeftHand, RightHand, Feet };

inline constexpr std::string_view to_string(MotorState m) {
  switch (m) {
    case MotorState::Rest: return "rest";
    case MotorState::LeftHand: return "left_hand";
    case MotorState::RightHand: return "right_hand";
    case MotorState::Feet: return "feet";
  }
  return "?";
}

inline std::optional<MotorState> motor_state_from_string(std::string_view s) {
  for (auto m : {MotorState::Rest, MotorState::LeftHand, MotorState::RightHand, MotorState::Feet}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

struct MentalState {
  MotorState motor{MotorState::Rest};
  bool eyes_closed{false};
  double t{0.0};

  friend bool operator==(const MentalState&, const MentalState&) = default;
};

struct ClassifierConfig {
  double erd_enter{-30.0};
  double erd_exit{-15.0};
  double alpha_enter{2.0};
  double alpha_exit{1.5};
  int debounce_frames{5};

  void validate() const {
    if (!(erd_enter < erd_exit)) throw std::invalid_argument("classifier: erd_enter must be below erd_exit");
    if (!(alpha_enter > alpha_exit)) throw std::invalid_argument("classifier: alpha_enter must exceed alpha_exit");
    if (debounce_frames < 1) throw std::invalid_argument("classifier: debounce_frames must be >= 1");
  }
};

/// Committed state plus the pending candidates and their run lengths. Motor
/// and eye states debounce independently.
struct ClassifierState {
  MentalState committed;
  MotorState motor_candidate{MotorState::Rest};
  int motor_count{0};
  bool eyes_candidate{false};
  int eyes_count{0};
};

/// Central electrode whose desynchronization drives each motor state.
inline constexpr std::string_view focal_electrode(MotorState m) {
  switch (m) {
    case MotorState::LeftHand: return "C4";
    case MotorState::RightHand: return "C3";
    case MotorState::Feet: return "Cz";
    case MotorState::Rest: break;
  }
  return "";
}

namespace detail {

template <typename T>
void debounce(T candidate, T& committed, T& pending, int& count, int needed) {
  if (candidate == committed) {
    count = 0;
    pending = committed;
    return;
  }
  if (candidate == pending && count > 0) {
    ++count;
  } else {
    pending = candidate;
    count = 1;
  }
  if (count >= needed) {
    committed = candidate;
    count = 0;
  }
}

}  // namespace detail

/// One classification step. The contralateral rule maps C4 desynchronization
/// to the left hand, C3 to the right hand and Cz to the feet. Ties on the
/// most negative value resolve C4, then C3, then Cz.
inline ClassifierState classify(const ErdFrame& erd, double alpha_ratio, const ClassifierConfig& cfg,
                                ClassifierState prev) {
  const auto i3 = erd.index_of("C3");
  const auto i4 = erd.index_of("C4");
  const auto iz = erd.index_of("Cz");
  if (!i3 || !i4 || !iz) throw std::invalid_argument("classify: frame must contain C3, C4 and Cz");

  ClassifierState next = prev;
  next.committed.t = erd.t;

  const bool usable = erd.valid.size() == erd.values.size() && erd.valid[*i3] && erd.valid[*i4] &&
                      erd.valid[*iz] && std::isfinite(alpha_ratio);
  if (!usable) {
    next.motor_count = 0;
    next.eyes_count = 0;
    next.motor_candidate = next.committed.motor;
    next.eyes_candidate = next.committed.eyes_closed;
    return next;
  }

  const std::array<std::pair<MotorState, double>, 3> ranked{{
      {MotorState::LeftHand, erd.values[*i4]},
      {MotorState::RightHand, erd.values[*i3]},
      {MotorState::Feet, erd.values[*iz]},
  }};
  auto most_negative = ranked[0];
  for (const auto& r : ranked) {
    if (r.second < most_negative.second) most_negative = r;
  }
  auto value_of = [&](MotorState m) {
    for (const auto& r : ranked) {
      if (r.first == m) return r.second;
    }
    return 0.0;
  };

  auto entering = [&] { return most_negative.second <= cfg.erd_enter ? most_negative.first : MotorState::Rest; };

  MotorState motor_candidate;
  const MotorState current = prev.committed.motor;
  if (current == MotorState::Rest) {
    motor_candidate = entering();
  } else if (value_of(current) > cfg.erd_exit) {
    motor_candidate = entering();
  } else {
    motor_candidate = current;
  }

  bool eyes_candidate;
  if (prev.committed.eyes_closed) {
    eyes_candidate = !(alpha_ratio < cfg.alpha_exit);
  } else {
    eyes_candidate = alpha_ratio >= cfg.alpha_enter;
  }

  detail::debounce(motor_candidate, next.committed.motor, next.motor_candidate, next.motor_count,
                   cfg.debounce_frames);
  detail::debounce(eyes_candidate, next.committed.eyes_closed, next.eyes_candidate, next.eyes_count,
                   cfg.debounce_frames);
  return next;
}

}  // namespace teegi
