#include <gtest/gtest.h>

#include <random>

#include "teegi/classifier.hpp"

using namespace teegi;

namespace {

ErdFrame frame(double c3, double c4, double cz) {
  ErdFrame f;
  f.labels = {"C3", "C4", "Cz", "O1", "O2"};
  f.values = {c3, c4, cz, 0.0, 0.0};
  f.valid.assign(5, true);
  return f;
}

ClassifierState hold(const ErdFrame& f, double ratio, int frames, ClassifierState s = {}, const ClassifierConfig& cfg = {}) {
  for (int i = 0; i < frames; ++i) s = classify(f, ratio, cfg, s);
  return s;
}

}  // namespace

TEST(Classifier, LeftHandAfterFiveFrames) {
  const auto f = frame(-5, -40, -2);
  auto s = hold(f, 1.0, 4);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
  s = hold(f, 1.0, 1, s);
  EXPECT_EQ(s.committed.motor, MotorState::LeftHand);
  EXPECT_FALSE(s.committed.eyes_closed);
}

TEST(Classifier, NeutralInputIsRest) {
  const auto s = hold(frame(0.1, -0.2, 0.0), 1.0, 20);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
  EXPECT_FALSE(s.committed.eyes_closed);
}

TEST(Classifier, EyesClosedOnAlphaRatio) {
  auto s = hold(frame(0, 0, 0), 3.0, 4);
  EXPECT_FALSE(s.committed.eyes_closed);
  s = hold(frame(0, 0, 0), 3.0, 1, s);
  EXPECT_TRUE(s.committed.eyes_closed);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
}

TEST(Classifier, ContralateralMapping) {
  EXPECT_EQ(hold(frame(-50, -5, -5), 1.0, 5).committed.motor, MotorState::RightHand);
  EXPECT_EQ(hold(frame(-5, -5, -50), 1.0, 5).committed.motor, MotorState::Feet);
  EXPECT_EQ(focal_electrode(MotorState::LeftHand), "C4");
  EXPECT_EQ(focal_electrode(MotorState::RightHand), "C3");
  EXPECT_EQ(focal_electrode(MotorState::Feet), "Cz");
}

TEST(Classifier, TiePrecedence) {
  EXPECT_EQ(hold(frame(-40, -40, -40), 1.0, 5).committed.motor, MotorState::LeftHand);
  EXPECT_EQ(hold(frame(-40, -10, -40), 1.0, 5).committed.motor, MotorState::RightHand);
}

TEST(Classifier, MotorHysteresis) {
  auto s = hold(frame(0, -40, 0), 1.0, 5);
  ASSERT_EQ(s.committed.motor, MotorState::LeftHand);
  // Between exit and enter thresholds the state holds indefinitely.
  s = hold(frame(0, -20, 0), 1.0, 50, s);
  EXPECT_EQ(s.committed.motor, MotorState::LeftHand);
  s = hold(frame(0, -10, 0), 1.0, 4, s);
  EXPECT_EQ(s.committed.motor, MotorState::LeftHand);
  s = hold(frame(0, -10, 0), 1.0, 1, s);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
  // From rest, -20 is not enough to enter.
  s = hold(frame(0, -20, 0), 1.0, 50, s);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
}

TEST(Classifier, EyeHysteresis) {
  auto s = hold(frame(0, 0, 0), 2.5, 5);
  ASSERT_TRUE(s.committed.eyes_closed);
  s = hold(frame(0, 0, 0), 1.7, 50, s);
  EXPECT_TRUE(s.committed.eyes_closed);
  s = hold(frame(0, 0, 0), 1.2, 5, s);
  EXPECT_FALSE(s.committed.eyes_closed);
  s = hold(frame(0, 0, 0), 1.9, 50, s);
  EXPECT_FALSE(s.committed.eyes_closed);
}

TEST(Classifier, DebounceResetsOnInterruption) {
  auto s = hold(frame(0, -40, 0), 1.0, 4);
  s = hold(frame(0, 0, 0), 1.0, 1, s);
  s = hold(frame(0, -40, 0), 1.0, 4, s);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
  s = hold(frame(0, -40, 0), 1.0, 1, s);
  EXPECT_EQ(s.committed.motor, MotorState::LeftHand);
}

TEST(Classifier, SwitchBetweenLimbsNeedsExitFirst) {
  auto s = hold(frame(0, -40, 0), 1.0, 5);
  // C4 still below exit threshold, so a deeper C3 does not take over.
  s = hold(frame(-80, -20, 0), 1.0, 20, s);
  EXPECT_EQ(s.committed.motor, MotorState::LeftHand);
  s = hold(frame(-80, -5, 0), 1.0, 5, s);
  EXPECT_EQ(s.committed.motor, MotorState::RightHand);
}

TEST(Classifier, InvalidFrameRepeatsState) {
  auto s = hold(frame(0, -40, 0), 1.0, 4);
  auto bad = frame(0, -40, 0);
  bad.valid[1] = false;
  s = classify(bad, 1.0, {}, s);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
  EXPECT_EQ(s.motor_count, 0);
  s = classify(frame(0, 0, 0), std::nan(""), {}, s);
  EXPECT_EQ(s.committed.motor, MotorState::Rest);
}

TEST(Classifier, MissingElectrode) {
  ErdFrame f;
  f.labels = {"C3", "Cz"};
  f.values = {0, 0};
  f.valid = {true, true};
  EXPECT_THROW(classify(f, 1.0, {}, {}), std::invalid_argument);
}

TEST(Classifier, ConfigValidation) {
  ClassifierConfig c;
  c.erd_enter = -10;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.debounce_frames = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha_exit = 3.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Classifier, MirrorProperty) {
  // Swapping C3 and C4 values swaps LeftHand and RightHand except on exact ties.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-100, 50);
  auto swap_motor = [](MotorState m) {
    if (m == MotorState::LeftHand) return MotorState::RightHand;
    if (m == MotorState::RightHand) return MotorState::LeftHand;
    return m;
  };
  for (int k = 0; k < 500; ++k) {
    ClassifierState a, b;
    for (int i = 0; i < 30; ++i) {
      const double c3 = u(rng), c4 = u(rng), cz = u(rng), r = 1.0;
      a = classify(frame(c3, c4, cz), r, {}, a);
      b = classify(frame(c4, c3, cz), r, {}, b);
      ASSERT_EQ(swap_motor(a.committed.motor), b.committed.motor);
    }
  }
}

TEST(Classifier, StringRoundTrip) {
  for (auto m : {MotorState::Rest, MotorState::LeftHand, MotorState::RightHand, MotorState::Feet}) {
    EXPECT_EQ(motor_state_from_string(to_string(m)), m);
  }
  EXPECT_FALSE(motor_state_from_string("jump"));
}
