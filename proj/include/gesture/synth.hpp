#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/rng.hpp"
#include "gesture/skeleton.hpp"

namespace gesture {

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SynthConfig {
  int n_classes = 5;
  int n_sequences = 30;
  int gestures_per_sequence = 5;
  IntRange rest_gap{15, 35};
  IntRange gesture_len{30, 60};
  double noise_sigma = 0.003;
  std::uint64_t seed = 42;
  double frame_rate = 20.0;

  void validate() const {
    if (n_classes < 1 || n_classes > kNumGestureClasses)
      fail(ErrorCategory::config, "n_classes must be in 1..20");
    if (n_sequences < 1) fail(ErrorCategory::config, "n_sequences must be positive");
    if (gestures_per_sequence < 0)
      fail(ErrorCategory::config, "gestures_per_sequence must be non-negative");
    if (rest_gap.lo < 1 || rest_gap.hi < rest_gap.lo)
      fail(ErrorCategory::config, "rest_gap range must be non-empty and positive");
    if (gesture_len.lo < 2 || gesture_len.hi < gesture_len.lo)
      fail(ErrorCategory::config, "gesture_len range must be non-empty and >= 2");
    if (!(noise_sigma >= 0.0)) fail(ErrorCategory::config, "noise_sigma must be >= 0");
    if (!(frame_rate > 0.0)) fail(ErrorCategory::config, "frame_rate must be positive");
  }
};

struct SyntheticSample {
  SkeletonSequence sequence;
  FrameLabels labels;
  std::vector<GestureAnnotation> annotations;
};

namespace synth {

enum class Arm { right, left, both };

/// Closed-form description of one gesture class: the hand traces
/// `amplitude * ((1 - cos phi) * outward + sin phi * across)` for `cycles`
/// turns, so the trajectory leaves and re-enters the rest posture with zero
/// offset while moving at constant speed.
struct GestureShape {
  Arm arm = Arm::right;
  int cycles = 1;
  double amplitude = 0.2;
  Vec3 outward;
  Vec3 across;
};

inline constexpr double kSwayAmplitude = 0.004;
inline constexpr double kSwayPeriod = 50.0;
/// Per-joint share of the hand offset, for elbow/wrist/hand.
inline constexpr std::array<double, 3> kArmChain{0.5, 0.9, 1.0};
inline constexpr double kAmplitudeJitter = 0.1;
inline constexpr double kBodyScaleJitter = 0.1;

inline double frac(double x) { return x - std::floor(x); }

inline GestureShape gesture_shape(int class_id) {
  if (class_id < 1 || class_id > kNumGestureClasses)
    fail(ErrorCategory::config, "class id outside 1..20");
  const int k = class_id;
  GestureShape s;
  s.arm = static_cast<Arm>((k - 1) % 3);
  s.cycles = 1 + ((k - 1) / 3) % 2;
  s.amplitude = 0.15 + 0.1 * frac(k * 0.7548776662);
  const double elevation = 0.25 * std::numbers::pi + 0.5 * std::numbers::pi * frac(k * 0.381966);
  const double heading = 2.0 * std::numbers::pi * frac(k * 0.6180339887);
  s.outward = Vec3(0.3 * std::sin(heading), std::cos(elevation), std::sin(elevation)).normalized();
  Vec3 candidate(std::cos(heading), 0.4 * std::sin(heading), std::sin(heading));
  candidate -= candidate.dot(s.outward) * s.outward;
  s.across = candidate.normalized();
  if (k % 2 == 0) s.across = -s.across;
  return s;
}

/// Upright pose with arms down, hips at the origin (meters).
inline Frame rest_posture() {
  Frame f;
  f[index(JointId::HipCenter)] = Vec3(0.0, 0.0, 0.0);
  f[index(JointId::ShoulderCenter)] = Vec3(0.0, 0.45, 0.0);
  f[index(JointId::Head)] = Vec3(0.0, 0.65, 0.02);
  f[index(JointId::ShoulderLeft)] = Vec3(-0.18, 0.42, 0.0);
  f[index(JointId::ElbowLeft)] = Vec3(-0.22, 0.16, 0.02);
  f[index(JointId::WristLeft)] = Vec3(-0.23, -0.07, 0.05);
  f[index(JointId::HandLeft)] = Vec3(-0.23, -0.15, 0.06);
  f[index(JointId::ShoulderRight)] = Vec3(0.18, 0.42, 0.0);
  f[index(JointId::ElbowRight)] = Vec3(0.22, 0.16, 0.02);
  f[index(JointId::WristRight)] = Vec3(0.23, -0.07, 0.05);
  f[index(JointId::HandRight)] = Vec3(0.23, -0.15, 0.06);
  return f;
}

/// Upper bound on per-frame joint displacement during rest (noise-free):
/// the sway's peak speed times one frame.
inline double rest_motion_bound() {
  return kSwayAmplitude * 2.0 * std::numbers::pi / kSwayPeriod;
}

/// Lower bound on the per-frame hand displacement for any gesture frame of a
/// zero-noise sequence generated with `config`.
inline double gesture_motion_floor(const SynthConfig& config) {
  double floor = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= config.n_classes; ++k) {
    const GestureShape s = gesture_shape(k);
    const double amp = s.amplitude * (1.0 - kAmplitudeJitter) * (1.0 - kBodyScaleJitter);
    // Chord of one frame's arc; the longest gesture moves slowest.
    const double step = 2.0 * std::numbers::pi * s.cycles / config.gesture_len.hi;
    const double chord = 2.0 * amp * std::sin(0.5 * step);
    floor = std::min(floor, chord - rest_motion_bound());
  }
  return floor;
}

/// Hand offset of a gesture at its `j`-th frame out of `length`.
inline Vec3 gesture_offset(const GestureShape& s, double amplitude, int j, int length) {
  const double phi = 2.0 * std::numbers::pi * s.cycles * (j + 1) / length;
  return amplitude * ((1.0 - std::cos(phi)) * s.outward + std::sin(phi) * s.across);
}

inline Vec3 mirror(const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); }

}  // namespace synth

/// Labeled random sequences: rest gaps alternating with parametric arm
/// gestures, deterministic in `config.seed`.
inline std::vector<SyntheticSample> generate_synthetic(const SynthConfig& config) {
  using namespace synth;
  config.validate();
  Rng master(config.seed);
  const Frame base = rest_posture();
  const std::array<JointId, 3> right_chain{JointId::ElbowRight, JointId::WristRight,
                                           JointId::HandRight};
  const std::array<JointId, 3> left_chain{JointId::ElbowLeft, JointId::WristLeft,
                                          JointId::HandLeft};

  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(config.n_sequences));
  for (int s = 0; s < config.n_sequences; ++s) {
    Rng rng = master.split();
    SyntheticSample sample;
    char id[32];
    std::snprintf(id, sizeof id, "synth%04d", s);
    sample.sequence.id = id;
    sample.sequence.frame_rate = config.frame_rate;

    const double scale = rng.uniform(1.0 - kBodyScaleJitter, 1.0 + kBodyScaleJitter);
    const Vec3 origin(rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), rng.uniform(2.0, 2.6));
    const double sway_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    // Timeline: gap, gesture, gap, ..., gesture, gap.
    struct Segment {
      int class_id;
      int length;
      double amplitude;
    };
    std::vector<Segment> timeline;
    timeline.push_back({0, rng.between(config.rest_gap.lo, config.rest_gap.hi), 0.0});
    for (int g = 0; g < config.gestures_per_sequence; ++g) {
      const int cls = rng.between(1, config.n_classes);
      const int len = rng.between(config.gesture_len.lo, config.gesture_len.hi);
      const double amp = gesture_shape(cls).amplitude * scale *
                         rng.uniform(1.0 - kAmplitudeJitter, 1.0 + kAmplitudeJitter);
      timeline.push_back({cls, len, amp});
      timeline.push_back({0, rng.between(config.rest_gap.lo, config.rest_gap.hi), 0.0});
    }

    int t = 0;
    for (const Segment& seg : timeline) {
      const GestureShape shape = seg.class_id ? gesture_shape(seg.class_id) : GestureShape{};
      if (seg.class_id) sample.annotations.push_back({seg.class_id, t, t + seg.length - 1});
      for (int j = 0; j < seg.length; ++j, ++t) {
        Frame f;
        for (int k = 0; k < kNumJoints; ++k) f[k] = base[k] * scale;
        const double sway =
            kSwayAmplitude * std::sin(2.0 * std::numbers::pi * t / kSwayPeriod + sway_phase);
        for (JointId jid : {JointId::Head, JointId::ElbowLeft, JointId::WristLeft,
                            JointId::HandLeft, JointId::ElbowRight, JointId::WristRight,
                            JointId::HandRight})
          f[index(jid)].x() += sway;
        if (seg.class_id) {
          const Vec3 offset = gesture_offset(shape, seg.amplitude, j, seg.length);
          if (shape.arm != Arm::left)
            for (int c = 0; c < 3; ++c) f[index(right_chain[c])] += kArmChain[c] * offset;
          if (shape.arm != Arm::right)
            for (int c = 0; c < 3; ++c) f[index(left_chain[c])] += kArmChain[c] * mirror(offset);
        }
        for (Vec3& p : f) p += origin;
        sample.sequence.frames.push_back(f);
      }
    }
    if (config.noise_sigma > 0.0)
      for (Frame& f : sample.sequence.frames)
        for (Vec3& p : f)
          for (int c = 0; c < 3; ++c) p[c] += config.noise_sigma * rng.normal();

    sample.labels = labels_from_annotations(sample.annotations, sample.sequence.size());
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace gesture
