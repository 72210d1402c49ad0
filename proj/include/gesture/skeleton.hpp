#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gesture/core.hpp"

namespace gesture {

/// Upper-body joints tracked per frame. Codes 0..10 are stable and appear in
/// interchange files.
enum class JointId : int {
  HipCenter = 0,
  ShoulderCenter = 1,
  Head = 2,
  ShoulderLeft = 3,
  ElbowLeft = 4,
  WristLeft = 5,
  HandLeft = 6,
  ShoulderRight = 7,
  ElbowRight = 8,
  WristRight = 9,
  HandRight = 10,
};

constexpr int index(JointId j) { return static_cast<int>(j); }

inline constexpr std::array<std::string_view, kNumJoints> kJointNames{
    "HipCenter",  "ShoulderCenter", "Head",       "ShoulderLeft",
    "ElbowLeft",  "WristLeft",      "HandLeft",   "ShoulderRight",
    "ElbowRight", "WristRight",     "HandRight"};

struct Bone {
  JointId parent;
  JointId child;
};

/// Kinematic tree edges, ordered so every parent precedes its children.
inline constexpr std::array<Bone, 10> kTreeBones{{
    {JointId::HipCenter, JointId::ShoulderCenter},
    {JointId::ShoulderCenter, JointId::Head},
    {JointId::ShoulderCenter, JointId::ShoulderLeft},
    {JointId::ShoulderLeft, JointId::ElbowLeft},
    {JointId::ElbowLeft, JointId::WristLeft},
    {JointId::WristLeft, JointId::HandLeft},
    {JointId::ShoulderCenter, JointId::ShoulderRight},
    {JointId::ShoulderRight, JointId::ElbowRight},
    {JointId::ElbowRight, JointId::WristRight},
    {JointId::WristRight, JointId::HandRight},
}};

/// Hand-to-hip edges that only take part in angle triples.
inline constexpr std::array<Bone, 2> kVirtualBones{{
    {JointId::HandLeft, JointId::HipCenter},
    {JointId::HandRight, JointId::HipCenter},
}};

inline constexpr int kNumBones = static_cast<int>(kTreeBones.size() + kVirtualBones.size());

/// Tree bones first (kTreeBones order), then the two virtual bones.
inline constexpr Bone bone(int i) {
  return i < static_cast<int>(kTreeBones.size()) ? kTreeBones[i]
                                                 : kVirtualBones[i - kTreeBones.size()];
}

/// Unit direction of each tree bone in an upright rest pose with the arms
/// hanging down. Used when a bone collapses in the first frame.
inline std::array<Vec3, kTreeBones.size()> canonical_bone_directions() {
  const Vec3 up(0, 1, 0), down(0, -1, 0), left(-1, 0, 0), right(1, 0, 0);
  return {up, up, left, down, down, down, right, down, down, down};
}

using Frame = std::array<Vec3, kNumJoints>;

struct SkeletonSequence {
  std::string id;
  double frame_rate = 20.0;
  std::vector<Frame> frames;

  int size() const { return static_cast<int>(frames.size()); }

  const Vec3& at(int frame, JointId j) const { return frames[frame][index(j)]; }

  void validate() const {
    if (frames.empty()) fail(ErrorCategory::format, "sequence '" + id + "' has no frames");
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate))
      fail(ErrorCategory::format, "sequence '" + id + "' has invalid frame rate");
    for (std::size_t t = 0; t < frames.size(); ++t)
      for (const Vec3& p : frames[t])
        if (!p.allFinite())
          fail(ErrorCategory::format,
               "sequence '" + id + "' has a non-finite coordinate in frame " + std::to_string(t));
  }
};

/// Inclusive frame interval carrying a gesture class in 1..20.
struct GestureAnnotation {
  int class_id = 0;
  int start_frame = 0;
  int end_frame = 0;

  int length() const { return end_frame - start_frame + 1; }
  bool operator==(const GestureAnnotation&) const = default;
};

/// Per-frame class: 0 is rest, 1..20 are gestures.
using FrameLabels = std::vector<int>;

inline FrameLabels labels_from_annotations(std::span<const GestureAnnotation> annotations,
                                           int length) {
  FrameLabels labels(static_cast<std::size_t>(std::max(length, 0)), 0);
  for (const auto& a : annotations) {
    if (a.class_id < 1 || a.class_id > kNumGestureClasses)
      fail(ErrorCategory::format, "annotation class " + std::to_string(a.class_id) +
                                      " outside 1.." + std::to_string(kNumGestureClasses));
    if (a.start_frame < 0 || a.end_frame >= length || a.start_frame > a.end_frame)
      fail(ErrorCategory::format, "annotation [" + std::to_string(a.start_frame) + ", " +
                                      std::to_string(a.end_frame) + "] outside sequence of " +
                                      std::to_string(length) + " frames");
    for (int t = a.start_frame; t <= a.end_frame; ++t) {
      if (labels[t] != 0)
        fail(ErrorCategory::format, "overlapping annotations at frame " + std::to_string(t));
      labels[t] = a.class_id;
    }
  }
  return labels;
}

/// Maximal runs of a constant nonzero label.
inline std::vector<GestureAnnotation> annotations_from_labels(std::span<const int> labels) {
  std::vector<GestureAnnotation> out;
  const int n = static_cast<int>(labels.size());
  for (int t = 0; t < n;) {
    if (labels[t] == 0) {
      ++t;
      continue;
    }
    int end = t;
    while (end + 1 < n && labels[end + 1] == labels[t]) ++end;
    out.push_back({labels[t], t, end});
    t = end + 1;
  }
  return out;
}

inline void validate_labels(std::span<const int> labels, int length) {
  if (static_cast<int>(labels.size()) != length)
    fail(ErrorCategory::mismatch, "label count " + std::to_string(labels.size()) +
                                      " does not match " + std::to_string(length) + " frames");
  for (int v : labels)
    if (v < 0 || v > kNumGestureClasses)
      fail(ErrorCategory::format, "label " + std::to_string(v) + " outside 0..20");
}

}  // namespace gesture
