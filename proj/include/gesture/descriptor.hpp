#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/io.hpp"
#include "gesture/skeleton.hpp"

namespace gesture {

/// Fixed layout of the 183-component pose descriptor.
namespace layout {
inline constexpr int kPositions = 0;
inline constexpr int kVelocities = 33;
inline constexpr int kAccelerations = 66;
inline constexpr int kInclination = 99;
inline constexpr int kAzimuth = 108;
inline constexpr int kBending = 117;
inline constexpr int kDistances = 128;
inline constexpr int kEnd = 183;
inline constexpr int kNumTriples = 9;
inline constexpr int kNumPairs = kNumJoints * (kNumJoints - 1) / 2;
static_assert(kEnd == kDescriptorWidth);
static_assert(kDistances + kNumPairs == kEnd);
}  // namespace layout

struct AngleTriple {
  JointId first;
  JointId middle;
  JointId last;
};

/// Anatomically connected triples; the last two close over the virtual
/// Hand-HipCenter bones.
inline constexpr std::array<AngleTriple, layout::kNumTriples> kAngleTriples{{
    {JointId::ShoulderCenter, JointId::ShoulderLeft, JointId::ElbowLeft},
    {JointId::ShoulderCenter, JointId::ShoulderRight, JointId::ElbowRight},
    {JointId::ShoulderLeft, JointId::ElbowLeft, JointId::WristLeft},
    {JointId::ShoulderRight, JointId::ElbowRight, JointId::WristRight},
    {JointId::ElbowLeft, JointId::WristLeft, JointId::HandLeft},
    {JointId::ElbowRight, JointId::WristRight, JointId::HandRight},
    {JointId::Head, JointId::ShoulderCenter, JointId::HipCenter},
    {JointId::WristLeft, JointId::HandLeft, JointId::HipCenter},
    {JointId::WristRight, JointId::HandRight, JointId::HipCenter},
}};

/// Reference length per bone: 10 tree bones then 2 virtual bones.
using BoneLengths = std::array<double, kNumBones>;

/// Root-relative, bone-normalized joint positions; one Frame per input frame.
using NormalizedPose = std::vector<Frame>;

inline double bone_length(const Frame& f, const Bone& b) {
  return (f[index(b.child)] - f[index(b.parent)]).norm();
}

/// Per-bone mean length over every frame of the given sequences.
inline BoneLengths mean_bone_lengths(std::span<const SkeletonSequence> sequences) {
  BoneLengths sum{};
  long long count = 0;
  for (const auto& seq : sequences)
    for (const Frame& f : seq.frames) {
      for (int b = 0; b < kNumBones; ++b) sum[b] += bone_length(f, bone(b));
      ++count;
    }
  if (count == 0) fail(ErrorCategory::usage, "no frames to measure bone lengths from");
  for (double& s : sum) s /= static_cast<double>(count);
  return sum;
}

inline NormalizedPose normalize_skeleton(const SkeletonSequence& seq,
                                         const BoneLengths& reference) {
  for (int b = 0; b < kNumBones; ++b)
    if (!(reference[b] > 0.0)) fail(ErrorCategory::usage, "reference bone lengths must be > 0");
  const auto canonical = canonical_bone_directions();
  std::array<Vec3, kTreeBones.size()> last_dir = canonical;

  NormalizedPose out(seq.frames.size());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Frame& raw = seq.frames[t];
    Frame& norm = out[t];
    norm[index(JointId::HipCenter)] = Vec3::Zero();
    for (std::size_t b = 0; b < kTreeBones.size(); ++b) {
      const Bone& bn = kTreeBones[b];
      const Vec3 v = raw[index(bn.child)] - raw[index(bn.parent)];
      const double len = v.norm();
      // Coincident joints keep the previous frame's direction.
      if (len > 1e-12) last_dir[b] = v / len;
      norm[index(bn.child)] = norm[index(bn.parent)] + reference[b] * last_dir[b];
    }
  }
  return out;
}

inline std::array<double, 5> gaussian_kernel() {
  std::array<double, 5> k;
  double sum = 0.0;
  for (int i = -2; i <= 2; ++i) sum += k[i + 2] = std::exp(-0.5 * i * i);
  for (double& v : k) v /= sum;
  return k;
}

/// 5-tap Gaussian (sigma 1) with edge replication.
inline std::vector<double> gaussian_smooth(std::span<const double> series) {
  static const auto kernel = gaussian_kernel();
  const int n = static_cast<int>(series.size());
  std::vector<double> out(series.size());
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int k = -2; k <= 2; ++k) acc += kernel[k + 2] * series[std::clamp(t + k, 0, n - 1)];
    out[t] = acc;
  }
  return out;
}

inline NormalizedPose smooth_pose(const NormalizedPose& pose) {
  NormalizedPose out = pose;
  std::vector<double> series(pose.size());
  for (int j = 0; j < kNumJoints; ++j)
    for (int c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < pose.size(); ++t) series[t] = pose[t][j][c];
      const auto smoothed = gaussian_smooth(series);
      for (std::size_t t = 0; t < pose.size(); ++t) out[t][j][c] = smoothed[t];
    }
  return out;
}

struct Derivatives {
  Matrix velocity;      // dim x frames
  Matrix acceleration;  // dim x frames
};

/// Central differences per row of `positions` (dim x frames), one-sided at
/// the two boundary frames.
inline Derivatives derivatives(const Matrix& positions) {
  const Eigen::Index n = positions.cols();
  Derivatives d{Matrix::Zero(positions.rows(), n), Matrix::Zero(positions.rows(), n)};
  if (n < 2) return d;
  if (n == 2) {
    d.velocity.col(0) = d.velocity.col(1) = positions.col(1) - positions.col(0);
    return d;
  }
  for (Eigen::Index t = 1; t + 1 < n; ++t) {
    d.velocity.col(t) = 0.5 * (positions.col(t + 1) - positions.col(t - 1));
    d.acceleration.col(t) = positions.col(t + 1) - 2.0 * positions.col(t) + positions.col(t - 1);
  }
  d.velocity.col(0) = positions.col(1) - positions.col(0);
  d.velocity.col(n - 1) = positions.col(n - 1) - positions.col(n - 2);
  d.acceleration.col(0) = positions.col(2) - 2.0 * positions.col(1) + positions.col(0);
  d.acceleration.col(n - 1) =
      positions.col(n - 1) - 2.0 * positions.col(n - 2) + positions.col(n - 3);
  return d;
}

/// Orthonormal frame attached to the torso.
struct BodyFrame {
  Vec3 up;
  Vec3 lateral;
  Vec3 normal;

  static BodyFrame canonical() {
    BodyFrame f{Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3::Zero()};
    f.normal = f.up.cross(f.lateral);
    return f;
  }

  /// Empty when the torso is degenerate.
  static std::optional<BodyFrame> from_pose(const Frame& pose) {
    const Vec3 spine = pose[index(JointId::ShoulderCenter)] - pose[index(JointId::HipCenter)];
    if (spine.norm() < 1e-12) return std::nullopt;
    BodyFrame f;
    f.up = spine.normalized();
    Vec3 across = pose[index(JointId::ShoulderLeft)] - pose[index(JointId::ShoulderRight)];
    across -= across.dot(f.up) * f.up;
    if (across.norm() < 1e-12) return std::nullopt;
    f.lateral = across.normalized();
    f.normal = f.up.cross(f.lateral);
    return f;
  }
};

inline double unsigned_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

struct PoseAngles {
  std::array<double, layout::kNumTriples> inclination{};
  std::array<double, layout::kNumTriples> azimuth{};
  std::array<double, kNumJoints> bending{};
};

inline PoseAngles angles(const Frame& pose, const BodyFrame& body) {
  PoseAngles out;
  for (int i = 0; i < layout::kNumTriples; ++i) {
    const auto& tr = kAngleTriples[i];
    const Vec3 a = pose[index(tr.first)] - pose[index(tr.middle)];
    const Vec3 b = pose[index(tr.last)] - pose[index(tr.middle)];
    out.inclination[i] = unsigned_angle(a, b);
    const Vec3 pa = a - a.dot(body.up) * body.up;
    const Vec3 pb = b - b.dot(body.up) * body.up;
    // A segment along the up axis has no heading; its azimuth is 0.
    if (pa.norm() <= 1e-9 * a.norm() || pb.norm() <= 1e-9 * b.norm()) continue;
    double az = std::atan2(body.up.dot(pa.cross(pb)), pa.dot(pb));
    if (az <= -std::numbers::pi) az = std::numbers::pi;
    out.azimuth[i] = az;
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3& p = pose[j];
    out.bending[j] = p.norm() > 0.0 ? unsigned_angle(body.normal, p) : 0.0;
  }
  return out;
}

/// Body frame of `pose`, or the canonical one if the torso is degenerate.
inline PoseAngles angles(const Frame& pose) {
  return angles(pose, BodyFrame::from_pose(pose).value_or(BodyFrame::canonical()));
}

/// All unordered joint pairs (i < j) in lexicographic order.
inline std::array<double, layout::kNumPairs> pairwise_distances(const Frame& pose) {
  std::array<double, layout::kNumPairs> out{};
  int k = 0;
  for (int i = 0; i < kNumJoints; ++i)
    for (int j = i + 1; j < kNumJoints; ++j) out[k++] = (pose[i] - pose[j]).norm();
  return out;
}

/// Per-component z-score statistics.
struct Standardizer {
  Vector mean;
  Vector stddev;

  static Standardizer fit(std::span<const Matrix> blocks) {
    Eigen::Index width = -1;
    long long n = 0;
    for (const Matrix& b : blocks) {
      if (b.cols() == 0) continue;
      if (width >= 0 && b.rows() != width)
        fail(ErrorCategory::mismatch, "descriptor widths differ while fitting standardizer");
      width = b.rows();
      n += b.cols();
    }
    if (n < 2) fail(ErrorCategory::usage, "standardizer needs at least 2 frames");
    Standardizer s;
    s.mean = Vector::Zero(width);
    for (const Matrix& b : blocks)
      if (b.cols()) s.mean += b.rowwise().sum();
    s.mean /= static_cast<double>(n);
    Vector var = Vector::Zero(width);
    for (const Matrix& b : blocks)
      if (b.cols()) var += (b.colwise() - s.mean).array().square().rowwise().sum().matrix();
    var /= static_cast<double>(n);
    s.stddev = var.array().sqrt();
    for (Eigen::Index i = 0; i < width; ++i) {
      // Zero variance (up to rounding of the mean) maps to unit scale.
      if (!(s.stddev[i] > 1e-12 * std::max(1.0, std::abs(s.mean[i])))) s.stddev[i] = 1.0;
    }
    return s;
  }

  static Standardizer fit(const Matrix& block) { return fit(std::span<const Matrix>(&block, 1)); }

  bool empty() const { return mean.size() == 0; }

  void apply(Matrix& block) const {
    if (block.rows() != mean.size())
      fail(ErrorCategory::mismatch, "descriptor width " + std::to_string(block.rows()) +
                                        " does not match standardizer width " +
                                        std::to_string(mean.size()));
    block = (block.colwise() - mean).array().colwise() / stddev.array();
  }
};

/// Everything needed to turn raw skeletons into standardized descriptors.
struct FeatureContext {
  BoneLengths bone_lengths{};
  Standardizer standardizer;
};

/// Raw (unstandardized) 183 x n descriptor matrix.
inline Matrix build_descriptors(const SkeletonSequence& seq, const BoneLengths& bone_lengths,
                                const Standardizer* standardizer = nullptr) {
  seq.validate();
  const NormalizedPose pose = smooth_pose(normalize_skeleton(seq, bone_lengths));
  const int n = seq.size();
  Matrix out(kDescriptorWidth, n);

  Matrix positions(3 * kNumJoints, n);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < kNumJoints; ++j) positions.block<3, 1>(3 * j, t) = pose[t][j];
  const Derivatives d = derivatives(positions);
  out.middleRows(layout::kPositions, 33) = positions;
  out.middleRows(layout::kVelocities, 33) = d.velocity;
  out.middleRows(layout::kAccelerations, 33) = d.acceleration;

  BodyFrame body = BodyFrame::canonical();
  for (int t = 0; t < n; ++t) {
    if (auto f = BodyFrame::from_pose(pose[t])) body = *f;
    const PoseAngles a = angles(pose[t], body);
    for (int i = 0; i < layout::kNumTriples; ++i) {
      out(layout::kInclination + i, t) = a.inclination[i];
      out(layout::kAzimuth + i, t) = a.azimuth[i];
    }
    for (int j = 0; j < kNumJoints; ++j) out(layout::kBending + j, t) = a.bending[j];
    const auto dist = pairwise_distances(pose[t]);
    for (int k = 0; k < layout::kNumPairs; ++k) out(layout::kDistances + k, t) = dist[k];
  }
  if (standardizer) standardizer->apply(out);
  return out;
}

inline Matrix build_descriptors(const SkeletonSequence& seq, const FeatureContext& ctx) {
  return build_descriptors(seq, ctx.bone_lengths,
                           ctx.standardizer.empty() ? nullptr : &ctx.standardizer);
}

// -- persistence --------------------------------------------------------------
//
//   FEATURES <width>
//   BONES <12 values>
//   MEAN <width values>
//   STD <width values>

inline void write_features(std::ostream& out, const FeatureContext& ctx) {
  out << "FEATURES " << ctx.standardizer.mean.size() << "\nBONES";
  for (double v : ctx.bone_lengths) out << ' ' << format_double(v);
  out << "\nMEAN";
  for (double v : ctx.standardizer.mean) out << ' ' << format_double(v);
  out << "\nSTD";
  for (double v : ctx.standardizer.stddev) out << ' ' << format_double(v);
  out << '\n';
}

inline FeatureContext read_features(std::istream& in) {
  auto line_tokens = [&](std::string_view key, std::size_t expect) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCategory::format, "missing " + std::string(key));
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] != key || tok.size() != expect + 1)
      fail(ErrorCategory::format, "malformed " + std::string(key) + " line");
    std::vector<double> v(expect);
    for (std::size_t i = 0; i < expect; ++i)
      if (!parse_double(tok[i + 1], v[i]))
        fail(ErrorCategory::format, "bad number in " + std::string(key) + " line");
    return v;
  };
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCategory::format, "missing FEATURES block");
  auto head = split_ws(line);
  long long width = 0;
  if (head.size() != 2 || head[0] != "FEATURES" || !parse_int(head[1], width) || width < 0)
    fail(ErrorCategory::format, "malformed FEATURES header");
  FeatureContext ctx;
  auto bones = line_tokens("BONES", kNumBones);
  std::copy(bones.begin(), bones.end(), ctx.bone_lengths.begin());
  auto mean = line_tokens("MEAN", static_cast<std::size_t>(width));
  auto sd = line_tokens("STD", static_cast<std::size_t>(width));
  ctx.standardizer.mean = Eigen::Map<Vector>(mean.data(), width);
  ctx.standardizer.stddev = Eigen::Map<Vector>(sd.data(), width);
  return ctx;
}

/// Standalone feature file: `GFEAT 1` followed by a FEATURES block.
inline void save_features(const std::string& path, const FeatureContext& ctx) {
  auto out = open_output(path);
  out << "GFEAT 1\n";
  write_features(out, ctx);
  check_written(out, path);
}

inline FeatureContext load_features(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != "GFEAT 1")
    fail(ErrorCategory::format, path + ": not a GFEAT 1 file");
  return read_features(in);
}

}  // namespace gesture
