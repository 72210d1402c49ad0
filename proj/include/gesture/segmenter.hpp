#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/descriptor.hpp"
#include "gesture/nn/mlp.hpp"
#include "gesture/nn/model_io.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/rng.hpp"
#include "gesture/skeleton.hpp"

namespace gesture {

/// Inclusive frame interval of detected motion.
struct ActivityPeriod {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool operator==(const ActivityPeriod&) const = default;
};

/// Descriptor matrix of one sequence with its per-frame ground truth.
struct LabeledDescriptors {
  std::string id;
  Matrix descriptors;  // width x frames
  FrameLabels labels;
};

struct SegmenterConfig {
  double threshold = 0.4;
  int min_period = 12;
  int loess_span = 11;
  /// Rest frames this close to a gesture are negative candidates. When unset
  /// the margin equals the gesture's own length.
  std::optional<int> negative_margin;
  int hidden1 = 100;
  int hidden2 = 100;
  nn::ScgOptions scg{.max_iterations = 150};
  std::uint64_t seed = 42;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
      fail(ErrorCategory::config, "segmenter threshold must be in (0, 1)");
    if (min_period < 1) fail(ErrorCategory::config, "min_period must be >= 1");
    if (loess_span < 5 || loess_span % 2 == 0)
      fail(ErrorCategory::config, "loess_span must be odd and >= 5");
    if (negative_margin && *negative_margin < 1)
      fail(ErrorCategory::config, "negative_margin must be >= 1");
  }
};

/// Frame indices used to train the activity detector for one sequence.
struct BinaryCandidates {
  std::vector<int> positives;
  std::vector<int> negatives;
};

/// Gesture frames are positives; rest frames within the margin before or
/// after a gesture are negative candidates.
inline BinaryCandidates binary_candidates(std::span<const int> labels,
                                          std::optional<int> margin = std::nullopt) {
  BinaryCandidates out;
  const int n = static_cast<int>(labels.size());
  std::vector<char> negative(labels.size(), 0);
  for (const auto& g : annotations_from_labels(labels)) {
    const int m = margin.value_or(g.length());
    for (int t = std::max(0, g.start_frame - m); t < g.start_frame; ++t) negative[t] = 1;
    for (int t = g.end_frame + 1; t <= std::min(n - 1, g.end_frame + m); ++t) negative[t] = 1;
  }
  for (int t = 0; t < n; ++t) {
    if (labels[t] != 0)
      out.positives.push_back(t);
    else if (negative[t])
      out.negatives.push_back(t);
  }
  return out;
}

struct BinaryTrainingSet {
  Matrix inputs;   // width x samples
  Matrix targets;  // 1 x samples
};

/// Positives plus an equal-sized random subset of the negative candidates.
inline BinaryTrainingSet build_binary_training_set(std::span<const LabeledDescriptors> data,
                                                   const SegmenterConfig& config, Rng& rng) {
  struct Ref {
    std::size_t seq;
    int frame;
  };
  std::vector<Ref> pos, neg;
  Eigen::Index width = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].descriptors.cols() != static_cast<Eigen::Index>(data[s].labels.size()))
      fail(ErrorCategory::mismatch, "descriptor and label lengths differ for " + data[s].id);
    width = data[s].descriptors.rows();
    const auto c = binary_candidates(data[s].labels, config.negative_margin);
    for (int t : c.positives) pos.push_back({s, t});
    for (int t : c.negatives) neg.push_back({s, t});
  }
  if (pos.empty()) fail(ErrorCategory::usage, "no gesture frames to train the segmenter on");
  if (neg.size() > pos.size()) {
    // Partial Fisher-Yates: the first |pos| entries become a uniform sample.
    for (std::size_t i = 0; i < pos.size(); ++i) std::swap(neg[i], neg[i + rng.below(neg.size() - i)]);
    neg.resize(pos.size());
    std::sort(neg.begin(), neg.end(),
              [](const Ref& a, const Ref& b) { return a.seq != b.seq ? a.seq < b.seq : a.frame < b.frame; });
  }
  BinaryTrainingSet set;
  set.inputs.resize(width, static_cast<Eigen::Index>(pos.size() + neg.size()));
  set.targets.resize(1, set.inputs.cols());
  Eigen::Index c = 0;
  for (const Ref& r : pos) {
    set.inputs.col(c) = data[r.seq].descriptors.col(r.frame);
    set.targets(0, c++) = 1.0;
  }
  for (const Ref& r : neg) {
    set.inputs.col(c) = data[r.seq].descriptors.col(r.frame);
    set.targets(0, c++) = 0.0;
  }
  return set;
}

inline nn::MlpSpec segmenter_spec(int input, const SegmenterConfig& config) {
  using nn::Activation;
  return {input,
          {{config.hidden1, Activation::relu},
           {config.hidden2, Activation::tanh},
           {1, Activation::sigmoid}},
          nn::Loss::binary_cross_entropy};
}

/// Full-batch SCG training of the frame-wise activity detector.
inline nn::MlpModel train_segmenter(const BinaryTrainingSet& set, const FeatureContext& features,
                                    const SegmenterConfig& config,
                                    nn::OptimizationTrace* trace = nullptr) {
  config.validate();
  nn::MlpModel model{nn::Mlp(segmenter_spec(static_cast<int>(set.inputs.rows()), config)),
                     features,
                     {{"role", "segmenter"}}};
  Rng rng(config.seed);
  model.network.initialize(rng);
  Vector w = model.network.parameters();
  const nn::Mlp& net = model.network;
  auto result = nn::minimize_scg(
      [&](const Vector& p, Vector& g) { return net.gradient(p, set.inputs, set.targets, g); }, w,
      config.scg);
  model.network.set_parameters(w);
  if (trace) *trace = std::move(result);
  return model;
}

/// Local quadratic regression with tricube weights. Windows are truncated
/// (not padded) at the sequence ends.
inline std::vector<double> loess_smooth(std::span<const double> scores, int span) {
  const int n = static_cast<int>(scores.size());
  std::vector<double> out(scores.begin(), scores.end());
  if (n < 3) return out;
  const int half = std::max(1, span / 2);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    const double radius = std::max(i - lo, hi - i) + 1.0;
    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (int j = lo; j <= hi; ++j) {
      const double x = j - i;
      const double u = std::abs(x) / radius;
      const double w = std::pow(1.0 - u * u * u, 3);
      const Eigen::Vector3d basis(1.0, x, x * x);
      normal += w * basis * basis.transpose();
      rhs += w * scores[j] * basis;
    }
    // The fitted polynomial is centered on frame i, so its value there is
    // the constant coefficient.
    out[i] = normal.ldlt().solve(rhs)[0];
  }
  return out;
}

/// Maximal runs strictly above the threshold that last at least
/// `min_period` frames.
inline std::vector<ActivityPeriod> extract_periods(std::span<const double> scores,
                                                   const SegmenterConfig& config) {
  std::vector<ActivityPeriod> out;
  const int n = static_cast<int>(scores.size());
  for (int t = 0; t < n;) {
    if (!(scores[t] > config.threshold)) {
      ++t;
      continue;
    }
    int end = t;
    while (end + 1 < n && scores[end + 1] > config.threshold) ++end;
    if (end - t + 1 >= config.min_period) out.push_back({t, end});
    t = end + 1;
  }
  return out;
}

/// Raw per-frame activity scores.
inline std::vector<double> frame_scores(const nn::Mlp& net, const Matrix& descriptors) {
  const Matrix out = net.forward(descriptors);
  return {out.data(), out.data() + out.size()};
}

struct Segmentation {
  std::vector<double> raw_scores;
  std::vector<double> smoothed_scores;
  std::vector<ActivityPeriod> periods;
};

inline Segmentation segment_sequence(const nn::Mlp& net, const Matrix& descriptors,
                                     const SegmenterConfig& config) {
  Segmentation s;
  s.raw_scores = frame_scores(net, descriptors);
  s.smoothed_scores = loess_smooth(s.raw_scores, config.loess_span);
  s.periods = extract_periods(s.smoothed_scores, config);
  return s;
}

/// 1 inside any period, 0 elsewhere.
inline std::vector<int> activity_mask(std::span<const ActivityPeriod> periods, int length) {
  std::vector<int> mask(static_cast<std::size_t>(length), 0);
  for (const auto& p : periods)
    for (int t = std::max(0, p.start); t <= std::min(length - 1, p.end); ++t) mask[t] = 1;
  return mask;
}

}  // namespace gesture
