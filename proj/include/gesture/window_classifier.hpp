#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/descriptor.hpp"
#include "gesture/nn/mlp.hpp"
#include "gesture/nn/model_io.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/segmenter.hpp"

namespace gesture {

struct WindowConfig {
  /// Frames between the three sampled descriptors; one entry per scale.
  std::vector<int> scale_steps{4};
  int slide_step = 2;
  int min_windows = 5;
  /// Periods up to this length hold a single gesture.
  int short_period_max = 54;
  double threshold_short = 0.8717;
  double threshold_long = 0.6255;
  int consec_required = 3;
  /// Per-scale weights for fused scores (multi-scale only). Not renormalized.
  std::vector<double> fusion_weights;
  int hidden1 = 300;
  int hidden2 = 100;
  nn::ScgOptions scg{.max_iterations = 150};
  std::uint64_t seed = 42;

  static WindowConfig method_a() { return {}; }

  static WindowConfig method_b() {
    WindowConfig c;
    c.scale_steps = {4, 3, 2};
    c.threshold_short = 0.6014;
    c.threshold_long = 0.6033;
    c.fusion_weights = {0.4895, 0.4576, 0.0529};
    return c;
  }

  int max_scale() const { return *std::max_element(scale_steps.begin(), scale_steps.end()); }

  void validate() const {
    if (scale_steps.empty()) fail(ErrorCategory::config, "at least one scale step is required");
    for (int s : scale_steps)
      if (s < 1) fail(ErrorCategory::config, "scale steps must be >= 1");
    if (slide_step < 1 || min_windows < 1 || consec_required < 1 || short_period_max < 1)
      fail(ErrorCategory::config, "window counts and steps must be positive");
    for (double t : {threshold_short, threshold_long})
      if (!(t > 0.0 && t < 1.0)) fail(ErrorCategory::config, "thresholds must be in (0, 1)");
    if (scale_steps.size() > 1 && fusion_weights.size() != scale_steps.size())
      fail(ErrorCategory::config, "one fusion weight per scale is required");
    for (double w : fusion_weights)
      if (!(w >= 0.0)) fail(ErrorCategory::config, "fusion weights must be non-negative");
  }
};

/// Natural cubic spline through each row of `block` (width x n), sampled at
/// m evenly spaced positions over [0, n-1].
inline Matrix cubic_resize(const Matrix& block, int m) {
  const Eigen::Index n = block.cols();
  if (n < 2) fail(ErrorCategory::usage, "cubic_resize needs at least 2 samples");
  if (m < 2) fail(ErrorCategory::usage, "cubic_resize target length must be >= 2");
  const Eigen::Index rows = block.rows();

  // Second derivatives at the knots (unit spacing), natural end conditions.
  Matrix second = Matrix::Zero(rows, n);
  if (n > 2) {
    const Eigen::Index k = n - 2;
    std::vector<double> diag(k, 4.0);
    Matrix rhs(rows, k);
    for (Eigen::Index i = 0; i < k; ++i)
      rhs.col(i) = 6.0 * (block.col(i + 2) - 2.0 * block.col(i + 1) + block.col(i));
    for (Eigen::Index i = 1; i < k; ++i) {
      const double factor = 1.0 / diag[i - 1];
      diag[i] -= factor;
      rhs.col(i) -= factor * rhs.col(i - 1);
    }
    second.col(k) = rhs.col(k - 1) / diag[k - 1];
    for (Eigen::Index i = k - 1; i-- > 0;)
      second.col(i + 1) = (rhs.col(i) - second.col(i + 2)) / diag[i];
  }

  Matrix out(rows, m);
  for (int j = 0; j < m; ++j) {
    const double x = static_cast<double>(j) * static_cast<double>(n - 1) / (m - 1);
    const Eigen::Index seg = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), n - 2);
    const double u = x - static_cast<double>(seg);
    const double v = 1.0 - u;
    out.col(j) = v * block.col(seg) + u * block.col(seg + 1) +
                 ((v * v * v - v) * second.col(seg) + (u * u * u - u) * second.col(seg + 1)) / 6.0;
  }
  return out;
}

inline int window_count(int length, int span, int slide) {
  return length < span ? 0 : (length - span) / slide + 1;
}

/// Descriptors of one period, stretched when too short to host
/// `min_windows` windows of the given span.
struct PeriodBlock {
  ActivityPeriod period;
  Matrix frames;  // width x local length
  bool resized = false;

  int local_length() const { return static_cast<int>(frames.cols()); }

  /// Proportional mapping from block columns back to sequence frames.
  int to_original(int local) const {
    if (!resized) return period.start + local;
    const double scale = static_cast<double>(period.length() - 1) / (local_length() - 1);
    return period.start + static_cast<int>(std::lround(local * scale));
  }
};

inline PeriodBlock prepare_period(const Matrix& descriptors, ActivityPeriod period, int span,
                                  const WindowConfig& config) {
  if (period.length() < 1) fail(ErrorCategory::usage, "empty activity period");
  if (period.start < 0 || period.end >= descriptors.cols())
    fail(ErrorCategory::usage, "activity period outside the sequence");
  PeriodBlock b{period, descriptors.middleCols(period.start, period.length()), false};
  if (window_count(period.length(), span, config.slide_step) < config.min_windows) {
    const int target = span + (config.min_windows - 1) * config.slide_step;
    b.frames = period.length() == 1 ? Matrix(b.frames.replicate(1, target))
                                    : cubic_resize(b.frames, target);
    b.resized = true;
  }
  return b;
}

/// Block columns used as window centers; every scale up to `anchor_scale`
/// fits around each of them.
inline std::vector<int> window_centers(const PeriodBlock& block, int anchor_scale, int slide) {
  std::vector<int> centers;
  for (int c = anchor_scale; c + anchor_scale < block.local_length(); c += slide)
    centers.push_back(c);
  return centers;
}

struct DynamicPose {
  Vector features;  // 3 * width
  int center_frame = 0;
  int first_frame = 0;
  int last_frame = 0;
};

inline DynamicPose dynamic_pose(const PeriodBlock& block, int center, int scale) {
  const Eigen::Index w = block.frames.rows();
  DynamicPose d;
  d.features.resize(3 * w);
  d.features.segment(0, w) = block.frames.col(center - scale);
  d.features.segment(w, w) = block.frames.col(center);
  d.features.segment(2 * w, w) = block.frames.col(center + scale);
  d.center_frame = block.to_original(center);
  d.first_frame = block.to_original(center - scale);
  d.last_frame = block.to_original(center + scale);
  return d;
}

/// Sliding windows of span 2s+1 over a period, advancing by the slide step.
inline std::vector<DynamicPose> extract_dynamic_poses(const Matrix& descriptors,
                                                      ActivityPeriod period, int scale_step,
                                                      const WindowConfig& config) {
  const PeriodBlock block = prepare_period(descriptors, period, 2 * scale_step + 1, config);
  std::vector<DynamicPose> out;
  for (int c : window_centers(block, scale_step, config.slide_step))
    out.push_back(dynamic_pose(block, c, scale_step));
  return out;
}

inline nn::MlpSpec window_classifier_spec(int input, const WindowConfig& config) {
  using nn::Activation;
  return {input,
          {{config.hidden1, Activation::tanh},
           {config.hidden2, Activation::tanh},
           {kNumGestureClasses, Activation::softmax}},
          nn::Loss::categorical_cross_entropy};
}

struct WindowTrainingSet {
  Matrix inputs;   // 3*width x samples
  Matrix targets;  // 20 x samples, one-hot
};

/// Dynamic poses over every ground-truth gesture interval.
inline WindowTrainingSet build_window_training_set(std::span<const LabeledDescriptors> data,
                                                   int scale_step, const WindowConfig& config) {
  std::vector<DynamicPose> poses;
  std::vector<int> classes;
  for (const auto& seq : data)
    for (const auto& g : annotations_from_labels(seq.labels)) {
      for (auto& d : extract_dynamic_poses(seq.descriptors, {g.start_frame, g.end_frame},
                                           scale_step, config)) {
        poses.push_back(std::move(d));
        classes.push_back(g.class_id);
      }
    }
  if (poses.empty()) fail(ErrorCategory::usage, "no gesture intervals to train a classifier on");
  WindowTrainingSet set;
  set.inputs.resize(poses.front().features.size(), static_cast<Eigen::Index>(poses.size()));
  set.targets = Matrix::Zero(kNumGestureClasses, set.inputs.cols());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    set.inputs.col(static_cast<Eigen::Index>(i)) = poses[i].features;
    set.targets(classes[i] - 1, static_cast<Eigen::Index>(i)) = 1.0;
  }
  return set;
}

inline nn::MlpModel train_window_classifier(const WindowTrainingSet& set, int scale_step,
                                            const FeatureContext& features,
                                            const WindowConfig& config,
                                            nn::OptimizationTrace* trace = nullptr) {
  config.validate();
  nn::MlpModel model{nn::Mlp(window_classifier_spec(static_cast<int>(set.inputs.rows()), config)),
                     features,
                     {{"role", "window_classifier"}, {"scale_step", std::to_string(scale_step)}}};
  Rng rng(config.seed + static_cast<std::uint64_t>(scale_step));
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

/// Class scores of one window with the frames it covers.
struct WindowScore {
  Vector scores;  // 20 entries, index k is class k+1
  int first_frame = 0;
  int last_frame = 0;
};

struct LabeledInterval {
  int class_id = 0;
  int start = 0;
  int end = 0;

  bool operator==(const LabeledInterval&) const = default;
};

/// Class of a window if its best score clears the threshold, else 0.
inline int recorded_class(const WindowScore& w, double threshold) {
  Eigen::Index best = 0;
  const double top = w.scores.maxCoeff(&best);
  return top > threshold ? static_cast<int>(best) + 1 : 0;
}

/// Short periods get one majority label; long ones get a label wherever
/// enough consecutive windows agree.
inline std::vector<LabeledInterval> decide_period(std::span<const WindowScore> windows,
                                                  ActivityPeriod period, double threshold_short,
                                                  double threshold_long,
                                                  const WindowConfig& config) {
  if (period.length() <= config.short_period_max) {
    std::map<int, int> votes;
    int recorded = 0;
    for (const auto& w : windows)
      if (int c = recorded_class(w, threshold_short)) {
        ++votes[c];
        ++recorded;
      }
    for (const auto& [cls, count] : votes)
      if (2 * count > recorded) return {{cls, period.start, period.end}};
    return {};
  }

  std::vector<int> frame_label(static_cast<std::size_t>(period.length()), 0);
  std::vector<int> rec(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) rec[i] = recorded_class(windows[i], threshold_long);
  for (std::size_t i = 0; i < windows.size();) {
    std::size_t j = i;
    while (j + 1 < windows.size() && rec[j + 1] == rec[i]) ++j;
    if (rec[i] != 0 && static_cast<int>(j - i + 1) >= config.consec_required) {
      for (std::size_t k = i; k <= j; ++k)
        for (int t = std::max(windows[k].first_frame, period.start);
             t <= std::min(windows[k].last_frame, period.end); ++t)
          if (frame_label[t - period.start] == 0) frame_label[t - period.start] = rec[i];
    }
    i = j + 1;
  }
  std::vector<LabeledInterval> out;
  for (const auto& a : annotations_from_labels(frame_label))
    out.push_back({a.class_id, period.start + a.start_frame, period.start + a.end_frame});
  return out;
}

inline std::vector<WindowScore> score_windows(const nn::Mlp& net, std::span<const DynamicPose> poses) {
  std::vector<WindowScore> out;
  if (poses.empty()) return out;
  Matrix x(poses.front().features.size(), static_cast<Eigen::Index>(poses.size()));
  for (std::size_t i = 0; i < poses.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = poses[i].features;
  const Matrix s = net.forward(x);
  for (std::size_t i = 0; i < poses.size(); ++i)
    out.push_back({s.col(static_cast<Eigen::Index>(i)), poses[i].first_frame, poses[i].last_frame});
  return out;
}

inline std::vector<LabeledInterval> classify_period_method_a(const nn::Mlp& net,
                                                             const Matrix& descriptors,
                                                             ActivityPeriod period, int scale_step,
                                                             const WindowConfig& config) {
  const auto poses = extract_dynamic_poses(descriptors, period, scale_step, config);
  const auto scores = score_windows(net, poses);
  return decide_period(scores, period, config.threshold_short, config.threshold_long, config);
}

/// Weighted sum of per-scale scores for windows sharing their center frames.
inline std::vector<WindowScore> fused_window_scores(std::span<const nn::Mlp* const> nets,
                                                    const Matrix& descriptors,
                                                    ActivityPeriod period,
                                                    const WindowConfig& config) {
  if (nets.size() != config.scale_steps.size())
    fail(ErrorCategory::mismatch, "one network per scale step is required");
  const int anchor = config.max_scale();
  const PeriodBlock block = prepare_period(descriptors, period, 2 * anchor + 1, config);
  const auto centers = window_centers(block, anchor, config.slide_step);
  std::vector<WindowScore> fused;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    std::vector<DynamicPose> poses;
    for (int c : centers) poses.push_back(dynamic_pose(block, c, config.scale_steps[k]));
    const auto scores = score_windows(*nets[k], poses);
    if (k == 0) {
      // The widest window defines the frames a fused decision covers.
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const DynamicPose wide = dynamic_pose(block, centers[i], anchor);
        fused.push_back({Vector::Zero(scores[i].scores.size()), wide.first_frame, wide.last_frame});
      }
    }
    for (std::size_t i = 0; i < scores.size(); ++i)
      fused[i].scores += config.fusion_weights[k] * scores[i].scores;
  }
  return fused;
}

inline std::vector<LabeledInterval> classify_period_method_b(std::span<const nn::Mlp* const> nets,
                                                             const Matrix& descriptors,
                                                             ActivityPeriod period,
                                                             const WindowConfig& config) {
  const auto fused = fused_window_scores(nets, descriptors, period, config);
  return decide_period(fused, period, config.threshold_short, config.threshold_long, config);
}

/// Writes intervals into a per-frame label vector of the given length.
inline FrameLabels intervals_to_labels(std::span<const LabeledInterval> intervals, int length) {
  FrameLabels labels(static_cast<std::size_t>(length), 0);
  for (const auto& iv : intervals)
    for (int t = std::max(0, iv.start); t <= std::min(length - 1, iv.end); ++t)
      if (labels[t] == 0) labels[t] = iv.class_id;
  return labels;
}

}  // namespace gesture
