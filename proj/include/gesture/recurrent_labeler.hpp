#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/descriptor.hpp"
#include "gesture/nn/bilstm.hpp"
#include "gesture/nn/model_io.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/segmenter.hpp"

namespace gesture {

struct RnnConfig {
  std::vector<int> layer_sizes{64, 64, 32};
  double dropout = 0.6;
  double leaky_slope = 0.01;
  nn::SgdmOptions sgdm{};
  /// Global-norm gradient clip per batch; 0 disables clipping.
  double clip_norm = 1.0;
  int window_length = 10;
  int rest_step = 5;
  int active_step = 2;
  int min_run = 15;
  int loess_span = 11;

  static RnnConfig paper_scale() {
    RnnConfig c;
    c.layer_sizes = {1024, 1024, 512};
    return c;
  }

  void validate() const {
    if (layer_sizes.empty()) fail(ErrorCategory::config, "at least one LSTM layer is required");
    for (int s : layer_sizes)
      if (s < 1) fail(ErrorCategory::config, "LSTM layer sizes must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCategory::config, "dropout must be in [0, 1)");
    if (window_length < 1 || rest_step < 1 || active_step < 1)
      fail(ErrorCategory::config, "window length and steps must be positive");
    if (min_run < 1) fail(ErrorCategory::config, "min_run must be >= 1");
    if (loess_span < 5 || loess_span % 2 == 0)
      fail(ErrorCategory::config, "loess_span must be odd and >= 5");
    sgdm.validate();
  }
};

/// A fixed-length slice of descriptors with per-frame targets.
struct TrainWindow {
  Matrix frames;  // width x window_length
  std::vector<int> targets;
};

/// Slides a window over the sequence, advancing faster through pure rest.
inline std::vector<TrainWindow> extract_train_windows(const Matrix& descriptors,
                                                      std::span<const int> labels,
                                                      const RnnConfig& config) {
  if (descriptors.cols() != static_cast<Eigen::Index>(labels.size()))
    fail(ErrorCategory::mismatch, "descriptor and label lengths differ");
  std::vector<TrainWindow> out;
  const int n = static_cast<int>(labels.size());
  const int len = config.window_length;
  for (int start = 0; start + len <= n;) {
    TrainWindow w{descriptors.middleCols(start, len),
                  std::vector<int>(labels.begin() + start, labels.begin() + start + len)};
    const bool all_rest = std::all_of(w.targets.begin(), w.targets.end(), [](int v) { return v == 0; });
    out.push_back(std::move(w));
    start += all_rest ? config.rest_step : config.active_step;
  }
  return out;
}

/// biLSTM layers with leaky-ReLU outputs and dropout between them; the last
/// recurrent layer feeds the softmax directly.
inline nn::LstmStackSpec rnn_spec(int input, const RnnConfig& config) {
  nn::LstmStackSpec spec;
  spec.input = input;
  spec.leaky_slope = config.leaky_slope;
  for (std::size_t i = 0; i < config.layer_sizes.size(); ++i) {
    const bool last = i + 1 == config.layer_sizes.size();
    spec.layers.push_back({config.layer_sizes[i],
                           last ? nn::Activation::identity : nn::Activation::leaky_relu,
                           last ? 0.0 : config.dropout});
  }
  return spec;
}

inline nn::BiLstmModel train_rnn(std::span<const TrainWindow> windows,
                                 const FeatureContext& features, const RnnConfig& config,
                                 nn::OptimizationTrace* trace = nullptr,
                                 const std::function<void(int, double)>& on_epoch = {}) {
  config.validate();
  if (windows.empty()) fail(ErrorCategory::usage, "no training windows");
  nn::BiLstmModel model{nn::BiLstm(rnn_spec(static_cast<int>(windows.front().frames.rows()), config)),
                        features,
                        {{"role", "recurrent_labeler"}}};
  Rng init(config.sgdm.seed);
  model.network.initialize(init);
  const nn::BiLstm& net = model.network;

  std::vector<const Matrix*> batch_frames;
  std::vector<int> batch_targets;
  auto objective = [&](std::span<const std::size_t> batch, const Vector& w, Vector& grad, Rng& rng) {
    batch_frames.clear();
    for (std::size_t i : batch) batch_frames.push_back(&windows[i].frames);
    const nn::SequenceBatch x = nn::SequenceBatch::pack(batch_frames);
    batch_targets.assign(static_cast<std::size_t>(x.data.cols()), 0);
    for (int t = 0; t < x.steps; ++t)
      for (int b = 0; b < x.batch; ++b)
        batch_targets[static_cast<std::size_t>(t) * x.batch + b] = windows[batch[b]].targets[t];
    const double loss = net.gradient(w, x, batch_targets, grad, &rng);
    nn::clip_global_norm(grad, config.clip_norm);
    return loss;
  };
  Vector w = model.network.parameters();
  auto result = nn::minimize_sgdm(objective, windows.size(), w, config.sgdm, on_epoch);
  model.network.set_parameters(w);
  if (trace) *trace = std::move(result);
  return model;
}

/// Consecutive non-overlapping [start, end) tiles; the last may be shorter.
inline std::vector<std::pair<int, int>> inference_tiles(int length, int window_length) {
  std::vector<std::pair<int, int>> tiles;
  for (int s = 0; s < length; s += window_length)
    tiles.emplace_back(s, std::min(length, s + window_length));
  return tiles;
}

/// Resets nonzero runs shorter than `min_run` to rest.
inline FrameLabels suppress_short_runs(FrameLabels labels, int min_run) {
  for (const auto& a : annotations_from_labels(labels))
    if (a.length() < min_run)
      std::fill(labels.begin() + a.start_frame, labels.begin() + a.end_frame + 1, 0);
  return labels;
}

/// Per-frame class probabilities (21 x frames), each tile run independently.
inline Matrix frame_class_scores(const nn::BiLstm& net, const Matrix& descriptors,
                                 const RnnConfig& config) {
  const int n = static_cast<int>(descriptors.cols());
  Matrix scores(net.spec().output, n);
  for (auto [s, e] : inference_tiles(n, config.window_length))
    scores.middleCols(s, e - s) = net.predict(descriptors.middleCols(s, e - s));
  return scores;
}

inline FrameLabels label_sequence(const nn::BiLstm& net, const Matrix& descriptors,
                                  const RnnConfig& config) {
  const Matrix raw = frame_class_scores(net, descriptors, config);
  const int n = static_cast<int>(raw.cols());
  Matrix smoothed(raw.rows(), n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < raw.rows(); ++k) {
    for (int t = 0; t < n; ++t) row[t] = raw(k, t);
    const auto s = loess_smooth(row, config.loess_span);
    for (int t = 0; t < n; ++t) smoothed(k, t) = s[t];
  }
  FrameLabels labels(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    Eigen::Index best = 0;
    smoothed.col(t).maxCoeff(&best);
    labels[t] = static_cast<int>(best);
  }
  return suppress_short_runs(std::move(labels), config.min_run);
}

}  // namespace gesture
