#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/io.hpp"
#include "gesture/skeleton.hpp"

namespace gesture {

/// Intersection and union sizes of two binary frame masks.
struct Overlap {
  long long intersection = 0;
  long long union_size = 0;

  double jaccard() const {
    return union_size == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(union_size);
  }
};

inline void check_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    fail(ErrorCategory::mismatch, "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

inline Overlap overlap(std::span<const int> a, std::span<const int> b) {
  check_same_length(a.size(), b.size());
  Overlap o;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const bool x = a[t] != 0, y = b[t] != 0;
    o.intersection += x && y;
    o.union_size += x || y;
  }
  return o;
}

/// |a and b| / |a or b|; 0 when both masks are empty.
inline double jaccard_binary(std::span<const int> a, std::span<const int> b) {
  return overlap(a, b).jaccard();
}

struct SequenceLabels {
  std::string id;
  FrameLabels truth;
  FrameLabels predicted;
};

struct JaccardEntry {
  std::string sequence;
  int class_id = 0;
  Overlap overlap;
  double score = 0.0;
};

struct JaccardReport {
  std::vector<JaccardEntry> entries;
  bool defined = false;
  double overall = 0.0;
  std::map<int, double> per_class;
};

/// Scores every (sequence, class) pair where the class occurs in the truth
/// or the prediction; the overall score is their unweighted mean.
inline JaccardReport mean_jaccard(std::span<const SequenceLabels> sequences) {
  JaccardReport report;
  std::map<int, std::pair<double, int>> class_sums;
  for (const auto& s : sequences) {
    check_same_length(s.truth.size(), s.predicted.size());
    std::set<int> classes;
    for (int v : s.truth)
      if (v) classes.insert(v);
    for (int v : s.predicted)
      if (v) classes.insert(v);
    for (int c : classes) {
      std::vector<int> a(s.truth.size()), b(s.truth.size());
      for (std::size_t t = 0; t < a.size(); ++t) {
        a[t] = s.truth[t] == c;
        b[t] = s.predicted[t] == c;
      }
      JaccardEntry e{s.id, c, overlap(a, b), 0.0};
      e.score = e.overlap.jaccard();
      report.entries.push_back(e);
      class_sums[c].first += e.score;
      ++class_sums[c].second;
    }
  }
  if (!report.entries.empty()) {
    double sum = 0.0;
    for (const auto& e : report.entries) sum += e.score;
    report.overall = sum / static_cast<double>(report.entries.size());
    report.defined = true;
  }
  for (const auto& [c, acc] : class_sums) report.per_class[c] = acc.first / acc.second;
  return report;
}

/// Rows are ground truth, columns are predictions, both over classes 0..20.
struct ConfusionMatrix {
  std::array<std::array<long long, kNumClasses>, kNumClasses> counts{};

  long long total() const {
    long long n = 0;
    for (const auto& row : counts)
      for (long long v : row) n += v;
    return n;
  }

  /// Gesture frames predicted as rest.
  long long false_negatives(int truth_class) const { return counts[truth_class][0]; }
  /// Rest frames predicted as the given gesture.
  long long false_positives(int predicted_class) const { return counts[0][predicted_class]; }

  void write_grid(std::ostream& out) const {
    for (const auto& row : counts) {
      for (int c = 0; c < kNumClasses; ++c) out << (c ? " " : "") << row[c];
      out << '\n';
    }
  }

  /// log10(count + 1) per cell, for plotting.
  void write_log_grid(std::ostream& out) const {
    char buf[32];
    for (const auto& row : counts) {
      for (int c = 0; c < kNumClasses; ++c) {
        std::snprintf(buf, sizeof buf, "%.6f", std::log10(static_cast<double>(row[c]) + 1.0));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
};

inline void accumulate_confusion(ConfusionMatrix& m, std::span<const int> truth,
                                 std::span<const int> predicted) {
  check_same_length(truth.size(), predicted.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] < 0 || truth[t] >= kNumClasses || predicted[t] < 0 || predicted[t] >= kNumClasses)
      fail(ErrorCategory::format, "label outside 0..20 in confusion input");
    ++m.counts[truth[t]][predicted[t]];
  }
}

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
  ConfusionMatrix m;
  accumulate_confusion(m, truth, predicted);
  return m;
}

/// Fraction of frames on which the two activity vectors agree.
inline double frame_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  check_same_length(truth.size(), predicted.size());
  if (truth.empty()) fail(ErrorCategory::usage, "frame accuracy of an empty sequence");
  long long same = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) same += (truth[t] != 0) == (predicted[t] != 0);
  return static_cast<double>(same) / static_cast<double>(truth.size());
}

inline std::vector<int> activity_of(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) out[t] = labels[t] != 0;
  return out;
}

}  // namespace gesture
