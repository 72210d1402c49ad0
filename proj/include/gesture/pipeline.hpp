#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gesture/config.hpp"
#include "gesture/core.hpp"
#include "gesture/descriptor.hpp"
#include "gesture/evaluation.hpp"
#include "gesture/io.hpp"
#include "gesture/nn/model_io.hpp"
#include "gesture/recurrent_labeler.hpp"
#include "gesture/rng.hpp"
#include "gesture/segmenter.hpp"
#include "gesture/synth.hpp"
#include "gesture/window_classifier.hpp"

namespace gesture {

namespace fs = std::filesystem;

// On-disk layout, relative to the configured directories:
//
//   <data>/manifest.txt                 GMANIFEST 1, then "<split> <id>" lines
//   <data>/sequences/<id>.gskel         skeleton + ground-truth labels
//   <data>/features.gstd                bone lengths + standardizer (extract)
//   <data>/descriptors/<id>.gdesc       standardized descriptors (extract)
//   <models>/<m>/features.gstd, *.gmodel
//   <models>/<m>/traces/*.trace, config.ini
//   <reports>/<m>/<split>/predictions/<id>.labels | .intervals | .periods
//   <reports>/<m>/<split>/metrics.txt, jaccard.txt, confusion*.txt, timelines/

struct Manifest {
  std::vector<std::pair<Split, std::string>> entries;

  std::vector<std::string> ids(Split s) const {
    std::vector<std::string> out;
    for (const auto& [split, id] : entries)
      if (split == s) out.push_back(id);
    return out;
  }
};

inline void write_manifest(std::ostream& out, const Manifest& m) {
  out << "GMANIFEST 1\n";
  for (const auto& [split, id] : m.entries) out << to_string(split) << ' ' << id << '\n';
}

inline Manifest read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "GMANIFEST 1")
    fail(ErrorCategory::format, "manifest: missing 'GMANIFEST 1' header");
  Manifest m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) fail(ErrorCategory::format, "manifest: malformed entry at line " + std::to_string(line_no));
    m.entries.emplace_back(split_from_string(tok[0]), std::string(tok[1]));
  }
  return m;
}

/// Sizes of the train and validation splits; the test split takes the rest.
inline std::pair<int, int> split_sizes(int n, double train_fraction, double val_fraction) {
  const int n_train = std::clamp(static_cast<int>(std::lround(n * train_fraction)), 1, n);
  const int n_val = std::clamp(static_cast<int>(std::lround(n * val_fraction)), 0, n - n_train);
  return {n_train, n_val};
}

/// Everything a pipeline command needs besides its configuration.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr)
      : config_(std::move(config)), log_(log) {
    config_.validate();
  }

  const PipelineConfig& config() const { return config_; }

  fs::path data_dir() const { return config_.data_dir; }
  fs::path manifest_path() const { return data_dir() / "manifest.txt"; }
  fs::path sequence_path(const std::string& id) const { return data_dir() / "sequences" / (id + ".gskel"); }
  fs::path features_path() const { return data_dir() / "features.gstd"; }
  fs::path descriptor_path(const std::string& id) const {
    return data_dir() / "descriptors" / (id + ".gdesc");
  }
  fs::path model_dir(Method m) const { return fs::path(config_.model_dir) / to_string(m); }
  fs::path report_dir(Method m, Split s) const {
    return fs::path(config_.report_dir) / to_string(m) / to_string(s);
  }
  fs::path prediction_dir(Method m, Split s) const { return report_dir(m, s) / "predictions"; }

  // -- generate ---------------------------------------------------------------

  void generate() const {
    const auto samples = generate_synthetic(config_.synth);
    make_dirs(data_dir() / "sequences");
    Manifest manifest;
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(config_.seed ^ 0x5851f42d4c957f2dULL);
    rng.shuffle(std::span<std::size_t>(order));
    const auto [n_train, n_val] =
        split_sizes(static_cast<int>(samples.size()), config_.train_fraction, config_.val_fraction);
    std::vector<Split> split_of(samples.size(), Split::test);
    for (int i = 0; i < n_train + n_val; ++i) split_of[order[i]] = i < n_train ? Split::train : Split::val;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      save_sequence(sequence_path(samples[i].sequence.id).string(), samples[i].sequence, &samples[i].labels);
      manifest.entries.emplace_back(split_of[i], samples[i].sequence.id);
    }
    auto out = open_output(manifest_path().string());
    write_manifest(out, manifest);
    check_written(out, manifest_path().string());
    note("generated " + std::to_string(samples.size()) + " sequences (" + std::to_string(n_train) +
         " train, " + std::to_string(n_val) + " val, " +
         std::to_string(samples.size() - n_train - n_val) + " test)");
  }

  // -- extract ----------------------------------------------------------------

  /// Fits bone lengths and the standardizer on the training split, then
  /// writes standardized descriptors for every sequence.
  void extract() const {
    const Manifest manifest = load_manifest();
    std::vector<LabeledSequence> train;
    for (const auto& id : manifest.ids(Split::train)) train.push_back(load_labeled(id));
    if (train.empty()) fail(ErrorCategory::usage, "manifest has no training sequences");
    std::vector<SkeletonSequence> skeletons;
    for (const auto& s : train) skeletons.push_back(s.sequence);
    FeatureContext ctx;
    ctx.bone_lengths = mean_bone_lengths(skeletons);
    std::vector<Matrix> raw;
    for (const auto& s : skeletons) raw.push_back(build_descriptors(s, ctx.bone_lengths));
    ctx.standardizer = Standardizer::fit(raw);
    save_features(features_path().string(), ctx);

    make_dirs(data_dir() / "descriptors");
    for (const auto& [split, id] : manifest.entries) {
      const Matrix d = build_descriptors(load_labeled(id).sequence, ctx);
      const auto path = descriptor_path(id).string();
      auto out = open_output(path, true);
      write_descriptors(out, d);
      check_written(out, path);
    }
    note("extracted descriptors for " + std::to_string(manifest.entries.size()) + " sequences");
  }

  // -- train ------------------------------------------------------------------

  void train(Method m) const {
    const auto data = load_split(Split::train);
    const FeatureContext ctx = load_features(features_path().string());
    const fs::path dir = model_dir(m);
    fs::remove_all(dir);
    make_dirs(dir / "traces");
    save_features((dir / "features.gstd").string(), ctx);
    {
      auto out = open_output((dir / "traces" / "config.ini").string());
      write_config(out, config_);
    }

    if (m == Method::c) {
      std::vector<TrainWindow> windows;
      for (const auto& d : data) {
        auto w = extract_train_windows(d.descriptors, d.labels, config_.rnn);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
      }
      note("training recurrent labeler on " + std::to_string(windows.size()) + " windows");
      nn::OptimizationTrace trace;
      const auto model = train_rnn(windows, ctx, config_.rnn, &trace, [this](int epoch, double loss) {
        note("  epoch " + std::to_string(epoch) + " loss " + format_double(loss));
      });
      nn::save_model((dir / "rnn.gmodel").string(), model);
      save_trace(dir / "traces" / "rnn.trace", trace);
      return;
    }

    Rng rng(config_.segmenter.seed);
    const auto binary = build_binary_training_set(data, config_.segmenter, rng);
    note("training segmenter on " + std::to_string(binary.inputs.cols()) + " frames");
    nn::OptimizationTrace seg_trace;
    const auto segmenter = train_segmenter(binary, ctx, config_.segmenter, &seg_trace);
    nn::save_model((dir / "segmenter.gmodel").string(), segmenter);
    save_trace(dir / "traces" / "segmenter.trace", seg_trace);

    const WindowConfig& wc = config_.window(m);
    for (int scale : wc.scale_steps) {
      const auto set = build_window_training_set(data, scale, wc);
      note("training window classifier s=" + std::to_string(scale) + " on " +
           std::to_string(set.inputs.cols()) + " dynamic poses");
      nn::OptimizationTrace trace;
      const auto model = train_window_classifier(set, scale, ctx, wc, &trace);
      const std::string name = "classifier_s" + std::to_string(scale);
      nn::save_model((dir / (name + ".gmodel")).string(), model);
      save_trace(dir / "traces" / (name + ".trace"), trace);
    }
  }

  // -- predict ----------------------------------------------------------------

  void predict(Method m, Split s) const {
    const fs::path dir = model_dir(m);
    const fs::path out_dir = prediction_dir(m, s);
    fs::remove_all(out_dir);
    make_dirs(out_dir);
    const auto ids = load_manifest().ids(s);
    const FeatureContext extracted = load_features(features_path().string());

    if (m == Method::c) {
      const auto model = nn::load_bilstm_model((dir / "rnn.gmodel").string());
      check_features(model.features, extracted);
      for (const auto& id : ids) {
        const Matrix d = load_descriptors(id);
        check_width(d, model.network.spec().input, id);
        const FrameLabels labels = label_sequence(model.network, d, config_.rnn);
        write_predictions(out_dir, id, labels, nullptr);
      }
      note("predicted " + std::to_string(ids.size()) + " sequences with method c");
      return;
    }

    const WindowConfig& wc = config_.window(m);
    const auto segmenter = nn::load_mlp_model((dir / "segmenter.gmodel").string());
    check_features(segmenter.features, extracted);
    std::vector<nn::MlpModel> classifiers;
    for (int scale : wc.scale_steps) {
      classifiers.push_back(
          nn::load_mlp_model((dir / ("classifier_s" + std::to_string(scale) + ".gmodel")).string()));
      check_features(classifiers.back().features, extracted);
    }
    std::vector<const nn::Mlp*> nets;
    for (const auto& c : classifiers) nets.push_back(&c.network);

    for (const auto& id : ids) {
      const Matrix d = load_descriptors(id);
      check_width(d, segmenter.network.spec().input, id);
      for (const auto* net : nets) check_width(d, net->spec().input / 3, id);
      const Segmentation seg = segment_sequence(segmenter.network, d, config_.segmenter);
      std::vector<LabeledInterval> intervals;
      for (const auto& p : seg.periods) {
        const auto found = m == Method::a
                               ? classify_period_method_a(*nets.front(), d, p, wc.scale_steps.front(), wc)
                               : classify_period_method_b(nets, d, p, wc);
        intervals.insert(intervals.end(), found.begin(), found.end());
      }
      write_predictions(out_dir, id, intervals_to_labels(intervals, static_cast<int>(d.cols())),
                        &seg.periods);
    }
    note("predicted " + std::to_string(ids.size()) + " sequences with method " + to_string(m));
  }

  // -- evaluate ---------------------------------------------------------------

  /// Writes the report files and returns the key/value metrics.
  std::map<std::string, std::string> evaluate(Method m, Split s) const {
    const auto ids = load_manifest().ids(s);
    if (ids.empty()) fail(ErrorCategory::usage, "split '" + to_string(s) + "' is empty");
    const fs::path out_dir = report_dir(m, s);
    const fs::path pred_dir = prediction_dir(m, s);
    fs::remove_all(out_dir / "timelines");
    make_dirs(out_dir / "timelines");

    std::vector<SequenceLabels> seqs;
    ConfusionMatrix cm;
    long long frames = 0, activity_same = 0, seg_same = 0;
    bool have_periods = true;
    for (const auto& id : ids) {
      const LabeledSequence truth = load_labeled(id);
      const fs::path pred_path = pred_dir / (id + ".labels");
      if (!fs::exists(pred_path)) fail(ErrorCategory::io, "missing predictions for " + id + ": " + pred_path.string());
      auto in = open_input(pred_path.string());
      auto [pred_id, predicted] = read_label_dump(in);
      if (pred_id != id) fail(ErrorCategory::mismatch, pred_path.string() + " holds sequence '" + pred_id + "'");
      if (predicted.size() != truth.labels.size())
        fail(ErrorCategory::mismatch, "prediction for " + id + " has " + std::to_string(predicted.size()) +
                                          " frames, expected " + std::to_string(truth.labels.size()));
      accumulate_confusion(cm, truth.labels, predicted);
      const auto gt_activity = activity_of(truth.labels);
      const auto pred_activity = activity_of(predicted);
      const int n = static_cast<int>(truth.labels.size());
      activity_same += matching_frames(gt_activity, pred_activity);
      frames += n;

      const fs::path period_path = pred_dir / (id + ".periods");
      if (have_periods && fs::exists(period_path)) {
        const auto mask = activity_mask(read_periods(period_path), n);
        seg_same += matching_frames(gt_activity, mask);
      } else {
        have_periods = false;
      }
      write_timeline(out_dir / "timelines" / (id + ".txt"), id, truth.labels, predicted);
      seqs.push_back({id, truth.labels, std::move(predicted)});
    }

    const JaccardReport jr = mean_jaccard(seqs);
    std::map<std::string, std::string> kv;
    kv["method"] = to_string(m);
    kv["split"] = to_string(s);
    kv["sequences"] = std::to_string(ids.size());
    kv["frames"] = std::to_string(frames);
    kv["jaccard_defined"] = jr.defined ? "1" : "0";
    kv["jaccard_overall"] = jr.defined ? fixed(jr.overall) : "undefined";
    kv["jaccard_pairs"] = std::to_string(jr.entries.size());
    for (const auto& [c, v] : jr.per_class) kv["jaccard_class_" + two_digits(c)] = fixed(v);
    kv["activity_frame_accuracy"] = fixed(static_cast<double>(activity_same) / frames);
    if (have_periods) kv["segmenter_frame_accuracy"] = fixed(static_cast<double>(seg_same) / frames);

    {
      const auto path = (out_dir / "metrics.txt").string();
      auto out = open_output(path);
      for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
      check_written(out, path);
    }
    {
      const auto path = (out_dir / "jaccard.txt").string();
      auto out = open_output(path);
      write_jaccard_table(out, jr);
      check_written(out, path);
    }
    {
      auto out = open_output((out_dir / "confusion.txt").string());
      cm.write_grid(out);
      auto log_out = open_output((out_dir / "confusion_log10.txt").string());
      cm.write_log_grid(log_out);
    }
    note("method " + to_string(m) + " on " + to_string(s) + ": jaccard " + kv["jaccard_overall"]);
    return kv;
  }

  // -- report -----------------------------------------------------------------

  /// Side-by-side summary of every method evaluated on the split.
  void report(Split s, std::ostream& out) const {
    std::ostringstream table;
    char line[160];
    std::snprintf(line, sizeof line, "%-7s %9s %10s %10s %10s\n", "method", "jaccard", "activity",
                  "segmenter", "sequences");
    table << line;
    int found = 0;
    for (Method m : {Method::a, Method::b, Method::c}) {
      const fs::path path = report_dir(m, s) / "metrics.txt";
      if (!fs::exists(path)) continue;
      ++found;
      const auto kv = read_key_values(path);
      auto get = [&](const std::string& k) {
        auto it = kv.find(k);
        return it == kv.end() ? std::string("-") : it->second;
      };
      std::snprintf(line, sizeof line, "%-7s %9s %10s %10s %10s\n", to_string(m).c_str(),
                    get("jaccard_overall").c_str(), get("activity_frame_accuracy").c_str(),
                    get("segmenter_frame_accuracy").c_str(), get("sequences").c_str());
      table << line;
    }
    if (!found) fail(ErrorCategory::io, "no evaluated methods for split '" + to_string(s) + "'");
    const auto path = (fs::path(config_.report_dir) / ("summary_" + to_string(s) + ".txt")).string();
    auto file = open_output(path);
    file << table.str();
    check_written(file, path);
    out << table.str();
  }

  // -- helpers ----------------------------------------------------------------

  Manifest load_manifest() const {
    auto in = open_input(manifest_path().string());
    try {
      return read_manifest(in);
    } catch (const Error& e) {
      fail(e.category(), manifest_path().string() + ": " + e.what());
    }
  }

  LabeledSequence load_labeled(const std::string& id) const {
    const fs::path path = sequence_path(id);
    if (!fs::exists(path)) fail(ErrorCategory::mismatch, "manifest lists unknown sequence '" + id + "'");
    auto s = load_sequence(path.string());
    if (s.sequence.id != id)
      fail(ErrorCategory::mismatch, path.string() + " holds sequence '" + s.sequence.id + "'");
    return s;
  }

  Matrix load_descriptors(const std::string& id) const {
    const fs::path path = descriptor_path(id);
    if (!fs::exists(path)) {
      if (!fs::exists(sequence_path(id)))
        fail(ErrorCategory::mismatch, "manifest lists unknown sequence '" + id + "'");
      fail(ErrorCategory::io, "missing descriptors for " + id + " (run extract)");
    }
    auto in = open_input(path.string(), true);
    try {
      return read_descriptors(in);
    } catch (const Error& e) {
      fail(e.category(), path.string() + ": " + e.what());
    }
  }

  std::vector<LabeledDescriptors> load_split(Split s) const {
    std::vector<LabeledDescriptors> out;
    for (const auto& id : load_manifest().ids(s)) {
      LabeledDescriptors d{id, load_descriptors(id), load_labeled(id).labels};
      if (d.descriptors.cols() != static_cast<Eigen::Index>(d.labels.size()))
        fail(ErrorCategory::mismatch, "descriptors of " + id + " do not match its frame count");
      out.push_back(std::move(d));
    }
    if (out.empty()) fail(ErrorCategory::usage, "split '" + to_string(s) + "' is empty");
    return out;
  }

  static std::vector<ActivityPeriod> read_periods(const fs::path& path) {
    auto in = open_input(path.string());
    std::vector<ActivityPeriod> out;
    std::string id;
    long long a = 0, b = 0;
    std::string line;
    while (std::getline(in, line)) {
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != 3 || !parse_int(tok[1], a) || !parse_int(tok[2], b))
        fail(ErrorCategory::format, path.string() + ": malformed period line");
      out.push_back({static_cast<int>(a), static_cast<int>(b)});
    }
    return out;
  }

  static std::map<std::string, std::string> read_key_values(const fs::path& path) {
    auto in = open_input(path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
  }

 private:
  void note(const std::string& msg) const {
    if (log_) *log_ << msg << '\n';
  }

  static void make_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail(ErrorCategory::io, "cannot create directory " + p.string() + ": " + ec.message());
  }

  static long long matching_frames(const std::vector<int>& a, const std::vector<int>& b) {
    long long same = 0;
    for (std::size_t t = 0; t < a.size(); ++t) same += a[t] == b[t];
    return same;
  }

  static std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
  }

  static std::string two_digits(int c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", c);
    return buf;
  }

  static void check_width(const Matrix& d, int expected, const std::string& id) {
    if (d.rows() != expected)
      fail(ErrorCategory::mismatch, "descriptor width " + std::to_string(d.rows()) + " of " + id +
                                        " does not match model input " + std::to_string(expected));
  }

  static void check_features(const FeatureContext& model, const FeatureContext& extracted) {
    if (model.bone_lengths != extracted.bone_lengths || model.standardizer.mean != extracted.standardizer.mean ||
        model.standardizer.stddev != extracted.standardizer.stddev)
      fail(ErrorCategory::mismatch, "descriptors were extracted with a different feature context than the model");
  }

  static void save_trace(const fs::path& path, const nn::OptimizationTrace& trace) {
    auto out = open_output(path.string());
    out << "iterations " << trace.iterations << '\n'
        << "converged " << (trace.converged ? 1 : 0) << '\n'
        << "stop_reason " << trace.stop_reason << '\n';
    for (double v : trace.loss) out << format_double(v) << '\n';
    check_written(out, path.string());
  }

  static void write_predictions(const fs::path& dir, const std::string& id, const FrameLabels& labels,
                                const std::vector<ActivityPeriod>* periods) {
    {
      auto out = open_output((dir / (id + ".labels")).string());
      write_label_dump(out, id, labels);
    }
    {
      auto out = open_output((dir / (id + ".intervals")).string());
      for (const auto& a : annotations_from_labels(labels))
        out << id << ' ' << a.class_id << ' ' << a.start_frame << ' ' << a.end_frame << '\n';
    }
    if (periods) {
      auto out = open_output((dir / (id + ".periods")).string());
      for (const auto& p : *periods) out << id << ' ' << p.start << ' ' << p.end << '\n';
    }
  }

  static void write_timeline(const fs::path& path, const std::string& id, const FrameLabels& truth,
                             const FrameLabels& predicted) {
    auto out = open_output(path.string());
    out << "# " << id << " frames " << truth.size() << '\n';
    for (const auto& a : annotations_from_labels(truth))
      out << "truth " << a.class_id << ' ' << a.start_frame << ' ' << a.end_frame << '\n';
    for (const auto& a : annotations_from_labels(predicted))
      out << "predicted " << a.class_id << ' ' << a.start_frame << ' ' << a.end_frame << '\n';
  }

  static void write_jaccard_table(std::ostream& out, const JaccardReport& jr) {
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %5s %8s %8s %8s\n", "sequence", "class", "inter", "union", "jaccard");
    out << line;
    for (const auto& e : jr.entries) {
      std::snprintf(line, sizeof line, "%-16s %5d %8lld %8lld %8.4f\n", e.sequence.c_str(), e.class_id,
                    e.overlap.intersection, e.overlap.union_size, e.score);
      out << line;
    }
    out << '\n';
    for (const auto& [c, v] : jr.per_class) {
      std::snprintf(line, sizeof line, "class %2d mean %.4f\n", c, v);
      out << line;
    }
    if (jr.defined) {
      std::snprintf(line, sizeof line, "overall %.4f over %zu pairs\n", jr.overall, jr.entries.size());
      out << line;
    } else {
      out << "overall undefined (no gesture in truth or prediction)\n";
    }
  }

  PipelineConfig config_;
  std::ostream* log_;
};

}  // namespace gesture
