#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gesture/io.hpp"
#include "gesture/pipeline.hpp"
#include "support.hpp"

using namespace gesture;
using testing_support::TempDir;

namespace {

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  for (const char* s :
       {"synth.n_sequences=6", "synth.gestures_per_sequence=3", "segmenter.hidden1=16", "segmenter.hidden2=8",
        "segmenter.scg_max_iterations=30", "window_a.hidden1=20", "window_a.hidden2=10",
        "window_a.scg_max_iterations=30", "window_b.hidden1=20", "window_b.hidden2=10",
        "window_b.scg_max_iterations=20", "rnn.layer_sizes=8 8 4", "rnn.max_epochs=2"})
    apply_setting(c, s);
  c.data_dir = (root / "data").string();
  c.model_dir = (root / "models").string();
  c.report_dir = (root / "reports").string();
  c.propagate_seed();
  return c;
}

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCategory::usage;
}

struct CliResult {
  int status;
  std::string err;
};

CliResult run_cli(const std::string& args, const TempDir& dir) {
  const auto err_path = dir.path() / "stderr.txt";
  const std::string cmd = std::string("'") + GESTURE_CLI_PATH + "' " + args + " > /dev/null 2> '" +
                          err_path.string() + "'";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, testing_support::slurp(err_path)};
}

}  // namespace

TEST(Config, SettingsOverrideDefaults) {
  PipelineConfig c;
  apply_setting(c, "rnn.layer_sizes = 32, 16");
  apply_setting(c, "general.method=a");
  apply_setting(c, "segmenter.negative_margin=auto");
  EXPECT_EQ(c.rnn.layer_sizes, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.method, Method::a);
  EXPECT_FALSE(c.segmenter.negative_margin.has_value());
  EXPECT_EQ(category_of([&] { apply_setting(c, "rnn.bogus=1"); }), ErrorCategory::config);
  EXPECT_EQ(category_of([&] { apply_setting(c, "rnn.max_epochs=many"); }), ErrorCategory::config);
  EXPECT_EQ(category_of([&] { apply_setting(c, "no_equals_sign"); }), ErrorCategory::usage);
  EXPECT_EQ(category_of([&] { apply_setting(c, "general.method=d"); }), ErrorCategory::config);
}

TEST(Config, FileRoundTrip) {
  TempDir dir("config");
  PipelineConfig c;
  apply_setting(c, "window_b.fusion_weights=0.5 0.3 0.2");
  apply_setting(c, "synth.noise_sigma=0.0125");
  c.seed = 99;
  const auto path = (dir.path() / "c.ini").string();
  {
    std::ofstream out(path);
    write_config(out, c);
  }
  PipelineConfig back;
  apply_config_file(back, path);
  std::ostringstream a, b;
  write_config(a, c);
  write_config(b, back);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.window_b.fusion_weights, (std::vector<double>{0.5, 0.3, 0.2}));
}

TEST(Config, FileErrors) {
  TempDir dir("config_err");
  PipelineConfig c;
  EXPECT_EQ(category_of([&] { apply_config_file(c, (dir.path() / "missing.ini").string()); }),
            ErrorCategory::io);
  const auto path = (dir.path() / "bad.ini").string();
  {
    std::ofstream out(path);
    out << "[rnn]\nunknown_key = 3\n";
  }
  EXPECT_EQ(category_of([&] { apply_config_file(c, path); }), ErrorCategory::config);
}

TEST(Config, Validation) {
  PipelineConfig c;
  c.train_fraction = 0.8;
  c.val_fraction = 0.2;
  EXPECT_EQ(category_of([&] { c.validate(); }), ErrorCategory::config);
  c = {};
  c.window_b.scale_steps = {4};
  c.window_b.fusion_weights = {1.0};
  EXPECT_EQ(category_of([&] { c.validate(); }), ErrorCategory::config);
  EXPECT_NO_THROW(PipelineConfig::paper_scale().validate());
}

TEST(Manifest, RoundTripAndErrors) {
  Manifest m;
  m.entries = {{Split::train, "s0"}, {Split::test, "s1"}, {Split::val, "s2"}, {Split::train, "s3"}};
  std::stringstream io;
  write_manifest(io, m);
  const auto back = read_manifest(io);
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.ids(Split::train), (std::vector<std::string>{"s0", "s3"}));
  std::istringstream no_header("train s0\n");
  EXPECT_EQ(category_of([&] { read_manifest(no_header); }), ErrorCategory::format);
  std::istringstream bad_entry("GMANIFEST 1\ntrain s0 extra\n");
  EXPECT_EQ(category_of([&] { read_manifest(bad_entry); }), ErrorCategory::format);
  std::istringstream bad_split("GMANIFEST 1\nholdout s0\n");
  EXPECT_EQ(category_of([&] { read_manifest(bad_split); }), ErrorCategory::usage);
}

TEST(Manifest, SplitSizes) {
  EXPECT_EQ(split_sizes(40, 0.6, 0.2), (std::pair<int, int>{24, 8}));
  for (int n = 1; n <= 60; ++n) {
    const auto [tr, va] = split_sizes(n, 0.6, 0.2);
    EXPECT_GE(tr, 1);
    EXPECT_GE(va, 0);
    EXPECT_LE(tr + va, n);
  }
}

TEST(Pipeline, GenerateIsDeterministicAndSplitsAreDisjoint) {
  TempDir a("gen_a"), b("gen_b");
  Pipeline(small_config(a.path())).generate();
  Pipeline(small_config(b.path())).generate();
  EXPECT_EQ(testing_support::snapshot(a.path() / "data"), testing_support::snapshot(b.path() / "data"));
  const auto m = Pipeline(small_config(a.path())).load_manifest();
  EXPECT_EQ(m.entries.size(), 6u);
  std::set<std::string> seen;
  for (const auto& [split, id] : m.entries) EXPECT_TRUE(seen.insert(id).second) << id;
  EXPECT_EQ(m.ids(Split::train).size(), 4u);
  EXPECT_EQ(m.ids(Split::val).size(), 1u);
  EXPECT_EQ(m.ids(Split::test).size(), 1u);
}

TEST(Pipeline, GroundTruthPredictionsScorePerfectly) {
  TempDir dir("gt");
  const Pipeline p(small_config(dir.path()));
  p.generate();
  const auto ids = p.load_manifest().ids(Split::train);
  for (bool all_rest : {false, true}) {
    fs::create_directories(p.prediction_dir(Method::c, Split::train));
    for (const auto& id : ids) {
      const auto truth = p.load_labeled(id).labels;
      std::ofstream out(p.prediction_dir(Method::c, Split::train) / (id + ".labels"));
      write_label_dump(out, id, all_rest ? FrameLabels(truth.size(), 0) : truth);
    }
    const auto kv = p.evaluate(Method::c, Split::train);
    EXPECT_EQ(kv.at("jaccard_overall"), all_rest ? "0.000000" : "1.000000");
    EXPECT_EQ(kv.count("segmenter_frame_accuracy"), 0u);
    EXPECT_EQ(kv.at("sequences"), std::to_string(ids.size()));
  }
  std::size_t timelines = 0;
  for (const auto& e : fs::directory_iterator(p.report_dir(Method::c, Split::train) / "timelines")) {
    EXPECT_EQ(e.path().extension(), ".txt");
    ++timelines;
  }
  EXPECT_EQ(timelines, ids.size());
}

TEST(Pipeline, EvaluateRejectsForeignPredictions) {
  TempDir dir("foreign");
  const Pipeline p(small_config(dir.path()));
  p.generate();
  const auto ids = p.load_manifest().ids(Split::test);
  fs::create_directories(p.prediction_dir(Method::a, Split::test));
  EXPECT_EQ(category_of([&] { p.evaluate(Method::a, Split::test); }), ErrorCategory::io);
  {
    std::ofstream out(p.prediction_dir(Method::a, Split::test) / (ids[0] + ".labels"));
    write_label_dump(out, ids[0], FrameLabels(3, 0));
  }
  EXPECT_EQ(category_of([&] { p.evaluate(Method::a, Split::test); }), ErrorCategory::mismatch);
}

TEST(Pipeline, EndToEndAllMethods) {
  TempDir dir("e2e");
  const Pipeline p(small_config(dir.path()));
  p.generate();
  p.extract();
  for (const auto& [split, id] : p.load_manifest().entries)
    EXPECT_TRUE(fs::exists(p.descriptor_path(id))) << id;

  p.train(Method::a);
  p.train(Method::b);
  p.train(Method::c);
  const auto files = [&](Method m) {
    std::set<std::string> out;
    for (const auto& e : fs::directory_iterator(p.model_dir(m)))
      if (e.is_regular_file()) out.insert(e.path().filename().string());
    return out;
  };
  EXPECT_EQ(files(Method::a), (std::set<std::string>{"features.gstd", "segmenter.gmodel", "classifier_s4.gmodel"}));
  EXPECT_EQ(files(Method::b), (std::set<std::string>{"features.gstd", "segmenter.gmodel", "classifier_s4.gmodel",
                                                     "classifier_s3.gmodel", "classifier_s2.gmodel"}));
  EXPECT_EQ(files(Method::c), (std::set<std::string>{"features.gstd", "rnn.gmodel"}));

  for (Method m : {Method::a, Method::b, Method::c}) {
    p.predict(m, Split::test);
    const auto kv = p.evaluate(m, Split::test);
    EXPECT_EQ(kv.at("method"), to_string(m));
    EXPECT_EQ(kv.count("segmenter_frame_accuracy"), m == Method::c ? 0u : 1u);
    const double j = std::stod(kv.at("jaccard_overall"));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
  }
  std::ostringstream summary;
  p.report(Split::test, summary);
  const std::string table = summary.str();
  EXPECT_NE(table.find("jaccard"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(fs::path(p.config().report_dir) / "summary_test.txt"));

  // Method c needs nothing but its own model directory.
  fs::remove_all(p.model_dir(Method::a));
  fs::remove_all(p.model_dir(Method::b));
  EXPECT_NO_THROW(p.predict(Method::c, Split::val));
  EXPECT_EQ(category_of([&] { p.predict(Method::a, Split::val); }), ErrorCategory::io);
}

TEST(Pipeline, ManifestWithUnknownSequenceIsAMismatch) {
  TempDir dir("unknown");
  const Pipeline p(small_config(dir.path()));
  p.generate();
  {
    std::ofstream out(p.manifest_path(), std::ios::app);
    out << "train ghost\n";
  }
  EXPECT_EQ(category_of([&] { p.extract(); }), ErrorCategory::mismatch);
}

TEST(Pipeline, FeatureMismatchDetected) {
  TempDir dir("features");
  auto c = small_config(dir.path());
  c.rnn.layer_sizes = {4};
  c.rnn.sgdm.max_epochs = 1;
  const Pipeline p(c);
  p.generate();
  p.extract();
  p.train(Method::c);
  // Refitting on a different dataset changes the standardizer the model was trained with.
  auto other = c;
  other.synth.seed = 5;
  other.seed = 5;
  Pipeline(other).generate();
  p.extract();
  EXPECT_EQ(category_of([&] { p.predict(Method::c, Split::test); }), ErrorCategory::mismatch);
}

TEST(Pipeline, MissingInputsAreIoErrors) {
  TempDir dir("missing");
  const Pipeline p(small_config(dir.path()));
  EXPECT_EQ(category_of([&] { p.extract(); }), ErrorCategory::io);
  p.generate();
  EXPECT_EQ(category_of([&] { p.train(Method::c); }), ErrorCategory::io);
  EXPECT_EQ(category_of([&] { p.report(Split::test, std::cout); }), ErrorCategory::io);
}

TEST(Cli, ErrorCategoriesAndExitCodes) {
  TempDir dir("cli");
  const std::string paths = "--data-dir '" + (dir.path() / "d").string() + "' --model-dir '" +
                            (dir.path() / "m").string() + "' --report-dir '" + (dir.path() / "r").string() + "' -q ";
  struct Case {
    std::string args;
    int status;
    std::string category;
  };
  const std::vector<Case> cases{
      {"frobnicate", 2, "usage"},
      {paths + "train --method d", 2, "usage"},
      {paths + "generate --set rnn.bogus=1", 3, "config"},
      {paths + "generate --config '" + (dir.path() / "none.ini").string() + "'", 4, "io"},
      {paths + "predict --method c", 4, "io"},
  };
  for (const auto& c : cases) {
    const auto r = run_cli(c.args, dir);
    EXPECT_EQ(r.status, c.status) << c.args;
    EXPECT_EQ(r.err.rfind("error: " + c.category + ": ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
  }
}

TEST(Cli, ShowConfigAndGenerate) {
  TempDir dir("cli_ok");
  const std::string paths = "--data-dir '" + (dir.path() / "d").string() + "' -q ";
  EXPECT_EQ(run_cli(paths + "--set synth.n_sequences=3 generate", dir).status, 0);
  EXPECT_TRUE(fs::exists(dir.path() / "d" / "manifest.txt"));
  EXPECT_EQ(run_cli("show-config --paper-scale", dir).status, 0);
}
