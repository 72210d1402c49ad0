// Command-line driver: generate, extract, train, predict, evaluate, report.
//
// Errors go to stderr as a single line "error: <category>: <message>"; the
// exit status identifies the category (see exit_code below).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gesture/config.hpp"
#include "gesture/pipeline.hpp"

namespace {

using gesture::ErrorCategory;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return 2;
    case ErrorCategory::config: return 3;
    case ErrorCategory::io: return 4;
    case ErrorCategory::format: return 5;
    case ErrorCategory::numeric: return 6;
    case ErrorCategory::mismatch: return 7;
  }
  return 1;
}

int report_error(std::string_view category, const std::string& message, int code) {
  std::string flat = message;
  for (char& ch : flat)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "error: " << category << ": " << flat << '\n';
  return code;
}

struct Options {
  std::string config_path;
  std::optional<std::string> method;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  bool paper_scale = false;
  std::optional<std::string> data_dir, model_dir, report_dir;
  std::vector<std::string> settings;
  bool quiet = false;
};

gesture::PipelineConfig resolve(const Options& o) {
  gesture::PipelineConfig c = o.paper_scale ? gesture::PipelineConfig::paper_scale()
                                            : gesture::PipelineConfig::desk();
  if (!o.config_path.empty()) gesture::apply_config_file(c, o.config_path);
  for (const auto& s : o.settings) gesture::apply_setting(c, s);
  if (o.seed) c.seed = *o.seed;
  if (o.method) c.method = gesture::method_from_string(*o.method);
  if (o.data_dir) c.data_dir = *o.data_dir;
  if (o.model_dir) c.model_dir = *o.model_dir;
  if (o.report_dir) c.report_dir = *o.report_dir;
  c.propagate_seed();
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton gesture segmentation and classification"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Sectioned key = value configuration file");
  app.add_option("--method", o.method, "Pipeline variant")->check(CLI::IsMember({"a", "b", "c"}));
  app.add_option("--split", o.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));
  app.add_option("--seed", o.seed, "Global seed");
  app.add_flag("--paper-scale", o.paper_scale, "Full-size recurrent network and dataset");
  app.add_option("--data-dir", o.data_dir, "Overrides paths.data_dir");
  app.add_option("--model-dir", o.model_dir, "Overrides paths.model_dir");
  app.add_option("--report-dir", o.report_dir, "Overrides paths.report_dir");
  app.add_option("--set", o.settings, "section.key=value override (repeatable)");
  app.add_flag("-q,--quiet", o.quiet, "No progress output");

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset and split manifest");
  auto* extract = app.add_subcommand("extract", "Fit features on the training split and dump descriptors");
  auto* train = app.add_subcommand("train", "Train the models of one method");
  auto* predict = app.add_subcommand("predict", "Label every sequence of a split");
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  auto* report = app.add_subcommand("report", "Summarize evaluated methods for a split");
  auto* show = app.add_subcommand("show-config", "Print the effective configuration");
  for (auto* sub : {generate, extract, train, predict, evaluate, report, show}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), exit_code(ErrorCategory::usage));
  }

  try {
    const gesture::PipelineConfig config = resolve(o);
    const gesture::Pipeline pipeline(config, o.quiet ? nullptr : &std::cerr);
    const gesture::Split split = gesture::split_from_string(o.split);
    if (*generate) {
      pipeline.generate();
    } else if (*extract) {
      pipeline.extract();
    } else if (*train) {
      pipeline.train(config.method);
    } else if (*predict) {
      pipeline.predict(config.method, split);
    } else if (*evaluate) {
      for (const auto& [k, v] : pipeline.evaluate(config.method, split)) std::cout << k << '=' << v << '\n';
    } else if (*report) {
      pipeline.report(split, std::cout);
    } else if (*show) {
      gesture::write_config(std::cout, config);
    }
  } catch (const gesture::Error& e) {
    return report_error(gesture::category_name(e.category()), e.what(), exit_code(e.category()));
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e.what(), exit_code(ErrorCategory::io));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
