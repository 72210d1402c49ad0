#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gesture/core.hpp"
#include "gesture/io.hpp"
#include "gesture/recurrent_labeler.hpp"
#include "gesture/segmenter.hpp"
#include "gesture/synth.hpp"
#include "gesture/window_classifier.hpp"

namespace gesture {

enum class Method { a, b, c };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::a: return "a";
    case Method::b: return "b";
    case Method::c: return "c";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  if (s == "a" || s == "A") return Method::a;
  if (s == "b" || s == "B") return Method::b;
  if (s == "c" || s == "C") return Method::c;
  fail(ErrorCategory::usage, "unknown method '" + std::string(s) + "' (expected a, b or c)");
}

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  fail(ErrorCategory::usage, "unknown split '" + std::string(s) + "' (expected train, val or test)");
}

struct PipelineConfig {
  std::string data_dir = "data";
  std::string model_dir = "models";
  std::string report_dir = "reports";
  Method method = Method::c;
  std::uint64_t seed = 42;
  double train_fraction = 0.6;
  double val_fraction = 0.2;

  SynthConfig synth;
  SegmenterConfig segmenter;
  WindowConfig window_a = WindowConfig::method_a();
  WindowConfig window_b = WindowConfig::method_b();
  RnnConfig rnn = desk_rnn();

  static RnnConfig desk_rnn() {
    RnnConfig c;
    c.sgdm.max_epochs = 40;
    return c;
  }

  static PipelineConfig desk() { return {}; }

  static PipelineConfig paper_scale() {
    PipelineConfig c;
    c.rnn = RnnConfig::paper_scale();
    c.synth.n_classes = kNumGestureClasses;
    c.synth.n_sequences = 120;
    c.synth.gestures_per_sequence = 8;
    return c;
  }

  const WindowConfig& window(Method m) const { return m == Method::b ? window_b : window_a; }

  /// Copies the global seed into every module.
  void propagate_seed() {
    synth.seed = seed;
    segmenter.seed = seed;
    window_a.seed = seed;
    window_b.seed = seed;
    rnn.sgdm.seed = seed;
  }

  void validate() const {
    if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0))
      fail(ErrorCategory::config, "split fractions must leave a non-empty test split");
    synth.validate();
    segmenter.validate();
    window_a.validate();
    window_b.validate();
    if (window_b.scale_steps.size() < 2)
      fail(ErrorCategory::config, "method b needs at least two scale steps");
    rnn.validate();
  }
};

namespace detail {

inline std::string bad_value(const std::string& key, const std::string& value) {
  return "invalid value '" + value + "' for " + key;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& value) {
  if constexpr (std::is_same_v<T, double>) {
    double v = 0;
    if (!parse_double(value, v)) fail(ErrorCategory::config, bad_value(key, value));
    return v;
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
      fail(ErrorCategory::config, bad_value(key, value));
    return v;
  } else {
    long long v = 0;
    if (!parse_int(value, v) || v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max())
      fail(ErrorCategory::config, bad_value(key, value));
    return static_cast<int>(v);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::string cleaned = value;
  for (char& ch : cleaned)
    if (ch == ',') ch = ' ';
  for (auto tok : split_ws(cleaned)) out.push_back(parse_scalar<T>(key, std::string(tok)));
  if (out.empty()) fail(ErrorCategory::config, bad_value(key, value));
  return out;
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    return format_double(v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    return std::to_string(v);
  }
}

template <typename T>
std::string show(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + show(v[i]);
  return out;
}

}  // namespace detail

/// Setter and printer of one `section.key` entry.
struct ConfigKey {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using ConfigKeys = std::map<std::string, ConfigKey>;

namespace detail {

template <typename T>
ConfigKey bind(T& field) {
  ConfigKey k;
  k.get = [&field] { return show(field); };
  k.set = [&field](const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      field = v;
    } else if constexpr (requires { typename T::value_type; }) {
      field = parse_list<typename T::value_type>("list", v);
    } else {
      field = parse_scalar<T>("value", v);
    }
  };
  return k;
}

inline void bind_scg(ConfigKeys& keys, const std::string& section, nn::ScgOptions& scg) {
  keys[section + ".scg_max_iterations"] = bind(scg.max_iterations);
  keys[section + ".scg_gradient_tolerance"] = bind(scg.gradient_tolerance);
  keys[section + ".scg_sigma"] = bind(scg.sigma);
  keys[section + ".scg_lambda"] = bind(scg.lambda);
}

inline void bind_window(ConfigKeys& keys, const std::string& section, WindowConfig& w) {
  keys[section + ".scale_steps"] = bind(w.scale_steps);
  keys[section + ".slide_step"] = bind(w.slide_step);
  keys[section + ".min_windows"] = bind(w.min_windows);
  keys[section + ".short_period_max"] = bind(w.short_period_max);
  keys[section + ".threshold_short"] = bind(w.threshold_short);
  keys[section + ".threshold_long"] = bind(w.threshold_long);
  keys[section + ".consec_required"] = bind(w.consec_required);
  keys[section + ".hidden1"] = bind(w.hidden1);
  keys[section + ".hidden2"] = bind(w.hidden2);
  bind_scg(keys, section, w.scg);
}

}  // namespace detail

/// Every configurable value, keyed `section.key`.
inline ConfigKeys config_keys(PipelineConfig& c) {
  using detail::bind;
  ConfigKeys keys;
  keys["general.seed"] = bind(c.seed);
  keys["general.method"] = {[&c](const std::string& v) { c.method = method_from_string(v); },
                            [&c] { return to_string(c.method); }};
  keys["paths.data_dir"] = bind(c.data_dir);
  keys["paths.model_dir"] = bind(c.model_dir);
  keys["paths.report_dir"] = bind(c.report_dir);

  keys["synth.n_classes"] = bind(c.synth.n_classes);
  keys["synth.n_sequences"] = bind(c.synth.n_sequences);
  keys["synth.gestures_per_sequence"] = bind(c.synth.gestures_per_sequence);
  keys["synth.rest_gap_min"] = bind(c.synth.rest_gap.lo);
  keys["synth.rest_gap_max"] = bind(c.synth.rest_gap.hi);
  keys["synth.gesture_len_min"] = bind(c.synth.gesture_len.lo);
  keys["synth.gesture_len_max"] = bind(c.synth.gesture_len.hi);
  keys["synth.noise_sigma"] = bind(c.synth.noise_sigma);
  keys["synth.frame_rate"] = bind(c.synth.frame_rate);
  keys["synth.train_fraction"] = bind(c.train_fraction);
  keys["synth.val_fraction"] = bind(c.val_fraction);

  keys["segmenter.threshold"] = bind(c.segmenter.threshold);
  keys["segmenter.min_period"] = bind(c.segmenter.min_period);
  keys["segmenter.loess_span"] = bind(c.segmenter.loess_span);
  keys["segmenter.negative_margin"] = {
      [&c](const std::string& v) {
        if (v == "auto")
          c.segmenter.negative_margin.reset();
        else
          c.segmenter.negative_margin = detail::parse_scalar<int>("segmenter.negative_margin", v);
      },
      [&c] { return c.segmenter.negative_margin ? std::to_string(*c.segmenter.negative_margin) : "auto"; }};
  keys["segmenter.hidden1"] = bind(c.segmenter.hidden1);
  keys["segmenter.hidden2"] = bind(c.segmenter.hidden2);
  detail::bind_scg(keys, "segmenter", c.segmenter.scg);

  detail::bind_window(keys, "window_a", c.window_a);
  detail::bind_window(keys, "window_b", c.window_b);
  keys["window_b.fusion_weights"] = bind(c.window_b.fusion_weights);

  keys["rnn.layer_sizes"] = bind(c.rnn.layer_sizes);
  keys["rnn.dropout"] = bind(c.rnn.dropout);
  keys["rnn.leaky_slope"] = bind(c.rnn.leaky_slope);
  keys["rnn.clip_norm"] = bind(c.rnn.clip_norm);
  keys["rnn.window_length"] = bind(c.rnn.window_length);
  keys["rnn.rest_step"] = bind(c.rnn.rest_step);
  keys["rnn.active_step"] = bind(c.rnn.active_step);
  keys["rnn.min_run"] = bind(c.rnn.min_run);
  keys["rnn.loess_span"] = bind(c.rnn.loess_span);
  keys["rnn.learning_rate"] = bind(c.rnn.sgdm.learning_rate);
  keys["rnn.drop_factor"] = bind(c.rnn.sgdm.drop_factor);
  keys["rnn.drop_period"] = bind(c.rnn.sgdm.drop_period);
  keys["rnn.max_epochs"] = bind(c.rnn.sgdm.max_epochs);
  keys["rnn.batch_size"] = bind(c.rnn.sgdm.batch_size);
  keys["rnn.momentum"] = bind(c.rnn.sgdm.momentum);
  return keys;
}

/// Applies one `section.key=value` assignment.
inline void apply_setting(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCategory::usage, "expected section.key=value, got '" + assignment + "'");
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  auto keys = config_keys(c);
  auto it = keys.find(key);
  if (it == keys.end()) fail(ErrorCategory::config, "unknown config key '" + key + "'");
  try {
    it->second.set(value);
  } catch (const Error&) {
    fail(ErrorCategory::config, detail::bad_value(key, value));
  }
}

/// Reads a sectioned `key = value` file over the existing values.
inline void apply_config_file(PipelineConfig& c, const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    const bool missing = e.line() == 0;
    fail(missing ? ErrorCategory::io : ErrorCategory::config,
         path + (missing ? ": cannot open" : ": line " + std::to_string(e.line()) + ": " + e.message()));
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty())
      fail(ErrorCategory::config, path + ": key '" + section + "' outside of a section");
    for (const auto& [key, value] : entries) {
      try {
        apply_setting(c, section + "." + key + "=" + value.data());
      } catch (const Error& e) {
        fail(e.category(), path + ": " + e.what());
      }
    }
  }
}

/// The effective configuration in the same format `apply_config_file` reads.
inline void write_config(std::ostream& out, PipelineConfig c) {
  std::string current;
  for (const auto& [name, key] : config_keys(c)) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      out << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    out << name.substr(dot + 1) << " = " << key.get() << '\n';
  }
}

}  // namespace gesture
