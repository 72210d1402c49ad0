#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <type_traits>

#include "gesture/descriptor.hpp"
#include "gesture/io.hpp"
#include "gesture/nn/bilstm.hpp"
#include "gesture/nn/mlp.hpp"

namespace gesture::nn {

/// A trained network bundled with the feature pipeline it was trained on.
template <typename Net>
struct NetworkModel {
  Net network;
  FeatureContext features;
  std::map<std::string, std::string> meta;
};

using MlpModel = NetworkModel<Mlp>;
using BiLstmModel = NetworkModel<BiLstm>;

// Container layout:
//
//   GMODEL 1
//   KIND mlp | bilstm
//   META <key> <value>                 (zero or more)
//   INPUT <width>
//   LAYER <units> <activation>         (mlp)
//   LOSS <loss>                        (mlp)
//   LSTM <hidden> <post> <dropout>     (bilstm)
//   OUTPUT <units>                     (bilstm)
//   LEAKY_SLOPE <value>
//   FEATURES ... (see descriptor.hpp)
//   LAYOUT <n>
//   BLOCK <name> <offset> <rows> <cols>   (n lines)
//   PARAMS <count>
//   <count little-endian binary64 values, layout order>

namespace detail {

inline void write_layout_and_params(std::ostream& out, const ParamLayout& layout,
                                    const Vector& params) {
  out << "LAYOUT " << layout.size() << '\n';
  for (const auto& b : layout)
    out << "BLOCK " << b.name << ' ' << b.offset << ' ' << b.rows << ' ' << b.cols << '\n';
  out << "PARAMS " << params.size() << '\n';
  write_doubles(out, params.data(), static_cast<std::size_t>(params.size()));
}

struct Header {
  std::string kind;
  std::map<std::string, std::string> meta;
  int input = 0;
  std::vector<DenseLayerSpec> dense;
  Loss loss = Loss::categorical_cross_entropy;
  std::vector<LstmLayerSpec> lstm;
  int output = kNumClasses;
  double leaky_slope = 0.01;
  FeatureContext features;
};

inline Header read_header(std::istream& in) {
  std::string line;
  auto bad = [](const std::string& what) { fail(ErrorCategory::format, "model file: " + what); };
  if (!std::getline(in, line) || line != "GMODEL 1") bad("missing 'GMODEL 1' header");
  Header h;
  while (true) {
    const auto pos = in.tellg();
    if (!std::getline(in, line)) bad("unexpected end of header");
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    long long iv = 0;
    double dv = 0;
    if (tok[0] == "KIND" && tok.size() == 2) {
      h.kind = tok[1];
    } else if (tok[0] == "META" && tok.size() >= 2) {
      const auto value_at = static_cast<std::size_t>(tok[1].data() - line.data()) + tok[1].size();
      std::string value = value_at < line.size() ? line.substr(value_at + 1) : "";
      h.meta[std::string(tok[1])] = value;
    } else if (tok[0] == "INPUT" && tok.size() == 2 && parse_int(tok[1], iv)) {
      h.input = static_cast<int>(iv);
    } else if (tok[0] == "LAYER" && tok.size() == 3 && parse_int(tok[1], iv)) {
      h.dense.push_back({static_cast<int>(iv), activation_from_string(tok[2])});
    } else if (tok[0] == "LOSS" && tok.size() == 2) {
      h.loss = loss_from_string(tok[1]);
    } else if (tok[0] == "LSTM" && tok.size() == 4 && parse_int(tok[1], iv) &&
               parse_double(tok[3], dv)) {
      h.lstm.push_back({static_cast<int>(iv), activation_from_string(tok[2]), dv});
    } else if (tok[0] == "OUTPUT" && tok.size() == 2 && parse_int(tok[1], iv)) {
      h.output = static_cast<int>(iv);
    } else if (tok[0] == "LEAKY_SLOPE" && tok.size() == 2 && parse_double(tok[1], dv)) {
      h.leaky_slope = dv;
    } else if (tok[0] == "FEATURES") {
      in.seekg(pos);
      h.features = read_features(in);
      return h;
    } else {
      bad("unrecognized line '" + line + "'");
    }
  }
}

inline Vector read_layout_and_params(std::istream& in, const ParamLayout& expected) {
  std::string line;
  auto bad = [](const std::string& what) { fail(ErrorCategory::format, "model file: " + what); };
  long long n = 0;
  if (!std::getline(in, line)) bad("missing LAYOUT");
  auto tok = split_ws(line);
  if (tok.size() != 2 || tok[0] != "LAYOUT" || !parse_int(tok[1], n)) bad("malformed LAYOUT");
  if (n != static_cast<long long>(expected.size()))
    fail(ErrorCategory::mismatch, "model file: layout block count does not match architecture");
  for (const auto& b : expected) {
    if (!std::getline(in, line)) bad("truncated LAYOUT");
    const std::string want = "BLOCK " + b.name + ' ' + std::to_string(b.offset) + ' ' +
                             std::to_string(b.rows) + ' ' + std::to_string(b.cols);
    if (line != want)
      fail(ErrorCategory::mismatch, "model file: layout entry '" + line + "' expected '" + want + "'");
  }
  if (!std::getline(in, line)) bad("missing PARAMS");
  tok = split_ws(line);
  if (tok.size() != 2 || tok[0] != "PARAMS" || !parse_int(tok[1], n) ||
      n != layout_size(expected))
    fail(ErrorCategory::mismatch, "model file: parameter count does not match architecture");
  Vector params(n);
  read_doubles(in, params.data(), static_cast<std::size_t>(n));
  return params;
}

template <typename Net>
void write_common_prefix(std::ostream& out, const char* kind, const NetworkModel<Net>& model) {
  out << "GMODEL 1\nKIND " << kind << '\n';
  for (const auto& [k, v] : model.meta) {
    if (k.empty() || k.find_first_of(" \t\r\n") != std::string::npos ||
        v.find_first_of("\r\n") != std::string::npos)
      fail(ErrorCategory::format, "model meta entries must be single-line tokens");
    out << "META " << k << ' ' << v << '\n';
  }
}

}  // namespace detail

inline void write_model(std::ostream& out, const MlpModel& model) {
  const MlpSpec& spec = model.network.spec();
  detail::write_common_prefix(out, "mlp", model);
  out << "INPUT " << spec.input << '\n';
  for (const auto& l : spec.layers) out << "LAYER " << l.units << ' ' << to_string(l.activation) << '\n';
  out << "LOSS " << to_string(spec.loss) << '\n';
  out << "LEAKY_SLOPE " << format_double(spec.leaky_slope) << '\n';
  write_features(out, model.features);
  detail::write_layout_and_params(out, model.network.layout(), model.network.parameters());
}

inline void write_model(std::ostream& out, const BiLstmModel& model) {
  const LstmStackSpec& spec = model.network.spec();
  detail::write_common_prefix(out, "bilstm", model);
  out << "INPUT " << spec.input << '\n';
  for (const auto& l : spec.layers)
    out << "LSTM " << l.hidden << ' ' << to_string(l.post) << ' ' << format_double(l.dropout)
        << '\n';
  out << "OUTPUT " << spec.output << '\n';
  out << "LEAKY_SLOPE " << format_double(spec.leaky_slope) << '\n';
  write_features(out, model.features);
  detail::write_layout_and_params(out, model.network.layout(), model.network.parameters());
}

inline MlpModel read_mlp_model(std::istream& in) {
  detail::Header h = detail::read_header(in);
  if (h.kind != "mlp") fail(ErrorCategory::mismatch, "model file holds '" + h.kind + "', expected mlp");
  MlpModel m{Mlp(MlpSpec{h.input, h.dense, h.loss, h.leaky_slope}), std::move(h.features),
             std::move(h.meta)};
  m.network.set_parameters(detail::read_layout_and_params(in, m.network.layout()));
  return m;
}

inline BiLstmModel read_bilstm_model(std::istream& in) {
  detail::Header h = detail::read_header(in);
  if (h.kind != "bilstm")
    fail(ErrorCategory::mismatch, "model file holds '" + h.kind + "', expected bilstm");
  BiLstmModel m{BiLstm(LstmStackSpec{h.input, h.lstm, h.output, h.leaky_slope}),
                std::move(h.features), std::move(h.meta)};
  m.network.set_parameters(detail::read_layout_and_params(in, m.network.layout()));
  return m;
}

template <typename Net>
void save_model(const std::string& path, const NetworkModel<Net>& model) {
  auto out = open_output(path, true);
  write_model(out, model);
  check_written(out, path);
}

inline MlpModel load_mlp_model(const std::string& path) {
  auto in = open_input(path, true);
  try {
    return read_mlp_model(in);
  } catch (const Error& e) {
    fail(e.category(), path + ": " + e.what());
  }
}

inline BiLstmModel load_bilstm_model(const std::string& path) {
  auto in = open_input(path, true);
  try {
    return read_bilstm_model(in);
  } catch (const Error& e) {
    fail(e.category(), path + ": " + e.what());
  }
}

}  // namespace gesture::nn
