#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/skeleton.hpp"

namespace gesture {

// Shortest decimal text that parses back to the same binary64.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

inline bool parse_int(std::string_view text, long long& out) {
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::in | std::ios::binary : std::ios::in);
  if (!in) fail(ErrorCategory::io, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::out | std::ios::binary | std::ios::trunc
                                 : std::ios::out | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot open '" + path + "' for writing");
  return out;
}

inline void check_written(const std::ostream& out, const std::string& path) {
  if (!out) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

// -- interchange format -----------------------------------------------------
//
//   GSKEL 1 <n_frames> <frame_rate> <sequence_id>
//   <33 floats: joints 0..10, x y z each>      (n_frames lines)
//   LABELS                                      (optional)
//   <n_frames integers, any whitespace layout>

struct LabeledSequence {
  SkeletonSequence sequence;
  FrameLabels labels;
};

inline void write_sequence(std::ostream& out, const SkeletonSequence& seq,
                           const FrameLabels* labels = nullptr) {
  if (seq.id.empty() || seq.id.find_first_of(" \t\r\n") != std::string::npos)
    fail(ErrorCategory::format, "sequence id must be a non-empty token: '" + seq.id + "'");
  out << "GSKEL 1 " << seq.frames.size() << ' ' << format_double(seq.frame_rate) << ' ' << seq.id
      << '\n';
  std::string line;
  for (const Frame& f : seq.frames) {
    line.clear();
    for (int j = 0; j < kNumJoints; ++j)
      for (int c = 0; c < 3; ++c) {
        if (j + c > 0) line += ' ';
        line += format_double(f[j][c]);
      }
    line += '\n';
    out << line;
  }
  if (labels) {
    validate_labels(*labels, seq.size());
    out << "LABELS\n";
    for (std::size_t t = 0; t < labels->size(); ++t) {
      out << (*labels)[t];
      out << ((t + 1) % 40 == 0 || t + 1 == labels->size() ? '\n' : ' ');
    }
  }
}

inline LabeledSequence read_sequence(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto error = [&](const std::string& what) {
    fail(ErrorCategory::format, what + " at line " + std::to_string(line_no));
  };
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };

  if (!next_line()) error("missing header");
  auto header = split_ws(line);
  if (header.size() != 5 || header[0] != "GSKEL") error("malformed header");
  if (header[1] != "1") error("unsupported version '" + std::string(header[1]) + "'");
  long long n_frames = 0;
  double rate = 0;
  if (!parse_int(header[2], n_frames) || n_frames < 1) error("invalid frame count");
  if (!parse_double(header[3], rate) || !(rate > 0) || !std::isfinite(rate))
    error("invalid frame rate");

  LabeledSequence result;
  SkeletonSequence& seq = result.sequence;
  seq.id = std::string(header[4]);
  seq.frame_rate = rate;
  seq.frames.resize(static_cast<std::size_t>(n_frames));

  for (long long t = 0; t < n_frames; ++t) {
    if (!next_line()) error("unexpected end of file in frame block");
    auto tok = split_ws(line);
    if (tok.size() != 3 * kNumJoints) {
      if (tok.size() % 3 == 0) error("wrong joint count");
      error("malformed record");
    }
    for (int j = 0; j < kNumJoints; ++j)
      for (int c = 0; c < 3; ++c) {
        double v;
        if (!parse_double(tok[3 * j + c], v)) error("malformed record");
        if (!std::isfinite(v)) error("non-finite coordinate");
        seq.frames[t][j][c] = v;
      }
  }

  result.labels.assign(static_cast<std::size_t>(n_frames), 0);
  while (next_line()) {
    if (split_ws(line).empty()) continue;
    if (split_ws(line) != std::vector<std::string_view>{"LABELS"}) error("unexpected content");
    long long read = 0;
    while (read < n_frames) {
      if (!next_line()) error("unexpected end of file in label block");
      for (auto tok : split_ws(line)) {
        long long v;
        if (!parse_int(tok, v)) error("malformed label");
        if (v < 0 || v > kNumGestureClasses) error("label out of range 0..20");
        if (read >= n_frames) error("too many labels");
        result.labels[read++] = static_cast<int>(v);
      }
    }
    while (next_line())
      if (!split_ws(line).empty()) error("unexpected content after label block");
  }
  return result;
}

inline void save_sequence(const std::string& path, const SkeletonSequence& seq,
                          const FrameLabels* labels = nullptr) {
  auto out = open_output(path);
  write_sequence(out, seq, labels);
  check_written(out, path);
}

inline LabeledSequence load_sequence(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_sequence(in);
  } catch (const Error& e) {
    fail(e.category(), path + ": " + e.what());
  }
}

// -- binary64 blocks ----------------------------------------------------------

inline void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
    fail(ErrorCategory::format, "truncated binary block");
}

/// Descriptor dump: text header `GDESC 1 <n_frames> <width>` then the
/// frames row-major as little-endian binary64.
inline void write_descriptors(std::ostream& out, const Matrix& descriptors) {
  out << "GDESC 1 " << descriptors.cols() << ' ' << descriptors.rows() << '\n';
  // Column-major storage of a width x frames matrix is row-major per frame.
  write_doubles(out, descriptors.data(), static_cast<std::size_t>(descriptors.size()));
}

inline Matrix read_descriptors(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCategory::format, "missing GDESC header");
  auto tok = split_ws(line);
  long long frames = 0, width = 0;
  if (tok.size() != 4 || tok[0] != "GDESC" || tok[1] != "1" || !parse_int(tok[2], frames) ||
      !parse_int(tok[3], width) || frames < 0 || width < 1)
    fail(ErrorCategory::format, "malformed GDESC header");
  Matrix m(width, frames);
  read_doubles(in, m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

// -- prediction dumps ---------------------------------------------------------

/// `<sequence_id>` line followed by whitespace-separated labels.
inline void write_label_dump(std::ostream& out, const std::string& id, const FrameLabels& labels) {
  out << id << '\n';
  for (std::size_t t = 0; t < labels.size(); ++t)
    out << labels[t] << ((t + 1) % 40 == 0 || t + 1 == labels.size() ? '\n' : ' ');
}

inline std::pair<std::string, FrameLabels> read_label_dump(std::istream& in) {
  std::string id;
  if (!(in >> id)) fail(ErrorCategory::format, "empty label dump");
  FrameLabels labels;
  long long v;
  std::string tok;
  while (in >> tok) {
    if (!parse_int(tok, v) || v < 0 || v > kNumGestureClasses)
      fail(ErrorCategory::format, "bad label '" + tok + "' in dump for " + id);
    labels.push_back(static_cast<int>(v));
  }
  return {id, std::move(labels)};
}

}  // namespace gesture
