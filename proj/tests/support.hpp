#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "gesture/core.hpp"
#include "gesture/rng.hpp"
#include "gesture/skeleton.hpp"

namespace testing_support {

using gesture::Matrix;
using gesture::Vector;

/// Central differences of a scalar function of the parameter vector.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector w,
                               double step = 1e-5) {
  Vector g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double orig = w[i];
    w[i] = orig + step;
    const double up = f(w);
    w[i] = orig - step;
    const double down = f(w);
    w[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gesture_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents of every regular file under `root`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

/// Intersection and union frame counts per (sequence, class) by direct
/// enumeration of every class code, independent of the library's run logic.
struct OraclePair {
  int sequence;
  int class_id;
  long long intersection;
  long long union_size;
};

inline std::vector<OraclePair> brute_force_pairs(const std::vector<std::vector<int>>& truth,
                                                 const std::vector<std::vector<int>>& predicted) {
  std::vector<OraclePair> out;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    for (int c = 1; c <= gesture::kNumGestureClasses; ++c) {
      long long inter = 0, uni = 0;
      bool present = false;
      for (std::size_t t = 0; t < truth[s].size(); ++t) {
        const bool a = truth[s][t] == c;
        const bool b = predicted[s][t] == c;
        present = present || a || b;
        if (a && b) ++inter;
        if (a || b) ++uni;
      }
      if (present) out.push_back({static_cast<int>(s), c, inter, uni});
    }
  }
  return out;
}

/// Random labels made of runs, so that gestures look like intervals.
inline std::vector<int> random_run_labels(gesture::Rng& rng, int length, int n_classes) {
  std::vector<int> out;
  while (static_cast<int>(out.size()) < length) {
    const int run = rng.between(1, 12);
    const int cls = rng.uniform() < 0.5 ? 0 : rng.between(1, n_classes);
    for (int i = 0; i < run && static_cast<int>(out.size()) < length; ++i) out.push_back(cls);
  }
  return out;
}

/// A plausible standing skeleton with small per-frame jitter.
inline gesture::SkeletonSequence jittered_skeleton(int frames, std::uint64_t seed) {
  using gesture::Vec3;
  const std::array<Vec3, gesture::kNumJoints> base{
      Vec3(0, 0, 0),       Vec3(0, 0.5, 0),      Vec3(0, 0.72, 0.02),  Vec3(-0.18, 0.48, 0),
      Vec3(-0.22, 0.22, 0.03), Vec3(-0.24, 0.0, 0.06), Vec3(-0.25, -0.08, 0.08), Vec3(0.18, 0.48, 0),
      Vec3(0.21, 0.23, 0.05), Vec3(0.26, 0.02, 0.1), Vec3(0.27, -0.06, 0.12)};
  gesture::Rng rng(seed);
  gesture::SkeletonSequence seq;
  seq.id = "jitter";
  for (int t = 0; t < frames; ++t) {
    gesture::Frame f;
    for (int j = 0; j < gesture::kNumJoints; ++j)
      f[j] = base[j] + Vec3(0.05 * std::sin(0.3 * t + j), 0.03 * std::cos(0.2 * t + 2 * j), 0.0) +
             0.01 * Vec3(rng.normal(), rng.normal(), rng.normal());
    seq.frames.push_back(f);
  }
  return seq;
}

}  // namespace testing_support
