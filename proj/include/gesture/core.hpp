#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace gesture {

inline constexpr int kNumJoints = 11;
inline constexpr int kNumGestureClasses = 20;
/// Gesture classes plus the rest class 0.
inline constexpr int kNumClasses = kNumGestureClasses + 1;
inline constexpr int kDescriptorWidth = 183;

/// Feature-major matrix: one column per frame (or sample).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

enum class ErrorCategory { usage, config, io, format, numeric, mismatch };

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::mismatch: return "mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

}  // namespace gesture
