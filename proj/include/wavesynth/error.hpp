#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wavesynth {

enum class ErrorKind {
  Parameter,
  Size,
  Data,
  State,
  Shape,
  Numeric,
  Coverage,
  DegenerateRange,
  Io,
  Stage,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Coverage: return "coverage error";
    case ErrorKind::DegenerateRange: return "degenerate-range error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Stage: return "stage error";
  }
  return "error";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace detail
}  // namespace wavesynth
