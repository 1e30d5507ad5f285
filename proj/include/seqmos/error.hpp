// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_ERROR_HPP
#define SEQMOS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace seqmos {

enum class ErrorKind {
  IoError,
  MalformedFile,
  NonFiniteValue,
  IndexOutOfRange,
  ShapeMismatch,
  LengthMismatch,
  EmptyStack,
  EmptyBatch,
  EmptyDataset,
  OddDimension,
  NonFiniteGradient,
  InvalidArgument,
  DegenerateTrajectory,
  DegenerateSpec,
  NoPositives,
  ConfigError,
};

inline std::string_view errorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyStack: return "EmptyStack";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorKind::DegenerateSpec: return "DegenerateSpec";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Process exit code used by the command-line tool for each error kind.
inline int exitCode(ErrorKind kind) {
  return 10 + static_cast<int>(kind);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(errorKindName(kind)) + ": " + what);
}

}  // namespace seqmos

#endif  // SEQMOS_ERROR_HPP
