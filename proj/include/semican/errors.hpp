#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semican {

enum class ErrorCode {
  InvalidArgument,
  EmptyCloud,
  EmptyMesh,
  EmptySelection,
  NoCluster,
  MeshEmpty,
  TooFewPoints,
  NoHits,
  MalformedFile,
  MissingMatrix,
  ManifestMissing,
  SizeMismatch,
  UnknownPreset,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::NoCluster: return "NoCluster";
    case ErrorCode::MeshEmpty: return "MeshEmpty";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::MissingMatrix: return "MissingMatrix";
    case ErrorCode::ManifestMissing: return "ManifestMissing";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

}  // namespace semican
