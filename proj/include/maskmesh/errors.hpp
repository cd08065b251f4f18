#pragma once

#include <stdexcept>
#include <string>

namespace maskmesh {

enum class ErrorCode {
  // job validation
  EmptyVideo,
  DuplicateHumanId,
  PromptOutOfBounds,
  InconsistentFrameSize,
  InvalidFrameIndex,
  // masks
  CorruptRle,
  DimensionMismatch,
  LengthMismatch,
  // backends
  BackendUnavailable,
  BackendProtocolError,
  IdentityCountMismatch,
  LayoutMismatch,
  // wire
  UnencodableValue,
  MalformedJson,
  UnknownType,
  VersionMismatch,
  // smoothing / metrics
  NonFiniteInput,
  InsufficientFrames,
  // files and configuration
  InvalidInput,
  InvalidConfig,
};

const char* to_string(ErrorCode code);

/// Broad failure classes, used to pick CLI exit codes.
enum class ErrorClass { Usage, Backend, Data };

ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 protected:
  struct Verbatim {};
  Error(ErrorCode code, const std::string& what, Verbatim);

 private:
  ErrorCode code_;
};

/// Wraps an error raised inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace maskmesh
