#include "maskmesh/errors.hpp"

namespace maskmesh {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::DuplicateHumanId: return "DuplicateHumanId";
    case ErrorCode::PromptOutOfBounds: return "PromptOutOfBounds";
    case ErrorCode::InconsistentFrameSize: return "InconsistentFrameSize";
    case ErrorCode::InvalidFrameIndex: return "InvalidFrameIndex";
    case ErrorCode::CorruptRle: return "CorruptRle";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::BackendProtocolError: return "BackendProtocolError";
    case ErrorCode::IdentityCountMismatch: return "IdentityCountMismatch";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::UnencodableValue: return "UnencodableValue";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::BackendProtocolError:
    case ErrorCode::IdentityCountMismatch:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::MalformedJson:
    case ErrorCode::UnknownType:
    case ErrorCode::VersionMismatch:
      return ErrorClass::Backend;
    case ErrorCode::InvalidConfig:
      return ErrorClass::Usage;
    default:
      return ErrorClass::Data;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

Error::Error(ErrorCode code, const std::string& what, Verbatim)
    : std::runtime_error(what), code_(code) {}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage '" + stage + "': " + cause.what(), Verbatim{}),
      stage_(std::move(stage)) {}

}  // namespace maskmesh
