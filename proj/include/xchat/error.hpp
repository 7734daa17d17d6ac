#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xchat {

enum class ErrorCode {
  UnknownCharacterClass,
  FileUnreadable,
  EmptyFile,
  MalformedRecord,
  MalformedLine,
  UnknownDocId,
  EmptyCorpus,
  SkippedIntransitive,
  UnknownEntity,
  LookupUnavailable,
  SnapshotMismatch,
  SnapshotMissing,
  IndexUnavailable,
  GeneratorUnavailable,
  UnknownSession,
  UnknownResponse,
  InvalidArgument,
  PortInUse,
  Unimplemented,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownCharacterClass: return "UnknownCharacterClass";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownDocId: return "UnknownDocId";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::SkippedIntransitive: return "SkippedIntransitive";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::LookupUnavailable: return "LookupUnavailable";
    case ErrorCode::SnapshotMismatch: return "SnapshotMismatch";
    case ErrorCode::SnapshotMissing: return "SnapshotMissing";
    case ErrorCode::IndexUnavailable: return "IndexUnavailable";
    case ErrorCode::GeneratorUnavailable: return "GeneratorUnavailable";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownResponse: return "UnknownResponse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::Unimplemented: return "Unimplemented";
  }
  return "Unknown";
}

/// Every module reports failures through this exception; `code()` is the
/// stable identifier surfaced by the CLI and the HTTP error body.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xchat
