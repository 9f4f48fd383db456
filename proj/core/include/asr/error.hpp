#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asr {

enum class Errc {
  // audio
  MalformedHeader,
  UnsupportedEncoding,
  TruncatedData,
  // text
  EmptyCorpus,
  UnknownSymbol,
  IndexOutOfRange,
  // manifest
  MissingIndex,
  NoUsableUtterances,
  IoFailure,
  // features
  DegenerateConfig,
  TooShort,
  // model / ctc
  ShapeMismatch,
  Infeasible,
  InvalidLabel,
  // augment
  SyntaxError,
  UnknownKind,
  RangeOrderError,
  // train / checkpoint
  InvalidConfig,
  AlphabetMismatch,
  CheckpointIncompatible,
  ChecksumMismatch,
  VersionUnsupported,
  // eval
  EmptyReference,
  // config
  ParseError,
  UnknownKey,
  TypeMismatch,
};

std::string_view errc_name(Errc code) noexcept;

// Every recoverable failure in the library is reported through this type;
// the code identifies the contract that was violated.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

inline std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::MissingIndex: return "MissingIndex";
    case Errc::NoUsableUtterances: return "NoUsableUtterances";
    case Errc::IoFailure: return "IoFailure";
    case Errc::DegenerateConfig: return "DegenerateConfig";
    case Errc::TooShort: return "TooShort";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::Infeasible: return "Infeasible";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::RangeOrderError: return "RangeOrderError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::AlphabetMismatch: return "AlphabetMismatch";
    case Errc::CheckpointIncompatible: return "CheckpointIncompatible";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::TypeMismatch: return "TypeMismatch";
  }
  return "Unknown";
}

}  // namespace asr
