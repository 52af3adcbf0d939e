#include "prisomap/error.hpp"

namespace prisomap {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonSymmetricInput: return "NonSymmetricInput";
    case ErrorCode::SentinelPresent: return "SentinelPresent";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InfiniteWindow: return "InfiniteWindow";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::GraphTooFragmented: return "GraphTooFragmented";
    case ErrorCode::NoFinitePairs: return "NoFinitePairs";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::ZeroMeanDensity: return "ZeroMeanDensity";
    case ErrorCode::BadDimension: return "BadDimension";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::GraphTooFragmented:
    case ErrorCode::InvalidGraph:
      return 3;
    case ErrorCode::ConvergenceFailure:
    case ErrorCode::NoFinitePairs:
    case ErrorCode::ZeroMeanDensity:
    case ErrorCode::SentinelPresent:
    case ErrorCode::NonSymmetricInput:
      return 4;
    default:
      return 2;
  }
}

}  // namespace prisomap
