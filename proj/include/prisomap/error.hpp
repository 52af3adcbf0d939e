#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prisomap {

enum class ErrorCode {
  InvalidArgument,
  NonSymmetricInput,
  SentinelPresent,
  ConvergenceFailure,
  ParseError,
  EmptyDataset,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  IoError,
  InfiniteWindow,
  InvalidGraph,
  TooLarge,
  DisconnectedGraph,
  GraphTooFragmented,
  NoFinitePairs,
  ClassTooSmall,
  ZeroMeanDensity,
  BadDimension,
};

std::string_view error_name(ErrorCode code) noexcept;

// Process exit status for a failure of this kind: 2 usage or input, 3 graph
// topology, 4 numeric.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace prisomap
