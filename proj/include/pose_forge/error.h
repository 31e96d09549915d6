#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pose_forge {

enum class ErrorCode {
  // geometry
  kDegenerateInput,
  kInvalidRotation,
  kBehindCamera,
  kInvalidArgument,
  // model / cloud files
  kMissingFile,
  kMalformedHeader,
  kNonNumericValue,
  kZeroVertices,
  kEmptyInput,
  // pnp
  kTooFewPoints,
  kCoplanarDegenerate,
  kRankDeficient,
  kSingularSystem,
  kConsensusFailure,
  // icp
  kSizeMismatch,
  kCollinearDegenerate,
  kGatingFailure,
  // tensor files
  kBadMagic,
  kUnsupportedFormat,
  kLengthMismatch,
  kNonFinite,
  // matching / regression
  kDimensionMismatch,
  kInsufficientCorrespondences,
  kDegenerateOutput,
  kNumericFailure,
  // synth / cli
  kConfigRejected,
  kInvalidConfig,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this type. `line` is set for
// text-format parse errors (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const { return code_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace pose_forge
