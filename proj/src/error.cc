#include "pose_forge/error.h"

namespace pose_forge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kInvalidRotation: return "invalid-rotation";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kNonNumericValue: return "non-numeric-value";
    case ErrorCode::kZeroVertices: return "zero-vertices";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kTooFewPoints: return "too-few-points";
    case ErrorCode::kCoplanarDegenerate: return "coplanar-degenerate";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kConsensusFailure: return "consensus-failure";
    case ErrorCode::kSizeMismatch: return "size-mismatch";
    case ErrorCode::kCollinearDegenerate: return "collinear-degenerate";
    case ErrorCode::kGatingFailure: return "gating-failure";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedFormat: return "unsupported-format";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kInsufficientCorrespondences:
      return "insufficient-correspondences";
    case ErrorCode::kDegenerateOutput: return "degenerate-output";
    case ErrorCode::kNumericFailure: return "numeric-failure";
    case ErrorCode::kConfigRejected: return "config-rejected";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(message), code_(code), line_(line) {}

}  // namespace pose_forge
