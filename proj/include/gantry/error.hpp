#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gantry {

enum class ErrorCode {
  // cluster-model
  kMinorsExhausted,
  kUnknownNode,
  // storage
  kDuplicateVg,
  kInsufficientSpace,
  kIllegalTransition,
  kNotSyncing,
  kUnknownDisk,
  // allocator
  kNoFeasiblePlacement,
  // lifecycle
  kDuplicateInstance,
  kUnknownOs,
  kNameResolutionFailed,
  kIpInUse,
  kUnknownInstance,
  kPrimaryOffline,
  kMissingIsoOnNode,
  kInsufficientMemory,
  kUnknownField,
  kBadNicIndex,
  kUnknownLink,
  kNotDrbd,
  kNodeOffline,
  kDisksDegraded,
  kInstanceNotRunning,
  kConsistencyRequired,
  kSecondaryOffline,
  kInvalidParams,
  // membership
  kNotInitialized,
  kVgMissing,
  kNameUnresolvable,
  kAlreadyInitialized,
  kUnknownHypervisor,
  kParseError,
  kUnreachableNode,
  kDuplicateNode,
  kNotMaster,
  kMasterStillAlive,
  kNotACandidate,
  kStaleConfig,
  kFileMissingOnMaster,
  // simnode
  kNodeOff,
  kMissingIso,
  kNegativeDt,
  kDuplicateSimNode,
  // jobs-api
  kUnknownOp,
  kUnknownJob,
  // cli
  kUsageError,
  kDaemonUnreachable,
};

/// HTTP-facing category of an error: 400, 404 or 409.
enum class ErrorKind { kValidation, kNotFound, kPrecondition };

/// Stable kebab-case identifier ("minors-exhausted"), used on the wire.
std::string_view error_name(ErrorCode code);
ErrorCode error_from_name(std::string_view name);
ErrorKind error_kind(ErrorCode code);
int http_status(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return error_kind(code_); }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace gantry
