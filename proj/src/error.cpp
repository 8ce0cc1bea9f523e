#include "gantry/error.hpp"

#include <array>
#include <utility>

namespace gantry {
namespace {

constexpr std::array kNames = {
    std::pair{ErrorCode::kMinorsExhausted, "minors-exhausted"},
    std::pair{ErrorCode::kUnknownNode, "unknown-node"},
    std::pair{ErrorCode::kDuplicateVg, "duplicate-vg"},
    std::pair{ErrorCode::kInsufficientSpace, "insufficient-space"},
    std::pair{ErrorCode::kIllegalTransition, "illegal-transition"},
    std::pair{ErrorCode::kNotSyncing, "not-syncing"},
    std::pair{ErrorCode::kUnknownDisk, "unknown-disk"},
    std::pair{ErrorCode::kNoFeasiblePlacement, "no-feasible-placement"},
    std::pair{ErrorCode::kDuplicateInstance, "duplicate-instance"},
    std::pair{ErrorCode::kUnknownOs, "unknown-os"},
    std::pair{ErrorCode::kNameResolutionFailed, "name-resolution-failed"},
    std::pair{ErrorCode::kIpInUse, "ip-in-use"},
    std::pair{ErrorCode::kUnknownInstance, "unknown-instance"},
    std::pair{ErrorCode::kPrimaryOffline, "primary-offline"},
    std::pair{ErrorCode::kMissingIsoOnNode, "missing-iso-on-node"},
    std::pair{ErrorCode::kInsufficientMemory, "insufficient-memory"},
    std::pair{ErrorCode::kUnknownField, "unknown-field"},
    std::pair{ErrorCode::kBadNicIndex, "bad-nic-index"},
    std::pair{ErrorCode::kUnknownLink, "unknown-link"},
    std::pair{ErrorCode::kNotDrbd, "not-drbd"},
    std::pair{ErrorCode::kNodeOffline, "node-offline"},
    std::pair{ErrorCode::kDisksDegraded, "disks-degraded"},
    std::pair{ErrorCode::kInstanceNotRunning, "instance-not-running"},
    std::pair{ErrorCode::kConsistencyRequired,
              "source-alive-consistency-required"},
    std::pair{ErrorCode::kSecondaryOffline, "secondary-offline"},
    std::pair{ErrorCode::kInvalidParams, "invalid-params"},
    std::pair{ErrorCode::kNotInitialized, "not-initialized"},
    std::pair{ErrorCode::kVgMissing, "vg-missing"},
    std::pair{ErrorCode::kNameUnresolvable, "name-unresolvable"},
    std::pair{ErrorCode::kAlreadyInitialized, "already-initialized"},
    std::pair{ErrorCode::kUnknownHypervisor, "unknown-hypervisor"},
    std::pair{ErrorCode::kParseError, "parse-error"},
    std::pair{ErrorCode::kUnreachableNode, "unreachable-node"},
    std::pair{ErrorCode::kDuplicateNode, "duplicate-node"},
    std::pair{ErrorCode::kNotMaster, "not-master"},
    std::pair{ErrorCode::kMasterStillAlive, "master-still-alive"},
    std::pair{ErrorCode::kNotACandidate, "not-a-candidate"},
    std::pair{ErrorCode::kStaleConfig, "stale-config"},
    std::pair{ErrorCode::kFileMissingOnMaster, "file-missing-on-master"},
    std::pair{ErrorCode::kNodeOff, "node-off"},
    std::pair{ErrorCode::kMissingIso, "missing-iso"},
    std::pair{ErrorCode::kNegativeDt, "negative-dt"},
    std::pair{ErrorCode::kDuplicateSimNode, "duplicate-sim-node"},
    std::pair{ErrorCode::kUnknownOp, "unknown-op"},
    std::pair{ErrorCode::kUnknownJob, "unknown-job"},
    std::pair{ErrorCode::kUsageError, "usage-error"},
    std::pair{ErrorCode::kDaemonUnreachable, "daemon-unreachable"},
};

}  // namespace

std::string_view error_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "unknown-error";
}

ErrorCode error_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::kInvalidParams;
}

ErrorKind error_kind(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownNode:
    case ErrorCode::kUnknownDisk:
    case ErrorCode::kUnknownInstance:
    case ErrorCode::kUnknownJob:
      return ErrorKind::kNotFound;
    case ErrorCode::kUnknownField:
    case ErrorCode::kBadNicIndex:
    case ErrorCode::kUnknownLink:
    case ErrorCode::kInvalidParams:
    case ErrorCode::kUnknownHypervisor:
    case ErrorCode::kParseError:
    case ErrorCode::kNegativeDt:
    case ErrorCode::kUnknownOp:
    case ErrorCode::kUsageError:
      return ErrorKind::kValidation;
    default:
      return ErrorKind::kPrecondition;
  }
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
      return 400;
    case ErrorKind::kNotFound:
      return 404;
    case ErrorKind::kPrecondition:
      return 409;
  }
  return 500;
}

}  // namespace gantry
