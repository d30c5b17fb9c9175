#include "smart/error.hpp"

namespace smart {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kBadTimestamp: return "BadTimestamp";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kInvalidFilter: return "InvalidFilter";
    case ErrorCode::kUnknownPost: return "UnknownPost";
    case ErrorCode::kUnknownFilter: return "UnknownFilter";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kBudgetExceedsPool: return "BudgetExceedsPool";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kBinOutOfOrder: return "BinOutOfOrder";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kCorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kPortInUse: return "PortInUse";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + "(" + detail + ")"),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace smart
