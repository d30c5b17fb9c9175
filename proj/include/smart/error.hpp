#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smart {

enum class ErrorCode {
  kMalformedJson,
  kMissingField,
  kOutOfRange,
  kBadTimestamp,
  kFileNotFound,
  kInvalidFilter,
  kUnknownPost,
  kUnknownFilter,
  kUnknownModel,
  kBudgetExceedsPool,
  kCorpusTooSmall,
  kBinOutOfOrder,
  kDuplicateId,
  kIoError,
  kCorruptSnapshot,
  kInvalidArgument,
  kInvalidConfig,
  kPortInUse,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception. `detail()` carries the
// field/parameter name or reason, without the code prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace smart
