#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hitlab {

enum class ErrorCode {
  BudgetExhausted,
  ConfigInvalid,
  RejectionStall,
  DegenerateLadder,
  AllCensored,
  InvalidBeta,
  NoDecayFit,
  Degenerate,
  SchemaMismatch,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Structured failure carried by every estimator and by the runner.
/// `where()` is a field path for config errors and empty otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string where = {})
      : std::runtime_error(message), code_(code), where_(std::move(where)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ErrorCode code_;
  std::string where_;
};

}  // namespace hitlab
