#pragma once

#include <stdexcept>
#include <string>

namespace stochflow {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  io,
  parse,
  numeric,
  singular_matrix,
  unstable,
  degenerate_data,
  origin,
};

// Library errors carry a coarse code so the C boundary can map them to
// status values without matching on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stochflow
