#pragma once

#include <stdexcept>
#include <string>

namespace etaknn {

enum class ErrorCode {
  parse,
  integrity,
  range,
  parameter,
  fit,
  split,
  config,
  schema,
  training,
  corrupt_file,
  version,
  metric,
  io,
  generation,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code tells callers (and the C
/// API) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace etaknn
