#pragma once

#include <stdexcept>
#include <string>

namespace sincvae {

// Error categories. The CLI maps each one to a distinct exit code.
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNonFinite,
  kIo,
  kFormat,
  kEdfTruncated,
  kEdfHeaderMismatch,
  kEdfUnsupported,
  kConfig,
  kState,
};

const char* error_code_name(ErrorCode code);

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

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace sincvae
