#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsteeg {

// Machine-readable failure classes. The CLI prints error_class_name() and
// maps each class to a distinct exit code.
enum class ErrorClass {
  dimension,      // shape mismatch between operands
  config,         // invalid parameter or configuration value
  numeric,        // NaN/Inf or an unstable filter
  usage,          // API misuse, e.g. a stale cache
  undefined_auc,  // ROC requested with a single class
  io,             // file cannot be opened/written
  bad_magic,
  version_mismatch,
  truncated,
  checksum_mismatch,
  format,         // structurally invalid file contents
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

std::string_view error_class_name(ErrorClass cls) noexcept;
int exit_code(ErrorClass cls) noexcept;

[[noreturn]] inline void fail(ErrorClass cls, const std::string& what) { throw Error(cls, what); }

inline void require(bool ok, ErrorClass cls, const std::string& what) {
  if (!ok) fail(cls, what);
}

} // namespace lsteeg
