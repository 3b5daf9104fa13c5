#include "lsteeg/errors.hpp"

namespace lsteeg {

std::string_view error_class_name(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::dimension: return "dimension";
    case ErrorClass::config: return "config";
    case ErrorClass::numeric: return "numeric";
    case ErrorClass::usage: return "usage";
    case ErrorClass::undefined_auc: return "undefined_auc";
    case ErrorClass::io: return "io";
    case ErrorClass::bad_magic: return "bad_magic";
    case ErrorClass::version_mismatch: return "version_mismatch";
    case ErrorClass::truncated: return "truncated";
    case ErrorClass::checksum_mismatch: return "checksum_mismatch";
    case ErrorClass::format: return "format";
  }
  return "unknown";
}

int exit_code(ErrorClass cls) noexcept {
  return 10 + static_cast<int>(cls);
}

} // namespace lsteeg
