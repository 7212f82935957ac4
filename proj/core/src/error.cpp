#include "aep/error.hpp"

namespace aep {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::training: return "training";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::insufficient_sample: return "insufficient_sample";
  }
  return "unknown";
}

}  // namespace aep
