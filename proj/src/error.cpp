#include "idiomkit/error.hpp"

namespace idiomkit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kEmptyContext: return "empty-context";
    case ErrorKind::kVerbalizer: return "verbalizer";
    case ErrorKind::kRender: return "render";
    case ErrorKind::kInvariant: return "invariant";
    case ErrorKind::kCapability: return "capability";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

Error::Error(std::string module, ErrorKind kind, const std::string& message)
    : std::runtime_error(message), module_(std::move(module)), kind_(kind) {}

}  // namespace idiomkit
