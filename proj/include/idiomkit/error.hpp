#pragma once

#include <stdexcept>
#include <string>

namespace idiomkit {

enum class ErrorKind {
  kFormat,      // malformed input file or row
  kArgument,    // precondition on a call argument
  kCapacity,    // not enough data to satisfy a request
  kIo,          // filesystem failure
  kEmptyContext,
  kVerbalizer,
  kRender,
  kInvariant,
  kCapability,  // backend cannot perform the operation
  kConfig,
};

const char* to_string(ErrorKind kind);

// All library failures are reported as Error. `module()` names the component
// that raised it so the CLI can print a tagged line.
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorKind kind, const std::string& message);

  const std::string& module() const { return module_; }
  ErrorKind kind() const { return kind_; }

 private:
  std::string module_;
  ErrorKind kind_;
};

}  // namespace idiomkit
