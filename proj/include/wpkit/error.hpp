#pragma once

#include <stdexcept>
#include <string>

namespace wpkit {

// Every failure raised by the library carries a short machine-readable code
// (e.g. "pad-too-large") in addition to the human-readable message. The CLI
// forwards the code verbatim in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace wpkit
