#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medtx {

enum class ErrorKind {
  Io,
  Schema,
  EmptyDataset,
  Config,
  Shape,
  Divergence,
  Input,
  Authentication,
  Authorization,
  NotFound,
  Validation,
  Extraction,
  Unclassifiable,
};

// Stable snake_case code, used in JSON error bodies and CLI messages.
std::string_view error_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace medtx
