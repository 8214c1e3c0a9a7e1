#pragma once

#include <stdexcept>
#include <string>

namespace surrogate {

enum class ErrorKind {
  parse,
  not_found,
  invalid_argument,
  data,
  config,
  validation,
};

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace surrogate
