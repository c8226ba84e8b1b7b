#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrieval {

/// Raised for malformed inputs and violated preconditions. The CLI maps it to
/// exit code 2; anything else escaping a command is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NIfTI stream could not be decoded. `offset()` is the byte position of the
/// offending field (or where the stream ended early).
class NiftiError : public Error {
 public:
  NiftiError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace mrieval
