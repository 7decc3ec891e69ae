#pragma once

#include <stdexcept>
#include <string>

namespace conflens {

/// Broad failure category; the CLI maps these onto exit codes.
enum class ErrorKind {
  Usage,   // bad arguments or preconditions the caller controls
  Data,    // malformed or inconsistent input data
  Io,      // filesystem failures
  Internal // broken invariant inside the library
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::Usage, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::Data, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::Io, what}; }
inline Error internal_error(const std::string& what) { return {ErrorKind::Internal, what}; }

}  // namespace conflens
