// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rampforge {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data could not be read or violated its file contract.
class InputError : public Error {
 public:
  InputError(const std::string& message, std::size_t line = 0)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  /// 1-based line number of the offending record, 0 when not line-specific.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A caller-supplied argument violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Tagged model output that does not follow the trajectory grammar.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset)
      : Error("offset " + std::to_string(offset) + ": " + message), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Transport or provider failure talking to a chat endpoint or search service.
class ClientError : public Error {
 public:
  using Error::Error;
};

}  // namespace rampforge
