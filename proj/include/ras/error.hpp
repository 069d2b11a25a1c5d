#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ras {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value violated a documented precondition or invariant.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Vector dimensions do not agree.
class DimensionMismatch : public Error {
public:
  using Error::Error;
};

/// Malformed input record; carries a 1-based line number when known.
class FormatError : public Error {
public:
  FormatError(const std::string &what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// An embedding provider could not embed the given text.
class EmbeddingError : public Error {
public:
  EmbeddingError(const std::string &what, std::string text)
      : Error(what), text_(std::move(text)) {}
  const std::string &text() const noexcept { return text_; }

private:
  std::string text_;
};

} // namespace ras
