#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cw {

enum class ErrorKind {
  Parse,
  EmptyData,
  Schema,
  Name,
  Validation,
  MultiGroup,
  Degenerate,
  EmptyGroup,
  Rank,
  Infeasible,
  Input,
  Conflict,
  NotFound,
  Cancelled,
};

const char* to_string(ErrorKind kind);

// Base error for everything the library reports. The kind drives HTTP status
// codes in the service and exit codes in the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& message)
      : Error(ErrorKind::Parse, "row " + std::to_string(row) + ": " + message), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

struct FieldError {
  std::string field;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldError> errors);

  const std::vector<FieldError>& errors() const noexcept { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

}  // namespace cw
