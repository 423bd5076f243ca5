#include "cw/error.hpp"

namespace cw {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::EmptyData: return "empty_data";
    case ErrorKind::Schema: return "schema_error";
    case ErrorKind::Name: return "name_error";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::MultiGroup: return "multi_group";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::EmptyGroup: return "empty_group";
    case ErrorKind::Rank: return "rank_deficient";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Input: return "input_error";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Cancelled: return "cancelled";
  }
  return "unknown";
}

namespace {

std::string join_field_errors(const std::vector<FieldError>& errors) {
  std::string out = "validation failed";
  for (const auto& e : errors) {
    out += "; ";
    out += e.field;
    out += ": ";
    out += e.message;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<FieldError> errors)
    : Error(ErrorKind::Validation, join_field_errors(errors)), errors_(std::move(errors)) {}

}  // namespace cw
