#include "medtx/errors.hpp"

namespace medtx {

std::string_view error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io_error";
    case ErrorKind::Schema: return "schema_error";
    case ErrorKind::EmptyDataset: return "empty_dataset";
    case ErrorKind::Config: return "config_error";
    case ErrorKind::Shape: return "shape_error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Input: return "input_error";
    case ErrorKind::Authentication: return "authentication_failed";
    case ErrorKind::Authorization: return "unauthorized";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Extraction: return "extraction_error";
    case ErrorKind::Unclassifiable: return "unclassifiable";
  }
  return "error";
}

}  // namespace medtx
