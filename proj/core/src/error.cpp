// SPDX-License-Identifier: Apache-2.0
#include "gva/error.hpp"

namespace gva {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
      return "invalid argument";
    case ErrorKind::Config:
      return "configuration error";
    case ErrorKind::Data:
      return "data error";
    case ErrorKind::Dimension:
      return "dimension error";
    case ErrorKind::UndefinedEntity:
      return "undefined entity";
    case ErrorKind::Parse:
      return "parse error";
    case ErrorKind::SchemaVersion:
      return "schema version error";
    case ErrorKind::MissingCaption:
      return "missing caption";
    case ErrorKind::Gateway:
      return "gateway error";
    case ErrorKind::Io:
      return "i/o error";
  }
  return "unknown error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

GatewayError::GatewayError(const std::string& message, int status, int attempts)
    : Error(ErrorKind::Gateway, message), status_(status), attempts_(attempts) {}

}  // namespace gva
