// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gva {

enum class ErrorKind {
  InvalidArgument,
  Config,
  Data,
  Dimension,
  UndefinedEntity,
  Parse,
  SchemaVersion,
  MissingCaption,
  Gateway,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base for every error the library throws. The kind lets callers (the CLI in
/// particular) map failures onto distinct exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by remote providers once retries are exhausted, or when a payload
/// cannot be decoded. `status` is the last HTTP status seen (0 when the
/// connection itself failed or the failure was a decode error).
class GatewayError : public Error {
 public:
  GatewayError(const std::string& message, int status, int attempts);

  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

}  // namespace gva
