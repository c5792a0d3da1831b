#pragma once

#include <stdexcept>
#include <string>

namespace fldp {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dataset ingestion / partitioning failures (missing file, bad cell, ...).
struct DataError : Error {
  using Error::Error;
};

/// Incompatible parameter vectors, dimension mismatches.
struct ShapeError : Error {
  using Error::Error;
};

/// Out-of-domain parameter for a mechanism or accounting operation.
struct InvalidArgument : Error {
  using Error::Error;
};

/// Configuration validation failure; carries the offending field path.
struct ConfigError : Error {
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_path(std::move(field)) {}
  std::string field_path;
};

/// Stepping a privacy filter that has already HALTed.
struct FilterHalted : Error {
  using Error::Error;
};

}  // namespace fldp
