// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_ERRORS_HPP
#define CUNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cunet {

// Base class for every error thrown by the library.
struct CunetError : std::runtime_error {
  explicit CunetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotFoundError : CunetError {
  using CunetError::CunetError;
};
struct FormatError : CunetError {
  using CunetError::CunetError;
};
struct InputTooShortError : CunetError {
  using CunetError::CunetError;
};
struct ConfigError : CunetError {
  using CunetError::CunetError;
};
struct DegenerateInputError : CunetError {
  using CunetError::CunetError;
};
struct ShapeError : CunetError {
  using CunetError::CunetError;
};
struct DomainError : CunetError {
  using CunetError::CunetError;
};
struct IndexError : CunetError {
  using CunetError::CunetError;
};
struct StateError : CunetError {
  using CunetError::CunetError;
};
struct InputError : CunetError {
  using CunetError::CunetError;
};
struct DataError : CunetError {
  using CunetError::CunetError;
};
struct IoError : CunetError {
  using CunetError::CunetError;
};
struct IncompatibleCheckpointError : CunetError {
  using CunetError::CunetError;
};
struct UndefinedMetricError : CunetError {
  using CunetError::CunetError;
};
struct UndefinedCorrelationError : CunetError {
  using CunetError::CunetError;
};

}  // namespace cunet

#endif  // CUNET_ERRORS_HPP
