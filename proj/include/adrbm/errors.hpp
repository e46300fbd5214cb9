#pragma once

#include <stdexcept>
#include <string>

namespace adrbm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree. The message names the offending axis.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Exact enumeration requested on a model that is too large.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Non-finite parameters or statistics detected during training.
class NumericError : public Error {
public:
  using Error::Error;
};

class CheckpointError : public Error {
public:
  using Error::Error;
};

class CheckpointVersionError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class CheckpointDimensionError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

} // namespace adrbm
