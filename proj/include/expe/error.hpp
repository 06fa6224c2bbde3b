#pragma once

#include <stdexcept>
#include <string>

namespace expe {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the subclasses let tests and the CLI tell the
// failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when an encoding with a fixed table is asked for a position past its
// last row (learned-absolute beyond max_len).
class LengthExceededError : public Error {
 public:
  using Error::Error;
};

class UnsupportedSchemeError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class CheckpointCorruptError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ReportMergeError : public Error {
 public:
  using Error::Error;
};

}  // namespace expe
