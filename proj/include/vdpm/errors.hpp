#pragma once

#include <stdexcept>
#include <string>

namespace vdpm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: files, labels, geometry, dataset sizes. CLI exit code 3.
struct DataError : Error {
  using Error::Error;
};

struct ParseError : DataError {
  int line_no;
  ParseError(const std::string& msg, int line)
      : DataError("parse error at line " + std::to_string(line) + ": " + msg), line_no(line) {}
};

struct FormatError : DataError {
  using DataError::DataError;
};

struct LayoutError : DataError {
  using DataError::DataError;
};

struct ImageTooSmall : DataError {
  using DataError::DataError;
};

struct EmptyAfterClip : DataError {
  using DataError::DataError;
};

struct DataTooSmall : DataError {
  using DataError::DataError;
};

struct EmptyGroundTruth : DataError {
  using DataError::DataError;
};

struct SingularBlock : DataError {
  using DataError::DataError;
};

// Optimization failures. CLI exit code 4.
struct SolverError : Error {
  using Error::Error;
};

struct DeformationError : SolverError {
  using SolverError::SolverError;
};

}  // namespace vdpm
