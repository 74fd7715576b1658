#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moodminer {

// Data and schema problems -> CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric failures during fitting/training -> CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct UnknownVerdict : ParseError {
  using ParseError::ParseError;
};
struct UnparseableTimestamp : ParseError {
  using ParseError::ParseError;
};
struct MissingColumn : DataError {
  using DataError::DataError;
};
struct EmptyLog : DataError {
  using DataError::DataError;
};
struct ExcludedStudent : DataError {
  using DataError::DataError;
};
struct ConfigInvalid : DataError {
  using DataError::DataError;
};
struct SchemaMismatch : DataError {
  using DataError::DataError;
};
struct CorruptFile : DataError {
  using DataError::DataError;
};
struct MissingArtifact : DataError {
  using DataError::DataError;
};
struct NotFiveStates : DataError {
  using DataError::DataError;
};
struct InsufficientData : DataError {
  using DataError::DataError;
};
struct TooFewSamples : DataError {
  using DataError::DataError;
};
struct SingleClassTrainingSet : DataError {
  using DataError::DataError;
};
struct DimensionMismatch : DataError {
  using DataError::DataError;
};
struct ShapeMismatch : DataError {
  using DataError::DataError;
};

struct DegenerateState : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteLoss : NumericError {
  using NumericError::NumericError;
};

}  // namespace moodminer
