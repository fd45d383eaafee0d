// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunelab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or layer dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but mathematically unusable (zero vector, constant vector).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the values of an argument does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"), line_(line) {}

  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training diverged or could not proceed.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::int64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// A contrastive batch in which some anchor has no positive.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// Pruning would remove every weight of some tensor.
class DegenerateLayerError : public Error {
 public:
  using Error::Error;
};

/// Prediction logs or PIE sets that do not cover the same samples.
class CohortError : public Error {
 public:
  CohortError(const std::string& what, std::vector<std::uint64_t> offending_ids)
      : Error(what), ids_(std::move(offending_ids)) {}

  const std::vector<std::uint64_t>& offending_ids() const noexcept { return ids_; }

 private:
  std::vector<std::uint64_t> ids_;
};

/// The experiment protocol is violated, e.g. no dense baseline cohort.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpointError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace prunelab
