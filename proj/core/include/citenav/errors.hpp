#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace citenav {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a library call (k < 1, bad budget, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

/// Persisted index is unreadable or was built with a different analyzer.
class IndexFormatError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The external scorer process died, timed out, or refused the connection.
/// Carries the pair ids of the batch that could not be scored.
class ScorerUnavailableError : public Error {
 public:
  ScorerUnavailableError(const std::string& what, std::vector<std::string> failed_batch)
      : Error(what), failed_batch_(std::move(failed_batch)) {}

  const std::vector<std::string>& failed_batch() const noexcept { return failed_batch_; }

 private:
  std::vector<std::string> failed_batch_;
};

/// A scorer replied with something that violates the wire protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; the message is prefixed with the iteration index.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& what, int iteration) : Error(what), iteration_(iteration) {}

  /// -1 for the initial retrieval, otherwise the navigation/ranking iteration.
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace citenav
