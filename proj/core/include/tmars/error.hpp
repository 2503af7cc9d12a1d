#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tmars {

/// Broad failure classes; the CLI maps these onto stable exit codes.
enum class ErrorKind {
  validation,  // bad arguments, violated preconditions, refused overwrites
  parse,       // malformed input files (manifests, score tables, CSV, ...)
  io,          // filesystem failures on paths that should be usable
  provider,    // embedding/detector provider failures
  aggregate,   // collected per-sample failures from a batch run
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Per-sample failures gathered from a manifest-wide operation. No partial
/// outputs exist when this is thrown.
class AggregateError : public Error {
 public:
  AggregateError(const std::string& message, std::vector<std::string> sample_ids);

  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }

 private:
  std::vector<std::string> sample_ids_;
};

}  // namespace tmars
