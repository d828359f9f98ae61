#pragma once

#include <stdexcept>
#include <string>

namespace scagiqa {

/// Tensor shape or argument contract violated.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (manifests, rasters, tensor files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A correlation metric is undefined for the given input (n < 2, zero variance).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad command-line usage or configuration keys.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure inside an embedding or description provider.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, bool retriable, std::string endpoint = {}, int status = 0)
      : std::runtime_error(what), retriable_(retriable), endpoint_(std::move(endpoint)), status_(status) {}

  bool retriable() const noexcept { return retriable_; }
  const std::string& endpoint() const noexcept { return endpoint_; }
  int status() const noexcept { return status_; }

 private:
  bool retriable_;
  std::string endpoint_;
  int status_;
};

}  // namespace scagiqa
