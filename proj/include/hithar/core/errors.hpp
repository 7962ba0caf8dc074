#pragma once

#include <stdexcept>
#include <string>

namespace hithar {

// Exception hierarchy. The CLI maps each type to a machine-readable error kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string tensor = {})
      : Error(what), tensor_(std::move(tensor)) {}
  const char* kind() const noexcept override { return "numeric"; }
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

class MetricsError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "metrics"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace hithar
