#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gzsl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs (files, datasets, configuration) violate a documented contract.
// The command-line front end maps these to exit status 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A training split contains a positive label for an unseen class.
class InductiveViolation : public ValidationError {
 public:
  InductiveViolation(std::size_t sample_index, const std::string& class_name)
      : ValidationError("inductive violation: training sample " + std::to_string(sample_index) +
                        " has a positive label for unseen class '" + class_name + "'"),
        sample_index_(sample_index) {}

  std::size_t sample_index() const { return sample_index_; }

 private:
  std::size_t sample_index_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateVector : public Error {
 public:
  using Error::Error;
};

class NoPositiveLabels : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& tensor)
      : Error("non-finite gradient in tensor '" + tensor + "'"), tensor_(tensor) {}

  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t epoch, std::size_t batch)
      : Error("non-finite total loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        batch_(batch) {}

  std::size_t batch_index() const { return batch_; }

 private:
  std::size_t batch_;
};

// AUROC needs at least one positive and one negative.
class UndefinedAuroc : public Error {
 public:
  using Error::Error;
};

}  // namespace gzsl
