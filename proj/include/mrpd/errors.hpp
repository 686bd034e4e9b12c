#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mrpd {

/// Tensor or layer shapes that do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside its documented domain (bad label, rate, empty group, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API used out of order, e.g. backward on a non-scalar or a step without gradients.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed container or checkpoint bytes.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset, std::string record = {})
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) +
                           (record.empty() ? std::string{} : ", record " + record) + ")"),
        offset_(offset),
        record_(std::move(record)) {}

  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& record() const noexcept { return record_; }

 private:
  std::uint64_t offset_;
  std::string record_;
};

/// A recording does not hold enough frames after its start annotation.
class TruncatedWindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergedTrainingError : public std::runtime_error {
 public:
  DivergedTrainingError(int epoch, int batch)
      : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace mrpd
