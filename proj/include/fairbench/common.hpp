#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fairbench {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Group coding: 0 = unprivileged, 1 = privileged.
enum class Group : int { Unprivileged = 0, Privileged = 1 };

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV, schema, YAML, cache files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A metric whose denominator is empty or zero.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a fitting routine.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Warnings go through a process-wide sink so tests and the batch runner can
// capture them. The default sink writes to stderr.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

/// Collects warnings for the lifetime of the object, restoring the previous
/// sink on destruction. Not thread-safe with respect to other captures.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of SHA-256 as an integer, for seed derivation.
std::uint64_t hash64(std::string_view data);

}  // namespace fairbench
