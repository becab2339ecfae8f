#pragma once

#include "fairbench/common.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fairbench {

/// Method or model hyperparameters as given on the command line or in a job
/// file. Values stay textual until a consumer reads them with a type.
class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  /// Parses "key=value"; throws Error on a missing '='.
  static Params from_assignments(const std::vector<std::string>& assignments);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  bool empty() const { return values_.empty(); }
  const std::map<std::string, std::string>& values() const { return values_; }

  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Comma-separated list; empty entries are dropped.
  std::vector<std::string> get_list(const std::string& key) const;

  /// Throws Error naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed, const std::string& context) const;

  friend bool operator==(const Params&, const Params&) = default;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fairbench
