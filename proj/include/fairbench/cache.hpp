#pragma once

#include "fairbench/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace fairbench {

/// Content hash of (dataset, method, method parameters, seed).
struct CacheKey {
  std::string hex;

  /// `params` must already be in canonical form (sorted keys).
  static CacheKey make(const std::string& dataset, const std::string& method,
                       const std::string& params, std::uint64_t seed);
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

/// Serialized form: an 8-byte magic ("FPDSTXT\n"), a version line, then one
/// line per column. Reals are written as hex floats so reloads are exact.
void write_fpds(std::ostream& out, const TabularDataset& ds);
TabularDataset read_fpds(std::istream& in);

/// Directory of `<hash>.fpds` files. Stores go through a temporary file and
/// a rename, so readers never observe a partial entry.
class DatasetCache {
 public:
  explicit DatasetCache(std::filesystem::path root);

  std::filesystem::path entry_path(const CacheKey& key) const;
  bool contains(const CacheKey& key) const;
  /// Returns the cache id (the key's hex digest).
  std::string store(const TabularDataset& ds, const CacheKey& key) const;
  /// std::nullopt on a miss.
  std::optional<TabularDataset> load(const CacheKey& key) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace fairbench
