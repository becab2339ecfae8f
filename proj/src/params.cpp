#include "fairbench/params.hpp"

#include <charconv>
#include <sstream>

namespace fairbench {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw Error("parameter '" + key + "': cannot parse '" + text + "'");
  return value;
}

}  // namespace

Params Params::from_assignments(const std::vector<std::string>& assignments) {
  Params p;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("parameter '" + a + "' is not of the form key=value");
    p.set(a.substr(0, eq), a.substr(eq + 1));
  }
  return p;
}

double Params::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

long long Params::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<long long>(key, it->second);
}

std::uint64_t Params::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

bool Params::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw Error("parameter '" + key + "': expected a boolean, got '" + it->second + "'");
}

std::string Params::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::vector<std::string> Params::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void Params::require_known(const std::set<std::string>& allowed, const std::string& context) const {
  for (const auto& [key, value] : values_)
    if (!allowed.contains(key)) throw Error(context + ": unknown parameter '" + key + "'");
}

}  // namespace fairbench
