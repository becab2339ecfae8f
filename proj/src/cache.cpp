#include "fairbench/cache.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace fairbench {
namespace {

constexpr std::string_view kMagic = "FPDSTXT\n";
constexpr int kVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, ptr);
}

double parse_hexfloat(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("fpds: malformed real '" + std::string(s) + "'");
  return v;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

std::string unquote(const std::string& s) {
  try {
    return nlohmann::json::parse(s).get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("fpds: malformed string field");
  }
}

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string("fpds: truncated before ") + what);
  return line;
}

std::string expect_field(std::istream& in, const std::string& key) {
  auto line = next_line(in, key.c_str());
  if (line.rfind(key + " ", 0) != 0) throw DataError("fpds: expected '" + key + "' line");
  return line.substr(key.size() + 1);
}

template <typename Vec, typename Parse>
void read_values(const std::string& text, Vec& out, Index n, Parse parse) {
  std::istringstream is(text);
  std::string tok;
  Index i = 0;
  while (is >> tok) {
    if (i >= n) throw DataError("fpds: too many values in column");
    out[i++] = parse(tok);
  }
  if (i != n) throw DataError("fpds: too few values in column");
}

}  // namespace

CacheKey CacheKey::make(const std::string& dataset, const std::string& method,
                        const std::string& params, std::uint64_t seed) {
  nlohmann::json j = {{"dataset", dataset}, {"method", method}, {"params", params}, {"seed", seed}};
  return {sha256_hex(j.dump())};
}

void write_fpds(std::ostream& out, const TabularDataset& ds) {
  ds.validate();
  out << kMagic;
  out << "version " << kVersion << '\n';
  out << "name " << quoted(ds.name) << '\n';
  out << "provenance " << quoted(ds.provenance) << '\n';
  out << "consistency_scaling " << (ds.consistency_scaling == ConsistencyScaling::ZScore ? "zscore" : "none")
      << '\n';
  out << "rows " << ds.size() << '\n';
  out << "cols " << ds.dims() << '\n';
  for (const auto& c : ds.columns) {
    out << "column " << (c.kind == FeatureKind::Numeric ? "numeric" : "onehot") << ' '
        << nlohmann::json::array({c.name, c.source, c.level}).dump() << '\n';
  }
  out << "labels";
  for (Index i = 0; i < ds.size(); ++i) out << ' ' << ds.labels[i];
  out << "\nsensitive";
  for (Index i = 0; i < ds.size(); ++i) out << ' ' << ds.sensitive[i];
  out << "\nweights";
  for (Index i = 0; i < ds.size(); ++i) out << ' ' << hexfloat(ds.weights[i]);
  out << '\n';
  for (Index j = 0; j < ds.dims(); ++j) {
    out << "feature";
    for (Index i = 0; i < ds.size(); ++i) out << ' ' << hexfloat(ds.features(i, j));
    out << '\n';
  }
  out << "end\n";
}

TabularDataset read_fpds(std::istream& in) {
  std::string magic(kMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic)
    throw DataError("fpds: bad magic header");
  const int version = std::stoi(expect_field(in, "version"));
  if (version != kVersion) throw DataError("fpds: unsupported version " + std::to_string(version));

  TabularDataset ds;
  ds.name = unquote(expect_field(in, "name"));
  ds.provenance = unquote(expect_field(in, "provenance"));
  const auto scaling = expect_field(in, "consistency_scaling");
  ds.consistency_scaling = scaling == "none" ? ConsistencyScaling::None : ConsistencyScaling::ZScore;
  const Index n = std::stoll(expect_field(in, "rows"));
  const Index d = std::stoll(expect_field(in, "cols"));
  if (n < 1 || d < 1) throw DataError("fpds: invalid shape");
  for (Index j = 0; j < d; ++j) {
    const auto line = expect_field(in, "column");
    const auto space = line.find(' ');
    if (space == std::string::npos) throw DataError("fpds: malformed column line");
    FeatureColumn col;
    col.kind = line.substr(0, space) == "numeric" ? FeatureKind::Numeric : FeatureKind::OneHot;
    nlohmann::json parts;
    try {
      parts = nlohmann::json::parse(line.substr(space + 1));
    } catch (const nlohmann::json::exception&) {
      throw DataError("fpds: malformed column line");
    }
    if (!parts.is_array() || parts.size() != 3) throw DataError("fpds: malformed column line");
    col.name = parts[0].get<std::string>();
    col.source = parts[1].get<std::string>();
    col.level = parts[2].get<std::string>();
    ds.columns.push_back(std::move(col));
  }
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.weights.resize(n);
  ds.features.resize(n, d);
  auto parse_int = [](const std::string& t) { return std::stoi(t); };
  read_values(expect_field(in, "labels"), ds.labels, n, parse_int);
  read_values(expect_field(in, "sensitive"), ds.sensitive, n, parse_int);
  read_values(expect_field(in, "weights"), ds.weights, n, parse_hexfloat);
  for (Index j = 0; j < d; ++j) {
    auto col = ds.features.col(j);
    read_values(expect_field(in, "feature"), col, n, parse_hexfloat);
  }
  if (next_line(in, "end") != "end") throw DataError("fpds: missing end marker");
  ds.validate();
  return ds;
}

DatasetCache::DatasetCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path DatasetCache::entry_path(const CacheKey& key) const {
  return root_ / (key.hex + ".fpds");
}

bool DatasetCache::contains(const CacheKey& key) const {
  return std::filesystem::exists(entry_path(key));
}

std::string DatasetCache::store(const TabularDataset& ds, const CacheKey& key) const {
  static std::atomic<std::uint64_t> counter{0};
  const auto final_path = entry_path(key);
  std::ostringstream tag;
  tag << std::this_thread::get_id() << '.' << counter.fetch_add(1);
  const auto tmp = root_ / (key.hex + ".tmp." + std::to_string(hash64(tag.str())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cache: cannot write '" + tmp.string() + "'");
    write_fpds(out, ds);
    out.flush();
    if (!out) throw Error("cache: write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cache: cannot publish '" + final_path.string() + "': " + ec.message());
  }
  return key.hex;
}

std::optional<TabularDataset> DatasetCache::load(const CacheKey& key) const {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  return read_fpds(in);
}

}  // namespace fairbench
