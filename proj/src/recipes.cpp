#include "fairbench/recipes.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <optional>

namespace fairbench {
namespace {

std::optional<double> number(const std::string& cell) {
  std::string_view s = cell;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t column(const RawTable& t, const std::string& name) {
  const auto j = t.column_index(name);
  if (j < 0) throw DataError("recipe: input lacks column '" + name + "'");
  return static_cast<std::size_t>(j);
}

/// Keeps `columns` (renamed per `names` when given) of the rows passing `keep`.
RawTable project(const RawTable& in, const std::vector<std::string>& columns,
                 const std::function<bool(const std::vector<std::string>&)>& keep,
                 const std::vector<std::string>& names = {}) {
  std::vector<std::size_t> idx;
  for (const auto& c : columns) idx.push_back(column(in, c));
  RawTable out;
  out.columns = names.empty() ? columns : names;
  for (const auto& row : in.rows) {
    if (!keep(row)) continue;
    std::vector<std::string> r;
    for (auto j : idx) r.push_back(row[j]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

const std::vector<std::string> kGermanColumns = {
    "status",          "month",         "credit_history",    "purpose",   "credit_amount",
    "savings",         "employment",    "investment_as_income_percentage", "personal_status",
    "other_debtors",   "residence_since", "property",        "age",       "installment_plans",
    "housing",         "number_of_credits", "skill_level",   "people_liable_for", "telephone",
    "foreign_worker",  "credit"};

const std::vector<std::string> kAdultColumns = {
    "age",          "workclass",    "fnlwgt",       "education",    "education-num",
    "marital-status", "occupation", "relationship", "race",         "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country", "income"};

}  // namespace

RawTable german_recipe(std::istream& raw) {
  CsvOptions opts;
  opts.delimiter = ' ';
  opts.trim = true;
  RawTable t = read_csv_headerless(raw, kGermanColumns, opts);
  // A91 divorced/separated male, A93 single male, A94 married/widowed male;
  // A92 and A95 are female.
  const auto ps = column(t, "personal_status");
  std::vector<std::string> sex;
  for (const auto& row : t.rows) {
    const auto& v = row[ps];
    if (v == "A91" || v == "A93" || v == "A94") sex.emplace_back("male");
    else if (v == "A92" || v == "A95") sex.emplace_back("female");
    else throw DataError("german recipe: unknown personal_status '" + v + "'");
  }
  t.add_column("sex", std::move(sex));
  return t;
}

RawTable adult_recipe(std::istream& train, std::istream& test) {
  CsvOptions opts;
  opts.trim = true;
  opts.comment_prefix = "|";
  RawTable t = read_csv_headerless(train, kAdultColumns, opts);
  RawTable u = read_csv_headerless(test, kAdultColumns, opts);
  t.rows.insert(t.rows.end(), std::make_move_iterator(u.rows.begin()), std::make_move_iterator(u.rows.end()));
  const auto inc = column(t, "income");
  for (auto& row : t.rows) {
    auto& v = row[inc];
    if (!v.empty() && v.back() == '.') v.pop_back();
    if (v != ">50K" && v != "<=50K") throw DataError("adult recipe: unexpected income label '" + v + "'");
  }
  return t;
}

RawTable compas_recipe(std::istream& raw) {
  RawTable t = read_csv(raw);
  const auto days = column(t, "days_b_screening_arrest");
  const auto recid = column(t, "is_recid");
  const auto degree = column(t, "c_charge_degree");
  const auto score = column(t, "score_text");
  const auto race = column(t, "race");
  const auto keep = [&](const std::vector<std::string>& row) {
    const auto d = number(row[days]);
    if (!d || *d < -30 || *d > 30) return false;
    const auto r = number(row[recid]);
    if (!r || *r == -1) return false;
    if (row[degree] == "O" || row[score] == "N/A") return false;
    return row[race] == "African-American" || row[race] == "Caucasian";
  };
  RawTable out = project(t,
                         {"sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count", "juv_other_count",
                          "priors_count", "c_charge_degree", "c_charge_desc", "two_year_recid"},
                         keep);
  // A few records have no charge description; keep them as their own level.
  const auto desc = column(out, "c_charge_desc");
  for (auto& row : out.rows)
    if (row[desc].empty()) row[desc] = "(none)";
  return out;
}

RawTable bank_recipe(std::istream& raw) {
  CsvOptions opts;
  opts.delimiter = ';';
  opts.trim = true;
  return read_csv(raw, opts);
}

RawTable meps_recipe(std::istream& raw) {
  RawTable t = read_csv(raw);
  // Non-Hispanic white respondents form the privileged group.
  const auto hisp = column(t, "HISPANX");
  const auto racev = column(t, "RACEV2X");
  std::vector<std::string> race;
  for (const auto& row : t.rows)
    race.emplace_back(number(row[hisp]) == 2.0 && number(row[racev]) == 1.0 ? "White" : "Non-White");
  t.add_column("RACE", std::move(race));

  std::vector<std::string> util;
  const std::vector<std::size_t> parts = {column(t, "OBTOTV16"), column(t, "OPTOTV16"), column(t, "ERTOT16"),
                                          column(t, "IPNGTD16"), column(t, "HHTOTD16")};
  for (const auto& row : t.rows) {
    double sum = 0.0;
    for (auto j : parts) {
      const auto v = number(row[j]);
      if (!v) throw DataError("meps recipe: non-numeric utilization component '" + row[j] + "'");
      sum += *v;
    }
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, sum);
    util.emplace_back(buf, end);
  }
  t.add_column("UTILIZATION", std::move(util));

  const std::vector<std::string> source = {
      "REGION53", "AGE53X",   "SEX",      "RACE",     "MARRY53X", "FTSTU53X", "ACTDTY53", "HONRDC53",
      "RTHLTH53", "MNHLTH53", "HIBPDX",   "CHDDX",    "ANGIDX",   "MIDX",     "OHRTDX",   "STRKDX",
      "EMPHDX",   "CHBRON53", "CHOLDX",   "CANCERDX", "DIABDX",   "JTPAIN53", "ARTHDX",   "ARTHTYPE",
      "ASTHDX",   "ADHDADDX", "PREGNT53", "WLKLIM53", "ACTLIM53", "SOCLIM53", "COGLIM53", "DFHEAR42",
      "DFSEE42",  "ADSMOK42", "PCS42",    "MCS42",    "K6SUM42",  "PHQ242",   "EMPST53",  "POVCAT16",
      "INSCOV16", "UTILIZATION", "PERWT16F"};
  const std::vector<std::string> renamed = {
      "REGION",   "AGE",      "SEX",      "RACE",     "MARRY",    "FTSTU",    "ACTDTY",   "HONRDC",
      "RTHLTH",   "MNHLTH",   "HIBPDX",   "CHDDX",    "ANGIDX",   "MIDX",     "OHRTDX",   "STRKDX",
      "EMPHDX",   "CHBRON",   "CHOLDX",   "CANCERDX", "DIABDX",   "JTPAIN",   "ARTHDX",   "ARTHTYPE",
      "ASTHDX",   "ADHDADDX", "PREGNT",   "WLKLIM",   "ACTLIM",   "SOCLIM",   "COGLIM",   "DFHEAR42",
      "DFSEE42",  "ADSMOK42", "PCS42",    "MCS42",    "K6SUM42",  "PHQ242",   "EMPST",    "POVCAT",
      "INSCOV",   "UTILIZATION", "PERWT16F"};
  // Negative codes mark inapplicable/refused answers. Region, age, marital
  // status and asthma diagnosis must be valid; the other categorical
  // answers may be "inapplicable" (-1) but nothing lower.
  const auto panel = column(t, "PANEL");
  const std::vector<std::size_t> strict = {column(t, "REGION53"), column(t, "AGE53X"), column(t, "MARRY53X"),
                                           column(t, "ASTHDX")};
  std::vector<std::size_t> lenient;
  for (const char* c : {"FTSTU53X", "ACTDTY53", "HONRDC53", "RTHLTH53", "MNHLTH53", "HIBPDX", "CHDDX", "ANGIDX",
                        "EDUCYR", "HIDEG", "MIDX", "OHRTDX", "STRKDX", "EMPHDX", "CHBRON53", "CHOLDX", "CANCERDX",
                        "DIABDX", "JTPAIN53", "ARTHDX", "ARTHTYPE", "ASTHDX", "ADHDADDX", "PREGNT53", "WLKLIM53",
                        "ACTLIM53", "SOCLIM53", "COGLIM53", "DFHEAR42", "DFSEE42", "ADSMOK42", "PHQ242",
                        "EMPST53", "POVCAT16", "INSCOV16"})
    lenient.push_back(column(t, c));
  const auto keep = [&](const std::vector<std::string>& row) {
    if (number(row[panel]) != 21.0) return false;
    for (auto j : strict) {
      const auto v = number(row[j]);
      if (!v || *v < 0) return false;
    }
    for (auto j : lenient) {
      const auto v = number(row[j]);
      if (!v || *v < -1) return false;
    }
    return true;
  };
  return project(t, source, keep, renamed);
}

const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> all = {
      {"german", {"german.data"}},
      {"adult", {"adult.data", "adult.test"}},
      {"compas", {"compas-scores-two-years.csv"}},
      {"bank", {"bank-additional-full.csv"}},
      {"meps", {"h181.csv"}},
  };
  return all;
}

std::size_t run_recipe(const std::string& name, const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& output) {
  const auto it = std::find_if(recipes().begin(), recipes().end(), [&](const Recipe& r) { return r.name == name; });
  if (it == recipes().end()) throw Error("unknown recipe '" + name + "'");
  if (inputs.size() != it->inputs.size())
    throw Error("recipe '" + name + "' expects " + std::to_string(it->inputs.size()) + " input file(s)");
  std::vector<std::ifstream> streams;
  for (const auto& p : inputs) {
    streams.emplace_back(p, std::ios::binary);
    if (!streams.back()) throw DataError("cannot open '" + p.string() + "'");
  }
  RawTable table;
  if (name == "german") table = german_recipe(streams[0]);
  else if (name == "adult") table = adult_recipe(streams[0], streams[1]);
  else if (name == "compas") table = compas_recipe(streams[0]);
  else if (name == "bank") table = bank_recipe(streams[0]);
  else table = meps_recipe(streams[0]);

  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + output.string() + "'");
  write_csv(out, table);
  return table.size();
}

}  // namespace fairbench
