#pragma once

#include "fairbench/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fairbench {

// Raw distribution files -> prepared CSV tables that the shipped schemas
// read. Each recipe documents its row filters next to the code.

/// german.data (space separated, no header). Adds `sex` derived from
/// personal_status.
RawTable german_recipe(std::istream& raw);

/// adult.data + adult.test. Keeps every row ('?' stays a category) and
/// strips the trailing '.' from test-set labels.
RawTable adult_recipe(std::istream& train, std::istream& test);

/// compas-scores-two-years.csv, two-year cohort filters, two race groups.
/// Empty charge descriptions become the level "(none)".
RawTable compas_recipe(std::istream& raw);

/// bank-additional-full.csv (';' separated).
RawTable bank_recipe(std::istream& raw);

/// MEPS full-year consolidated file (h181.csv), panel 21.
RawTable meps_recipe(std::istream& raw);

struct Recipe {
  std::string name;
  /// Names of the expected input files, in order.
  std::vector<std::string> inputs;
};

const std::vector<Recipe>& recipes();

/// Reads the inputs, applies the named recipe and writes the CSV. Returns
/// the number of rows written.
std::size_t run_recipe(const std::string& name, const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& output);

}  // namespace fairbench
