#include "fairbench/dataset.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

namespace fairbench {
namespace {

std::string scalar(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) throw DataError("schema: '" + where + "' must be a scalar");
  return node.as<std::string>();
}

std::vector<std::string> scalar_list(const YAML::Node& node, const std::string& where) {
  std::vector<std::string> out;
  if (!node) return out;
  if (node.IsScalar()) return {node.as<std::string>()};
  if (!node.IsSequence()) throw DataError("schema: '" + where + "' must be a list");
  for (std::size_t i = 0; i < node.size(); ++i)
    out.push_back(scalar(node[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

void reject_unknown(const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const auto key = it->first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw DataError("schema: unknown key '" + where + key + "'");
  }
}

BinarizationRule parse_rule(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) throw DataError("schema: '" + where + "' must be a mapping");
  reject_unknown(node, {"column", "op", "value", "then", "else", "output"}, where + ".");
  BinarizationRule rule;
  rule.column = scalar(node["column"], where + ".column");
  rule.op = parse_compare_op(node["op"] ? scalar(node["op"], where + ".op") : "==");
  rule.operands = scalar_list(node["value"], where + ".value");
  if (rule.operands.empty()) throw DataError("schema: '" + where + ".value' is required");
  if (node["then"]) rule.if_true = scalar(node["then"], where + ".then");
  if (node["else"]) rule.if_false = scalar(node["else"], where + ".else");
  if (node["output"]) rule.output_column = scalar(node["output"], where + ".output");
  return rule;
}

}  // namespace

SchemaFile parse_schema_yaml(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw DataError(std::string("schema: malformed YAML: ") + e.what());
  }
  if (!root.IsMap()) throw DataError("schema: top level must be a mapping");
  reject_unknown(root,
                 {"name", "label", "favorable", "protected", "privileged", "sensitive_attributes",
                  "default_attribute", "numeric", "categorical", "drop", "binarize",
                  "missing_values", "protected_as_feature", "consistency_scaling", "data"},
                 "");

  SchemaFile file;
  auto& s = file.base;
  s.name = scalar(root["name"], "name");
  s.label_column = scalar(root["label"], "label");
  s.favorable_value = scalar(root["favorable"], "favorable");
  s.numeric_columns = scalar_list(root["numeric"], "numeric");
  s.categorical_columns = scalar_list(root["categorical"], "categorical");
  s.drop_columns = scalar_list(root["drop"], "drop");
  s.missing_markers = scalar_list(root["missing_values"], "missing_values");
  if (root["protected_as_feature"]) s.protected_as_feature = root["protected_as_feature"].as<bool>();
  if (root["consistency_scaling"]) {
    const auto v = scalar(root["consistency_scaling"], "consistency_scaling");
    if (v == "zscore") s.consistency_scaling = ConsistencyScaling::ZScore;
    else if (v == "none") s.consistency_scaling = ConsistencyScaling::None;
    else throw DataError("schema: consistency_scaling must be 'zscore' or 'none'");
  }
  if (root["data"]) s.data_path = scalar(root["data"], "data");
  if (const auto rules = root["binarize"]) {
    if (!rules.IsSequence()) throw DataError("schema: 'binarize' must be a list");
    for (std::size_t i = 0; i < rules.size(); ++i)
      s.binarization.push_back(parse_rule(rules[i], "binarize[" + std::to_string(i) + "]"));
  }

  if (const auto attrs = root["sensitive_attributes"]) {
    if (!attrs.IsMap()) throw DataError("schema: 'sensitive_attributes' must be a mapping");
    for (auto it = attrs.begin(); it != attrs.end(); ++it) {
      const auto key = it->first.as<std::string>();
      const auto& node = it->second;
      const std::string where = "sensitive_attributes." + key;
      if (!node.IsMap()) throw DataError("schema: '" + where + "' must be a mapping");
      reject_unknown(node, {"column", "privileged"}, where + ".");
      SchemaFile::ProtectedOption opt;
      opt.column = node["column"] ? scalar(node["column"], where + ".column") : key;
      const auto priv = scalar_list(node["privileged"], where + ".privileged");
      if (priv.empty()) throw DataError("schema: '" + where + ".privileged' is required");
      opt.privileged_values = {priv.begin(), priv.end()};
      file.attributes.emplace(key, std::move(opt));
    }
  }
  if (root["protected"]) {
    const auto column = scalar(root["protected"], "protected");
    const auto priv = scalar_list(root["privileged"], "privileged");
    if (priv.empty()) throw DataError("schema: 'privileged' is required with 'protected'");
    file.attributes.emplace(column, SchemaFile::ProtectedOption{column, {priv.begin(), priv.end()}});
    if (!root["default_attribute"]) file.default_attribute = column;
  }
  if (file.attributes.empty())
    throw DataError("schema: one of 'protected' or 'sensitive_attributes' is required");
  if (root["default_attribute"]) file.default_attribute = scalar(root["default_attribute"], "default_attribute");
  if (file.default_attribute.empty()) file.default_attribute = file.attributes.begin()->first;
  if (!file.has_attribute(file.default_attribute))
    throw DataError("schema: default_attribute '" + file.default_attribute + "' is not declared");
  // Resolving validates the column sets for every declared attribute.
  for (const auto& [key, opt] : file.attributes) file.resolve(key);
  return file;
}

SchemaFile load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  SchemaFile file;
  try {
    file = parse_schema_yaml(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!file.base.data_path.empty() && file.base.data_path.is_relative())
    file.base.data_path = path.parent_path() / file.base.data_path;
  return file;
}

}  // namespace fairbench
