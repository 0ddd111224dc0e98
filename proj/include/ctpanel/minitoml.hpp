#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctpanel/common.hpp"

namespace ctpanel::minitoml {

// Small TOML subset sufficient for the declarative config files: [dotted]
// section headers, string/number/boolean scalars, (nested) arrays and #
// comments. Values live in a flat map under their dotted path.
struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::string, double, bool, Array> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

class Table {
 public:
  static Table parse(const std::string& text, const std::string& origin = "<string>");
  static Table parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const;
  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;
  std::vector<std::vector<double>> matrix(const std::string& key) const;

  std::string str_or(const std::string& key, const std::string& fallback) const;
  double number_or(const std::string& key, double fallback) const;
  long integer_or(const std::string& key, long fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;

  /// Keys under `prefix.` with the prefix stripped (first path component).
  std::vector<std::string> children(const std::string& prefix) const;
  /// All full keys, sorted.
  std::vector<std::string> keys() const;

 private:
  const Value& at(const std::string& key) const;
  std::map<std::string, Value> values_;
  std::string origin_;
};

}  // namespace ctpanel::minitoml
