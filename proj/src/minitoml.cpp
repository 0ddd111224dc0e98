#include "ctpanel/minitoml.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ctpanel::minitoml {

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  const std::string& origin;
  int line = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}:{}: {}", origin, line, what));
  }
  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    const char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  void skip_ws_and_comments(bool stop_at_newline) {
    while (!done()) {
      const char c = peek();
      if (c == '#') {
        while (!done() && peek() != '\n') ++pos;
      } else if (c == '\n') {
        if (stop_at_newline) return;
        take();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos;
      } else {
        return;
      }
    }
  }
};

std::string parse_bare_key(Cursor& c) {
  std::string key;
  while (!c.done()) {
    const char ch = c.peek();
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
        ch == '.') {
      key.push_back(c.take());
    } else {
      break;
    }
  }
  if (key.empty()) c.fail("expected a key");
  return key;
}

std::string parse_string(Cursor& c) {
  if (c.take() != '"') c.fail("expected '\"'");
  std::string out;
  while (!c.done()) {
    const char ch = c.take();
    if (ch == '"') return out;
    if (ch == '\\') {
      if (c.done()) break;
      const char esc = c.take();
      switch (esc) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: c.fail(fmt::format("unsupported escape '\\{}'", esc));
      }
    } else if (ch == '\n') {
      c.fail("unterminated string");
    } else {
      out.push_back(ch);
    }
  }
  c.fail("unterminated string");
}

Value parse_value(Cursor& c);

Value parse_array(Cursor& c) {
  if (c.take() != '[') c.fail("expected '['");
  Array items;
  for (;;) {
    c.skip_ws_and_comments(false);
    if (c.done()) c.fail("unterminated array");
    if (c.peek() == ']') {
      c.take();
      break;
    }
    items.push_back(parse_value(c));
    c.skip_ws_and_comments(false);
    if (c.done()) c.fail("unterminated array");
    if (c.peek() == ',') {
      c.take();
    } else if (c.peek() != ']') {
      c.fail("expected ',' or ']' in array");
    }
  }
  return Value{std::move(items)};
}

Value parse_value(Cursor& c) {
  c.skip_ws_and_comments(false);
  if (c.done()) c.fail("expected a value");
  const char ch = c.peek();
  if (ch == '"') return Value{parse_string(c)};
  if (ch == '[') return parse_array(c);
  std::string token;
  while (!c.done()) {
    const char t = c.peek();
    if (t == '\n' || t == '#' || t == ',' || t == ']' || t == ' ' || t == '\t' ||
        t == '\r')
      break;
    token.push_back(c.take());
  }
  if (token == "true") return Value{true};
  if (token == "false") return Value{false};
  char* end = nullptr;
  const double num = std::strtod(token.c_str(), &end);
  if (end == token.c_str() + token.size() && !token.empty()) return Value{num};
  c.fail(fmt::format("cannot parse value '{}'", token));
}

}  // namespace

Table Table::parse(const std::string& text, const std::string& origin) {
  Table table;
  table.origin_ = origin;
  Cursor c{text, 0, origin, 1};
  std::string section;

  for (;;) {
    c.skip_ws_and_comments(false);
    if (c.done()) break;
    if (c.peek() == '[') {
      c.take();
      c.skip_ws_and_comments(true);
      section = parse_bare_key(c);
      c.skip_ws_and_comments(true);
      if (c.done() || c.take() != ']') c.fail("expected ']' after section name");
      continue;
    }
    const std::string key = parse_bare_key(c);
    c.skip_ws_and_comments(true);
    if (c.done() || c.take() != '=') c.fail(fmt::format("expected '=' after '{}'", key));
    Value value = parse_value(c);
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.values_.count(full)) c.fail(fmt::format("duplicate key '{}'", full));
    table.values_.emplace(full, std::move(value));
  }
  return table;
}

Table Table::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const Value& Table::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError(fmt::format("{}: missing required key '{}'", origin_, key));
  return it->second;
}

std::string Table::str(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_string())
    throw ConfigError(fmt::format("{}: '{}' must be a string", origin_, key));
  return std::get<std::string>(v.data);
}

double Table::number(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number())
    throw ConfigError(fmt::format("{}: '{}' must be a number", origin_, key));
  return std::get<double>(v.data);
}

long Table::integer(const std::string& key) const {
  const double v = number(key);
  const long n = static_cast<long>(v);
  if (static_cast<double>(n) != v)
    throw ConfigError(fmt::format("{}: '{}' must be an integer", origin_, key));
  return n;
}

bool Table::boolean(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_bool())
    throw ConfigError(fmt::format("{}: '{}' must be a boolean", origin_, key));
  return std::get<bool>(v.data);
}

std::vector<double> Table::numbers(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_array())
    throw ConfigError(fmt::format("{}: '{}' must be an array", origin_, key));
  std::vector<double> out;
  for (const auto& item : std::get<Array>(v.data)) {
    if (!item.is_number())
      throw ConfigError(fmt::format("{}: '{}' must contain numbers", origin_, key));
    out.push_back(std::get<double>(item.data));
  }
  return out;
}

std::vector<std::string> Table::strings(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_array())
    throw ConfigError(fmt::format("{}: '{}' must be an array", origin_, key));
  std::vector<std::string> out;
  for (const auto& item : std::get<Array>(v.data)) {
    if (!item.is_string())
      throw ConfigError(fmt::format("{}: '{}' must contain strings", origin_, key));
    out.push_back(std::get<std::string>(item.data));
  }
  return out;
}

std::vector<std::vector<double>> Table::matrix(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_array())
    throw ConfigError(fmt::format("{}: '{}' must be an array", origin_, key));
  std::vector<std::vector<double>> out;
  for (const auto& row : std::get<Array>(v.data)) {
    if (!row.is_array())
      throw ConfigError(
          fmt::format("{}: '{}' must be an array of arrays", origin_, key));
    std::vector<double> values;
    for (const auto& item : std::get<Array>(row.data)) {
      if (!item.is_number())
        throw ConfigError(fmt::format("{}: '{}' rows must contain numbers", origin_, key));
      values.push_back(std::get<double>(item.data));
    }
    out.push_back(std::move(values));
  }
  return out;
}

std::string Table::str_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? str(key) : fallback;
}
double Table::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}
long Table::integer_or(const std::string& key, long fallback) const {
  return has(key) ? integer(key) : fallback;
}
bool Table::boolean_or(const std::string& key, bool fallback) const {
  return has(key) ? boolean(key) : fallback;
}

std::vector<std::string> Table::children(const std::string& prefix) const {
  std::set<std::string> names;
  const std::string full = prefix + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(full, 0) != 0) continue;
    const std::string rest = key.substr(full.size());
    const auto dot = rest.find('.');
    names.insert(dot == std::string::npos ? rest : rest.substr(0, dot));
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> Table::keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) out.push_back(key);
  return out;
}

}  // namespace ctpanel::minitoml
