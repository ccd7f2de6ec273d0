#pragma once

// Parser for the TOML subset used by config files: comments, [table],
// [[array-of-tables]], dotted keys, strings, numbers, booleans, arrays and
// inline tables. The result is an insertion-ordered JSON object.

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ilbsde/error.hpp"

namespace ilbsde {

using Json = nlohmann::ordered_json;

namespace detail {

class TomlParser {
 public:
  explicit TomlParser(std::string text) : s_(std::move(text)) {}

  Json parse() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        table = parse_header(root);
      } else {
        parse_keyval(*table);
      }
      skip_inline_ws();
      if (!eof() && peek() == '#') skip_comment();
      if (!eof() && peek() != '\n' && peek() != '\r') fail("expected end of line");
    }
    return root;
  }

 private:
  std::string s_;
  std::size_t i_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::config, "config line " + std::to_string(line_) + ": " + msg);
  }
  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return s_[i_]; }
  char get() {
    const char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }
  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }
  void skip_comment() {
    while (!eof() && peek() != '\n') ++i_;
  }
  void skip_ws_comments_newlines() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  std::string parse_simple_key() {
    skip_inline_ws();
    if (eof()) fail("expected key");
    if (peek() == '"' || peek() == '\'') return parse_string();
    std::string k;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
    if (k.empty()) fail("expected key");
    return k;
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_simple_key()};
    skip_inline_ws();
    while (!eof() && peek() == '.') {
      ++i_;
      path.push_back(parse_simple_key());
      skip_inline_ws();
    }
    return path;
  }

  Json* descend(Json& root, const std::vector<std::string>& path, std::size_t upto) {
    Json* cur = &root;
    for (std::size_t k = 0; k < upto; ++k) {
      Json& next = (*cur)[path[k]];
      if (next.is_null()) next = Json::object();
      if (next.is_array()) {
        if (next.empty() || !next.back().is_object()) fail("key '" + path[k] + "' is not a table");
        cur = &next.back();
      } else if (next.is_object()) {
        cur = &next;
      } else {
        fail("key '" + path[k] + "' is not a table");
      }
    }
    return cur;
  }

  Json* parse_header(Json& root) {
    get();
    const bool array = !eof() && peek() == '[';
    if (array) get();
    auto path = parse_key_path();
    if (eof() || get() != ']') fail("unterminated table header");
    if (array && (eof() || get() != ']')) fail("unterminated array-of-tables header");
    Json* parent = descend(root, path, path.size() - 1);
    Json& slot = (*parent)[path.back()];
    if (array) {
      if (slot.is_null()) slot = Json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is not an array of tables");
      slot.push_back(Json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = Json::object();
    if (!slot.is_object()) fail("'" + path.back() + "' is not a table");
    return &slot;
  }

  void parse_keyval(Json& table) {
    auto path = parse_key_path();
    skip_inline_ws();
    if (eof() || get() != '=') fail("expected '=' after key");
    skip_inline_ws();
    Json* parent = descend(table, path, path.size() - 1);
    if (parent->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*parent)[path.back()] = parse_value();
  }

  Json parse_value() {
    if (eof()) fail("expected value");
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (s_.compare(i_, 4, "true") == 0) {
      i_ += 4;
      return true;
    }
    if (s_.compare(i_, 5, "false") == 0) {
      i_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_string() {
    const char q = get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == q) break;
      if (c == '\\' && q == '"') {
        if (eof()) fail("bad escape");
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  Json parse_number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_')) {
      if (peek() != '_') tok += peek();
      ++i_;
    }
    if (tok.empty()) fail("expected value");
    std::string body = tok;
    double sign = 1.0;
    if (body[0] == '+' || body[0] == '-') {
      sign = body[0] == '-' ? -1.0 : 1.0;
      body = body.substr(1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used != tok.size()) fail("bad number '" + tok + "'");
        return v;
      }
      const long long v = std::stoll(tok, &used);
      if (used != tok.size()) fail("bad number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad value '" + tok + "'");
    }
  }

  Json parse_array() {
    get();
    Json arr = Json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json parse_inline_table() {
    get();
    Json t = Json::object();
    skip_inline_ws();
    if (!eof() && peek() == '}') {
      get();
      return t;
    }
    while (true) {
      parse_keyval(t);
      skip_inline_ws();
      if (eof()) fail("unterminated inline table");
      const char c = get();
      if (c == '}') return t;
      if (c != ',') fail("expected ',' or '}' in inline table");
    }
  }
};

}  // namespace detail

inline Json parse_toml(const std::string& text) { return detail::TomlParser(text).parse(); }

inline Json load_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

}  // namespace ilbsde
