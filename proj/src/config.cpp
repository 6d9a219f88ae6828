#include "ppreg/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "ppreg/error.hpp"

namespace ppreg {

using nlohmann::json;

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : s_(text) {}

  json parse() {
    json root = json::object();
    json::json_pointer table;  // current table
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        const bool array_table = peek(1) == '[';
        pos_ += array_table ? 2 : 1;
        skip_ws();
        std::vector<std::string> keys = parse_key();
        skip_ws();
        if (!consume(']') || (array_table && !consume(']'))) fail("expected ']' after table name");
        end_of_line();
        table = open_table(root, keys, array_table);
      } else {
        std::vector<std::string> keys = parse_key();
        skip_ws();
        if (!consume('=')) fail("expected '=' after key");
        skip_ws();
        json value = parse_value();
        assign(root[table], keys, std::move(value));
        end_of_line();
      }
    }
    return root;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "TOML parse error on line " << line_ << ": " << what;
    throw ParameterError(msg.str());
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  void newline() {
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        break;
      }
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() { skip_blank_lines(); }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected text after value");
    newline();
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> keys;
    while (true) {
      skip_ws();
      if (peek() == '"') {
        keys.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        keys.push_back(parse_literal_string());
      } else {
        const std::size_t start = pos_;
        while (!eof() && bare_char(peek())) ++pos_;
        if (pos_ == start) fail("expected a key");
        keys.emplace_back(s_.substr(start, pos_ - start));
      }
      skip_ws();
      if (!consume('.')) break;
    }
    return keys;
  }

  json::json_pointer open_table(json& root, const std::vector<std::string>& keys, bool array_table) {
    json::json_pointer ptr;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      json& node = root[ptr];
      const bool last = i + 1 == keys.size();
      if (!node.contains(keys[i])) {
        node[keys[i]] = (last && array_table) ? json::array() : json::object();
      }
      json& child = node[keys[i]];
      ptr /= keys[i];
      if (last && array_table) {
        if (!child.is_array()) fail("'" + keys[i] + "' is not an array of tables");
        child.push_back(json::object());
        ptr /= child.size() - 1;
      } else if (child.is_array()) {
        if (child.empty() || !child.back().is_object()) fail("'" + keys[i] + "' is not a table");
        ptr /= child.size() - 1;
      } else if (!child.is_object()) {
        fail("'" + keys[i] + "' is already a value");
      }
    }
    return ptr;
  }

  void assign(json& table, const std::vector<std::string>& keys, json value) {
    json* node = &table;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      if (!node->contains(keys[i])) (*node)[keys[i]] = json::object();
      node = &(*node)[keys[i]];
      if (!node->is_object()) fail("'" + keys[i] + "' is already a value");
    }
    if (node->contains(keys.back())) fail("duplicate key '" + keys.back() + "'");
    (*node)[keys.back()] = std::move(value);
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (s_.substr(pos_, 4) == "true" && !bare_char(peek(4))) {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false" && !bare_char(peek(5))) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  json parse_number() {
    const std::size_t start = pos_;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    std::string body = tok;
    double sign = 1.0;
    if (body[0] == '+' || body[0] == '-') {
      sign = body[0] == '-' ? -1.0 : 1.0;
      body.erase(0, 1);
    }
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean.push_back(ch);
    }
    if (clean[0] == '+') clean.erase(0, 1);
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* b = clean.data();
    const char* e = b + clean.size();
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) fail("invalid number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
    return v;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::string parse_basic_string() {
    const bool multi = s_.substr(pos_, 3) == "\"\"\"";
    pos_ += multi ? 3 : 1;
    if (multi) newline();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated string");
      if (multi ? s_.substr(pos_, 3) == "\"\"\"" : peek() == '"') {
        pos_ += multi ? 3 : 1;
        return out;
      }
      char c = peek();
      if (c == '\n') {
        if (!multi) fail("newline in string");
        ++line_;
      }
      ++pos_;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      const char esc = peek();
      ++pos_;
      switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'u':
        case 'U': {
          const std::size_t n = esc == 'u' ? 4 : 8;
          if (pos_ + n > s_.size()) fail("truncated unicode escape");
          std::uint32_t cp = 0;
          auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + pos_ + n, cp, 16);
          if (ec != std::errc() || p != s_.data() + pos_ + n) fail("invalid unicode escape");
          pos_ += n;
          append_utf8(out, cp);
          break;
        }
        default: fail(std::string("invalid escape '\\") + esc + "'");
      }
    }
  }

  std::string parse_literal_string() {
    const bool multi = s_.substr(pos_, 3) == "'''";
    pos_ += multi ? 3 : 1;
    if (multi) newline();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated string");
      if (multi ? s_.substr(pos_, 3) == "'''" : peek() == '\'') {
        pos_ += multi ? 3 : 1;
        return out;
      }
      if (peek() == '\n') {
        if (!multi) fail("newline in string");
        ++line_;
      }
      out.push_back(peek());
      ++pos_;
    }
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    while (true) {
      skip_array_space();
      if (consume(']')) return arr;
      arr.push_back(parse_value());
      skip_array_space();
      if (consume(',')) continue;
      skip_array_space();
      if (consume(']')) return arr;
      fail("expected ',' or ']' in array");
    }
  }

  json parse_inline_table() {
    ++pos_;
    json table = json::object();
    skip_ws();
    if (consume('}')) return table;
    while (true) {
      std::vector<std::string> keys = parse_key();
      skip_ws();
      if (!consume('=')) fail("expected '=' in inline table");
      skip_ws();
      assign(table, keys, parse_value());
      skip_ws();
      if (consume(',')) continue;
      if (consume('}')) return table;
      fail("expected ',' or '}' in inline table");
    }
  }
};

const json& solver_defaults() {
  static const json d = {{"tol", 1e-7},           {"max_outer", 100},
                         {"max_inner", 1000},     {"n_lambda", 100},
                         {"lambda_min_ratio", 1e-4}, {"penalize_intercept", false},
                         {"standardize", true}};
  return d;
}

const json& data_defaults() {
  static const json d = {{"points", ""}, {"covariates", ""}, {"missing", "reject"}, {"intercept", true}};
  return d;
}

const json& model_defaults() {
  static const json d = {
      {"likelihood", "poisson"},
      {"delta", 0.0},
      {"weights", "none"},
      {"pair_correlation", {{"kind", "poisson"}, {"kappa", 0.0}, {"omega", 0.0}, {"radius", 0.0}}}};
  return d;
}

const json& method_defaults() {
  static const json d = {{"label", ""},
                         {"penalty", "adaptive_lasso"},
                         {"gamma", nullptr},
                         {"likelihood", "poisson"},
                         {"weights", "none"}};
  return d;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ParameterError("config key '" + key + "' must be " + expected);
}

json merge(const json& def, const json& user, const std::string& key) {
  if (def.is_null()) return user;
  if (def.is_object()) {
    if (!user.is_object()) type_error(key, "a table");
    json out = def;
    for (auto it = user.begin(); it != user.end(); ++it) {
      const std::string child = key.empty() ? it.key() : key + "." + it.key();
      if (!def.contains(it.key())) throw ParameterError("unknown config key '" + child + "'");
      out[it.key()] = merge(def[it.key()], it.value(), child);
    }
    return out;
  }
  if (def.is_array()) {
    if (!user.is_array()) type_error(key, "an array");
    if (key == "methods") {
      json out = json::array();
      for (std::size_t i = 0; i < user.size(); ++i) {
        out.push_back(merge(method_defaults(), user[i], key + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
    for (const auto& v : user) {
      if (!v.is_number()) type_error(key, "an array of numbers");
    }
    return user;
  }
  if (def.is_boolean()) {
    if (!user.is_boolean()) type_error(key, "true or false");
    return user;
  }
  if (def.is_number()) {
    if (!user.is_number()) type_error(key, "a number");
    if (def.is_number_integer() && !user.is_number_integer()) {
      const double v = user.get<double>();
      if (v != std::floor(v)) type_error(key, "an integer");
      return static_cast<std::int64_t>(v);
    }
    return user;
  }
  if (def.is_string()) {
    if (def.get<std::string>() == "auto" && user.is_number()) return user;
    if (!user.is_string()) type_error(key, "a string");
    return user;
  }
  return user;
}

}  // namespace

json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ParameterError("config file '" + path.string() + "': " + e.what());
    }
  }
  try {
    return parse_toml(buf.str());
  } catch (const ParameterError& e) {
    throw ParameterError("config file '" + path.string() + "': " + e.what());
  }
}

json config_defaults(const std::string& command) {
  if (command == "fit" || command == "path") {
    return {{"data", data_defaults()},
            {"model", model_defaults()},
            {"penalty", {{"kind", "lasso"}, {"lambda", "auto"}, {"gamma", nullptr}}},
            {"solver", solver_defaults()},
            {"quadrature", {{"nx", 0}, {"ny", 0}}}};
  }
  if (command == "simulate") {
    return {{"data", {{"covariates", ""}, {"missing", "reject"}}},
            {"model",
             {{"process", "thomas"},
              {"kappa", 5e-4},
              {"omega", 20.0},
              {"beta", json::array()},
              {"intercept", "auto"},
              {"target_count", 1600.0}}}};
  }
  if (command == "se") {
    return {{"data", data_defaults()}, {"model", model_defaults()}, {"kernel_subsamples", 4}};
  }
  if (command == "surface") {
    return {{"data", data_defaults()}};
  }
  if (command == "study") {
    return {{"scenario",
             {{"name", "1a"},
              {"n_covariates", 50},
              {"beta_true", {2.0, 0.75}},
              {"extras", "gaussian_white_noise"},
              {"grid_dir", ""},
              {"collinearity", 0.7},
              {"grid_cols", 101},
              {"grid_rows", 51},
              {"window", {0.0, 1000.0, 0.0, 500.0}},
              {"omega", 20.0},
              {"target_count", 1600.0},
              {"replicates", 100},
              {"wpl_radius", 0.0}}},
            {"kappas", {5e-4}},
            {"methods", json::array({merge(method_defaults(), {{"label", "AL"}}, "methods[0]")})},
            {"solver", solver_defaults()}};
  }
  throw ParameterError("unknown command '" + command + "'");
}

json resolve_config(const std::string& command, const json& user) {
  if (user.is_null()) return config_defaults(command);
  if (!user.is_object()) throw ParameterError("config must be a table");
  return merge(config_defaults(command), user, "");
}

void set_dotted(json& config, const std::string& key, const std::string& value_text) {
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::parse_error&) {
    value = value_text;
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ParameterError("malformed config key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace ppreg
