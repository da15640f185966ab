#include "ccassg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "ccassg/error.hpp"

namespace ccassg {

namespace {

using Array = std::vector<double>;
using Value = std::variant<bool, double, std::string, Array>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment, ignoring '#' inside a quoted string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(key, source_ + ":" + std::to_string(line_) + ": " + what);
  }

  void set_line(std::size_t line) { line_ = line; }

  double number(std::string_view tok, const std::string& key) const {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) fail(key, "expected a number, got '" + std::string(tok) + "'");
    return v;
  }

  Value value(std::string_view tok, const std::string& key) const {
    if (tok.empty()) fail(key, "missing value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.front() == '"') {
      if (tok.size() < 2 || tok.back() != '"') fail(key, "unterminated string");
      return std::string(tok.substr(1, tok.size() - 2));
    }
    if (tok.front() == '[') {
      if (tok.back() != ']') fail(key, "unterminated array");
      Array out;
      std::string_view body = trim(tok.substr(1, tok.size() - 2));
      while (!body.empty()) {
        const auto comma = body.find(',');
        const auto item = trim(body.substr(0, comma));
        if (item.empty()) fail(key, "empty array element");
        out.push_back(number(item, key));
        if (comma == std::string_view::npos) break;
        body = trim(body.substr(comma + 1));
      }
      return out;
    }
    return number(tok, key);
  }

 private:
  std::string source_;
  std::size_t line_ = 0;
};

struct Field {
  std::function<void(RunConfig&, const Value&, const Parser&, const std::string&)> apply;
};

template <typename T>
const T& expect(const Value& v, const Parser& p, const std::string& key, const char* what) {
  if (const T* x = std::get_if<T>(&v)) return *x;
  p.fail(key, std::string("expected ") + what);
}

std::size_t as_count(const Value& v, const Parser& p, const std::string& key) {
  const double d = expect<double>(v, p, key, "a non-negative integer");
  if (!(d >= 0.0) || d != static_cast<double>(static_cast<std::size_t>(d)))
    p.fail(key, "expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

double as_double(const Value& v, const Parser& p, const std::string& key) {
  return expect<double>(v, p, key, "a number");
}

const std::string& as_string(const Value& v, const Parser& p, const std::string& key) {
  return expect<std::string>(v, p, key, "a quoted string");
}

bool as_bool(const Value& v, const Parser& p, const std::string& key) {
  return expect<bool>(v, p, key, "true or false");
}

const std::map<std::string, Field>& fields() {
  using C = RunConfig;
  using P = Parser;
  static const std::map<std::string, Field> table = {
      {"dataset", {[](C& c, const Value& v, const P& p, const std::string& k) { c.dataset = as_string(v, p, k); }}},
      {"seeds", {[](C& c, const Value& v, const P& p, const std::string& k) { c.seeds = as_count(v, p, k); }}},
      {"train.steps", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.steps = as_count(v, p, k); }}},
      {"train.encoder",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.encoder = parse_encoder_kind(as_string(v, p, k)); }}},
      {"train.hidden",
       {[](C& c, const Value& v, const P& p, const std::string& k) {
          c.train.hidden.clear();
          for (double w : expect<Array>(v, p, k, "an array of layer widths")) c.train.hidden.push_back(as_count(w, p, k));
        }}},
      {"train.bias", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.bias = as_bool(v, p, k); }}},
      {"train.lambda", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.lambda = as_double(v, p, k); }}},
      {"train.lr", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.lr = as_double(v, p, k); }}},
      {"train.weight_decay",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.weight_decay = as_double(v, p, k); }}},
      {"train.p_e", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.p_e = as_double(v, p, k); }}},
      {"train.p_f", {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.p_f = as_double(v, p, k); }}},
      {"train.seed",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.seed = as_count(v, p, k); }}},
      {"train.std_mode",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.std_mode = parse_std_mode(as_string(v, p, k)); }}},
      {"train.row_normalize_features",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.row_normalize_features = as_bool(v, p, k); }}},
      {"train.variant",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.train.variant = parse_loss_variant(as_string(v, p, k)); }}},
      {"probe.lr", {[](C& c, const Value& v, const P& p, const std::string& k) { c.probe.lr = as_double(v, p, k); }}},
      {"probe.weight_decay",
       {[](C& c, const Value& v, const P& p, const std::string& k) { c.probe.weight_decay = as_double(v, p, k); }}},
      {"probe.epochs", {[](C& c, const Value& v, const P& p, const std::string& k) { c.probe.epochs = as_count(v, p, k); }}},
      {"probe.split", {[](C& c, const Value& v, const P& p, const std::string& k) { c.probe.split = as_string(v, p, k); }}},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  Parser parser(source);
  std::string section;
  std::map<std::string, bool> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    parser.set_line(++line_no);

    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parser.fail("section", "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "train" && section != "probe") parser.fail(section, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parser.fail("syntax", "expected 'key = value'");
    const std::string name(trim(line.substr(0, eq)));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto it = fields().find(key);
    if (it == fields().end()) parser.fail(key, "unknown key");
    if (seen[key]) parser.fail(key, "duplicate key");
    seen[key] = true;
    try {
      it->second.apply(cfg, parser.value(trim(line.substr(eq + 1)), key), parser, key);
    } catch (const ConfigError& e) {
      if (e.key() == key) throw;
      // Enum parsers report their own key names; re-key them to the file's.
      parser.fail(key, e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse_run_config(buf.str(), path.string());
  if (!cfg.dataset.empty() && cfg.dataset.is_relative()) cfg.dataset = path.parent_path() / cfg.dataset;
  return cfg;
}

}  // namespace ccassg
