#include "uq/config.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace uq {

using nlohmann::json;

// ---------------------------------------------------------------- TOML reader

namespace {

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        const std::string key = parse_key();
        skip_inline_space();
        expect('=');
        skip_inline_space();
        json value = parse_value();
        if (table->contains(key)) fail(fmt::format("duplicate key '{}'", key));
        (*table)[key] = std::move(value);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> opened_;

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("config line {}: {}", line_, what));
  }

  void expect(char c) {
    if (peek() != c) fail(fmt::format("expected '{}'", c));
    get();
  }

  void skip_inline_space() {
    while (peek() == ' ' || peek() == '\t') get();
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') get();
    }
  }

  // Whitespace, newlines and comments.
  void skip_blank() {
    for (;;) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
        continue;
      }
      return;
    }
  }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (peek() == '\r') get();
    if (!at_end() && peek() != '\n') fail("unexpected trailing characters");
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
  }

  std::string parse_key() {
    if (peek() == '"') return parse_string();
    std::string key;
    while (bare_char(peek())) key.push_back(get());
    if (key.empty()) fail("expected a key");
    return key;
  }

  json& open_table(json& root) {
    expect('[');
    if (peek() == '[') fail("arrays of tables are not supported");
    json* t = &root;
    std::string path;
    for (;;) {
      skip_inline_space();
      const std::string part = parse_key();
      path += (path.empty() ? "" : ".") + part;
      if (!t->contains(part)) (*t)[part] = json::object();
      t = &(*t)[part];
      if (!t->is_object()) fail(fmt::format("'{}' is not a table", path));
      skip_inline_space();
      if (peek() == '.') {
        get();
        continue;
      }
      break;
    }
    expect(']');
    if (!opened_.insert(path).second) fail(fmt::format("table [{}] defined twice", path));
    return *t;
  }

  std::string parse_string() {
    const char quote = get();
    std::string out;
    while (!at_end() && peek() != quote) {
      char c = get();
      if (c == '\n') fail("unterminated string");
      if (c == '\\' && quote == '"') {
        const char e = get();
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(fmt::format("unsupported escape '\\{}'", e));
        }
      }
      out.push_back(c);
    }
    if (at_end()) fail("unterminated string");
    get();
    return out;
  }

  json parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    std::string token;
    while (!at_end() && (bare_char(peek()) || peek() == '.' || peek() == '+')) token.push_back(get());
    if (token.empty()) fail("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    return parse_number(token);
  }

  json parse_number(std::string token) {
    std::erase(token, '_');
    const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                          token.find("inf") != std::string::npos ||
                          token.find("nan") != std::string::npos;
    char* end = nullptr;
    if (is_float) {
      const double v = std::strtod(token.c_str(), &end);
      if (*end != '\0') fail(fmt::format("bad number '{}'", token));
      return v;
    }
    if (token[0] == '-') {
      const long long v = std::strtoll(token.c_str(), &end, 10);
      if (*end != '\0') fail(fmt::format("bad integer '{}'", token));
      return v;
    }
    errno = 0;
    const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
    if (*end != '\0' || errno == ERANGE) fail(fmt::format("bad integer '{}'", token));
    return v;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    for (;;) {
      skip_blank();
      if (peek() == ']') break;
      arr.push_back(parse_value());
      skip_blank();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
    get();
    return arr;
  }
};

// ---------------------------------------------------------------- typed access

class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      if (!doc[name_].is_object()) throw ConfigError(fmt::format("'{}' must be a table", name_));
      obj_ = &doc[name_];
    }
  }
  Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {}

  const json* find(const std::string& key) {
    seen_.insert(key);
    if (obj_ == nullptr || !obj_->contains(key)) return nullptr;
    return &(*obj_)[key];
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) bad(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) bad(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) bad(key, "true or false");
      out = v->get<bool>();
    }
  }
  template <class U>
    requires std::is_unsigned_v<U>
  void read(const std::string& key, U& out) {
    if (const json* v = find(key)) out = static_cast<U>(unsigned_of(key, *v));
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      const auto u = unsigned_of(key, *v);
      if (u > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) bad(key, "smaller");
      out = static_cast<int>(u);
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) bad(key, "an array of positive integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) {
          bad(key, "an array of positive integers");
        }
        out.push_back(static_cast<int>(e.get<std::uint64_t>()));
      }
    }
  }

  // Every key present in the table must have been read.
  void finish() const {
    if (obj_ == nullptr) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) {
        throw ConfigError(name_.empty() ? fmt::format("unknown key '{}'", key)
                                        : fmt::format("unknown key '{}.{}'", name_, key));
      }
    }
  }

 private:
  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;

  [[noreturn]] void bad(const std::string& key, std::string_view want) const {
    throw ConfigError(fmt::format("'{}{}{}' must be {}", name_, name_.empty() ? "" : ".", key, want));
  }

  std::uint64_t unsigned_of(const std::string& key, const json& v) const {
    if (!v.is_number_unsigned()) bad(key, "a non-negative integer");
    return v.get<std::uint64_t>();
  }
};

std::string toml_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string toml_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

}  // namespace

json parse_toml(std::string_view text) { return TomlReader(text).parse(); }

// ---------------------------------------------------------------- run config

std::string default_surrogate(std::string_view problem, Family family) {
  if (problem == "antiderivative") return "deeponet";
  return family == Family::Trainable ? "fnn" : "bnn";
}

void RunConfig::resolve() {
  inference.seed = seed;
  model.seed = seed;
  model.family = method_family(inference.method);
  if (model.surrogate.empty()) model.surrogate = default_surrogate(problem, model.family);
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a table");
  static const std::set<std::string> kTables = {"problem",      "surrogate", "inference",
                                                "loss_weights", "calibration", "output"};
  RunConfig c;
  Section top(&doc, "");
  top.read("seed", c.seed);
  for (const auto& t : kTables) top.find(t);
  top.finish();

  Section problem(doc, "problem");
  problem.read("id", c.problem);
  if (const json* s = problem.find("seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("'problem.seed' must be a non-negative integer");
    c.data_seed = s->get<std::uint64_t>();
  }
  problem.finish();
  if (c.problem.empty()) throw ConfigError("'problem.id' is required");
  {
    bool known = false;
    for (const auto& p : problem_catalog()) known = known || p.id == c.problem;
    if (!known) throw UnknownProblem(fmt::format("unknown problem '{}'", c.problem));
  }

  ModelOptions& m = c.model;
  m.surrogate.clear();
  Section sur(doc, "surrogate");
  sur.read("kind", m.surrogate);
  sur.read("hidden", m.hidden);
  std::string activation = std::string(activation_name(m.activation));
  sur.read("activation", activation);
  m.activation = parse_activation(activation);
  sur.read("prior_std", m.prior_std);
  sur.read("init_std", m.init_std);
  sur.read("l2", m.l2);
  sur.read("kr_prior", m.kr_prior);
  sur.read("collocation", m.collocation);
  std::string generator;
  sur.read("generator", generator);
  m.generator = generator;
  sur.finish();
  if (!(m.prior_std > 0.0)) throw ConfigError("'surrogate.prior_std' must be positive");
  if (!(m.init_std > 0.0)) throw ConfigError("'surrogate.init_std' must be positive");
  if (!(m.l2 >= 0.0)) throw ConfigError("'surrogate.l2' must be non-negative");

  InferenceConfig& inf = c.inference;
  Section in(doc, "inference");
  std::string method = std::string(method_name(inf.method));
  in.read("method", method);
  inf.method = parse_method(method);
  in.read("n_samples", inf.n_samples);
  if (const json* b = in.find("burn_in")) {
    if (!b->is_number_unsigned()) throw ConfigError("'inference.burn_in' must be a non-negative integer");
    inf.burn_in = b->get<std::size_t>();
  }
  in.read("step_size", inf.step_size);
  in.read("leapfrog_steps", inf.leapfrog_steps);
  in.read("learning_rate", inf.learning_rate);
  in.read("iterations", inf.iterations);
  in.read("ensemble_size", inf.ensemble_size);
  in.read("dropout_rate", inf.dropout_rate);
  in.read("cycles", inf.cycles);
  in.read("prior_precision", inf.prior_precision);
  std::string init = std::string(init_mode_name(inf.init));
  in.read("init", init);
  inf.init = parse_init_mode(init);
  in.read("init_iterations", inf.init_iterations);
  in.read("init_learning_rate", inf.init_learning_rate);
  in.read("threads", inf.threads);
  in.finish();

  Section lw(doc, "loss_weights");
  lw.read("u", m.weights.u);
  lw.read("f", m.weights.f);
  lw.read("b", m.weights.b);
  lw.read("lambda", m.weights.lambda);
  lw.finish();

  Section cal(doc, "calibration");
  cal.read("enabled", c.calibration);
  cal.read("split_fraction", c.split_fraction);
  cal.finish();
  if (!(c.split_fraction >= 0.0 && c.split_fraction < 1.0)) {
    throw ConfigError("'calibration.split_fraction' must lie in [0, 1)");
  }
  if (c.calibration && c.split_fraction == 0.0) {
    throw ConfigError("calibration is enabled but 'calibration.split_fraction' is 0");
  }

  Section out(doc, "output");
  std::string dir = c.output_dir.string();
  out.read("directory", dir);
  c.output_dir = dir;
  out.read("grid_size", c.grid_size);
  out.finish();

  c.resolve();
  c.inference.validate();
  return c;
}

RunConfig parse_run_config_text(std::string_view text) { return parse_run_config(parse_toml(text)); }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

std::string to_toml(const RunConfig& c) {
  std::string s;
  auto line = [&s](std::string_view key, const std::string& value) {
    s += fmt::format("{} = {}\n", key, value);
  };
  line("seed", std::to_string(c.seed));

  s += "\n[problem]\n";
  line("id", toml_string(c.problem));
  line("seed", std::to_string(c.resolved_data_seed()));

  const ModelOptions& m = c.model;
  s += "\n[surrogate]\n";
  line("kind", toml_string(m.surrogate));
  line("hidden", fmt::format("[{}]", fmt::join(m.hidden, ", ")));
  line("activation", toml_string(activation_name(m.activation)));
  line("prior_std", toml_double(m.prior_std));
  line("init_std", toml_double(m.init_std));
  line("l2", toml_double(m.l2));
  line("kr_prior", toml_string(m.kr_prior));
  line("collocation", std::to_string(m.collocation));
  line("generator", toml_string(m.generator.string()));

  const InferenceConfig& inf = c.inference;
  s += "\n[inference]\n";
  line("method", toml_string(method_name(inf.method)));
  line("n_samples", std::to_string(inf.n_samples));
  line("burn_in", std::to_string(inf.resolved_burn_in()));
  line("step_size", toml_double(inf.step_size));
  line("leapfrog_steps", std::to_string(inf.leapfrog_steps));
  line("learning_rate", toml_double(inf.learning_rate));
  line("iterations", std::to_string(inf.iterations));
  line("ensemble_size", std::to_string(inf.ensemble_size));
  line("dropout_rate", toml_double(inf.dropout_rate));
  line("cycles", std::to_string(inf.cycles));
  line("prior_precision", toml_double(inf.prior_precision));
  line("init", toml_string(init_mode_name(inf.init)));
  line("init_iterations", std::to_string(inf.init_iterations));
  line("init_learning_rate", toml_double(inf.init_learning_rate));
  line("threads", std::to_string(inf.threads));

  s += "\n[loss_weights]\n";
  line("u", toml_double(m.weights.u));
  line("f", toml_double(m.weights.f));
  line("b", toml_double(m.weights.b));
  line("lambda", toml_double(m.weights.lambda));

  s += "\n[calibration]\n";
  line("enabled", c.calibration ? "true" : "false");
  line("split_fraction", toml_double(c.split_fraction));

  s += "\n[output]\n";
  line("directory", toml_string(c.output_dir.string()));
  line("grid_size", std::to_string(c.grid_size));
  return s;
}

}  // namespace uq
