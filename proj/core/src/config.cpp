#include "sblem/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <set>
#include <sstream>

#include "sblem/csv.hpp"
#include "sblem/error.hpp"

namespace sblem {

namespace {

[[noreturn]] void fail(const std::string& message) { throw InvalidArgument(message); }

class Parser {
 public:
  Parser(const std::string& text, int line) : text_(text), line_(line) {}

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) error("missing value");
    const char c = text_[pos_];
    if (c == '[') return parse_array();
    if (c == '"') return ConfigValue{parse_string()};
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return ConfigValue{true};
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return ConfigValue{false};
    }
    return parse_number();
  }

  void expect_end() {
    skip_ws();
    if (pos_ != text_.size()) error("unexpected trailing characters");
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  ConfigValue parse_array() {
    ++pos_;  // '['
    ConfigValue::Array items;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return ConfigValue{std::move(items)};
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) error("unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      error("expected ',' or ']' in array");
    }
    return ConfigValue{std::move(items)};
  }

  std::string parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) error("dangling escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: error(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= text_.size()) error("unterminated string");
    ++pos_;
    return out;
  }

  ConfigValue parse_number() {
    std::size_t end = pos_;
    while (end < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
            text_[end] == '-' || text_[end] == '+' || text_[end] == '_')) {
      ++end;
    }
    std::string token;
    for (std::size_t i = pos_; i < end; ++i) {
      if (text_[i] != '_') token.push_back(text_[i]);
    }
    if (token.empty()) error("expected a value");
    const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                          token == "inf" || token == "+inf" || token == "-inf";
    const char* first = token.data();
    if (*first == '+') ++first;
    const char* last = token.data() + token.size();
    if (is_float) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) error("malformed number '" + token + "'");
      pos_ = end;
      return ConfigValue{v};
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) error("malformed value '" + token + "'");
    pos_ = end;
    return ConfigValue{v};
  }

  const std::string& text_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

bool valid_key(const std::string& key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// Key lookup that records which keys were consumed, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(std::string name, const std::map<std::string, ConfigValue>* values)
      : name_(std::move(name)), values_(values) {}

  const ConfigValue* find(const std::string& key) {
    if (values_ == nullptr) return nullptr;
    auto it = values_->find(key);
    if (it == values_->end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  template <class T, class Fn>
  void read(const std::string& key, T& out, Fn convert) {
    if (const ConfigValue* v = find(key)) out = convert(*v, qualified(key));
  }

  void read_double(const std::string& key, double& out) {
    read(key, out, [](const ConfigValue& v, const std::string& k) { return v.as_double(k); });
  }
  void read_int(const std::string& key, int& out) {
    read(key, out, [](const ConfigValue& v, const std::string& k) {
      const auto x = v.as_int(k);
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        fail(k + " is out of range");
      }
      return static_cast<int>(x);
    });
  }
  void read_u64(const std::string& key, std::uint64_t& out) {
    read(key, out, [](const ConfigValue& v, const std::string& k) {
      const auto x = v.as_int(k);
      if (x < 0) fail(k + " must be nonnegative");
      return static_cast<std::uint64_t>(x);
    });
  }
  void read_bool(const std::string& key, bool& out) {
    read(key, out, [](const ConfigValue& v, const std::string& k) { return v.as_bool(k); });
  }

  void reject_unknown() const {
    if (values_ == nullptr) return;
    for (const auto& [key, _] : *values_) {
      if (!used_.count(key)) fail("unknown key '" + qualified(key) + "'");
    }
  }

 private:
  std::string name_;
  const std::map<std::string, ConfigValue>* values_;
  std::set<std::string> used_;
};

Matrix matrix_value(const ConfigValue& v, const std::string& key) {
  const auto& rows = v.as_array(key);
  if (rows.empty()) fail(key + " must be a non-empty array of rows");
  const auto cols = rows.front().as_array(key).size();
  Matrix M(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i].as_array(key);
    if (row.size() != cols) fail("dimension mismatch: ragged rows in " + key);
    for (std::size_t j = 0; j < cols; ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].as_double(key);
    }
  }
  return M;
}

template <class T>
std::vector<T> number_list(const ConfigValue& v, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : v.as_array(key)) {
    if constexpr (std::is_floating_point_v<T>) {
      out.push_back(item.as_double(key));
    } else {
      const auto x = item.as_int(key);
      if (x < 0) fail(key + " entries must be nonnegative");
      out.push_back(static_cast<T>(x));
    }
  }
  return out;
}

}  // namespace

bool ConfigValue::is_number() const {
  return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data);
}

double ConfigValue::as_double(const std::string& key) const {
  if (const auto* i = std::get_if<std::int64_t>(&data)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&data)) return *d;
  fail(key + " must be a number");
}

std::int64_t ConfigValue::as_int(const std::string& key) const {
  if (const auto* i = std::get_if<std::int64_t>(&data)) return *i;
  fail(key + " must be an integer");
}

bool ConfigValue::as_bool(const std::string& key) const {
  if (const auto* b = std::get_if<bool>(&data)) return *b;
  fail(key + " must be true or false");
}

const std::string& ConfigValue::as_string(const std::string& key) const {
  if (const auto* s = std::get_if<std::string>(&data)) return *s;
  fail(key + " must be a string");
}

const ConfigValue::Array& ConfigValue::as_array(const std::string& key) const {
  if (const auto* a = std::get_if<Array>(&data)) return *a;
  fail(key + " must be an array");
}

ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  table[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const int start_line = line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) fail("config line " + std::to_string(line_no) + ": bad section name");
      if (table.count(section)) {
        fail("config line " + std::to_string(line_no) + ": duplicate section [" + section + "]");
      }
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value_text = trim(line.substr(eq + 1));
    while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
      ++line_no;
      value_text += " " + trim(strip_comment(raw));
    }
    if (!valid_key(key)) fail("config line " + std::to_string(start_line) + ": bad key");
    Parser parser(value_text, start_line);
    ConfigValue value = parser.parse_value();
    parser.expect_end();
    auto& sec = table[section];
    if (sec.count(key)) {
      fail("config line " + std::to_string(start_line) + ": duplicate key '" + key + "'");
    }
    sec.emplace(key, std::move(value));
  }
  return table;
}

const std::vector<std::string>& known_check_names() {
  static const std::vector<std::string> names{
      "monotone", "upper_bound", "objective_oscillation", "stationary",
      "q_ascent", "gibbs_surrogate", "coercive", "map_closed"};
  return names;
}

RunConfig parse_run_config(const std::string& text,
                           std::optional<std::uint64_t> seed_override) {
  const ConfigTable table = parse_config_text(text);
  static const std::set<std::string> known_sections{"",   "model",       "sim",     "dataset",
                                                    "em", "diagnostics", "sweep"};
  for (const auto& [name, _] : table) {
    if (!known_sections.count(name)) fail("unknown section [" + name + "]");
  }
  auto section = [&](const std::string& name) {
    auto it = table.find(name);
    return Section(name, it == table.end() ? nullptr : &it->second);
  };

  RunConfig cfg;
  cfg.source_text = text;

  {
    Section top = section("");
    top.read_u64("seed", cfg.seed);
    if (seed_override) cfg.seed = *seed_override;
    if (const auto* v = top.find("output")) cfg.output = v->as_string("output");
    top.reject_unknown();
  }

  if (table.count("model")) {
    Section s = section("model");
    ModelBlock block;
    std::string kind = "random";
    if (const auto* v = s.find("kind")) kind = v->as_string("model.kind");
    if (kind != "random" && kind != "explicit") fail("model.kind must be \"random\" or \"explicit\"");
    block.random = kind == "random";
    if (block.random) {
      auto& r = block.random_spec;
      s.read_int("n", r.n);
      s.read_int("m", r.m);
      s.read_int("K", r.K);
      s.read_double("sigma2", r.sigma2);
      s.read_double("p0", r.p0);
      s.read_double("p1", r.p1);
      s.read_double("pi1", r.pi1);
      s.read_double("spectral_radius", r.spectral_radius);
      r.seed = cfg.seed;
      s.read_u64("model_seed", r.seed);
    } else {
      auto& m = block.explicit_model;
      const auto* D = s.find("D");
      const auto* A = s.find("A");
      if (D == nullptr || A == nullptr) fail("explicit model needs both D and A");
      m.D = matrix_value(*D, "model.D");
      m.A = matrix_value(*A, "model.A");
      m.n = static_cast<int>(m.D.rows());
      m.m = static_cast<int>(m.A.rows());
      s.read_int("K", m.K);
      s.read_double("sigma2", m.sigma2);
      s.read_double("p0", m.p0);
      s.read_double("p1", m.p1);
      s.read_double("pi1", m.pi1);
      if (const auto* v = s.find("n"); v && v->as_int("model.n") != m.n) {
        fail("dimension mismatch: model.n disagrees with D");
      }
      if (const auto* v = s.find("m"); v && v->as_int("model.m") != m.m) {
        fail("dimension mismatch: model.m disagrees with A");
      }
    }
    s.reject_unknown();
    cfg.model = std::move(block);
  }

  if (table.count("sim")) {
    Section s = section("sim");
    SimConfig sim;
    sim.seed = cfg.seed;
    s.read_int("sparsity", sim.sparsity);
    s.read_double("input_variance", sim.input_variance);
    s.read_u64("seed", sim.seed);
    if (const auto* v = s.find("support")) {
      std::vector<int> support;
      for (const auto& item : v->as_array("sim.support")) {
        support.push_back(static_cast<int>(item.as_int("sim.support")));
      }
      sim.support = std::move(support);
    }
    s.reject_unknown();
    if (sim.sparsity < 0) fail("sim.sparsity must be nonnegative");
    cfg.sim = std::move(sim);
  }

  if (table.count("dataset")) {
    Section s = section("dataset");
    const auto* v = s.find("path");
    if (v == nullptr) fail("[dataset] needs a path");
    cfg.dataset = v->as_string("dataset.path");
    s.reject_unknown();
  }

  {
    Section s = section("em");
    s.read_int("max_iters", cfg.em.max_iters);
    s.read_double("tol_rel_L", cfg.em.tol_rel_L);
    s.read_double("tol_gamma", cfg.em.tol_gamma);
    s.read_double("gamma_floor", cfg.em.gamma_floor);
    s.read_bool("record_Q", cfg.em.record_Q);
    if (const auto* v = s.find("init_gamma")) {
      if (v->is_number()) {
        cfg.init.gamma_scalar = v->as_double("em.init_gamma");
      } else {
        const auto g = number_list<double>(*v, "em.init_gamma");
        cfg.init.gamma = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
      }
    }
    if (const auto* v = s.find("init_z")) {
      if (const auto* str = std::get_if<std::string>(&v->data)) {
        if (*str == "ones") {
          cfg.init.z_all_ones = true;
        } else if (*str == "zeros") {
          cfg.init.z_all_ones = false;
        } else {
          fail("em.init_z must be \"ones\", \"zeros\" or an array");
        }
      } else {
        Indicator z;
        for (const auto& item : v->as_array("em.init_z")) {
          z.push_back(static_cast<int>(item.as_int("em.init_z")));
        }
        cfg.init.z = std::move(z);
      }
    }
    s.reject_unknown();
    validate_options(cfg.em);
  }

  {
    Section s = section("diagnostics");
    auto& d = cfg.diagnostics;
    d.gamma_floor = cfg.em.gamma_floor;
    d.seed = cfg.seed;
    s.read_double("monotone_tol", d.monotone_tol);
    s.read_double("stationary_tol", d.stationary_tol);
    s.read_int("gibbs_samples", d.gibbs_samples);
    s.read_int("closed_sequence_length", d.closed_sequence_length);
    if (const auto* v = s.find("t_grid")) d.t_grid = number_list<double>(*v, "diagnostics.t_grid");
    if (const auto* v = s.find("checks")) {
      for (const auto& item : v->as_array("diagnostics.checks")) {
        const auto& name = item.as_string("diagnostics.checks");
        const auto& known = known_check_names();
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          fail("unknown diagnostics check '" + name + "'");
        }
        cfg.checks.push_back(name);
      }
    }
    s.reject_unknown();
  }

  {
    Section s = section("sweep");
    if (const auto* v = s.find("seeds")) cfg.sweep.seeds = number_list<std::uint64_t>(*v, "sweep.seeds");
    if (const auto* v = s.find("snr_db")) cfg.sweep.snr_db = number_list<double>(*v, "sweep.snr_db");
    if (const auto* v = s.find("sparsity")) cfg.sweep.sparsity = number_list<int>(*v, "sweep.sparsity");
    s.reject_unknown();
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override) {
  return parse_run_config(read_text_file(path), seed_override);
}

SystemModel resolve_model(const ModelBlock& block) {
  if (block.random) return make_random_model(block.random_spec);
  validate_model(block.explicit_model);
  return block.explicit_model;
}

SimConfig resolve_sim(const RunConfig& cfg) {
  if (!cfg.sim) fail("configuration has no [sim] block");
  return *cfg.sim;
}

Theta resolve_initial_theta(const InitSpec& init, const SystemModel& model) {
  Theta theta;
  theta.gamma = init.gamma ? *init.gamma : Vector::Constant(model.n, init.gamma_scalar);
  if (init.z) {
    theta.z = *init.z;
  } else {
    theta.z.assign(model.K, init.z_all_ones ? 1 : 0);
  }
  validate_theta(model, theta);
  return theta;
}

}  // namespace sblem
