#include "psolv/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "psolv/common.hpp"
#include "psolv/expr.hpp"
#include "psolv/symbols.hpp"

namespace psolv {

namespace {

std::string normalize_key(const std::string& key) {
  std::string k = key;
  for (char& c : k)
    if (c == '-') c = '_';
  return k;
}

double as_number(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
      throw Error("config: key '" + key + "' expects a number, got '" + s + "'");
    return d;
  }
  throw Error("config: key '" + key + "' expects a number");
}

std::size_t as_size(const nlohmann::json& v, const std::string& key) {
  const double d = as_number(v, key);
  if (d < 0.0 || d != static_cast<double>(static_cast<std::size_t>(d)))
    throw Error("config: key '" + key + "' expects a nonnegative integer");
  return static_cast<std::size_t>(d);
}

bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
  }
  if (v.is_number()) return v.get<double>() != 0.0;
  throw Error("config: key '" + key + "' expects a boolean");
}

std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  throw Error("config: key '" + key + "' expects a string");
}

void set_key(RunConfig& c, const std::string& raw_key, const nlohmann::json& v) {
  const std::string key = normalize_key(raw_key);
  if (key == "matched_n") c.matched_n = as_size(v, key);
  else if (key == "x_min") c.x_min = as_number(v, key);
  else if (key == "x_max") c.x_max = as_number(v, key);
  else if (key == "xi_min") c.xi_min = as_number(v, key);
  else if (key == "xi_max") c.xi_max = as_number(v, key);
  else if (key == "n_x") c.n_x = as_size(v, key);
  else if (key == "n_xi") c.n_xi = as_size(v, key);
  else if (key == "h") c.h = as_number(v, key);
  else if (key == "t_half") c.t_half = as_number(v, key);
  else if (key == "n_t") c.n_t = as_size(v, key);
  else if (key == "T" || key == "t_horizon") c.T = as_number(v, key);
  else if (key == "symbol") c.symbol = as_string(v, key);
  else if (key == "f0_file") c.f0_file = as_string(v, key);
  else if (key == "matrix") c.matrix = as_string(v, key);
  else if (key == "in_file" || key == "in") c.in_file = as_string(v, key);
  else if (key == "csv_out") c.csv_out = as_string(v, key);
  else if (key == "trace_re") c.trace_re = as_string(v, key);
  else if (key == "trace_im") c.trace_im = as_string(v, key);
  else if (key == "trace_x0") c.trace_x0 = as_number(v, key);
  else if (key == "trace_xi0") c.trace_xi0 = as_number(v, key);
  else if (key == "trace_steps") c.trace_steps = as_size(v, key);
  else if (key == "out") c.out = as_string(v, key);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(as_number(v, key));
  else if (key == "n_random_trials") c.n_random_trials = as_size(v, key);
  else if (key == "skip_gate") c.skip_gate = as_bool(v, key);
  else if (key == "margin") c.margin = as_number(v, key);
  else if (key == "bisect_steps") c.bisect_steps = as_size(v, key);
  else if (key == "tol_rank") c.tol_rank = as_number(v, key);
  else if (key == "tol_zero") c.tol_zero = as_number(v, key);
  else if (key == "tol_slack") c.tol_slack = as_number(v, key);
  else if (key == "tol_resid") c.tol_resid = as_number(v, key);
  else throw Error("config: unknown key '" + raw_key + "'");
}

// Bare word -> typed JSON scalar: bool literals and numbers are promoted,
// everything else stays a string.
nlohmann::json promote(const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  char* end = nullptr;
  const double d = std::strtod(value.c_str(), &end);
  if (end != value.c_str() && *end == '\0' && !value.empty()) return d;
  return value;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

void RunConfig::validate() const {
  if (matched_n == 0 && (n_x < 2 || n_xi < 2))
    throw Error("config: set matched_n or an explicit n_x/n_xi window");
  if (matched_n == 0 && (x_max <= x_min || xi_max <= xi_min))
    throw Error("config: empty phase-space window");
  if (h <= 0.0 || h > 1.0) throw Error("config: h must lie in (0, 1]");
  if (n_t < 7) throw Error("config: n_t must be at least 7");
  if (t_half <= 0.0) throw Error("config: t_half must be positive");
  if (T <= 0.0 || T > t_half)
    throw Error("config: T must lie in (0, t_half]");
  if (symbol.empty()) throw Error("config: symbol must be set");
  if (bisect_steps > 60) throw Error("config: bisect_steps out of range");
  if (margin < 0.0) throw Error("config: margin must be nonnegative");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::size_t first = 0;
  while (first < text.size() &&
         std::isspace(static_cast<unsigned char>(text[first])))
    ++first;

  if (first < text.size() && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("config: JSON parse failure: ") + e.what());
    }
    if (!j.is_object()) throw Error("config: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) set_key(c, it.key(), it.value());
    return c;
  }

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << "config: line " << lineno << " is not 'key = value': " << line;
      throw Error(os.str());
    }
    const std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      set_key(c, key, value.substr(1, value.size() - 2));
    } else {
      set_key(c, key, promote(value));
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config: cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

void apply_override(RunConfig& c, const std::string& key,
                    const std::string& value) {
  set_key(c, key, promote(value));
}

nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["matched_n"] = c.matched_n;
  if (c.matched_n == 0) {
    j["x_min"] = c.x_min;
    j["x_max"] = c.x_max;
    j["xi_min"] = c.xi_min;
    j["xi_max"] = c.xi_max;
    j["n_x"] = c.n_x;
    j["n_xi"] = c.n_xi;
  }
  j["h"] = c.h;
  j["t_half"] = c.t_half;
  j["n_t"] = c.n_t;
  j["T"] = c.T;
  j["symbol"] = c.symbol;
  if (!c.f0_file.empty()) j["f0_file"] = c.f0_file;
  if (!c.matrix.empty()) j["matrix"] = c.matrix;
  if (!c.in_file.empty()) j["in_file"] = c.in_file;
  if (!c.csv_out.empty()) j["csv_out"] = c.csv_out;
  if (!c.trace_re.empty() || !c.trace_im.empty()) {
    j["trace_re"] = c.trace_re;
    j["trace_im"] = c.trace_im;
    j["trace_x0"] = c.trace_x0;
    j["trace_xi0"] = c.trace_xi0;
    j["trace_steps"] = c.trace_steps;
  }
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["n_random_trials"] = c.n_random_trials;
  j["skip_gate"] = c.skip_gate;
  j["margin"] = c.margin;
  j["bisect_steps"] = c.bisect_steps;
  j["tol_rank"] = c.tol_rank;
  j["tol_zero"] = c.tol_zero;
  j["tol_slack"] = c.tol_slack;
  j["tol_resid"] = c.tol_resid;
  return j;
}

PhaseGrid config_grid(const RunConfig& c) {
  if (c.matched_n > 0) return PhaseGrid::matched_square(c.matched_n, c.h);
  PhaseGrid g;
  g.x_min = c.x_min;
  g.x_max = c.x_max;
  g.n_x = c.n_x;
  g.xi_min = c.xi_min;
  g.xi_max = c.xi_max;
  g.n_xi = c.n_xi;
  g.h = c.h;
  g.validate();
  return g;
}

TimeGrid config_time(const RunConfig& c) {
  return TimeGrid::symmetric(c.t_half, c.n_t, c.T);
}

ScalarField config_symbol_field(const RunConfig& c) {
  const PhaseGrid g = config_grid(c);
  const TimeGrid tg = config_time(c);
  std::string kind = "builtin", body = c.symbol;
  const std::size_t colon = c.symbol.find(':');
  if (colon != std::string::npos) {
    kind = c.symbol.substr(0, colon);
    body = c.symbol.substr(colon + 1);
  }
  if (kind == "builtin") return sample_scalar(builtin_symbol(body), g, tg);
  if (kind == "expr") return sample_scalar(compile_expr(body), g, tg);
  if (kind == "random")
    return sample_scalar(random_compliant_symbol(c.seed), g, tg);
  if (kind == "file") {
    AnyField any = read_field(body);
    if (any.kind != kPslfScalar)
      throw Error("config: symbol file " + body + " is not a scalar field");
    return std::move(any.scalar);
  }
  throw Error("config: unknown symbol kind '" + kind + "'");
}

}  // namespace psolv
