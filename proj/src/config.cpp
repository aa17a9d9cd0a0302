#include "heatsleuth/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "heatsleuth/errors.hpp"
#include "heatsleuth/spectral.hpp"

namespace heatsleuth {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// expr := term (('+'|'-') term)*, term := unary (('*'|'/') unary)*,
// unary := '-' unary | '+' unary | primary, primary := number | pi | '(' expr ')'
class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : s_(text) {}

  double parse() {
    const double v = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("bad expression '" + std::string(s_) + "': " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) {
        v *= unary();
      } else if (eat('/')) {
        const double d = unary();
        if (d == 0.0) fail("division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return primary();
  }
  double primary() {
    skip();
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      std::size_t end = pos_;
      while (end < s_.size() && std::isalnum(static_cast<unsigned char>(s_[end]))) ++end;
      const std::string word = lower(std::string(s_.substr(pos_, end - pos_)));
      pos_ = end;
      if (word == "pi") return kPi;
      fail("unknown name '" + word + "'");
    }
    const std::string rest(s_.substr(pos_));
    char* stop = nullptr;
    const double v = std::strtod(rest.c_str(), &stop);
    if (stop == rest.c_str()) fail("expected a number");
    pos_ += static_cast<std::size_t>(stop - rest.c_str());
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double as_number(const std::string& v) { return evaluate_expression(v); }

int as_int(const std::string& v) {
  const double x = as_number(v);
  if (std::abs(x - std::round(x)) > 1e-9 || std::abs(x) > 2e9) {
    throw ValidationError("expected an integer, got '" + v + "'");
  }
  return static_cast<int>(std::llround(x));
}

std::uint64_t as_seed(const std::string& v) {
  std::size_t used = 0;
  unsigned long long s = 0;
  try {
    s = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || v[0] == '-') {
    throw ValidationError("expected a non-negative integer seed, got '" + v + "'");
  }
  return s;
}

bool as_bool(const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ValidationError("expected true/false, got '" + v + "'");
}

std::vector<double> as_list(const std::string& v) {
  std::vector<double> out;
  for (const std::string& item : split_list(v)) out.push_back(as_number(item));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"name", [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
      {"shape", [](ExperimentConfig&, const std::string&) {}},  // handled up front
      {"fourier_order",
       [](ExperimentConfig& c, const std::string& v) { c.truth.fourier_order = as_int(v); }},
      {"xi_true", [](ExperimentConfig& c, const std::string& v) { c.truth.xi = as_list(v); }},
      {"b",
       [](ExperimentConfig& c, const std::string& v) {
         c.strength = as_number(v);
         if (!(c.strength > 0.0)) throw ValidationError("source strength must be positive");
       }},
      {"sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.sigma = as_number(v);
         if (!(c.sigma >= 0.0)) throw ValidationError("noise level must be >= 0");
       }},
      {"dt", [](ExperimentConfig& c, const std::string& v) { c.dt = as_number(v); }},
      {"time_refine",
       [](ExperimentConfig& c, const std::string& v) {
         c.time_refine = lower(v) == "auto" ? 0 : as_int(v);
         if (c.time_refine < 0) throw ValidationError("time_refine must be auto or >= 1");
       }},
      {"fine_nodes", [](ExperimentConfig& c, const std::string& v) { c.fine = grid_from_nodes(as_int(v)); }},
      {"fine_elements",
       [](ExperimentConfig& c, const std::string& v) { c.fine = {as_int(v), as_int(v)}; }},
      {"fine_nr", [](ExperimentConfig& c, const std::string& v) { c.fine.n_r = as_int(v); }},
      {"fine_ntheta", [](ExperimentConfig& c, const std::string& v) { c.fine.n_theta = as_int(v); }},
      {"coarse_nodes",
       [](ExperimentConfig& c, const std::string& v) { c.coarse = grid_from_nodes(as_int(v)); }},
      {"coarse_elements",
       [](ExperimentConfig& c, const std::string& v) { c.coarse = {as_int(v), as_int(v)}; }},
      {"coarse_nr", [](ExperimentConfig& c, const std::string& v) { c.coarse.n_r = as_int(v); }},
      {"coarse_ntheta",
       [](ExperimentConfig& c, const std::string& v) { c.coarse.n_theta = as_int(v); }},
      {"load_points", [](ExperimentConfig& c, const std::string& v) { c.load_points = as_int(v); }},
      {"N", [](ExperimentConfig& c, const std::string& v) { c.sampler.total = as_int(v); }},
      {"N1", [](ExperimentConfig& c, const std::string& v) { c.sampler.burn_in = as_int(v); }},
      {"k0", [](ExperimentConfig& c, const std::string& v) { c.sampler.cov_period = as_int(v); }},
      {"beta1", [](ExperimentConfig& c, const std::string& v) { c.sampler.beta1 = as_number(v); }},
      {"beta2", [](ExperimentConfig& c, const std::string& v) { c.sampler.beta2 = as_number(v); }},
      {"jitter", [](ExperimentConfig& c, const std::string& v) { c.sampler.jitter = as_number(v); }},
      {"tune", [](ExperimentConfig& c, const std::string& v) { c.sampler.tune = as_bool(v); }},
      {"tune_window",
       [](ExperimentConfig& c, const std::string& v) { c.sampler.tune_window = as_int(v); }},
      {"tune_fraction",
       [](ExperimentConfig& c, const std::string& v) { c.sampler.tune_fraction = as_number(v); }},
      {"tune_rate",
       [](ExperimentConfig& c, const std::string& v) { c.sampler.tune_rate = as_number(v); }},
      {"target_acceptance",
       [](ExperimentConfig& c, const std::string& v) { c.sampler.target_acceptance = as_number(v); }},
      {"beta_min", [](ExperimentConfig& c, const std::string& v) { c.sampler.beta_min = as_number(v); }},
      {"beta_max", [](ExperimentConfig& c, const std::string& v) { c.sampler.beta_max = as_number(v); }},
      {"m", [](ExperimentConfig& c, const std::string& v) { c.strategy.m = as_int(v); }},
      {"c1", [](ExperimentConfig& c, const std::string& v) { c.strategy.c1 = as_number(v); }},
      {"c", [](ExperimentConfig& c, const std::string& v) { c.strategy.speed = as_number(v); }},
      {"Nt",
       [](ExperimentConfig& c, const std::string& v) { c.strategy.samples_per_window = as_int(v); }},
      {"window_steps",
       [](ExperimentConfig& c, const std::string& v) { c.strategy.window_steps = as_int(v); }},
      {"delta_theta",
       [](ExperimentConfig& c, const std::string& v) {
         c.delta_theta_auto = lower(v) == "auto";
         if (!c.delta_theta_auto) c.strategy.delta_theta = as_number(v);
       }},
      {"theta0", [](ExperimentConfig& c, const std::string& v) { c.theta0 = as_number(v); }},
      {"max_windows",
       [](ExperimentConfig& c, const std::string& v) { c.strategy.max_windows = as_int(v); }},
      {"direction_source",
       [](ExperimentConfig& c, const std::string& v) {
         const std::string s = lower(v);
         if (s == "current") c.strategy.direction_source = DirectionSource::Current;
         else if (s == "previous") c.strategy.direction_source = DirectionSource::PreviousWindow;
         else throw ValidationError("direction_source must be current or previous");
       }},
      {"warm_start",
       [](ExperimentConfig& c, const std::string& v) {
         const std::string s = lower(v);
         if (s == "mean") c.warm_start = WarmStart::Mean;
         else if (s == "best") c.warm_start = WarmStart::Best;
         else if (s == "prior") c.warm_start = WarmStart::Prior;
         else throw ValidationError("warm_start must be mean, best or prior");
       }},
      {"start_draws",
       [](ExperimentConfig& c, const std::string& v) {
         c.start_draws = as_int(v);
         if (c.start_draws < 0) throw ValidationError("must be >= 0");
       }},
      {"polish_evals",
       [](ExperimentConfig& c, const std::string& v) {
         c.polish_evals = as_int(v);
         if (c.polish_evals < 0) throw ValidationError("must be >= 0");
       }},
      {"xi_start", [](ExperimentConfig& c, const std::string& v) { c.xi_start = as_list(v); }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = as_seed(v); }},
      {"sampler_seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.sampler_seed = as_seed(v);
         c.sampler_seed_set = true;
       }},
      {"out", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      {"allow_inverse_crime",
       [](ExperimentConfig& c, const std::string& v) { c.allow_inverse_crime = as_bool(v); }},
      {"basis_size", [](ExperimentConfig& c, const std::string& v) { c.basis_size = as_int(v); }},
  };
  return table;
}

struct Entry {
  std::string key;
  std::string value;
  std::string where;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

GridSpec grid_from_nodes(int nodes) {
  if (nodes < 2) throw ValidationError("node count must be >= 2");
  return {nodes / 2, nodes / 2};
}

double evaluate_expression(std::string_view text) {
  const double v = ExpressionParser(text).parse();
  if (!std::isfinite(v)) throw ValidationError("expression '" + std::string(text) + "' is not finite");
  return v;
}

ExperimentConfig default_config(ShapeKind kind) {
  ExperimentConfig c;
  c.sampler.burn_in = 0;
  c.sampler.total = 10000;
  c.sampler.cov_period = 2500;
  c.strategy.m = 10;
  c.strategy.c1 = 1.0 / 20.0;
  c.strategy.speed = 20.0 * kPi;
  c.strategy.samples_per_window = 80;
  c.strategy.window_steps = 80;
  switch (kind) {
    case ShapeKind::Circle:
      c.name = "circle";
      c.truth = {kind, {0.7, kPi / 2.0, 0.2}, 0};
      c.theta0 = 26.0 * kPi / 40.0;
      break;
    case ShapeKind::Kite:
      c.name = "kite";
      c.truth = {kind, {0.4, kPi / 3.0, 0.2}, 0};
      c.theta0 = 26.0 * kPi / 40.0;
      break;
    case ShapeKind::FourLeaf:
      c.name = "fourleaf";
      c.truth = {kind, {0.4, kPi / 2.0, 0.7}, 0};
      c.theta0 = 29.0 * kPi / 40.0;
      break;
    case ShapeKind::FourierStar:
      c.name = "peanut";
      c.truth = {kind, {1.0, 0.0, 0.0, 0.0, 0.3}, 2};
      c.strength = 10.0;
      c.sigma = 0.01;
      c.sampler.burn_in = 1000;
      c.sampler.total = 15000;
      c.strategy.m = 15;
      c.strategy.speed = 30.0 * kPi;
      c.theta0 = 4.0 * kPi / 40.0;
      break;
  }
  return c;
}

int auto_time_refine(const StrategyParams& p, double dt) {
  std::vector<double> times;
  for (int mult : {p.m, p.m / 2}) times.push_back(mult * p.c1 * kPi / p.speed);
  for (int r = 1; r <= 1000; ++r) {
    bool whole = true;
    for (double t : times) {
      const double steps = t * r / dt;
      if (std::abs(steps - std::round(steps)) > 1e-6) whole = false;
    }
    if (whole) return r;
  }
  throw ValidationError("travel times are not commensurate with dt; set time_refine explicitly");
}

int effective_refine(const ExperimentConfig& c) {
  return c.time_refine > 0 ? c.time_refine : auto_time_refine(c.strategy, c.dt);
}

StrategyParams refined_strategy(const ExperimentConfig& c) {
  const int r = effective_refine(c);
  StrategyParams p = c.strategy;
  p.dt = c.dt / r;
  p.window_steps = c.strategy.window_steps * r;
  return p;
}

void finalize(ExperimentConfig& c) {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw ValidationError("config key '" + key + "': " + msg);
  };
  try {
    c.truth = make_shape(c.truth.kind, c.truth.xi, c.truth.fourier_order);
  } catch (const ValidationError& e) {
    fail("xi_true", e.what());
  }
  if (max_boundary_radius(c.truth) >= 1.0) {
    c.warnings.push_back("true source extends outside the unit disc; only its part inside "
                         "the disc acts as a source");
  }
  if (!(c.strength > 0.0)) fail("b", "source strength must be positive");
  if (!(c.sigma >= 0.0)) fail("sigma", "noise level must be >= 0");
  if (!(c.dt > 0.0)) fail("dt", "must be positive");
  if (c.load_points < 1) fail("load_points", "must be >= 1");
  for (auto [key, g] : {std::pair{"fine", c.fine}, std::pair{"coarse", c.coarse}}) {
    if (g.n_r < 4 || g.n_theta < 4) {
      fail(std::string(key) + "_elements", "need at least 4 elements per direction");
    }
  }
  const bool finer = c.fine.n_r > c.coarse.n_r || c.fine.n_theta > c.coarse.n_theta;
  if (!finer) {
    if (!c.allow_inverse_crime) {
      fail("fine_elements",
           "the truth grid must be strictly finer than the inversion grid (inverse crime); "
           "pass --allow-inverse-crime to override");
    }
    c.warnings.push_back("inverse crime: the truth grid is not finer than the inversion grid");
  }
  if (c.basis_size < 1) fail("basis_size", "must be >= 1");
  if (c.delta_theta_auto) c.strategy.delta_theta = kPi / c.coarse.n_theta;
  try {
    validate(c.sampler);
  } catch (const ValidationError& e) {
    fail("N/N1/k0/beta", e.what());
  }
  if (c.sampler.burn_in > 0 && c.sampler.burn_in < 2) fail("N1", "must be 0 or >= 2");
  if (c.time_refine < 0) fail("time_refine", "must be auto or >= 1");
  try {
    validate(refined_strategy(c));
  } catch (const ValidationError& e) {
    fail("m/c1/c/Nt/window_steps", e.what());
  }
  if (!c.xi_start.empty()) {
    if (c.xi_start.size() != parameter_count(c.truth.kind, c.truth.fourier_order)) {
      fail("xi_start", "length does not match the shape parameterization");
    }
    if (!is_valid(ShapeParams{c.truth.kind, c.xi_start, c.truth.fourier_order})) {
      fail("xi_start", "not an admissible shape");
    }
  }
  if (!c.sampler_seed_set) c.sampler_seed = c.seed;

  // the first move goes to theta0 +- d; both candidate pairs are checked
  const StrategyParams p = c.strategy;
  const double d = p.m * p.c1 * kPi;
  for (double other : {c.theta0 + d, c.theta0 - d}) {
    if (!check_uniqueness_condition(c.theta0, other)) {
      c.warnings.push_back("dwell angles " + fmt(c.theta0) + " and " + fmt(other) +
                           " differ by a rational multiple of pi; the two-sensor uniqueness "
                           "condition fails for this pair");
      break;
    }
  }
}

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    const std::string where = "line " + std::to_string(number);
    if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ValidationError(where + ": missing key");
    if (value.empty()) throw ValidationError(where + ": key '" + key + "' has no value");
    entries.push_back({key, value, where});
  }
  for (const auto& [key, value] : overrides) entries.push_back({key, value, "--" + key});

  ShapeKind kind = ShapeKind::Circle;
  bool have_shape = false;
  for (const Entry& e : entries) {
    if (e.key != "shape") continue;
    try {
      kind = parse_shape_kind(lower(e.value));
    } catch (const ValidationError& err) {
      throw ValidationError(e.where + ": key 'shape': " + err.what());
    }
    have_shape = true;
  }
  if (!have_shape) throw ValidationError("config: missing required key 'shape'");

  ExperimentConfig config = default_config(kind);
  bool order_changed = false, xi_given = false;
  for (const Entry& e : entries) {
    const auto it = setters().find(e.key);
    if (it == setters().end()) {
      throw ValidationError(e.where + ": unknown key '" + e.key + "'");
    }
    try {
      it->second(config, e.value);
    } catch (const ValidationError& err) {
      throw ValidationError(e.where + ": key '" + e.key + "': " + err.what());
    }
    if (e.key == "fourier_order") order_changed = true;
    if (e.key == "xi_true") xi_given = true;
  }
  if (order_changed && !xi_given) {
    // unit-half circle at the new order
    config.truth.xi.assign(2 * config.truth.fourier_order + 1, 0.0);
    config.truth.xi[0] = 1.0;
  }
  finalize(config);
  return config;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
  };
  os << "name = " << c.name << "\n";
  os << "shape = " << to_string(c.truth.kind) << "\n";
  if (c.truth.kind == ShapeKind::FourierStar) os << "fourier_order = " << c.truth.fourier_order << "\n";
  os << "xi_true = " << list(c.truth.xi) << "\n";
  os << "b = " << fmt(c.strength) << "\n";
  os << "sigma = " << fmt(c.sigma) << "\n";
  os << "dt = " << fmt(c.dt) << "\n";
  os << "time_refine = " << (c.time_refine > 0 ? std::to_string(c.time_refine) : "auto") << "\n";
  os << "fine_nr = " << c.fine.n_r << "\nfine_ntheta = " << c.fine.n_theta << "\n";
  os << "coarse_nr = " << c.coarse.n_r << "\ncoarse_ntheta = " << c.coarse.n_theta << "\n";
  os << "load_points = " << c.load_points << "\n";
  const SamplerConfig& s = c.sampler;
  os << "N = " << s.total << "\nN1 = " << s.burn_in << "\nk0 = " << s.cov_period << "\n";
  os << "beta1 = " << fmt(s.beta1) << "\nbeta2 = " << fmt(s.beta2) << "\n";
  os << "jitter = " << fmt(s.jitter) << "\ntune = " << (s.tune ? "true" : "false") << "\n";
  os << "tune_window = " << s.tune_window << "\ntune_fraction = " << fmt(s.tune_fraction) << "\n";
  os << "tune_rate = " << fmt(s.tune_rate) << "\ntarget_acceptance = " << fmt(s.target_acceptance)
     << "\n";
  os << "beta_min = " << fmt(s.beta_min) << "\nbeta_max = " << fmt(s.beta_max) << "\n";
  const StrategyParams& p = c.strategy;
  os << "m = " << p.m << "\nc1 = " << fmt(p.c1) << "\nc = " << fmt(p.speed) << "\n";
  os << "Nt = " << p.samples_per_window << "\nwindow_steps = " << p.window_steps << "\n";
  os << "delta_theta = " << (c.delta_theta_auto ? "auto" : fmt(p.delta_theta)) << "\n";
  os << "theta0 = " << fmt(c.theta0) << "\nmax_windows = " << p.max_windows << "\n";
  os << "direction_source = "
     << (p.direction_source == DirectionSource::PreviousWindow ? "previous" : "current") << "\n";
  os << "warm_start = "
     << (c.warm_start == WarmStart::Mean ? "mean" : c.warm_start == WarmStart::Best ? "best" : "prior")
     << "\n";
  os << "start_draws = " << c.start_draws << "\n";
  os << "polish_evals = " << c.polish_evals << "\n";
  if (!c.xi_start.empty()) os << "xi_start = " << list(c.xi_start) << "\n";
  os << "seed = " << c.seed << "\n";
  if (c.sampler_seed_set) os << "sampler_seed = " << c.sampler_seed << "\n";
  os << "out = " << c.out_dir << "\n";
  os << "allow_inverse_crime = " << (c.allow_inverse_crime ? "true" : "false") << "\n";
  os << "basis_size = " << c.basis_size << "\n";
  return os.str();
}

}  // namespace heatsleuth
