#include "kgpair/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace kgpair {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<std::vector<double>> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(trim(item));
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::optional<bool> parse_switch(const std::string& s) {
  if (s == "on" || s == "true" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "no") return false;
  return std::nullopt;
}

template <class E>
std::optional<E> lookup(const std::string& s, const std::vector<std::pair<const char*, E>>& table) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  return std::nullopt;
}

template <class E>
std::string names(const std::vector<std::pair<const char*, E>>& table) {
  std::string out;
  for (const auto& [name, value] : table) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

const std::vector<std::pair<const char*, RunKind>> kKinds = {
    {"sweep", RunKind::Sweep},       {"evolve", RunKind::Evolve},
    {"critical", RunKind::Critical}, {"backreact", RunKind::BackReact},
    {"density", RunKind::Density},
};

const std::vector<std::pair<const char*, FieldFamily>> kFamilies = {
    {"box", FieldFamily::BoxOnly},
    {"step_with_b", FieldFamily::StepWithB},
};

const std::vector<std::pair<const char*, DerivativeScheme>> kSchemes = {
    {"spectral", DerivativeScheme::Spectral},
    {"fd3", DerivativeScheme::FiniteDifference3},
};

const std::vector<std::pair<const char*, Transition>> kTransitions = {
    {"emergence", Transition::Emergence},
    {"coalescence", Transition::Coalescence},
    {"anticoalescence", Transition::Anticoalescence},
    {"overlap", Transition::Overlap},
};

class Parser {
 public:
  ParseResult run(std::string_view text) {
    register_keys();
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        error(lineno, "expected 'key = value'");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const auto h = handlers_.find(key);
      if (h == handlers_.end()) {
        error(lineno, "unknown key '" + key + "'");
        continue;
      }
      if (seen_.count(key)) {
        error(lineno, "duplicate key '" + key + "' (first set on line " +
                          std::to_string(seen_[key]) + ")");
        continue;
      }
      if (value.empty()) {
        error(lineno, "key '" + key + "' has no value");
        continue;
      }
      seen_[key] = lineno;
      h->second(value, lineno);
    }
    check_required();
    if (diagnostics_.empty()) check_values();
    ParseResult r;
    r.diagnostics = std::move(diagnostics_);
    if (r.diagnostics.empty()) r.config = cfg_;
    return r;
  }

 private:
  void error(int line, std::string message) { diagnostics_.push_back({line, std::move(message)}); }

  int line_of(const std::string& key) const {
    const auto it = seen_.find(key);
    return it == seen_.end() ? 0 : it->second;
  }

  bool has(const std::string& key) const { return seen_.count(key) > 0; }

  void need(const std::string& key, const std::string& why) {
    if (!has(key)) error(0, "missing required field '" + key + "' " + why);
  }

  void number(const std::string& key, double& target) {
    handlers_[key] = [this, key, &target](const std::string& v, int line) {
      if (const auto d = parse_double(v)) {
        target = *d;
      } else {
        error(line, "'" + key + "' expects a number, got '" + v + "'");
      }
    };
  }

  void optional_number(const std::string& key, std::optional<double>& target) {
    handlers_[key] = [this, key, &target](const std::string& v, int line) {
      if (const auto d = parse_double(v)) {
        target = *d;
      } else {
        error(line, "'" + key + "' expects a number, got '" + v + "'");
      }
    };
  }

  void integer(const std::string& key, int& target) {
    handlers_[key] = [this, key, &target](const std::string& v, int line) {
      if (const auto d = parse_int(v)) {
        target = *d;
      } else {
        error(line, "'" + key + "' expects an integer, got '" + v + "'");
      }
    };
  }

  void list(const std::string& key, std::vector<double>& target) {
    handlers_[key] = [this, key, &target](const std::string& v, int line) {
      if (const auto d = parse_list(v)) {
        target = *d;
      } else {
        error(line, "'" + key + "' expects a comma-separated list of numbers");
      }
    };
  }

  void toggle(const std::string& key, bool& target) {
    handlers_[key] = [this, key, &target](const std::string& v, int line) {
      if (const auto d = parse_switch(v)) {
        target = *d;
      } else {
        error(line, "'" + key + "' expects on or off, got '" + v + "'");
      }
    };
  }

  template <class E>
  void choice(const std::string& key, const std::string& what,
              const std::vector<std::pair<const char*, E>>& table, E& target) {
    handlers_[key] = [this, key, what, &table, &target](const std::string& v, int line) {
      if (const auto d = lookup(v, table)) {
        target = *d;
      } else {
        error(line, "unknown " + what + " '" + v + "' (allowed: " + names(table) + ")");
      }
    };
  }

  void register_keys() {
    choice("kind", "run kind", kKinds, cfg_.kind);
    handlers_["comment"] = [this](const std::string& v, int) { cfg_.comment = v; };
    choice("family", "field family", kFamilies, cfg_.family);
    choice("scheme", "derivative scheme", kSchemes, cfg_.scheme);
    integer("grid.points", cfg_.points);
    number("grid.length", cfg_.length);
    number("constants.hbar", cfg_.constants.hbar);
    number("constants.mass", cfg_.constants.mass);
    number("constants.c", cfg_.constants.c);
    number("constants.charge", cfg_.constants.charge);
    number("box.width", cfg_.box_width);
    number("box.edge", cfg_.box_edge);
    number("step.edge_E", cfg_.step_edge);
    number("step.edge_B", cfg_.magnetic_edge);
    number("step.A0", cfg_.A0);
    optional_number("transverse.p_y", cfg_.p_y);
    optional_number("transverse.p_z", cfg_.p_z);
    optional_number("V0", cfg_.V0);
    list("V0.list", cfg_.V0_list);
    optional_number("V0.start", start_);
    optional_number("V0.stop", stop_);
    optional_number("V0.step", step_);
    choice("critical.transition", "transition", kTransitions, cfg_.transition);
    optional_number("critical.from", cfg_.from);
    optional_number("critical.to", cfg_.to);
    number("critical.resolution", cfg_.resolution);
    handlers_["t_max"] = [this](const std::string& v, int line) {
      if (v == "auto") {
        cfg_.t_max_auto = true;
      } else if (const auto d = parse_double(v)) {
        cfg_.t_max = *d;
      } else {
        error(line, "'t_max' expects a number or 'auto', got '" + v + "'");
      }
    };
    integer("samples", cfg_.samples);
    optional_number("dt", cfg_.dt);
    integer("record_every", cfg_.record_every);
    toggle("backreaction", cfg_.backreaction);
    list("density.times", cfg_.density_times);
    number("tolerances.im_eps", cfg_.im_eps);
    number("tolerances.pair_eps", cfg_.pair_eps);
    number("tolerances.biorth_eps", cfg_.biorth_eps);
    number("tolerances.loc_threshold", cfg_.loc_threshold);
    handlers_["output"] = [this](const std::string& v, int) { cfg_.output = v; };
    toggle("convergence", cfg_.convergence);
  }

  void check_required() {
    need("kind", "(allowed: " + names(kKinds) + ")");
    need("family", "(allowed: " + names(kFamilies) + ")");
    if (!has("kind") || !has("family")) return;

    const bool box = cfg_.family == FieldFamily::BoxOnly;
    const char* box_keys[] = {"box.width", "box.edge"};
    const char* step_keys[] = {"step.edge_E", "step.edge_B", "step.A0"};
    for (const char* k : box_keys) {
      if (box) {
        need(k, "for family box");
      } else if (has(k)) {
        error(line_of(k), std::string("'") + k + "' does not apply to family step_with_b");
      }
    }
    for (const char* k : step_keys) {
      if (!box) {
        need(k, "for family step_with_b");
      } else if (has(k)) {
        error(line_of(k), std::string("'") + k + "' does not apply to family box");
      }
    }

    const std::string kind = "for kind " + std::string(to_string(cfg_.kind));
    switch (cfg_.kind) {
      case RunKind::Sweep: {
        const bool range = has("V0.start") || has("V0.stop") || has("V0.step");
        if (has("V0.list") && range) {
          error(line_of("V0.list"), "give either 'V0.list' or 'V0.start/V0.stop/V0.step', not both");
        } else if (!has("V0.list")) {
          if (!range) {
            error(0, "missing required field 'V0.list' (or V0.start/V0.stop/V0.step) " + kind);
          } else {
            need("V0.start", kind);
            need("V0.stop", kind);
            need("V0.step", kind);
          }
        }
        break;
      }
      case RunKind::Evolve:
        need("V0", kind);
        need("t_max", kind);
        break;
      case RunKind::Density:
        need("V0", kind);
        break;
      case RunKind::Critical:
        need("critical.transition", kind);
        need("critical.from", kind);
        need("critical.to", kind);
        break;
      case RunKind::BackReact:
        need("V0", kind);
        need("dt", kind);
        need("t_max", kind);
        if (!box) error(line_of("family"), "kind backreact needs family box");
        if (cfg_.t_max_auto) error(line_of("t_max"), "kind backreact needs a numeric t_max");
        break;
    }
  }

  void check_values() {
    auto guard = [this](const std::string& key, auto&& fn) {
      try {
        fn();
      } catch (const ConfigError& e) {
        error(line_of(key), e.what());
      }
    };
    guard("grid.points", [&] { cfg_.grid().spacing(); });
    guard("constants.c", [&] { cfg_.constants.validate(); });
    guard("tolerances.im_eps", [&] { cfg_.tolerances().validate(); });
    guard("family", [&] {
      FieldConfig f = cfg_.family_spec().at(cfg_.V0.value_or(1.0));
      validate(f);
    });

    if (has("V0.start")) {
      const double a = *start_;
      const double b = *stop_;
      const double s = *step_;
      if (!(s > 0.0)) {
        error(line_of("V0.step"), "'V0.step' must be positive");
      } else {
        const double span = std::abs(b - a);
        const long n = std::lround(span / s);
        if (std::abs(n * s - span) > 1e-9 * std::max(1.0, span) || n < 1) {
          error(line_of("V0.step"), "'V0.step' must divide the V0.start..V0.stop range");
        } else {
          const double dir = b >= a ? 1.0 : -1.0;
          for (long i = 0; i <= n; ++i) cfg_.V0_list.push_back(a + dir * s * static_cast<double>(i));
        }
      }
    }
    if (cfg_.kind == RunKind::Sweep && cfg_.V0_list.size() >= 2) {
      const double d0 = cfg_.V0_list[1] - cfg_.V0_list[0];
      for (size_t i = 1; i < cfg_.V0_list.size(); ++i) {
        const double d = cfg_.V0_list[i] - cfg_.V0_list[i - 1];
        if (d == 0.0 || (d > 0.0) != (d0 > 0.0)) {
          error(line_of("V0.list"), "V0 values must be strictly monotone");
          break;
        }
      }
    }
    if (cfg_.kind == RunKind::Critical && cfg_.from && cfg_.to && *cfg_.from == *cfg_.to) {
      error(line_of("critical.to"), "critical bracket is empty");
    }
    if (!(cfg_.resolution > 0.0)) error(line_of("critical.resolution"), "must be positive");
    if (cfg_.t_max && !(*cfg_.t_max > 0.0)) error(line_of("t_max"), "'t_max' must be positive");
    if (cfg_.dt && !(*cfg_.dt > 0.0)) error(line_of("dt"), "'dt' must be positive");
    if (cfg_.samples < 16) error(line_of("samples"), "'samples' must be at least 16");
    if (cfg_.record_every < 1) error(line_of("record_every"), "'record_every' must be >= 1");
    for (double t : cfg_.density_times) {
      if (t < 0.0) error(line_of("density.times"), "density times must be non-negative");
    }
  }

  ExperimentConfig cfg_;
  std::optional<double> start_, stop_, step_;
  std::map<std::string, std::function<void(const std::string&, int)>> handlers_;
  std::map<std::string, int> seen_;
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace

std::string_view to_string(RunKind k) {
  for (const auto& [name, value] : kKinds) {
    if (value == k) return name;
  }
  return "evolve";
}

Grid ExperimentConfig::grid_with(int n) const {
  return make_grid(n, length * constants.compton_length());
}

FamilySpec ExperimentConfig::family_spec() const {
  const double lc = constants.compton_length();
  const double mc = constants.momentum_unit();
  FamilySpec f;
  if (family == FieldFamily::BoxOnly) {
    f = FamilySpec::box(box_width * lc, box_edge * lc);
  } else {
    f = FamilySpec::step_with_b(step_edge * lc, magnetic_edge * lc, A0 * mc / constants.charge,
                                constants);
  }
  if (p_y) f.transverse.p_y = *p_y * mc;
  if (p_z) f.transverse.p_z = *p_z * mc;
  return f;
}

Tolerances ExperimentConfig::tolerances() const {
  Tolerances t;
  t.im_eps = im_eps * constants.rest_energy();
  t.pair_eps = pair_eps * constants.rest_energy();
  t.biorth_eps = biorth_eps;
  t.loc_threshold = loc_threshold;
  return t;
}

SpectrumProblem ExperimentConfig::problem_with(int n) const {
  return SpectrumProblem{grid_with(n), family_spec(), constants, scheme, tolerances()};
}

ParseResult parse_config(std::string_view text) { return Parser().run(text); }

ParseResult load_config(const std::filesystem::path& path, std::string* text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult r;
    r.diagnostics.push_back({0, "cannot read config file " + path.string()});
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (text) *text = ss.str();
  return parse_config(ss.str());
}

std::string format_diagnostic(const std::string& source, const Diagnostic& d) {
  if (d.line > 0) return source + ":" + std::to_string(d.line) + ": " + d.message;
  return source + ": " + d.message;
}

}  // namespace kgpair
