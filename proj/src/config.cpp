#include "molbat/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "molbat/battery.hpp"
#include "molbat/records.hpp"

namespace molbat {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? std::string("config") : "key '" + path + "'") + ": " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Object accessor that remembers which keys were read so that leftovers can
// be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const std::string& path() const { return path_; }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(join(path_, key), "missing");
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    if (!has(key)) {
      if (def) return *def;
      fail(join(path_, key), "missing");
    }
    const json& v = raw(key);
    if (!v.is_number()) fail(join(path_, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(join(path_, key), "must be finite");
    return x;
  }

  long long integer(const std::string& key, std::optional<long long> def = std::nullopt) {
    if (!has(key)) {
      if (def) return *def;
      fail(join(path_, key), "missing");
    }
    const json& v = raw(key);
    if (!v.is_number()) fail(join(path_, key), "expected an integer");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x != std::floor(x) || std::abs(x) > 1e15) fail(join(path_, key), "expected an integer");
    return static_cast<long long>(x);
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(join(path_, key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    if (!has(key)) {
      if (def) return *def;
      fail(join(path_, key), "missing");
    }
    const json& v = raw(key);
    if (!v.is_string()) fail(join(path_, key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(join(path_, key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(join(path_, key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
      if (!std::isfinite(out.back())) fail(join(path_, key) + "[" + std::to_string(i) + "]", "must be finite");
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key) {
    const json& v = raw(key);
    const std::string p = join(path_, key);
    if (!v.is_array() || v.empty()) fail(p, "expected a nonempty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!v[i].is_array()) fail(p, "expected an array of rows");
      if (i == 0) cols = v[i].size();
      if (v[i].size() != cols) fail(p, "rows have different lengths");
    }
    Eigen::MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < cols; ++k) {
        if (!v[i][k].is_number()) fail(p, "entries must be numbers");
        m(static_cast<Index>(i), static_cast<Index>(k)) = v[i][k].get<double>();
      }
    if (!m.allFinite()) fail(p, "entries must be finite");
    return m;
  }

  Reader sub(const std::string& key) { return Reader(raw(key), join(path_, key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail(join(path_, it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::string resolve(const std::string& base, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? file : (std::filesystem::path(base) / p).string();
}

RateProfile parse_profile(Reader r) {
  const std::string kind = r.string("kind");
  RateProfile out;
  if (kind == "flat") {
    out = FlatProfile{r.number("rate")};
  } else if (kind == "ohmic") {
    out = OhmicProfile{r.number("strength"), r.number("cutoff")};
  } else if (kind == "gaussian") {
    out = GaussianProfile{r.number("amplitude"), r.number("center"), r.number("width")};
  } else {
    fail(join(r.path(), "kind"), "expected flat, ohmic or gaussian");
  }
  r.finish();
  try {
    validate_profile(out);
  } catch (const InputError& e) {
    fail(r.path(), e.what());
  }
  return out;
}

CouplingSpectrum parse_spectrum(Reader r, const std::string& base) {
  const std::string kind = r.string("kind");
  try {
    if (kind == "thermal") {
      const RateProfile prof = parse_profile(r.sub("profile"));
      ThermalSpectrum s{prof, r.number("T")};
      r.finish();
      return CouplingSpectrum(s);
    }
    if (kind == "chemical") {
      const RateProfile prof = parse_profile(r.sub("profile"));
      ChemicalSpectrum s{prof, r.number("T1"), r.number("delta_g", 0.0)};
      r.finish();
      return CouplingSpectrum(s);
    }
    if (kind == "tabulated") {
      TabulatedSpectrum s;
      if (r.has("file")) {
        s = load_tabulated_spectrum(resolve(base, r.string("file")));
      } else {
        s.omega = r.numbers("omega");
        s.G = r.numbers("G");
      }
      r.finish();
      return CouplingSpectrum(s);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    fail(r.path(), e.what());
  }
  fail(join(r.path(), "kind"), "expected thermal, chemical or tabulated");
}

BatteryParams parse_battery(const json* j) {
  BatteryParams p;
  static const json empty = json::object();
  Reader r(j ? *j : empty, "battery");
  p.omega0 = r.number("omega0", p.omega0);
  p.xi0 = r.number("xi0", p.xi0);
  p.E_el = r.number("E_el", p.E_el);
  p.T = r.number("T", p.T);
  p.delta_mu = r.number("delta_mu", p.delta_mu);
  p.N = static_cast<Index>(r.integer("N", p.N));
  p.gamma = r.number("gamma", p.gamma);
  p.G1_at_0 = r.number("G1_at_0", p.G1_at_0);
  p.G2_at_0 = r.number("G2_at_0", p.G2_at_0);
  p.gamma_ex = r.number("gamma_ex", p.gamma_ex);
  r.finish();
  try {
    p.validate();
    require_truncation(p);
  } catch (const Error& e) {
    fail("battery", e.what());
  }
  return p;
}

ChargingSettings parse_charging(const json* j) {
  ChargingSettings c;
  if (!j) return c;
  Reader r(*j, "charging");
  c.sidebands = static_cast<int>(r.integer("sidebands", c.sidebands));
  c.eta = r.number("eta", c.eta);
  r.finish();
  if (c.sidebands < 1 || c.sidebands > 64) fail("charging.sidebands", "must be in [1, 64]");
  if (!(c.eta > 0.0)) fail("charging.eta", "must be > 0");
  return c;
}

EvolveSettings parse_evolve(const json* j) {
  if (!j) fail("evolve", "missing");
  Reader r(*j, "evolve");
  EvolveSettings e;
  e.times = r.numbers("times");
  const std::string init = r.string("initial", "empty");
  r.finish();
  if (e.times.empty()) fail("evolve.times", "must not be empty");
  for (double t : e.times)
    if (t < 0.0) fail("evolve.times", "times must be >= 0");
  if (init == "empty")
    e.initial = BatteryInitial::Empty;
  else if (init == "charged")
    e.initial = BatteryInitial::Charged;
  else
    fail("evolve.initial", "expected empty or charged");
  return e;
}

std::vector<double> parse_grid(Reader& r, const std::string& key) {
  const json& v = r.raw(key);
  const std::string p = join(r.path(), key);
  std::vector<double> grid;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(p, "expected numbers");
      grid.push_back(v[i].get<double>());
    }
  } else {
    Reader g(v, p);
    const double lo = g.number("min"), hi = g.number("max");
    const long long n = g.integer("points");
    g.finish();
    if (n < 3 || n > 100000) fail(p + ".points", "must be in [3, 100000]");
    if (!(hi > lo)) fail(p, "max must exceed min");
    for (long long i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  if (grid.size() < 3) fail(p, "need at least three grid points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail(p, "grid must be strictly ascending");
  return grid;
}

ExcitonSettings parse_exciton(const json* j) {
  if (!j) fail("exciton", "missing");
  Reader r(*j, "exciton");
  ExcitonSettings s;
  auto& p = s.params;
  p.band_a = r.numbers("band_a");
  p.band_b = r.numbers("band_b");
  p.Gamma_a = r.matrix("Gamma_a");
  p.Gamma_b = r.matrix("Gamma_b");
  p.gamma_inter = r.matrix("gamma_inter");
  p.T = r.number("T", p.T);
  if (r.has("hot_T")) {
    const json& h = r.raw("hot_T");
    if (h.is_number()) {
      p.hot_T = PiecewiseLinear::constant(h.get<double>());
    } else {
      Reader hr(h, "exciton.hot_T");
      p.hot_T.x = hr.numbers("x");
      p.hot_T.y = hr.numbers("y");
      hr.finish();
    }
  }
  p.delta_g = r.number("delta_g", p.delta_g);
  p.electrons = static_cast<int>(r.integer("electrons", p.electrons));
  s.delta_mu_grid = parse_grid(r, "delta_mu_grid");
  s.fit_exact_state = r.boolean("fit_exact_state", p.n_modes() <= 8);
  r.finish();
  try {
    p.validate();
  } catch (const Error& e) {
    fail("exciton", e.what());
  }
  if (p.n_modes() > 12) fail("exciton", "at most 12 modes are supported");
  if (s.fit_exact_state && p.n_modes() > 8) fail("exciton.fit_exact_state", "exact state needs at most 8 modes");
  return s;
}

BathCorrelation parse_correlation(Reader r, const std::string& base) {
  const std::string kind = r.string("kind");
  try {
    if (kind == "exponential") {
      ExponentialCorrelation e;
      e.c = r.number("c");
      e.kappa = r.number("kappa");
      e.Omega = r.number("Omega", 0.0);
      e.kms_T = r.number("kms_T", 0.0);
      r.finish();
      return BathCorrelation(e);
    }
    if (kind == "tabulated") {
      TabulatedCorrelation t;
      if (r.has("file")) {
        t = load_tabulated_correlation(resolve(base, r.string("file")));
      } else {
        t.tau = r.numbers("tau");
        const std::vector<double> re = r.numbers("re");
        std::vector<double> im = r.has("im") ? r.numbers("im") : std::vector<double>(re.size(), 0.0);
        if (re.size() != t.tau.size() || im.size() != t.tau.size()) fail(r.path(), "tau, re and im must have equal length");
        for (std::size_t i = 0; i < re.size(); ++i) t.F.push_back({re[i], im[i]});
      }
      r.finish();
      return BathCorrelation(t);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  fail(join(r.path(), "kind"), "expected exponential or tabulated");
}

RwcSettings parse_rwc(const json* j, const std::string& base) {
  if (!j) fail("rwc", "missing");
  Reader r(*j, "rwc");
  RwcSettings s;
  if (r.has("energies") == r.has("hamiltonian")) fail("rwc", "give exactly one of energies or hamiltonian");
  if (r.has("energies")) {
    const std::vector<double> e = r.numbers("energies");
    s.hamiltonian = ComplexMatrix::Zero(static_cast<Index>(e.size()), static_cast<Index>(e.size()));
    for (std::size_t i = 0; i < e.size(); ++i) s.hamiltonian(static_cast<Index>(i), static_cast<Index>(i)) = e[i];
  } else {
    s.hamiltonian = r.matrix("hamiltonian").cast<cplx>();
  }
  s.coupling = r.matrix("coupling").cast<cplx>();
  s.correlation = parse_correlation(r.sub("correlation"), base);
  s.lambda = r.number("lambda", 1.0);
  s.times = r.numbers("times");
  const std::string init = r.string("initial", "excited");
  s.with_lamb = r.boolean("with_lamb", false);
  r.finish();
  const Index d = s.hamiltonian.rows();
  if (d < 2 || d > 20 || s.hamiltonian.cols() != d) fail("rwc", "Hamiltonian must be square with 2 <= dim <= 20");
  if (s.coupling.rows() != d || s.coupling.cols() != d) fail("rwc.coupling", "shape must match the Hamiltonian");
  if (!is_hermitian(s.hamiltonian)) fail("rwc.hamiltonian", "must be symmetric");
  if (!is_hermitian(s.coupling)) fail("rwc.coupling", "must be symmetric");
  if (s.times.empty()) fail("rwc.times", "must not be empty");
  for (double t : s.times)
    if (t < 0.0) fail("rwc.times", "times must be >= 0");
  if (init == "ground")
    s.initial = RwcInitial::Ground;
  else if (init == "excited")
    s.initial = RwcInitial::Excited;
  else if (init == "mixed")
    s.initial = RwcInitial::Mixed;
  else if (init == "superposition")
    s.initial = RwcInitial::Superposition;
  else
    fail("rwc.initial", "expected ground, excited, mixed or superposition");
  return s;
}

ScenarioKind parse_kind(const std::string& s) {
  if (s == "battery-steady") return ScenarioKind::BatterySteady;
  if (s == "battery-evolve") return ScenarioKind::BatteryEvolve;
  if (s == "discharge-rate") return ScenarioKind::DischargeRate;
  if (s == "ergotropy") return ScenarioKind::Ergotropy;
  if (s == "exciton-factory") return ScenarioKind::ExcitonFactory;
  if (s == "rwc-compare") return ScenarioKind::RwcCompare;
  fail("scenario", "unknown scenario '" + s + "'");
}

std::vector<std::string> sections(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::BatterySteady: return {"battery", "charging"};
    case ScenarioKind::BatteryEvolve: return {"battery", "charging", "evolve"};
    case ScenarioKind::DischargeRate: return {"battery", "discharge"};
    case ScenarioKind::Ergotropy: return {"battery"};
    case ScenarioKind::ExcitonFactory: return {"exciton"};
    case ScenarioKind::RwcCompare: return {"rwc"};
  }
  return {};
}

const json* section(const json& doc, const char* name) { return doc.contains(name) ? &doc.at(name) : nullptr; }

PointConfig parse_point(const json& doc, ScenarioKind kind, const std::string& base) {
  PointConfig p;
  const bool battery = kind == ScenarioKind::BatterySteady || kind == ScenarioKind::BatteryEvolve ||
                       kind == ScenarioKind::DischargeRate || kind == ScenarioKind::Ergotropy;
  if (battery) p.battery = parse_battery(section(doc, "battery"));
  if (kind == ScenarioKind::BatterySteady || kind == ScenarioKind::BatteryEvolve)
    p.charging = parse_charging(section(doc, "charging"));
  if (kind == ScenarioKind::BatteryEvolve) p.evolve = parse_evolve(section(doc, "evolve"));
  if (kind == ScenarioKind::DischargeRate) {
    const json* d = section(doc, "discharge");
    if (!d) fail("discharge", "missing");
    Reader r(*d, "discharge");
    p.discharge_spectrum = parse_spectrum(r.sub("spectrum"), base);
    r.finish();
  }
  if (kind == ScenarioKind::ExcitonFactory) p.exciton = parse_exciton(section(doc, "exciton"));
  if (kind == ScenarioKind::RwcCompare) p.rwc = parse_rwc(section(doc, "rwc"), base);
  return p;
}

// Sets a number at a dotted path, creating intermediate objects.
void set_path(json& doc, const std::string& path, double value) {
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.size() < 2) fail("sweep", "parameter '" + path + "' must name a key inside a section");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
    if (!node->is_object()) fail(path, "is not inside an object");
  }
  const std::string& leaf = parts.back();
  if (node->contains(leaf) && !(*node)[leaf].is_number()) fail(path, "sweeps only apply to numeric keys");
  (*node)[leaf] = value;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

std::string scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::BatterySteady: return "battery-steady";
    case ScenarioKind::BatteryEvolve: return "battery-evolve";
    case ScenarioKind::DischargeRate: return "discharge-rate";
    case ScenarioKind::Ergotropy: return "ergotropy";
    case ScenarioKind::ExcitonFactory: return "exciton-factory";
    case ScenarioKind::RwcCompare: return "rwc-compare";
  }
  return "?";
}

ScenarioConfig parse_config(const std::string& text, const std::string& base_dir, const std::string& default_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON syntax error at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  cfg.hash = fnv1a64(doc.dump());

  Reader top(doc, "");
  const long long version = top.integer("version");
  if (version != kConfigVersion) fail("version", "unsupported schema version " + std::to_string(version));
  cfg.version = static_cast<int>(version);
  cfg.kind = parse_kind(top.string("scenario"));
  cfg.name = top.string("name", default_name);
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) fail("name", "must be a plain file stem");
  const long long seed = top.integer("seed", 0);
  if (seed < 0) fail("seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);

  if (top.has("tolerances")) {
    Reader t = top.sub("tolerances");
    auto& tol = cfg.tolerances;
    tol.stationary_trace_distance = t.number("stationary_trace_distance", tol.stationary_trace_distance);
    tol.cptp = t.number("cptp", tol.cptp);
    tol.rate_agreement = t.number("rate_agreement", tol.rate_agreement);
    tol.bound_slack = t.number("bound_slack", tol.bound_slack);
    tol.kms_ratio = t.number("kms_ratio", tol.kms_ratio);
    t.finish();
    for (double x : {tol.stationary_trace_distance, tol.cptp, tol.rate_agreement, tol.bound_slack, tol.kms_ratio})
      if (!(x > 0.0)) fail("tolerances", "all tolerances must be > 0");
  }
  if (top.has("output")) {
    Reader o = top.sub("output");
    cfg.out_dir = o.string("dir", cfg.out_dir);
    cfg.format = o.string("format", cfg.format);
    o.finish();
    if (cfg.format != "csv" && cfg.format != "json") fail("output.format", "expected csv or json");
  }
  if (top.has("sweep")) {
    const json& sw = top.raw("sweep");
    if (!sw.is_array()) fail("sweep", "expected an array");
    for (std::size_t i = 0; i < sw.size(); ++i) {
      Reader s(sw[i], "sweep[" + std::to_string(i) + "]");
      SweepSpec spec{s.string("parameter"), s.numbers("values")};
      s.finish();
      if (spec.values.empty()) fail(s.path() + ".values", "must not be empty");
      const std::string head = spec.parameter.substr(0, spec.parameter.find('.'));
      const auto allowed = sections(cfg.kind);
      if (std::find(allowed.begin(), allowed.end(), head) == allowed.end())
        fail(s.path() + ".parameter", "'" + spec.parameter + "' is not a parameter of " + scenario_name(cfg.kind));
      for (const auto& other : cfg.sweeps)
        if (other.parameter == spec.parameter) fail(s.path(), "parameter '" + spec.parameter + "' swept twice");
      cfg.sweeps.push_back(std::move(spec));
    }
  }
  for (const auto& s : sections(cfg.kind))
    if (top.has(s)) top.raw(s);
  top.finish();

  // Cartesian product, first sweep slowest.
  std::size_t total = 1;
  for (const auto& s : cfg.sweeps) {
    total *= s.values.size();
    if (total > 100000) fail("sweep", "more than 100000 points");
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    json point = doc;
    std::vector<std::pair<std::string, double>> swept;
    std::size_t rem = idx;
    std::vector<std::size_t> digits(cfg.sweeps.size());
    for (std::size_t k = cfg.sweeps.size(); k-- > 0;) {
      digits[k] = rem % cfg.sweeps[k].values.size();
      rem /= cfg.sweeps[k].values.size();
    }
    for (std::size_t k = 0; k < cfg.sweeps.size(); ++k) {
      const double v = cfg.sweeps[k].values[digits[k]];
      set_path(point, cfg.sweeps[k].parameter, v);
      swept.emplace_back(cfg.sweeps[k].parameter, v);
    }
    try {
      PointConfig pc = parse_point(point, cfg.kind, base_dir);
      pc.swept = std::move(swept);
      cfg.points.push_back(std::move(pc));
    } catch (const ConfigError& e) {
      if (cfg.sweeps.empty()) throw;
      throw ConfigError("sweep point " + std::to_string(idx) + ": " + e.what());
    }
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::filesystem::path p(path);
  const std::string base = p.has_parent_path() ? p.parent_path().string() : ".";
  return parse_config(ss.str(), base, p.stem().string());
}

}  // namespace molbat
