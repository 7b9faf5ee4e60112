#include "molbat/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// rate * exp(-x), with rate == 0 short-circuited so that inf * 0 never appears.
double suppressed(double rate, double x) {
  if (rate == 0.0) return 0.0;
  if (x == 0.0) return rate;
  return std::exp(std::log(rate) - x);
}

// exp(-w/T) with the T = 0 and T = inf limits.
double boltzmann_exponent(double w, double T) {
  if (std::isinf(T)) return 0.0;
  if (T == 0.0) {
    if (w == 0.0) return 0.0;
    return w > 0.0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
  return w / T;
}

double suppressed_T(double rate, double w, double T) {
  const double x = boltzmann_exponent(w, T);
  if (rate == 0.0) return 0.0;
  if (std::isinf(x)) return x > 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return suppressed(rate, x);
}

void check_temperature(double T, const char* what) {
  if (!(T >= 0.0) || std::isnan(T)) throw InputError(std::string(what) + ": temperature must be >= 0");
}

double excitonic_down(const ExcitonicSpectrum& s, double omega) {
  double sum = 0.0;
  for (std::size_t k = 0; k < s.E_a.size(); ++k) {
    const double fa = fermi_dirac(s.E_a[k], s.mu_a, s.T);
    for (std::size_t l = 0; l < s.E_b.size(); ++l) {
      const double g2 = s.g_abs2(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      if (g2 == 0.0) continue;
      const double fb = fermi_dirac(s.E_b[l], s.mu_b, s.T);
      sum += g2 * gaussian_delta(s.E_a[k] - s.E_b[l] - omega, s.eta) * fb * (1.0 - fa);
    }
  }
  return sum;
}

double table_interp(const TabulatedSpectrum& s, double omega) {
  const auto& x = s.omega;
  if (omega < x.front() || omega > x.back()) {
    std::ostringstream os;
    os << "tabulated spectrum: omega = " << omega << " outside [" << x.front() << ", " << x.back() << "]";
    throw InputError(os.str());
  }
  auto it = std::upper_bound(x.begin(), x.end(), omega);
  if (it == x.end()) return s.G.back();
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double x0 = x[i - 1], x1 = x[i];
  const double w = (omega - x0) / (x1 - x0);
  return (1.0 - w) * s.G[i - 1] + w * s.G[i];
}

}  // namespace

double fermi_dirac(double energy, double mu, double T) {
  if (T == 0.0) {
    if (energy < mu) return 1.0;
    if (energy > mu) return 0.0;
    return 0.5;
  }
  const double x = (energy - mu) / T;
  if (x > 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double gaussian_delta(double x, double eta) {
  return std::exp(-0.5 * (x / eta) * (x / eta)) / (eta * std::sqrt(2.0 * std::numbers::pi));
}

double eval_profile(const RateProfile& profile, double omega) {
  return std::visit(
      overloaded{
          [](const FlatProfile& p) { return p.rate; },
          [omega](const OhmicProfile& p) {
            const double r = omega / p.cutoff;
            return p.strength * omega * std::exp(-r * r);
          },
          [omega](const GaussianProfile& p) {
            const double r = (omega - p.center) / p.width;
            return p.amplitude * std::exp(-0.5 * r * r);
          },
      },
      profile);
}

void validate_profile(const RateProfile& profile) {
  std::visit(overloaded{
                 [](const FlatProfile& p) {
                   if (!(p.rate >= 0.0)) throw InputError("flat profile: rate must be >= 0");
                 },
                 [](const OhmicProfile& p) {
                   if (!(p.strength >= 0.0)) throw InputError("ohmic profile: strength must be >= 0");
                   if (!(p.cutoff > 0.0)) throw InputError("ohmic profile: cutoff must be > 0");
                 },
                 [](const GaussianProfile& p) {
                   if (!(p.amplitude >= 0.0)) throw InputError("gaussian profile: amplitude must be >= 0");
                   if (!(p.width > 0.0)) throw InputError("gaussian profile: width must be > 0");
                   if (!std::isfinite(p.center)) throw InputError("gaussian profile: center must be finite");
                 },
             },
             profile);
}

CouplingSpectrum::CouplingSpectrum(ThermalSpectrum s) : v_(std::move(s)) {
  const auto& t = std::get<ThermalSpectrum>(v_);
  validate_profile(t.profile);
  check_temperature(t.T, "thermal spectrum");
}

CouplingSpectrum::CouplingSpectrum(ChemicalSpectrum s) : v_(std::move(s)) {
  const auto& c = std::get<ChemicalSpectrum>(v_);
  validate_profile(c.profile);
  check_temperature(c.T1, "chemical spectrum");
  if (!std::isfinite(c.delta_g)) throw InputError("chemical spectrum: delta_g must be finite");
}

CouplingSpectrum::CouplingSpectrum(ExcitonicSpectrum s) : v_(std::move(s)) {
  const auto& e = std::get<ExcitonicSpectrum>(v_);
  if (e.g_abs2.rows() != static_cast<Eigen::Index>(e.E_a.size()) || e.g_abs2.cols() != static_cast<Eigen::Index>(e.E_b.size()))
    throw InputError("excitonic spectrum: coupling table must be |band A| x |band B|");
  if ((e.g_abs2.array() < 0.0).any()) throw InputError("excitonic spectrum: |g|^2 must be >= 0");
  if (!(e.T > 0.0)) throw InputError("excitonic spectrum: temperature must be > 0");
  if (!(e.eta > 0.0)) throw InputError("excitonic spectrum: eta must be > 0");
}

CouplingSpectrum::CouplingSpectrum(TabulatedSpectrum s) : v_(std::move(s)) {
  const auto& t = std::get<TabulatedSpectrum>(v_);
  if (t.omega.size() != t.G.size() || t.omega.size() < 2)
    throw InputError("tabulated spectrum: need at least two (omega, G) samples");
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    if (!std::isfinite(t.omega[i]) || !std::isfinite(t.G[i])) throw InputError("tabulated spectrum: non-finite sample");
    if (t.G[i] < 0.0) throw InvariantViolation("tabulated spectrum: G must be nonnegative");
    if (i > 0 && !(t.omega[i] > t.omega[i - 1]))
      throw InputError("tabulated spectrum: omega must be strictly increasing");
  }
}

double CouplingSpectrum::downward(double omega) const {
  return std::visit(overloaded{
                        [omega](const ThermalSpectrum& s) {
                          if (omega >= 0.0) return eval_profile(s.profile, omega);
                          return suppressed_T(eval_profile(s.profile, -omega), -omega, s.T);
                        },
                        [omega](const ChemicalSpectrum& s) {
                          return omega >= 0.0 ? eval_profile(s.profile, omega) : 0.0;
                        },
                        [omega](const ExcitonicSpectrum& s) { return excitonic_down(s, omega); },
                        [omega](const TabulatedSpectrum& s) { return table_interp(s, omega); },
                    },
                    v_);
}

double CouplingSpectrum::upward(double omega) const {
  return std::visit(overloaded{
                        [this, omega](const ThermalSpectrum&) { return downward(-omega); },
                        [this, omega](const ChemicalSpectrum& s) {
                          return suppressed_T(downward(omega), omega - s.delta_g, s.T1);
                        },
                        [this, omega](const ExcitonicSpectrum& s) {
                          return suppressed_T(downward(omega), omega - s.delta_mu(), s.T);
                        },
                        [omega](const TabulatedSpectrum& s) { return table_interp(s, -omega); },
                    },
                    v_);
}

double CouplingSpectrum::operator()(double omega) const {
  return omega >= 0.0 ? downward(omega) : upward(-omega);
}

BalanceLaw CouplingSpectrum::law() const {
  switch (v_.index()) {
    case 0: return BalanceLaw::Thermal;
    case 1: return BalanceLaw::Chemical;
    case 2: return BalanceLaw::Excitonic;
    default: return BalanceLaw::None;
  }
}

double CouplingSpectrum::balance_ratio(double omega) const {
  return std::visit(overloaded{
                        [omega](const ThermalSpectrum& s) { return suppressed_T(1.0, omega, s.T); },
                        [omega](const ChemicalSpectrum& s) { return suppressed_T(1.0, omega - s.delta_g, s.T1); },
                        [omega](const ExcitonicSpectrum& s) {
                          return suppressed_T(1.0, omega - s.delta_mu(), s.T);
                        },
                        [](const TabulatedSpectrum&) { return std::numeric_limits<double>::quiet_NaN(); },
                    },
                    v_);
}

std::string CouplingSpectrum::describe() const {
  switch (law()) {
    case BalanceLaw::Thermal: return "thermal";
    case BalanceLaw::Chemical: return "chemical";
    case BalanceLaw::Excitonic: return "excitonic";
    case BalanceLaw::None: return "tabulated";
  }
  return "unknown";
}

double excitonic_negative_direct(const ExcitonicSpectrum& s, double omega) {
  double sum = 0.0;
  for (std::size_t k = 0; k < s.E_a.size(); ++k) {
    const double fa = fermi_dirac(s.E_a[k], s.mu_a, s.T);
    for (std::size_t l = 0; l < s.E_b.size(); ++l) {
      const double fb = fermi_dirac(s.E_b[l], s.mu_b, s.T);
      sum += s.g_abs2(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) *
             gaussian_delta(s.E_a[k] - s.E_b[l] - omega, s.eta) * fa * (1.0 - fb);
    }
  }
  return sum;
}

TabulatedSpectrum load_tabulated_spectrum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open spectrum file " + path);
  TabulatedSpectrum t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double w = 0.0, g = 0.0;
    if (!(row >> w >> g)) {
      if (t.omega.empty() && lineno == 1) continue;  // header
      throw InputError(path + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    t.omega.push_back(w);
    t.G.push_back(g);
  }
  CouplingSpectrum check{t};
  return t;
}

}  // namespace molbat
