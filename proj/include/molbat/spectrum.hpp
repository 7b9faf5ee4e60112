#pragma once

// Bath coupling spectra with a declared detailed-balance law.
//
// Every spectrum answers two questions for a system transition at Bohr
// frequency w (energy w released by the system when the lowering component
// acts): the downward rate, and the rate of the reverse process. The
// two-sided function G(w) is downward(w) for w >= 0 and upward(-w) for w < 0.

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace molbat {

struct FlatProfile {
  double rate = 0.0;
};

/// strength * w * exp(-(w / cutoff)^2)
struct OhmicProfile {
  double strength = 0.0;
  double cutoff = 1.0;
};

/// amplitude * exp(-(w - center)^2 / (2 width^2))
struct GaussianProfile {
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;
};

using RateProfile = std::variant<FlatProfile, OhmicProfile, GaussianProfile>;

double eval_profile(const RateProfile& profile, double omega);
void validate_profile(const RateProfile& profile);

/// G(-w) = exp(-w/T) G(w). T = +inf gives a symmetric spectrum.
struct ThermalSpectrum {
  RateProfile profile;
  double T = 0.0;
};

/// upward(w) = exp(-(w - delta_g)/T1) downward(w); downward is the profile on w >= 0.
struct ChemicalSpectrum {
  RateProfile profile;
  double T1 = 0.0;
  double delta_g = 0.0;
};

/// Exciton-bath spectrum from a discrete set of (k, l) pair transitions with
/// Gaussian-regularized energy conservation of width eta.
struct ExcitonicSpectrum {
  std::vector<double> E_a;
  std::vector<double> E_b;
  Eigen::MatrixXd g_abs2;  // |g_kl|^2, rows k (band A), cols l (band B)
  double mu_a = 0.0;
  double mu_b = 0.0;
  double T = 0.01;
  double eta = 1e-3;

  double delta_mu() const { return mu_a - mu_b; }
};

/// Samples of G(w) over a frequency range, linearly interpolated.
struct TabulatedSpectrum {
  std::vector<double> omega;
  std::vector<double> G;
};

enum class BalanceLaw { Thermal, Chemical, Excitonic, None };

class CouplingSpectrum {
 public:
  using Variant = std::variant<ThermalSpectrum, ChemicalSpectrum, ExcitonicSpectrum, TabulatedSpectrum>;

  // Implicit so callers can pass a variant struct directly.
  CouplingSpectrum(ThermalSpectrum s);
  CouplingSpectrum(ChemicalSpectrum s);
  CouplingSpectrum(ExcitonicSpectrum s);
  CouplingSpectrum(TabulatedSpectrum s);

  /// Two-sided G(w) >= 0.
  double operator()(double omega) const;
  double downward(double omega) const;
  double upward(double omega) const;

  BalanceLaw law() const;
  /// Expected G(-w)/G(w) under the declared law (NaN for BalanceLaw::None).
  double balance_ratio(double omega) const;
  const Variant& variant() const { return v_; }
  std::string describe() const;

 private:
  Variant v_;
};

double fermi_dirac(double energy, double mu, double T);
double gaussian_delta(double x, double eta);

/// Direct evaluation of the negative-frequency exciton sum
/// sum |g|^2 delta_eta(eps - w) f_a (1 - f_b), without the balance-preserving
/// regularization used by CouplingSpectrum.
double excitonic_negative_direct(const ExcitonicSpectrum& s, double omega);

/// Reads "omega,G" rows (header line optional, '#' comments allowed).
TabulatedSpectrum load_tabulated_spectrum(const std::string& path);

}  // namespace molbat
