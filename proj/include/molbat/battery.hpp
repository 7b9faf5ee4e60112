#pragma once

// Molecular battery: a two-level electronic system with a displaced
// reaction-coordinate oscillator, thermalized by an ambient bath, charged by an
// excitonic bath and discharged by thermal electronic transitions.

#include <vector>

#include "molbat/davies.hpp"
#include "molbat/operators.hpp"
#include "molbat/spectrum.hpp"

namespace molbat {

struct TruncationReport {
  double tail_ground = 0.0;   // population of rho(0) on levels >= N-1
  double tail_excited = 0.0;  // same for rho(1)
  bool ok = false;
};

inline constexpr double kTruncationTailTol = 1e-12;

TruncationReport truncation_tail(const BatteryParams& p);
/// Throws TruncationError ("raise N") when either tail is >= kTruncationTailTol.
void require_truncation(const BatteryParams& p);

/// (1 - q) q^n on Fock(N), q = exp(-omega0/T); |0><0| at T = 0.
ComplexMatrix oscillator_thermal(const BatteryParams& p);

/// rho(0) = |0><0| (x) tau, rho(1) = |1><1| (x) W(xi0) tau W(xi0)^dagger.
DensityMatrix conditioned_gibbs(const BatteryParams& p, int branch);

/// [1 + exp((E_el - delta_mu)/T)]^-1
double charged_fraction(const BatteryParams& p);

/// (rho(0) + e^{-(E_el - delta_mu)/T} rho(1)) / (1 + e^{-(E_el - delta_mu)/T})
DensityMatrix stationary_closed_form(const BatteryParams& p);

/// Channels (gamma, B), (gamma e^{-omega0/T}, B^dagger), (Gamma, |1><1|).
GKLSGenerator thermal_rc_generator(const BatteryParams& p);

/// Exciton spectrum resonant with the first `sidebands` Bohr frequencies
/// E_el + j omega0, chemical potential split delta_mu, peak rate gamma_ex.
ExcitonicSpectrum resonant_exciton_spectrum(const BatteryParams& p, int sidebands = 3, double eta = 1e-3);

/// Davies assembly of the lowering coupling |0><1| (x) 1 with rotating-wave
/// rates (downward, upward) of `g3`. Channels below 1e-14 of the largest are dropped.
GKLSGenerator charging_generator(const BatteryParams& p, const CouplingSpectrum& g3);

struct BatteryGenerator {
  GKLSGenerator thermal_rc;
  double decoherence_rate;
  GKLSGenerator electronic;

  GKLSGenerator total() const { return combine(thermal_rc, electronic); }
};

BatteryGenerator charging_model(const BatteryParams& p, const CouplingSpectrum& g3);
BatteryGenerator discharging_model(const BatteryParams& p, const CouplingSpectrum& g);

/// v_m on Fock(N): sum_k (-1)^k xi^(2k+m) / (k! (k+m)!) (A^dagger)^(k+m) A^k.
ComplexMatrix vm_series(int m, double xi0, Index levels);

struct VmOperator {
  int m;
  ComplexMatrix matrix;  // e^{-xi0^2/2} v_m W(-xi0) |0><1|
};

/// Throws InputError unless |m| <= N - 2.
VmOperator vm_operator(int m, const BatteryParams& p);

/// V_m releases E_el - m omega0: it raises the ground-branch vibrational
/// number by m relative to the excited branch.
double vm_frequency(int m, const BatteryParams& p);

/// Channels (G(w_m), V_m) and (G(-w_m), V_m^dagger) for |m| <= N - 2 (rotating
/// wave rates of g), with the 1e-14 sideband cutoff.
GKLSGenerator discharge_generator(const BatteryParams& p, const CouplingSpectrum& g);

struct DischargeRates {
  double direct = 0.0;       // Tr(|0><0| L1 rho(1))
  double closed_form = 0.0;  // e^{-S}(1-q) sum_m G(w_m) Tr(q^{A^dag A} v_m^dag v_m)
  double poisson = 0.0;      // sum_{m>=0} G(E_el - m omega0) e^{-S} S^m / m!
  double asymptotic = 0.0;   // G(E_el - S omega0)
};

DischargeRates discharge_rate(const BatteryParams& p, const CouplingSpectrum& g, bool with_direct = true);

/// sum_{|m| <= N-2} (1-q) Tr(q^{A^dag A} e^{-S} v_m^dag v_m); equals one up to truncation.
double sideband_completeness(const BatteryParams& p);

}  // namespace molbat
