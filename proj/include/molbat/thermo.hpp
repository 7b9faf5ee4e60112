#pragma once

// Extractable work: passive states, ergotropy, the equal-entropy Gibbs bound
// and the battery's closed-form entropies.

#include <limits>

#include "molbat/battery.hpp"
#include "molbat/linalg.hpp"

namespace molbat {

/// Spectrum of rho (descending) placed on the eigenbasis of H (ascending).
/// Degenerate levels keep the eigensolver's column order.
DensityMatrix passive_state(const DensityMatrix& rho, const HermitianOperator& h);

/// Tr(rho H) - Tr(sigma_rho H), clamped at 0 for round-off.
double ergotropy(const DensityMatrix& rho, const HermitianOperator& h);

/// Entropy (nats) of the Gibbs distribution over `energies` at inverse temperature beta.
/// beta = inf gives ln(ground degeneracy).
double gibbs_entropy(const RealVector& energies, double beta);

/// Mean energy of the same distribution.
double gibbs_energy(const RealVector& energies, double beta);

enum class EntropyEdge { None, Pure, MaximallyMixed };

struct ErgotropyReport {
  double W_max = 0.0;
  double W_bar_max = 0.0;
  double beta_bar = 0.0;  // inf for a pure state, 0 for the maximally mixed edge
  double S_state = 0.0;
  double S_gibbs = 0.0;
  EntropyEdge edge = EntropyEdge::None;
};

inline constexpr double kBetaLow = 1e-12;
inline constexpr double kBetaHigh = 1e6;
inline constexpr double kEntropyTol = 1e-10;

/// Solves S(Gibbs(beta)) = s for beta in [kBetaLow, kBetaHigh] by bisection.
/// Returns kBetaLow or kBetaHigh when s lies outside the bracket image.
double equal_entropy_beta(const RealVector& energies, double s);

ErgotropyReport bound_ergotropy(const DensityMatrix& rho, const HermitianOperator& h);

enum class BatteryEntropy { Stationary, Gibbs };

/// Oscillator term beta w0/(e^{beta w0} - 1) - ln(1 - e^{-beta w0}) plus the
/// binary entropy of the electronic occupancy: [1 + e^{(E_el - delta_mu)/T}]^-1
/// for the stationary state, [1 + e^{beta_bar E_el}]^-1 for the Gibbs state.
double battery_entropy_closed_form(const BatteryParams& p, BatteryEntropy which,
                                   double beta_bar = std::numeric_limits<double>::quiet_NaN());

/// h[x] = -x ln x - (1 - x) ln(1 - x)
double binary_entropy(double x);

struct BatteryBoundWork {
  double beta_bar = 0.0;
  double W_bar_max = 0.0;
};

/// Equal-entropy bound for rho_st from the closed forms alone (untruncated ladder).
BatteryBoundWork battery_bound_work_closed_form(const BatteryParams& p);

struct ZeroTWork {
  double limit = 0.0;     // E_el Theta(delta_mu - E_el)
  double finite_T = 0.0;  // bound ergotropy of the truncated rho_st at p.T
  bool boundary = false;  // delta_mu == E_el, where the step is undefined
  double value() const { return boundary ? finite_T : limit; }
};

ZeroTWork zero_T_work(const BatteryParams& p);

}  // namespace molbat
