#pragma once

// Two-band electronic "exciton factory": intraband thermalization by a cold
// phonon bath, interband pumping by a hot bath with a chemical free-energy
// offset, the grand-canonical ansatz for its stationary state and the
// chemical potential split that ansatz predicts.
//
// Modes are ordered band A (ascending energy) then band B (ascending energy);
// band energy lists must be given in ascending order.

#include <vector>

#include "molbat/davies.hpp"
#include "molbat/operators.hpp"
#include "molbat/spectrum.hpp"

namespace molbat {

/// Piecewise-linear function on sorted knots, constant beyond the ends.
struct PiecewiseLinear {
  std::vector<double> x;
  std::vector<double> y;

  static PiecewiseLinear constant(double v) { return {{0.0}, {v}}; }
  double operator()(double at) const;
  void validate(const char* what) const;
};

struct ExcitonFactoryParams {
  std::vector<double> band_a;
  std::vector<double> band_b;
  Eigen::MatrixXd Gamma_a;      // n_a x n_a, used for pairs with E_a(k) >= E_a(k')
  Eigen::MatrixXd Gamma_b;      // n_b x n_b
  Eigen::MatrixXd gamma_inter;  // n_a x n_b
  double T = 0.01;
  PiecewiseLinear hot_T = PiecewiseLinear::constant(0.02);
  double delta_g = 0.0;
  int electrons = -1;  // conserved electron number; -1 means n_b (band B filled)

  Index n_a() const { return static_cast<Index>(band_a.size()); }
  Index n_b() const { return static_cast<Index>(band_b.size()); }
  Index n_modes() const { return n_a() + n_b(); }
  int electron_count() const { return electrons < 0 ? static_cast<int>(n_b()) : electrons; }
  double gap() const;
  /// Throws InputError on invalid fields.
  void validate() const;
  FermionRegister fermion_register() const;
};

struct GrandCanonicalAnsatz {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double T = 0.0;
  double delta_mu() const { return mu_a - mu_b; }
};

/// Intraband (cold bath) part on the full 2^n Fock space. n <= 8.
GKLSGenerator intraband_generator(const ExcitonFactoryParams& p);
/// Interband (hot bath) part on the full 2^n Fock space. n <= 8.
GKLSGenerator interband_generator(const ExcitonFactoryParams& p);
/// Sum of both, Hamiltonian sum_k E_a(k) n_k + sum_l E_b(l) n_l.
GKLSGenerator build_factory_generator(const ExcitonFactoryParams& p);

/// Fock basis states with `electrons` occupied modes, ascending index.
std::vector<Index> number_sector(Index n_modes, int electrons);

/// Restriction of a number-conserving generator to one sector.
GKLSGenerator restrict_to_sector(const GKLSGenerator& g, const std::vector<Index>& states);

/// Stationary state of the full generator in the sector of p.electron_count(),
/// embedded back into the 2^n Fock space.
DensityMatrix factory_stationary_state(const ExcitonFactoryParams& p);

/// Jump-rate matrix Q on occupation strings (dp/dt = Q p, columns sum to 0).
struct ClassicalChain {
  Index n_modes = 0;
  Eigen::SparseMatrix<double> Q;
};

/// Refuses (InputError) when single-particle energies are degenerate. n <= 12.
ClassicalChain classical_reduction(const ExcitonFactoryParams& p, bool intra = true, bool inter = true);

/// Stationary distribution of the chain on the sector with p.electron_count()
/// electrons, as a 2^n vector.
RealVector classical_stationary(const ExcitonFactoryParams& p);

/// f_a(k), f_b(l) in register order.
RealVector ansatz_occupations(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p);

/// Product Fermi-Dirac state on 2^n. n <= 8.
DensityMatrix grand_canonical_state(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p);

/// Occupation-string probabilities of the same product state.
RealVector grand_canonical_probabilities(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p);

struct InterbandResidual {
  double exact = 0.0;  // trace norm of L_inter applied to the ansatz
  double bound = 0.0;  // termwise estimate
};

/// The ansatz is diagonal and every interband jump maps occupation strings to
/// occupation strings, so the exact norm is evaluated on the chain (n <= 12).
InterbandResidual interband_residual(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p);

/// mu_b such that the ansatz holds p.electron_count() electrons on average.
double fix_mu_b(const ExcitonFactoryParams& p, double delta_mu);

struct DeltaMuOptimum {
  double delta_mu = 0.0;
  double mu_b = 0.0;
  double residual = 0.0;
  double effective_gap = 0.0;  // residual-weighted mean of eps_kl
  double predicted = 0.0;      // closed form evaluated at effective_gap
};

/// Grid argmin of the exact residual, refined by golden section on the
/// neighbouring cells. Throws InputError ("widen grid") when the grid minimum
/// sits on an end point.
DeltaMuOptimum optimal_delta_mu(const ExcitonFactoryParams& p, const std::vector<double>& grid, int threads = 1);

/// (1 - T/T_hot) E_g + (T/T_hot) delta_g
double predicted_delta_mu(double gap, double T, double T_hot, double delta_g);

/// Weighted mean of eps_kl with weights gamma {e^{-X}(1 - f_a) f_b + f_a (1 - f_b)}.
double effective_gap(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p);

struct FermiDiracFit {
  double mu_a = 0.0;
  double mu_b = 0.0;
  double T = 0.0;
  double residual = 0.0;  // max |f_fit - f| over modes
};

/// Per-mode probabilities of being occupied and empty. Both are summed
/// directly from string probabilities so that nearly full modes keep their
/// hole weight.
struct ModeFilling {
  RealVector occupied;
  RealVector empty;
};

ModeFilling mode_filling(const RealVector& probs, Index n_modes);
ModeFilling mode_filling(const DensityMatrix& rho, Index n_modes);

/// Least-squares fit of ln(empty/occupied) = (E - mu_band)/T with a shared T.
/// Modes whose weights underflow are skipped.
FermiDiracFit fit_fermi_dirac(const ExcitonFactoryParams& p, const ModeFilling& filling);

/// Coupling spectrum of a battery transition fed by this factory in the
/// ansatz state: band energies, |g_kl|^2 and chemical potentials.
ExcitonicSpectrum factory_spectrum(const ExcitonFactoryParams& p, const GrandCanonicalAnsatz& g,
                                   const Eigen::MatrixXd& g_abs2, double eta);

}  // namespace molbat
