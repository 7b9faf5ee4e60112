#pragma once

// Concrete operators: truncated boson ladders, Weyl displacements, the
// displaced-oscillator battery Hamiltonian and its polaron frame, and
// Jordan-Wigner fermion modes.
//
// Tensor ordering is electronic factor first, oscillator second: C^2 (x) Fock(N).

#include <utility>
#include <vector>

#include "molbat/linalg.hpp"

namespace molbat {

/// Truncated bosonic Fock space |0>..|N-1>.
class FockSpace {
 public:
  explicit FockSpace(Index levels);
  Index levels() const { return levels_; }

 private:
  Index levels_;
};

struct BatteryParams {
  double omega0 = 0.1;     // vibrational quantum
  double xi0 = 0.0;        // dimensionless displacement; Huang-Rhys factor S = xi0^2
  double E_el = 1.0;       // electronic gap
  double T = 0.01;         // ambient temperature (k_B T)
  double delta_mu = 1.0;   // exciton chemical potential
  Index N = 40;            // Fock truncation
  double gamma = 1e-2;     // G1(omega0), vibrational damping rate
  double G1_at_0 = 1e-3;
  double G2_at_0 = 1e-3;
  double gamma_ex = 1e-2;  // scale of the exciton coupling spectrum

  double huang_rhys() const { return xi0 * xi0; }
  /// Pure electronic dephasing rate 4 xi0^2 G1(0) + G2(0).
  double decoherence_rate() const { return 4.0 * xi0 * xi0 * G1_at_0 + G2_at_0; }
  /// Throws InputError on out-of-range fields.
  void validate() const;
};

enum class Band { A, B };

struct FermionMode {
  Band band;
  double energy;
};

/// Ordered set of fermionic modes. Band-A modes come first by ascending
/// energy, then band-B modes by ascending energy.
class FermionRegister {
 public:
  static constexpr Index kMaxModes = 12;

  explicit FermionRegister(std::vector<FermionMode> modes);
  Index n_modes() const { return static_cast<Index>(modes_.size()); }
  Index fock_dim() const { return Index{1} << n_modes(); }
  const std::vector<FermionMode>& modes() const { return modes_; }

 private:
  std::vector<FermionMode> modes_;
};

ComplexMatrix boson_annihilator(const FockSpace& space);
ComplexMatrix boson_number(const FockSpace& space);

/// exp(alpha A^dagger - conj(alpha) A) on the truncated space.
ComplexMatrix weyl(cplx alpha, const FockSpace& space);

/// Normal-ordered e^{-|a|^2/2} e^{a A^dagger} e^{-conj(a) A}, truncated.
ComplexMatrix weyl_normal_ordered(cplx alpha, const FockSpace& space);

/// Electronic projectors and transition operators on C^2.
ComplexMatrix ket_bra(Index i, Index j, Index dim);

/// omega0 B^dagger B + E_el P1 on C^2 (x) Fock(N), assembled in the polaron
/// frame as U (omega0 A^dagger A + E_el P1) U^dagger. Away from the truncation
/// edge this equals omega0 (A^dagger - xi0 P1)(A - xi0 P1) + E_el P1; unlike the
/// literal product its spectrum is exactly the two ladders at every level.
HermitianOperator battery_hamiltonian(const BatteryParams& p);

/// U = |0><0| (x) 1 + |1><1| (x) W(xi0).
ComplexMatrix polaron_transform(const BatteryParams& p);

/// B = U A U^dagger, equal to A - xi0 |1><1| away from the truncation edge.
ComplexMatrix displaced_annihilator(const BatteryParams& p);

/// Lifts an electronic 2x2 operator and an oscillator operator to the product space.
ComplexMatrix electronic_op(const ComplexMatrix& e, Index levels);
ComplexMatrix oscillator_op(const ComplexMatrix& o);

inline constexpr Index kMaxDenseFermionModes = 8;

/// (annihilator, creator) for every mode, Jordan-Wigner ordered. Mode 0 is
/// the most significant bit of the basis index. Dense matrices are limited to
/// kMaxDenseFermionModes modes.
std::vector<std::pair<ComplexMatrix, ComplexMatrix>> fermion_mode_ops(const FermionRegister& reg);

}  // namespace molbat
