#pragma once

// Weak-coupling (Davies) generators: Bohr decomposition of couplings,
// GKLS assembly, superoperator form, stationary states and propagation.

#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "molbat/linalg.hpp"
#include "molbat/spectrum.hpp"

namespace molbat {

struct BohrComponent {
  double omega;        // energy released when this component acts
  ComplexMatrix op;    // S_omega, S(t) = sum exp(-i omega t) S_omega
};

struct BohrDecomposition {
  std::vector<BohrComponent> terms;  // ascending omega
  ComplexMatrix reconstruct() const;
  /// Pointer to the term at omega within tol, or nullptr.
  const BohrComponent* find(double omega, double tol) const;
};

/// Default secular clustering tolerance, 1e-9 times the spectral spread.
double default_cluster_tol(const RealVector& energies);

BohrDecomposition bohr_decompose(const HermitianOperator& h, const ComplexMatrix& s, double cluster_tol = -1.0);
BohrDecomposition bohr_decompose(const EigenSystem& es, const ComplexMatrix& s, double cluster_tol = -1.0);

using SparseComplex = Eigen::SparseMatrix<cplx>;

/// One dissipative channel. Channels built by assemble_davies also carry the
/// jump in the eigenbasis of the Hamiltonian they were built from.
struct Channel {
  double rate = 0.0;
  ComplexMatrix jump;
  std::shared_ptr<const EigenSystem> frame = nullptr;  // eigenframe the jump was built in, if any
  SparseComplex eigen_jump = {};
};

/// rho -> -i[H, rho] + sum rate (L rho L^dagger - {L^dagger L, rho}/2).
class GKLSGenerator {
 public:
  GKLSGenerator(HermitianOperator h, std::vector<Channel> channels);

  const HermitianOperator& hamiltonian() const { return h_; }
  const std::vector<Channel>& channels() const { return channels_; }
  Index dim() const { return h_.dim(); }
  /// sum rate L^dagger L
  const ComplexMatrix& decay_operator() const { return k_; }

  ComplexMatrix apply(const ComplexMatrix& rho) const;
  /// Dissipative part only.
  ComplexMatrix apply_dissipator(const ComplexMatrix& rho) const;
  double max_rate() const;

 private:
  HermitianOperator h_;
  std::vector<Channel> channels_;
  ComplexMatrix k_;
};

/// Same Hamiltonian (to 1e-12 relative), channels concatenated.
GKLSGenerator combine(const GKLSGenerator& a, const GKLSGenerator& b);

enum class CouplingKind {
  Hermitian,     // S = S^dagger, channels (G(w), S_w) for every Bohr frequency
  RotatingWave,  // op is the lowering part S-; channels (down(w), S-_w), (up(w), S-_w^dagger)
};

struct Coupling {
  ComplexMatrix op;
  CouplingSpectrum spectrum;
  CouplingKind kind = CouplingKind::Hermitian;
};

struct DaviesOptions {
  double cluster_tol = -1.0;   // < 0: default_cluster_tol
  double min_rate = 0.0;       // channels with rate * |S_w|^2 <= min_rate * max are dropped
};

GKLSGenerator assemble_davies(const HermitianOperator& h, const std::vector<Coupling>& couplings,
                              const DaviesOptions& opt = {});

SuperOperatorMatrix generator_superop(const GKLSGenerator& g);
SuperOperatorMatrix hamiltonian_superop(const HermitianOperator& h);
SuperOperatorMatrix dissipator_superop(const GKLSGenerator& g);

struct StationaryReport {
  ComplexMatrix rho;     // trace one, Hermitized
  double residual = 0.0; // trace norm of L rho
  int kernel_dim = 0;
  Index solved_dim = 0;  // size of the linear problem actually diagonalized
};

/// Kernel of the generator restricted to the zero-Bohr-frequency sector of H.
/// The sector matrix is balanced first. The kernel dimension is the number of
/// eigenvalues with |lambda| < 1e-9 and the state comes from shifted inverse
/// iteration. Throws NonErgodic when the kernel is degenerate and
/// NumericalFailure when no kernel is found or the residual exceeds
/// 1e-9 * max(1, largest sector matrix entry).
StationaryReport solve_stationary(const GKLSGenerator& g);
DensityMatrix stationary_state(const GKLSGenerator& g);

/// Largest Hilbert dimension for which dense superoperator propagation is allowed.
inline constexpr Index kMaxPropagationDim = 20;
/// Largest Hilbert dimension for which dense superoperators are formed.
inline constexpr Index kMaxSuperopDim = 64;

SuperOperatorMatrix propagator(const GKLSGenerator& g, double t);
DensityMatrix propagate(const GKLSGenerator& g, const DensityMatrix& rho0, double t);
DensityMatrix propagate(const SuperOperatorMatrix& prop, const DensityMatrix& rho0);

/// Propagation restricted to the zero-Bohr-frequency sector, which Davies
/// generators leave invariant. rho0 must have no coherence between distinct
/// energies (ContractViolation otherwise). No dense d^2 superoperator is formed.
std::vector<DensityMatrix> propagate_sector(const GKLSGenerator& g, const DensityMatrix& rho0,
                                            const std::vector<double>& times);

/// Gibbs state exp(-H/T)/Z; T = 0 gives the projector onto the ground space.
DensityMatrix gibbs_state(const HermitianOperator& h, double T);

}  // namespace molbat
