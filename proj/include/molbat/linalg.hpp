#pragma once

// Dense complex linear algebra on truncated Hilbert spaces.
//
// Superoperators act on column-stacked vectorized operators: the map
// X -> A X B is represented by kron(B^T, A).

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace molbat {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr cplx kI{0.0, 1.0};

/// Square matrix whose anti-Hermitian part is below 1e-12 of its largest entry.
class HermitianOperator {
 public:
  explicit HermitianOperator(ComplexMatrix m);

  /// Replaces m by (m + m^dagger)/2 without checking.
  static HermitianOperator hermitized(const ComplexMatrix& m);

  const ComplexMatrix& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

 private:
  struct Unchecked {};
  HermitianOperator(ComplexMatrix m, Unchecked) : m_(std::move(m)) {}
  ComplexMatrix m_;
};

/// Unit-trace positive semidefinite operator (tolerance 1e-10 on both).
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix m);

  /// Hermitizes, clips eigenvalues in [-1e-10, 0) to zero and renormalizes.
  /// Throws InputError when the result still is not a state.
  static DensityMatrix from_numerical(const ComplexMatrix& m);

  const ComplexMatrix& matrix() const { return op_.matrix(); }
  const HermitianOperator& op() const { return op_; }
  Index dim() const { return op_.dim(); }

 private:
  HermitianOperator op_;
};

/// d^2 x d^2 matrix acting on column-stacked operators of dimension d.
struct SuperOperatorMatrix {
  Index dim = 0;
  ComplexMatrix matrix;

  ComplexMatrix apply(const ComplexMatrix& x) const;
};

struct EigenSystem {
  RealVector values;     // ascending
  ComplexMatrix vectors; // columns are eigenvectors
};

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
EigenSystem herm_eig(const HermitianOperator& h);

/// Same, after checking Hermiticity of a raw matrix (ContractViolation otherwise).
EigenSystem herm_eig(const ComplexMatrix& h);

/// True when max|m - m^dagger| <= rel_tol * max|m|.
bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12);

/// Matrix exponential by scaling and squaring.
ComplexMatrix expm(const ComplexMatrix& m);

/// exp(t * S) as a superoperator.
SuperOperatorMatrix expm(const SuperOperatorMatrix& s, double t);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Partial trace keeping the subsystems listed in `keep` (ascending order of
/// appearance in `dims`; the first subsystem is the most significant index).
ComplexMatrix partial_trace(const ComplexMatrix& m, const std::vector<Index>& dims,
                            const std::vector<Index>& keep);

/// Sum of singular values.
double trace_norm(const ComplexMatrix& m);

/// Half the trace norm of the difference.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

/// -sum p ln p in nats.
double von_neumann_entropy(const DensityMatrix& rho);

/// Entropy of a probability vector with the same clipping rules.
double shannon_entropy(const RealVector& p);

ComplexVector vec(const ComplexMatrix& m);
ComplexMatrix devec(const ComplexVector& v, Index dim);

/// Superoperator of X -> A X B.
SuperOperatorMatrix sandwich(const ComplexMatrix& a, const ComplexMatrix& b);

/// Choi matrix sum_ij |i><j| (x) Phi(|i><j|), input factor first.
HermitianOperator choi_matrix(const SuperOperatorMatrix& phi);

struct CptpReport {
  double min_choi_eigenvalue = 0.0;
  double trace_preservation_error = 0.0;
  bool cptp = false;
};

CptpReport cptp_report(const SuperOperatorMatrix& phi, double tol);
bool is_cptp(const SuperOperatorMatrix& phi, double tol);

/// Eigenvalues in [-1e-10, 0) are set to zero; values below -1e-10 are kept.
RealVector clip_probabilities(RealVector p);

}  // namespace molbat
