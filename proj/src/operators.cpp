#include "molbat/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "molbat/errors.hpp"

namespace molbat {

FockSpace::FockSpace(Index levels) : levels_(levels) {
  if (levels < 2) throw InputError("FockSpace: truncation must be at least 2 levels");
}

void BatteryParams::validate() const {
  std::ostringstream err;
  if (!(omega0 > 0.0)) err << "omega0 must be positive; ";
  if (N < 2) err << "N must be at least 2; ";
  if (!(T >= 0.0)) err << "T must be non-negative; ";
  if (!(gamma >= 0.0) || !(G1_at_0 >= 0.0) || !(G2_at_0 >= 0.0) || !(gamma_ex >= 0.0))
    err << "rates must be non-negative; ";
  if (!std::isfinite(xi0) || !std::isfinite(E_el) || !std::isfinite(delta_mu)) err << "non-finite parameter; ";
  if (!err.str().empty()) throw InputError("BatteryParams: " + err.str());
}

FermionRegister::FermionRegister(std::vector<FermionMode> modes) : modes_(std::move(modes)) {
  if (static_cast<Index>(modes_.size()) > kMaxModes) {
    std::ostringstream os;
    os << "FermionRegister: " << modes_.size() << " modes exceeds the limit of " << kMaxModes;
    throw ResourceError(os.str());
  }
  std::stable_sort(modes_.begin(), modes_.end(), [](const FermionMode& a, const FermionMode& b) {
    if (a.band != b.band) return a.band == Band::A;
    return a.energy < b.energy;
  });
}

ComplexMatrix boson_annihilator(const FockSpace& space) {
  const Index n = space.levels();
  ComplexMatrix a = ComplexMatrix::Zero(n, n);
  for (Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

ComplexMatrix boson_number(const FockSpace& space) {
  const Index n = space.levels();
  ComplexMatrix num = ComplexMatrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) num(k, k) = static_cast<double>(k);
  return num;
}

ComplexMatrix weyl(cplx alpha, const FockSpace& space) {
  const ComplexMatrix a = boson_annihilator(space);
  const ComplexMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return expm(gen);
}

ComplexMatrix weyl_normal_ordered(cplx alpha, const FockSpace& space) {
  const ComplexMatrix a = boson_annihilator(space);
  const ComplexMatrix up = expm((alpha * a.adjoint()).eval());
  const ComplexMatrix down = expm((-std::conj(alpha) * a).eval());
  return std::exp(-0.5 * std::norm(alpha)) * up * down;
}

ComplexMatrix ket_bra(Index i, Index j, Index dim) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

ComplexMatrix electronic_op(const ComplexMatrix& e, Index levels) {
  return kron(e, ComplexMatrix::Identity(levels, levels));
}

ComplexMatrix oscillator_op(const ComplexMatrix& o) { return kron(ComplexMatrix::Identity(2, 2), o); }

ComplexMatrix polaron_transform(const BatteryParams& p) {
  p.validate();
  const FockSpace fock(p.N);
  ComplexMatrix u = ComplexMatrix::Zero(2 * p.N, 2 * p.N);
  u.topLeftCorner(p.N, p.N).setIdentity();
  u.bottomRightCorner(p.N, p.N) = weyl(p.xi0, fock);
  return u;
}

ComplexMatrix displaced_annihilator(const BatteryParams& p) {
  const ComplexMatrix u = polaron_transform(p);
  return u * oscillator_op(boson_annihilator(FockSpace(p.N))) * u.adjoint();
}

HermitianOperator battery_hamiltonian(const BatteryParams& p) {
  const ComplexMatrix u = polaron_transform(p);
  ComplexMatrix d = p.omega0 * oscillator_op(boson_number(FockSpace(p.N)));
  d += p.E_el * electronic_op(ket_bra(1, 1, 2), p.N);
  return HermitianOperator::hermitized(u * d * u.adjoint());
}

std::vector<std::pair<ComplexMatrix, ComplexMatrix>> fermion_mode_ops(const FermionRegister& reg) {
  const Index n = reg.n_modes();
  if (n > kMaxDenseFermionModes) {
    std::ostringstream os;
    os << "fermion_mode_ops: " << n << " modes exceeds the dense limit of " << kMaxDenseFermionModes;
    throw ResourceError(os.str());
  }
  const Index dim = reg.fock_dim();
  std::vector<std::pair<ComplexMatrix, ComplexMatrix>> ops;
  ops.reserve(static_cast<size_t>(n));
  for (Index mode = 0; mode < n; ++mode) {
    // Mode 0 occupies the most significant bit; the string counts occupied
    // modes preceding `mode`.
    const Index bit = Index{1} << (n - 1 - mode);
    ComplexMatrix c = ComplexMatrix::Zero(dim, dim);
    for (Index state = 0; state < dim; ++state) {
      if (!(state & bit)) continue;
      int parity = 0;
      for (Index prev = 0; prev < mode; ++prev)
        if (state & (Index{1} << (n - 1 - prev))) ++parity;
      c(state ^ bit, state) = (parity % 2 == 0) ? 1.0 : -1.0;
    }
    ComplexMatrix cdag = c.adjoint();
    ops.emplace_back(std::move(c), std::move(cdag));
  }
  return ops;
}

}  // namespace molbat
