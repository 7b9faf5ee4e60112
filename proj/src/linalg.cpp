#include "molbat/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw ContractViolation(os.str());
  }
}

void require_finite(const ComplexMatrix& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + ": non-finite entries");
}

// One cyclic Jacobi rotation zeroing a(p,q). The unitary is
// J = diag(1, e^{-i phi}) * R(theta) on the (p,q) plane.
void jacobi_rotate(ComplexMatrix& a, ComplexMatrix& v, Index p, Index q) {
  const cplx apq = a(p, q);
  const double r = std::abs(apq);
  const cplx phase = apq / r;  // e^{i phi}
  const double app = a(p, p).real();
  const double aqq = a(q, q).real();
  const double zeta = (aqq - app) / (2.0 * r);
  const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;
  const cplx phase_conj = std::conj(phase);
  const Index n = a.rows();

  // A <- A J
  for (Index k = 0; k < n; ++k) {
    const cplx akp = a(k, p);
    const cplx akq = a(k, q) * phase_conj;
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  // A <- J^dagger A
  for (Index k = 0; k < n; ++k) {
    const cplx apk = a(p, k);
    const cplx aqk = a(q, k) * phase;
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  a(p, p) = app - t * r;
  a(q, q) = aqq + t * r;
  // V <- V J
  for (Index k = 0; k < n; ++k) {
    const cplx vkp = v(k, p);
    const cplx vkq = v(k, q) * phase_conj;
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

bool is_hermitian(const ComplexMatrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = max_abs(m);
  const double asym = max_abs(m - m.adjoint());
  return asym <= rel_tol * scale;
}

HermitianOperator::HermitianOperator(ComplexMatrix m) : m_(std::move(m)) {
  require_square(m_, "HermitianOperator");
  require_finite(m_, "HermitianOperator");
  if (!is_hermitian(m_)) throw ContractViolation("HermitianOperator: matrix is not Hermitian");
}

HermitianOperator HermitianOperator::hermitized(const ComplexMatrix& m) {
  require_square(m, "HermitianOperator::hermitized");
  ComplexMatrix h = 0.5 * (m + m.adjoint());
  return HermitianOperator(std::move(h), Unchecked{});
}

DensityMatrix::DensityMatrix(ComplexMatrix m) : op_(std::move(m)) {
  const double tr_im = std::abs(op_.matrix().trace().imag());
  const double tr = op_.matrix().trace().real();
  if (std::abs(tr - 1.0) > 1e-10 || tr_im > 1e-10) {
    std::ostringstream os;
    os.precision(17);
    os << "DensityMatrix: trace " << tr << " differs from 1";
    throw InputError(os.str());
  }
  const EigenSystem es = herm_eig(op_);
  if (es.values.size() > 0 && es.values(0) < -1e-10) {
    std::ostringstream os;
    os << "DensityMatrix: negative eigenvalue " << es.values(0);
    throw InputError(os.str());
  }
}

DensityMatrix DensityMatrix::from_numerical(const ComplexMatrix& m) {
  require_square(m, "DensityMatrix::from_numerical");
  require_finite(m, "DensityMatrix::from_numerical");
  ComplexMatrix h = 0.5 * (m + m.adjoint());
  const double tr = h.trace().real();
  if (!(tr > 0.0)) throw InputError("DensityMatrix::from_numerical: non-positive trace");
  h /= tr;
  EigenSystem es = herm_eig(HermitianOperator::hermitized(h));
  if (es.values.size() > 0 && es.values(0) < -1e-10) {
    std::ostringstream os;
    os << "DensityMatrix::from_numerical: eigenvalue " << es.values(0) << " below clipping range";
    throw InputError(os.str());
  }
  if (es.values.size() > 0 && es.values(0) < 0.0) {
    RealVector p = clip_probabilities(es.values);
    p /= p.sum();
    h = es.vectors * p.cast<cplx>().asDiagonal() * es.vectors.adjoint();
    h = 0.5 * (h + h.adjoint()).eval();
  }
  return DensityMatrix(std::move(h));
}

ComplexMatrix SuperOperatorMatrix::apply(const ComplexMatrix& x) const {
  if (x.rows() != dim || x.cols() != dim) throw ContractViolation("SuperOperatorMatrix::apply: dimension mismatch");
  return devec(matrix * vec(x), dim);
}

EigenSystem herm_eig(const HermitianOperator& h) {
  const Index n = h.dim();
  ComplexMatrix a = h.matrix();
  ComplexMatrix v = ComplexMatrix::Identity(n, n);
  for (Index i = 0; i < n; ++i) a(i, i) = a(i, i).real();

  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  constexpr int kMaxSweeps = 60;
  bool converged = n < 2;
  double prev_off = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) off += std::norm(a(p, q));
    off = std::sqrt(2.0 * off);
    // Either exact convergence or stagnation at the round-off floor.
    if (off <= 1e-15 * scale || (off <= 1e-12 * scale && off >= 0.5 * prev_off)) {
      converged = true;
      break;
    }
    prev_off = off;
    // Skip rotations on entries that are already negligible relative to the
    // diagonal pair; after the first sweeps this removes most of the work.
    const double skip = sweep < 3 ? 0.0 : 1e-18 * scale;
    for (Index q = 1; q < n; ++q) {
      for (Index p = 0; p < q; ++p) {
        const double r = std::abs(a(p, q));
        if (r == 0.0 || r <= skip) continue;
        const double app = std::abs(a(p, p).real());
        const double aqq = std::abs(a(q, q).real());
        if (sweep >= 3 && app + 1e4 * r == app && aqq + 1e4 * r == aqq) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        jacobi_rotate(a, v, p, q);
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (Index q = 1; q < n; ++q)
      for (Index p = 0; p < q; ++p) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) > 1e-13 * scale) throw NumericalFailure("herm_eig: Jacobi sweeps did not converge");
  }

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i).real() < a(j, j).real(); });
  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<size_t>(k)], order[static_cast<size_t>(k)]).real();
    out.vectors.col(k) = v.col(order[static_cast<size_t>(k)]);
  }
  return out;
}

EigenSystem herm_eig(const ComplexMatrix& h) {
  require_square(h, "herm_eig");
  require_finite(h, "herm_eig");
  if (!is_hermitian(h)) throw ContractViolation("herm_eig: matrix is not Hermitian");
  return herm_eig(HermitianOperator::hermitized(h));
}

ComplexMatrix expm(const ComplexMatrix& m) {
  require_square(m, "expm");
  require_finite(m, "expm");
  if (m.size() == 0) return m;
  ComplexMatrix out = m.exp();
  if (!out.allFinite()) throw NumericalFailure("expm: overflow");
  return out;
}

SuperOperatorMatrix expm(const SuperOperatorMatrix& s, double t) {
  return {s.dim, expm((t * s.matrix).eval())};
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ComplexMatrix partial_trace(const ComplexMatrix& m, const std::vector<Index>& dims,
                            const std::vector<Index>& keep) {
  require_square(m, "partial_trace");
  Index total = 1;
  for (Index d : dims) {
    if (d < 1) throw InputError("partial_trace: subsystem dimension < 1");
    total *= d;
  }
  if (total != m.rows()) {
    std::ostringstream os;
    os << "partial_trace: subsystem dimensions multiply to " << total << ", matrix has " << m.rows();
    throw InputError(os.str());
  }
  const size_t ns = dims.size();
  std::vector<bool> kept(ns, false);
  for (Index k : keep) {
    if (k < 0 || static_cast<size_t>(k) >= ns) throw InputError("partial_trace: keep index out of range");
    kept[static_cast<size_t>(k)] = true;
  }
  Index dk = 1, dt = 1;
  for (size_t s = 0; s < ns; ++s) (kept[s] ? dk : dt) *= dims[s];

  // Split a flat index into (kept index, traced index), both row-major in
  // the order subsystems appear.
  auto split = [&](Index flat, Index& ik, Index& it) {
    std::vector<Index> digits(ns);
    for (size_t s = ns; s-- > 0;) {
      digits[s] = flat % dims[s];
      flat /= dims[s];
    }
    ik = 0;
    it = 0;
    for (size_t s = 0; s < ns; ++s) {
      if (kept[s]) ik = ik * dims[s] + digits[s];
      else it = it * dims[s] + digits[s];
    }
  };
  std::vector<Index> kidx(static_cast<size_t>(total)), tidx(static_cast<size_t>(total));
  for (Index f = 0; f < total; ++f) split(f, kidx[static_cast<size_t>(f)], tidx[static_cast<size_t>(f)]);

  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (Index c = 0; c < total; ++c)
    for (Index r = 0; r < total; ++r)
      if (tidx[static_cast<size_t>(r)] == tidx[static_cast<size_t>(c)])
        out(kidx[static_cast<size_t>(r)], kidx[static_cast<size_t>(c)]) += m(r, c);
  return out;
}

double trace_norm(const ComplexMatrix& m) {
  require_square(m, "trace_norm");
  require_finite(m, "trace_norm");
  const Index n = m.rows();
  if (n == 0) return 0.0;
  if (is_hermitian(m)) return herm_eig(HermitianOperator::hermitized(m)).values.cwiseAbs().sum();
  // Hermitian dilation [[0, M], [M^dagger, 0]] has eigenvalues +-sigma_i.
  ComplexMatrix dil = ComplexMatrix::Zero(2 * n, 2 * n);
  dil.topRightCorner(n, n) = m;
  dil.bottomLeftCorner(n, n) = m.adjoint();
  return 0.5 * herm_eig(HermitianOperator::hermitized(dil)).values.cwiseAbs().sum();
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) { return 0.5 * trace_norm(a - b); }

RealVector clip_probabilities(RealVector p) {
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) < 0.0 && p(i) >= -1e-10) p(i) = 0.0;
  return p;
}

double shannon_entropy(const RealVector& p) {
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 1e-14) s -= p(i) * std::log(p(i));
  return s;
}

double von_neumann_entropy(const DensityMatrix& rho) {
  return shannon_entropy(clip_probabilities(herm_eig(rho.op()).values));
}

ComplexVector vec(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

ComplexMatrix devec(const ComplexVector& v, Index dim) {
  if (v.size() != dim * dim) throw ContractViolation("devec: vector length is not dim^2");
  return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

SuperOperatorMatrix sandwich(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_square(a, "sandwich");
  require_square(b, "sandwich");
  if (a.rows() != b.rows()) throw ContractViolation("sandwich: dimension mismatch");
  return {a.rows(), kron(b.transpose(), a)};
}

HermitianOperator choi_matrix(const SuperOperatorMatrix& phi) {
  const Index d = phi.dim;
  if (phi.matrix.rows() != d * d || phi.matrix.cols() != d * d)
    throw ContractViolation("choi_matrix: superoperator shape does not match dim^2");
  ComplexMatrix c = ComplexMatrix::Zero(d * d, d * d);
  // Column (i + j d) of the superoperator is vec(Phi(|i><j|)).
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const ComplexMatrix out = devec(phi.matrix.col(i + j * d), d);
      c.block(i * d, j * d, d, d) = out;
    }
  }
  return HermitianOperator::hermitized(c);
}

CptpReport cptp_report(const SuperOperatorMatrix& phi, double tol) {
  const Index d = phi.dim;
  const HermitianOperator c = choi_matrix(phi);
  CptpReport rep;
  // eigenvalues only; Jacobi vectors are not needed here
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(c.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("cptp_report: eigenvalue solver failed");
  rep.min_choi_eigenvalue = es.eigenvalues()(0);
  const ComplexMatrix tr_out = partial_trace(c.matrix(), {d, d}, {0});
  rep.trace_preservation_error = max_abs(tr_out - ComplexMatrix::Identity(d, d));
  rep.cptp = rep.min_choi_eigenvalue >= -tol && rep.trace_preservation_error <= tol;
  return rep;
}

bool is_cptp(const SuperOperatorMatrix& phi, double tol) { return cptp_report(phi, tol).cptp; }

}  // namespace molbat
