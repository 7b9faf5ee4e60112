#include "molbat/davies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

using Triplet = Eigen::Triplet<cplx>;

double max_abs(const ComplexMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Groups sorted values into clusters whose consecutive gaps are <= tol.
// Returns, for each position in `order`, the cluster index.
std::vector<int> cluster_sorted(const std::vector<double>& values, const std::vector<Index>& order, double tol) {
  std::vector<int> label(order.size(), 0);
  int c = 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (values[static_cast<std::size_t>(order[i])] - values[static_cast<std::size_t>(order[i - 1])] > tol) ++c;
    label[i] = c;
  }
  return label;
}

SparseComplex to_sparse(const ComplexMatrix& m, double rel_drop) {
  const double thr = rel_drop * max_abs(m);
  std::vector<Triplet> t;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > thr) t.emplace_back(i, j, m(i, j));
  SparseComplex s(m.rows(), m.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

bool is_diagonal(const ComplexMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != cplx(0.0)) return false;
  return true;
}

}  // namespace

ComplexMatrix BohrDecomposition::reconstruct() const {
  if (terms.empty()) return {};
  ComplexMatrix s = ComplexMatrix::Zero(terms.front().op.rows(), terms.front().op.cols());
  for (const auto& t : terms) s += t.op;
  return s;
}

const BohrComponent* BohrDecomposition::find(double omega, double tol) const {
  for (const auto& t : terms)
    if (std::abs(t.omega - omega) <= tol) return &t;
  return nullptr;
}

double default_cluster_tol(const RealVector& energies) {
  if (energies.size() == 0) return 1e-9;
  const double spread = energies.maxCoeff() - energies.minCoeff();
  return spread > 0.0 ? 1e-9 * spread : 1e-9;
}

namespace {

struct SparseBohrTerm {
  double omega;
  SparseComplex eigen_op;
  ComplexMatrix op;
};

std::vector<SparseBohrTerm> bohr_terms(const EigenSystem& es, const ComplexMatrix& s, double cluster_tol) {
  const Index d = es.values.size();
  if (s.rows() != d || s.cols() != d) throw ContractViolation("bohr_decompose: dimension mismatch");
  if (cluster_tol < 0.0) cluster_tol = default_cluster_tol(es.values);
  const ComplexMatrix& v = es.vectors;
  const ComplexMatrix st = v.adjoint() * s * v;
  const double thr = 1e-14 * max_abs(st);

  struct Entry {
    Index l, k;
    double omega;
  };
  std::vector<Entry> entries;
  for (Index k = 0; k < d; ++k)
    for (Index l = 0; l < d; ++l)
      if (std::abs(st(l, k)) > thr) entries.push_back({l, k, es.values(k) - es.values(l)});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.omega < b.omega; });

  std::vector<SparseBohrTerm> out;
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i + 1;
    while (j < entries.size() && entries[j].omega - entries[j - 1].omega <= cluster_tol) ++j;
    double mean = 0.0;
    std::vector<Triplet> trip;
    std::vector<Index> rows, cols;
    for (std::size_t q = i; q < j; ++q) {
      mean += entries[q].omega;
      trip.emplace_back(entries[q].l, entries[q].k, st(entries[q].l, entries[q].k));
      rows.push_back(entries[q].l);
      cols.push_back(entries[q].k);
    }
    mean /= static_cast<double>(j - i);
    SparseComplex so(d, d);
    so.setFromTriplets(trip.begin(), trip.end());

    // V S~ V^dagger restricted to the rows/cols actually touched.
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    ComplexMatrix sub = ComplexMatrix::Zero(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t q = i; q < j; ++q) {
      const auto r = std::lower_bound(rows.begin(), rows.end(), entries[q].l) - rows.begin();
      const auto c = std::lower_bound(cols.begin(), cols.end(), entries[q].k) - cols.begin();
      sub(r, c) = st(entries[q].l, entries[q].k);
    }
    const ComplexMatrix op = v(Eigen::all, rows) * sub * v(Eigen::all, cols).adjoint();
    out.push_back({mean, std::move(so), op});
    i = j;
  }
  return out;
}

}  // namespace

BohrDecomposition bohr_decompose(const EigenSystem& es, const ComplexMatrix& s, double cluster_tol) {
  BohrDecomposition bd;
  for (auto& t : bohr_terms(es, s, cluster_tol)) bd.terms.push_back({t.omega, std::move(t.op)});
  return bd;
}

BohrDecomposition bohr_decompose(const HermitianOperator& h, const ComplexMatrix& s, double cluster_tol) {
  return bohr_decompose(herm_eig(h), s, cluster_tol);
}

GKLSGenerator::GKLSGenerator(HermitianOperator h, std::vector<Channel> channels)
    : h_(std::move(h)), channels_(std::move(channels)) {
  const Index d = h_.dim();
  k_ = ComplexMatrix::Zero(d, d);
  for (const auto& c : channels_) {
    if (!std::isfinite(c.rate) || c.rate < 0.0) {
      std::ostringstream os;
      os << "GKLS channel rate must be finite and >= 0, got " << c.rate;
      throw InvariantViolation(os.str());
    }
    if (c.jump.rows() != d || c.jump.cols() != d) throw ContractViolation("GKLS channel: jump dimension mismatch");
    k_.noalias() += c.rate * (c.jump.adjoint() * c.jump);
  }
}

ComplexMatrix GKLSGenerator::apply_dissipator(const ComplexMatrix& rho) const {
  ComplexMatrix out = -0.5 * (k_ * rho + rho * k_);
  for (const auto& c : channels_) out.noalias() += c.rate * (c.jump * rho * c.jump.adjoint());
  return out;
}

ComplexMatrix GKLSGenerator::apply(const ComplexMatrix& rho) const {
  const ComplexMatrix& h = h_.matrix();
  ComplexMatrix out = apply_dissipator(rho);
  out.noalias() += -kI * (h * rho - rho * h);
  return out;
}

double GKLSGenerator::max_rate() const {
  double m = 0.0;
  for (const auto& c : channels_) m = std::max(m, c.rate * c.jump.squaredNorm());
  return m;
}

GKLSGenerator combine(const GKLSGenerator& a, const GKLSGenerator& b) {
  const ComplexMatrix& ha = a.hamiltonian().matrix();
  const ComplexMatrix& hb = b.hamiltonian().matrix();
  if (ha.rows() != hb.rows()) throw ContractViolation("combine: dimension mismatch");
  const double scale = std::max({max_abs(ha), max_abs(hb), 1e-300});
  if (max_abs(ha - hb) > 1e-12 * scale) throw ContractViolation("combine: generators have different Hamiltonians");
  std::vector<Channel> ch = a.channels();
  ch.insert(ch.end(), b.channels().begin(), b.channels().end());
  return GKLSGenerator(a.hamiltonian(), std::move(ch));
}

GKLSGenerator assemble_davies(const HermitianOperator& h, const std::vector<Coupling>& couplings,
                              const DaviesOptions& opt) {
  auto frame = std::make_shared<const EigenSystem>(herm_eig(h));
  std::vector<Channel> channels;
  auto push = [&channels, &frame](double rate, double omega, ComplexMatrix op, SparseComplex eop) {
    if (!std::isfinite(rate) || rate < 0.0) {
      std::ostringstream os;
      os << "coupling spectrum returned " << rate << " at omega = " << omega;
      throw InvariantViolation(os.str());
    }
    if (rate == 0.0) return;
    channels.push_back({rate, std::move(op), frame, std::move(eop)});
  };
  for (const auto& c : couplings) {
    if (c.kind == CouplingKind::Hermitian && !is_hermitian(c.op))
      throw ContractViolation("assemble_davies: Hermitian coupling expected");
    auto terms = bohr_terms(*frame, c.op, opt.cluster_tol);
    for (auto& t : terms) {
      if (c.kind == CouplingKind::Hermitian) {
        push(c.spectrum(t.omega), t.omega, std::move(t.op), std::move(t.eigen_op));
      } else {
        const double down = c.spectrum.downward(t.omega);
        const double up = c.spectrum.upward(t.omega);
        SparseComplex eadj = t.eigen_op.adjoint();
        ComplexMatrix adj = t.op.adjoint();
        push(down, t.omega, std::move(t.op), std::move(t.eigen_op));
        push(up, -t.omega, std::move(adj), std::move(eadj));
      }
    }
  }
  if (opt.min_rate > 0.0 && !channels.empty()) {
    double mx = 0.0;
    for (const auto& c : channels) mx = std::max(mx, c.rate * c.jump.squaredNorm());
    std::erase_if(channels, [&](const Channel& c) { return c.rate * c.jump.squaredNorm() <= opt.min_rate * mx; });
  }
  return GKLSGenerator(h, std::move(channels));
}

SuperOperatorMatrix hamiltonian_superop(const HermitianOperator& h) {
  const Index d = h.dim();
  if (d > kMaxSuperopDim) throw ResourceError("superoperator requested for dimension " + std::to_string(d));
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  return {d, -kI * (kron(id, h.matrix()) - kron(h.matrix().transpose(), id))};
}

SuperOperatorMatrix dissipator_superop(const GKLSGenerator& g) {
  const Index d = g.dim();
  if (d > kMaxSuperopDim) throw ResourceError("superoperator requested for dimension " + std::to_string(d));
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix& k = g.decay_operator();
  ComplexMatrix m = -0.5 * (kron(id, k) + kron(k.transpose(), id));
  for (const auto& c : g.channels()) m.noalias() += c.rate * kron(c.jump.conjugate(), c.jump);
  return {d, std::move(m)};
}

SuperOperatorMatrix generator_superop(const GKLSGenerator& g) {
  SuperOperatorMatrix s = dissipator_superop(g);
  s.matrix += hamiltonian_superop(g.hamiltonian()).matrix;
  return s;
}

namespace {

constexpr double kKernelTol = 1e-9;  // |lambda| of the generator
constexpr double kResidualTol = 1e-9;

// Parlett-Reinsch diagonal balancing with radix-2 factors. Similarity
// transforms leave eigenvalues unchanged but shrink their sensitivity for the
// strongly graded matrices produced by Boltzmann-suppressed rates.
struct Balanced {
  ComplexMatrix m;  // diag(d)^-1 M diag(d)
  RealVector d;
};

Balanced balance(ComplexMatrix m) {
  const Index n = m.rows();
  RealVector d = RealVector::Ones(n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Index j = 0; j < n; ++j)
        if (j != i) {
          c += std::abs(m(j, i));
          r += std::abs(m(i, j));
        }
      if (c == 0.0 || r == 0.0) continue;
      const double total = c + r;
      double f = 1.0;
      while (c < 0.5 * r) {
        c *= 2.0;
        r *= 0.5;
        f *= 2.0;
      }
      while (c >= 2.0 * r) {
        c *= 0.5;
        r *= 2.0;
        f *= 0.5;
      }
      if (c + r < 0.95 * total) {
        m.row(i) /= f;
        m.col(i) *= f;
        d(i) *= f;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return {std::move(m), std::move(d)};
}

int count_kernel(const ComplexMatrix& mb) {
  const Eigen::ComplexEigenSolver<ComplexMatrix> ces(mb, false);
  if (ces.info() != Eigen::Success) throw NumericalFailure("stationary_state: eigenvalue iteration failed");
  int n = 0;
  for (Index i = 0; i < mb.rows(); ++i)
    if (std::abs(ces.eigenvalues()(i)) < kKernelTol) ++n;
  return n;
}

// Kernel vector of M by inverse iteration in balanced coordinates x = d .* y,
// normalized so that t^T x = 1.
ComplexVector kernel_vector(const Balanced& b, const ComplexVector& tr) {
  const Index s = b.m.rows();
  const double shift = 1e-14 * std::max(b.m.cwiseAbs().maxCoeff(), 1e-300);
  const Eigen::PartialPivLU<ComplexMatrix> lu(b.m - cplx(shift) * ComplexMatrix::Identity(s, s));
  const ComplexVector w = (tr.array() * b.d.cast<cplx>().array()).matrix();
  ComplexVector y = w.conjugate();
  for (int it = 0; it < 4; ++it) {
    y = lu.solve(y);
    y /= y.norm();
  }
  y /= w.dot(y.conjugate()) == cplx(0.0) ? cplx(1.0) : cplx(w.transpose() * y);
  return (y.array() * b.d.cast<cplx>().array()).matrix();
}

StationaryReport full_route(const GKLSGenerator& g) {
  const Index d = g.dim();
  const SuperOperatorMatrix l = generator_superop(g);
  const Balanced lb = balance(l.matrix);
  const int kd = count_kernel(lb.m);
  if (kd > 1) throw NonErgodic("stationary_state: kernel dimension " + std::to_string(kd), kd);
  if (kd == 0) throw NumericalFailure("stationary_state: no kernel within tolerance");
  ComplexVector tr = vec(ComplexMatrix::Identity(d, d));
  ComplexVector x = kernel_vector(lb, tr);
  ComplexMatrix rho = devec(x, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  StationaryReport r;
  r.rho = rho;
  r.residual = trace_norm(g.apply(rho));
  r.kernel_dim = kd;
  r.solved_dim = d * d;
  return r;
}

// Generator restricted to the zero-Bohr-frequency sector in the eigenframe of H.
struct Sector {
  std::shared_ptr<const EigenSystem> frame;
  bool identity_frame = false;
  std::vector<SparseComplex> lt;  // jumps in the eigenframe
  std::vector<double> rates;
  ComplexMatrix kt;  // sum rate L^dagger L in the eigenframe
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<Index> pos;  // a + d b -> sector index or -1
  ComplexMatrix m;

  ComplexMatrix to_frame(const ComplexMatrix& x) const {
    return identity_frame ? x : ComplexMatrix(frame->vectors.adjoint() * x * frame->vectors);
  }
  ComplexMatrix from_frame(const ComplexMatrix& x) const {
    return identity_frame ? x : ComplexMatrix(frame->vectors * x * frame->vectors.adjoint());
  }
};

Sector build_sector(const GKLSGenerator& g) {
  const Index d = g.dim();
  const ComplexMatrix& hm = g.hamiltonian().matrix();

  // Eigenframe of H: reuse the one the channels were built in when possible.
  Sector sec;
  std::shared_ptr<const EigenSystem>& frame = sec.frame;
  bool& identity_frame = sec.identity_frame;
  for (const auto& c : g.channels())
    if (c.frame) {
      frame = c.frame;
      break;
    }
  if (!frame) {
    if (is_diagonal(hm)) {
      auto es = std::make_shared<EigenSystem>();
      es->values = hm.diagonal().real();
      es->vectors = ComplexMatrix::Identity(d, d);
      frame = es;
      identity_frame = true;
    } else {
      frame = std::make_shared<const EigenSystem>(herm_eig(g.hamiltonian()));
    }
  }
  const ComplexMatrix& v = frame->vectors;
  const RealVector& eps = frame->values;

  std::vector<SparseComplex>& lt = sec.lt;
  std::vector<double>& rates = sec.rates;
  lt.reserve(g.channels().size());
  for (const auto& c : g.channels()) {
    if (c.frame == frame && c.eigen_jump.rows() == d) {
      lt.push_back(c.eigen_jump);
    } else if (identity_frame) {
      lt.push_back(to_sparse(c.jump, 0.0));
    } else {
      lt.push_back(to_sparse(v.adjoint() * c.jump * v, 1e-15));
    }
    rates.push_back(c.rate);
  }
  ComplexMatrix& kt = sec.kt;
  kt = ComplexMatrix::Zero(d, d);
  for (std::size_t j = 0; j < lt.size(); ++j) kt += rates[j] * ComplexMatrix(lt[j].adjoint() * lt[j]);

  // Zero-Bohr-frequency sector: pairs (a, b) of (near-)degenerate levels.
  std::vector<double> ev(eps.data(), eps.data() + d);
  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&ev](Index a, Index b) { return ev[a] < ev[b]; });
  const auto lab = cluster_sorted(ev, order, default_cluster_tol(eps));
  std::vector<int> cluster(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < order.size(); ++i) cluster[static_cast<std::size_t>(order[i])] = lab[i];
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(lab.empty() ? 0 : lab.back() + 1));
  for (Index a = 0; a < d; ++a) members[static_cast<std::size_t>(cluster[a])].push_back(a);

  std::vector<std::pair<Index, Index>>& pairs = sec.pairs;
  std::vector<Index>& pos = sec.pos;
  pos.assign(static_cast<std::size_t>(d * d), -1);
  for (const auto& mem : members)
    for (Index a : mem)
      for (Index b : mem) {
        pos[static_cast<std::size_t>(a + d * b)] = static_cast<Index>(pairs.size());
        pairs.emplace_back(a, b);
      }
  const Index s = static_cast<Index>(pairs.size());
  if (s > 4096) throw ResourceError("stationary_state: degenerate sector of size " + std::to_string(s));

  ComplexMatrix& m = sec.m;
  m = ComplexMatrix::Zero(s, s);
  for (Index p = 0; p < s; ++p) m(p, p) += -kI * (eps(pairs[p].first) - eps(pairs[p].second));
  for (std::size_t j = 0; j < lt.size(); ++j) {
    const SparseComplex& l = lt[j];
    std::vector<Triplet> nz;
    for (Index col = 0; col < l.outerSize(); ++col)
      for (SparseComplex::InnerIterator it(l, col); it; ++it) nz.emplace_back(it.row(), it.col(), it.value());
    for (const auto& x : nz)
      for (const auto& y : nz) {
        // (L rho L^dagger)_{ab} gets L_ac rho_ce conj(L_be)
        const Index a = x.row(), c = x.col(), b = y.row(), e = y.col();
        const Index row = pos[static_cast<std::size_t>(a + d * b)];
        const Index col = pos[static_cast<std::size_t>(c + d * e)];
        if (row < 0 || col < 0) continue;
        m(row, col) += rates[j] * x.value() * std::conj(y.value());
      }
  }
  for (Index p = 0; p < s; ++p) {
    const Index a = pairs[p].first, b = pairs[p].second;
    for (Index c : members[static_cast<std::size_t>(cluster[a])]) {
      const Index q = pos[static_cast<std::size_t>(c + d * b)];
      if (q >= 0) m(p, q) -= 0.5 * kt(a, c);
    }
    for (Index e : members[static_cast<std::size_t>(cluster[b])]) {
      const Index q = pos[static_cast<std::size_t>(a + d * e)];
      if (q >= 0) m(p, q) -= 0.5 * kt(e, b);
    }
  }
  return sec;
}

}  // namespace

StationaryReport solve_stationary(const GKLSGenerator& g) {
  const Index d = g.dim();
  const Sector sec = build_sector(g);
  const auto& [frame, identity_frame, lt, rates, kt, pairs, pos, m] = sec;
  const ComplexMatrix& v = frame->vectors;
  const RealVector& eps = frame->values;
  const Index s = static_cast<Index>(pairs.size());

  const Balanced mb = balance(m);
  const int kd = count_kernel(mb.m);
  if (kd > 1) throw NonErgodic("stationary_state: kernel dimension " + std::to_string(kd), kd);
  if (kd == 0) throw NumericalFailure("stationary_state: no kernel within tolerance");

  ComplexVector tr = ComplexVector::Zero(s);
  for (Index p = 0; p < s; ++p)
    if (pairs[p].first == pairs[p].second) tr(p) = 1.0;
  const ComplexVector x = kernel_vector(mb, tr);

  ComplexMatrix rt = ComplexMatrix::Zero(d, d);
  for (Index p = 0; p < s; ++p) rt(pairs[p].first, pairs[p].second) = x(p);
  rt = 0.5 * (rt + rt.adjoint()).eval();
  rt /= rt.trace().real();

  // Residual in the eigenframe (unitarily invariant).
  ComplexMatrix res = -0.5 * (kt * rt + rt * kt);
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) res(a, b) += -kI * (eps(a) - eps(b)) * rt(a, b);
  for (std::size_t j = 0; j < lt.size(); ++j) {
    const ComplexMatrix lr = lt[j] * rt;
    res.noalias() += rates[j] * ComplexMatrix(lr * lt[j].adjoint());
  }
  const double residual = trace_norm(res);
  const double tol = kResidualTol * std::max(1.0, m.cwiseAbs().maxCoeff());
  if (residual > tol) {
    if (d * d <= 256) return full_route(g);
    std::ostringstream os;
    os << "stationary_state: residual " << residual << " exceeds " << tol;
    throw NumericalFailure(os.str());
  }
  StationaryReport r;
  r.rho = identity_frame ? rt : ComplexMatrix(v * rt * v.adjoint());
  r.rho = 0.5 * (r.rho + r.rho.adjoint()).eval();
  r.residual = residual;
  r.kernel_dim = kd;
  r.solved_dim = s;
  return r;
}

DensityMatrix stationary_state(const GKLSGenerator& g) { return DensityMatrix::from_numerical(solve_stationary(g).rho); }

SuperOperatorMatrix propagator(const GKLSGenerator& g, double t) {
  if (!(t >= 0.0)) throw ContractViolation("propagate: t must be >= 0");
  if (g.dim() > kMaxPropagationDim)
    throw ResourceError("propagate: dimension " + std::to_string(g.dim()) + " exceeds dense limit " +
                        std::to_string(kMaxPropagationDim));
  return expm(generator_superop(g), t);
}

DensityMatrix propagate(const SuperOperatorMatrix& prop, const DensityMatrix& rho0) {
  ComplexMatrix rho = prop.apply(rho0.matrix());
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double drift = std::abs(rho.trace() - cplx(1.0));
  if (drift > 1e-9) {
    std::ostringstream os;
    os << "propagate: trace drift " << drift;
    throw NumericalFailure(os.str());
  }
  return DensityMatrix::from_numerical(rho);
}

DensityMatrix propagate(const GKLSGenerator& g, const DensityMatrix& rho0, double t) {
  return propagate(propagator(g, t), rho0);
}

std::vector<DensityMatrix> propagate_sector(const GKLSGenerator& g, const DensityMatrix& rho0,
                                            const std::vector<double>& times) {
  const Index d = g.dim();
  if (rho0.dim() != d) throw ContractViolation("propagate_sector: dimension mismatch");
  for (double t : times)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ContractViolation("propagate_sector: times must be finite and >= 0");
  const Sector sec = build_sector(g);
  const Index s = static_cast<Index>(sec.pairs.size());
  const ComplexMatrix r0 = sec.to_frame(rho0.matrix());
  ComplexVector x0(s);
  double inside = 0.0;
  for (Index p = 0; p < s; ++p) {
    x0(p) = r0(sec.pairs[p].first, sec.pairs[p].second);
    inside += std::norm(x0(p));
  }
  const double outside = std::sqrt(std::max(0.0, r0.squaredNorm() - inside));
  if (outside > 1e-12 * r0.norm()) {
    std::ostringstream os;
    os << "propagate_sector: initial state has coherence weight " << outside << " between distinct energies";
    throw ContractViolation(os.str());
  }
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  for (double t : times) {
    const ComplexVector x = expm((t * sec.m).eval()) * x0;
    ComplexMatrix rt = ComplexMatrix::Zero(d, d);
    for (Index p = 0; p < s; ++p) rt(sec.pairs[p].first, sec.pairs[p].second) = x(p);
    ComplexMatrix rho = sec.from_frame(rt);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double drift = std::abs(rho.trace() - cplx(1.0));
    if (drift > 1e-9) {
      std::ostringstream os;
      os << "propagate_sector: trace drift " << drift << " at t = " << t;
      throw NumericalFailure(os.str());
    }
    out.push_back(DensityMatrix::from_numerical(rho));
  }
  return out;
}

DensityMatrix gibbs_state(const HermitianOperator& h, double T) {
  if (!(T >= 0.0)) throw InputError("gibbs_state: T must be >= 0");
  const EigenSystem es = herm_eig(h);
  const Index d = h.dim();
  RealVector p(d);
  const double e0 = es.values(0);
  const double tol = default_cluster_tol(es.values);
  for (Index i = 0; i < d; ++i) {
    const double de = es.values(i) - e0;
    if (T == 0.0)
      p(i) = de <= tol ? 1.0 : 0.0;
    else if (std::isinf(T))
      p(i) = 1.0;
    else
      p(i) = std::exp(-de / T);
  }
  p /= p.sum();
  ComplexMatrix rho = es.vectors * p.cast<cplx>().asDiagonal() * es.vectors.adjoint();
  return DensityMatrix::from_numerical(rho);
}

}  // namespace molbat
