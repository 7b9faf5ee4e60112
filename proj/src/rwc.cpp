#include "molbat/rwc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "molbat/davies.hpp"
#include "molbat/errors.hpp"
#include "molbat/parallel.hpp"

namespace molbat {

namespace {

constexpr Index kMaxRwcDim = 20;

void validate(const ExponentialCorrelation& e) {
  if (!std::isfinite(e.c) || e.c < 0.0) throw InputError("exponential correlation: c must be finite and >= 0");
  if (!std::isfinite(e.kappa) || e.kappa <= 0.0) throw InputError("exponential correlation: kappa must be > 0");
  if (!std::isfinite(e.Omega)) throw InputError("exponential correlation: Omega must be finite");
  if (!std::isfinite(e.kms_T) || e.kms_T < 0.0) throw InputError("exponential correlation: kms_T must be >= 0");
  if (e.kms_T > 0.0 && e.Omega <= 0.0) throw InputError("exponential correlation: kms_T needs Omega > 0");
}

void validate(const TabulatedCorrelation& t) {
  if (t.tau.size() < 2 || t.tau.size() != t.F.size())
    throw InputError("tabulated correlation: need at least two (tau, F) samples of equal length");
  if (t.tau.front() != 0.0) throw InputError("tabulated correlation: first sample must be at tau = 0");
  for (std::size_t i = 0; i < t.tau.size(); ++i) {
    if (!std::isfinite(t.tau[i]) || !std::isfinite(t.F[i].real()) || !std::isfinite(t.F[i].imag()))
      throw InputError("tabulated correlation: non-finite sample");
    if (i > 0 && t.tau[i] <= t.tau[i - 1]) throw InputError("tabulated correlation: tau must be strictly ascending");
  }
  if (std::abs(t.F.front().imag()) > 1e-12 * std::max(1.0, std::abs(t.F.front())))
    throw InputError("tabulated correlation: F(0) must be real");
}

// Weight of the mirrored component in the KMS variant.
double kms_weight(const ExponentialCorrelation& e) {
  const double x = std::exp(-e.Omega / e.kms_T);
  const double r = e.kappa * e.kappa / (e.kappa * e.kappa + 4.0 * e.Omega * e.Omega);
  if (x < r)
    throw InputError("exponential correlation: kms_T too low for this kappa/Omega (mirror weight would be negative)");
  return (x - r) / (1.0 - x * r);
}

// (exp(x t) - 1) / x, t at x = 0.
cplx expint(cplx x, double t) {
  const cplx y = x * t;
  if (std::abs(y) < 1e-3) {
    cplx term = 1.0, sum = 1.0;
    for (int n = 2; n <= 8; ++n) {
      term *= y / static_cast<double>(n);
      sum += term;
    }
    return t * sum;
  }
  return (std::exp(y) - 1.0) / x;
}

using Gauss = boost::math::quadrature::gauss<double, 20>;

// Adaptive Gauss-Legendre: a panel is accepted when the 20-point rule and the
// sum over its two halves agree to the panel's share of tol.
template <class Fn>
cplx adaptive_gl(Fn&& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  struct Panel {
    double a, b;
    cplx whole;
  };
  const double total = b - a;
  std::vector<Panel> stack{{a, b, Gauss::integrate(f, a, b)}};
  cplx sum = 0.0;
  std::size_t panels = 0;
  while (!stack.empty()) {
    const Panel p = stack.back();
    stack.pop_back();
    const double m = 0.5 * (p.a + p.b);
    const cplx left = Gauss::integrate(f, p.a, m);
    const cplx right = Gauss::integrate(f, m, p.b);
    const cplx halves = left + right;
    const double err = std::abs(halves - p.whole);
    const double allowed = std::max(tol * (p.b - p.a) / total, 1e-15 * std::abs(halves));
    if (err <= allowed) {
      sum += halves;
      continue;
    }
    if (++panels > 200000 || (p.b - p.a) < 1e-12 * total) {
      std::ostringstream msg;
      msg << "quadrature did not converge on [" << p.a << ", " << p.b << "]: error estimate " << err
          << " > " << allowed;
      throw NumericalFailure(msg.str());
    }
    stack.push_back({p.a, m, left});
    stack.push_back({m, p.b, right});
  }
  return sum;
}

// Integral over [a, b] split at the given sorted breakpoints.
template <class Fn>
cplx piecewise_gl(Fn&& f, double a, double b, const std::vector<double>& cuts, double tol) {
  std::vector<double> pts{a};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  pts.push_back(b);
  cplx sum = 0.0;
  const double per = tol / static_cast<double>(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += adaptive_gl(f, pts[i], pts[i + 1], per);
  return sum;
}

struct Clustering {
  std::vector<double> freqs;
  std::vector<Index> index;  // index(k + l d): cluster of E_l - E_k
};

Clustering cluster_bohr(const RealVector& e) {
  const Index d = e.size();
  const double tol = default_cluster_tol(e);
  std::vector<std::pair<double, Index>> all;
  all.reserve(static_cast<std::size_t>(d * d));
  for (Index l = 0; l < d; ++l)
    for (Index k = 0; k < d; ++k) all.push_back({e(l) - e(k), k + l * d});
  std::sort(all.begin(), all.end());
  Clustering out;
  out.index.assign(all.size(), 0);
  double sum = 0.0;
  std::size_t count = 0, start = 0;
  auto close = [&](std::size_t end) {
    out.freqs.push_back(sum / static_cast<double>(count));
    for (std::size_t j = start; j < end; ++j)
      out.index[static_cast<std::size_t>(all[j].second)] = static_cast<Index>(out.freqs.size() - 1);
  };
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (count > 0 && all[i].first - all[i - 1].first > tol) {
      close(i);
      sum = 0.0;
      count = 0;
      start = i;
    }
    sum += all[i].first;
    ++count;
  }
  close(all.size());
  return out;
}

struct Frame {
  EigenSystem es;
  ComplexMatrix s;  // S in the eigenbasis
  Clustering bohr;
};

Frame make_frame(const HermitianOperator& h, const ComplexMatrix& s) {
  if (h.dim() > kMaxRwcDim) throw ResourceError("cumulant propagator: dimension above 20");
  if (s.rows() != h.dim() || s.cols() != h.dim()) throw ContractViolation("cumulant propagator: S shape mismatch");
  if (!is_hermitian(s)) throw ContractViolation("cumulant propagator: S must be Hermitian");
  Frame f{herm_eig(h), {}, {}};
  f.s = f.es.vectors.adjoint() * s * f.es.vectors;
  f.bohr = cluster_bohr(f.es.values);
  return f;
}

// Superoperator sum C_ff' (S_w rho S_w'^dagger - {S_w'^dagger S_w, rho}/2) and
// H_L = (i/2) sum D_ff' S_w'^dagger S_w, both in the original basis.
std::pair<SuperOperatorMatrix, ComplexMatrix> assemble(const Frame& fr, const ComplexMatrix& C, const ComplexMatrix* D) {
  const Index d = fr.s.rows();
  const ComplexMatrix& s = fr.s;
  auto f = [&](Index k, Index l) { return fr.bohr.index[static_cast<std::size_t>(k + l * d)]; };
  ComplexMatrix k2 = ComplexMatrix::Zero(d * d, d * d);
  // sandwich: out(k, m) += C(w_kl, w_mn) S_kl rho_ln S_nm
  for (Index k = 0; k < d; ++k)
    for (Index l = 0; l < d; ++l) {
      const cplx skl = s(k, l);
      if (skl == 0.0) continue;
      for (Index m = 0; m < d; ++m)
        for (Index n = 0; n < d; ++n) {
          const cplx snm = s(n, m);
          if (snm == 0.0) continue;
          k2(k + m * d, l + n * d) += C(f(k, l), f(m, n)) * skl * snm;
        }
    }
  ComplexMatrix M = ComplexMatrix::Zero(d, d);
  ComplexMatrix HL = ComplexMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) {
        const cplx prod = s(i, k) * s(k, j);
        if (prod == 0.0) continue;
        M(i, j) += C(f(k, j), f(k, i)) * prod;
        if (D) HL(i, j) += 0.5 * kI * (*D)(f(k, j), f(k, i)) * prod;
      }
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i)
      for (Index l = 0; l < d; ++l) {
        k2(i + j * d, l + j * d) -= 0.5 * M(i, l);
        k2(i + j * d, i + l * d) -= 0.5 * M(l, j);
      }
  const ComplexMatrix& v = fr.es.vectors;
  const ComplexMatrix u = kron(v.conjugate(), v);
  SuperOperatorMatrix out{d, u * k2 * u.adjoint()};
  return {out, v * HL * v.adjoint()};
}

}  // namespace

BathCorrelation::BathCorrelation(ExponentialCorrelation e) : v_(e) {
  validate(e);
  if (e.kms_T > 0.0) kms_weight(e);
  check_positive_spectrum();
}

BathCorrelation::BathCorrelation(TabulatedCorrelation t) : v_(std::move(t)) {
  validate(std::get<TabulatedCorrelation>(v_));
  check_positive_spectrum();
}

std::vector<std::pair<double, cplx>> BathCorrelation::exponential_terms() const {
  const auto* e = std::get_if<ExponentialCorrelation>(&v_);
  if (!e) throw ContractViolation("exponential_terms: tabulated correlation");
  if (e->kms_T > 0.0)
    return {{e->c, cplx(e->kappa, -e->Omega)}, {e->c * kms_weight(*e), cplx(e->kappa, e->Omega)}};
  return {{e->c, cplx(e->kappa, e->Omega)}};
}

cplx BathCorrelation::operator()(double tau) const {
  const double a = std::abs(tau);
  cplx val = 0.0;
  if (std::holds_alternative<ExponentialCorrelation>(v_)) {
    for (const auto& [c, z] : exponential_terms()) val += c * std::exp(-z * a);
  } else {
    const auto& t = std::get<TabulatedCorrelation>(v_);
    if (a >= t.tau.back()) {
      val = a == t.tau.back() ? t.F.back() : cplx(0.0);
    } else {
      const auto it = std::upper_bound(t.tau.begin(), t.tau.end(), a);
      const std::size_t i = static_cast<std::size_t>(it - t.tau.begin()) - 1;
      const double x = (a - t.tau[i]) / (t.tau[i + 1] - t.tau[i]);
      val = (1.0 - x) * t.F[i] + x * t.F[i + 1];
    }
  }
  return tau < 0.0 ? std::conj(val) : val;
}

std::vector<double> BathCorrelation::breakpoints() const {
  if (const auto* t = std::get_if<TabulatedCorrelation>(&v_))
    return std::vector<double>(t->tau.begin() + 1, t->tau.end());
  return {};
}

double BathCorrelation::spectrum(double omega) const {
  if (std::holds_alternative<ExponentialCorrelation>(v_)) {
    double g = 0.0;
    for (const auto& [c, z] : exponential_terms()) g += 2.0 * c * (1.0 / (z + kI * omega)).real();
    return g;
  }
  const auto& t = std::get<TabulatedCorrelation>(v_);
  auto integrand = [&](double tau) { return (*this)(tau) * std::exp(-kI * omega * tau); };
  return 2.0 * piecewise_gl(integrand, 0.0, t.tau.back(), breakpoints(), 1e-12).real();
}

void BathCorrelation::check_positive_spectrum() const {
  double wmax = 0.0;
  if (const auto* e = std::get_if<ExponentialCorrelation>(&v_)) {
    wmax = std::abs(e->Omega) + 20.0 * e->kappa;
  } else {
    const auto& t = std::get<TabulatedCorrelation>(v_);
    double h = t.tau.back();
    for (std::size_t i = 1; i < t.tau.size(); ++i) h = std::min(h, t.tau[i] - t.tau[i - 1]);
    wmax = M_PI / h;
  }
  const int n = 201;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = spectrum(-wmax + 2.0 * wmax * i / (n - 1));
  const double gmax = *std::max_element(g.begin(), g.end());
  const double gmin = *std::min_element(g.begin(), g.end());
  if (gmin < -1e-8 * std::max(gmax, 0.0)) {
    std::ostringstream msg;
    msg << "bath correlation: spectrum is negative on the check grid (min " << gmin << ", max " << gmax << ")";
    throw InputError(msg.str());
  }
}

TabulatedCorrelation load_tabulated_correlation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open correlation file " + path);
  TabulatedCorrelation t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double tau = 0.0, re = 0.0, im = 0.0;
    if (!(row >> tau >> re)) {
      if (t.tau.empty() && lineno == 1) continue;  // header
      throw InputError(path + ":" + std::to_string(lineno) + ": expected two or three numbers");
    }
    if (!(row >> im)) im = 0.0;
    t.tau.push_back(tau);
    t.F.push_back({re, im});
  }
  BathCorrelation check{t};
  return t;
}

CumulantCoefficients coefficients_closed_form(const BathCorrelation& f, double w, double wp, double t) {
  if (t < 0.0) throw ContractViolation("cumulant coefficients: t < 0");
  CumulantCoefficients out{0.0, 0.0};
  const cplx common = expint(kI * (wp - w), t);
  for (const auto& [c, z] : f.exponential_terms()) {
    // s > u and s < u halves of the square
    const cplx P = c / (z + kI * wp) * (common - expint(-(z + kI * w), t));
    const cplx Q = c / (std::conj(z) - kI * w) * (common - expint(kI * wp - std::conj(z), t));
    out.C += P + Q;
    out.D += Q - P;
  }
  return out;
}

CumulantCoefficients coefficients_quadrature(const BathCorrelation& f, double w, double wp, double t, double tol) {
  if (t < 0.0) throw ContractViolation("cumulant coefficients: t < 0");
  const double delta = w - wp;
  // tau = s - u; W(tau) is the remaining u integral over [max(0, -tau), min(t, t - tau)]
  auto integrand = [&](double tau) {
    const double u0 = std::max(0.0, -tau);
    const double u1 = std::min(t, t - tau);
    const cplx W = std::exp(-kI * delta * u0) * expint(-kI * delta, u1 - u0);
    return f(tau) * std::exp(-kI * w * tau) * W;
  };
  std::vector<double> cuts;
  for (double b : f.breakpoints()) {
    if (b >= t) break;
    cuts.push_back(b);
  }
  std::vector<double> neg;
  for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) neg.push_back(-*it);
  const cplx lower = piecewise_gl(integrand, -t, 0.0, neg, 0.5 * tol);
  const cplx upper = piecewise_gl(integrand, 0.0, t, cuts, 0.5 * tol);
  return {lower + upper, lower - upper};
}

SuperOperatorMatrix CumulantK2::superop(bool with_lamb) const {
  if (!with_lamb) return dissipative;
  SuperOperatorMatrix out = dissipative;
  const SuperOperatorMatrix ham = hamiltonian_superop(lamb);
  out.matrix += ham.matrix;
  return out;
}

CumulantK2 cumulant_k2(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f, double t,
                       CoefficientMethod method) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ContractViolation("cumulant_k2: t must be finite and >= 0");
  const Frame fr = make_frame(h, s);
  const bool exponential = std::holds_alternative<ExponentialCorrelation>(f.variant());
  if (method == CoefficientMethod::Auto) method = exponential ? CoefficientMethod::ClosedForm : CoefficientMethod::Quadrature;
  if (method == CoefficientMethod::ClosedForm && !exponential)
    throw ContractViolation("cumulant_k2: closed form needs an exponential correlation");
  const Index nf = static_cast<Index>(fr.bohr.freqs.size());
  ComplexMatrix C(nf, nf), D(nf, nf);
  for (Index a = 0; a < nf; ++a)
    for (Index b = 0; b < nf; ++b) {
      const double w = fr.bohr.freqs[static_cast<std::size_t>(a)];
      const double wp = fr.bohr.freqs[static_cast<std::size_t>(b)];
      const CumulantCoefficients cc = method == CoefficientMethod::ClosedForm
                                          ? coefficients_closed_form(f, w, wp, t)
                                          : coefficients_quadrature(f, w, wp, t);
      C(a, b) = cc.C;
      D(a, b) = cc.D;
    }
  auto [sup, hl] = assemble(fr, C, &D);
  return {t, fr.bohr.freqs, C, std::move(sup), HermitianOperator::hermitized(hl)};
}

SuperOperatorMatrix rwc_davies_limit(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f) {
  const Frame fr = make_frame(h, s);
  const Index nf = static_cast<Index>(fr.bohr.freqs.size());
  ComplexMatrix G = ComplexMatrix::Zero(nf, nf);
  for (Index a = 0; a < nf; ++a) G(a, a) = f.spectrum(fr.bohr.freqs[static_cast<std::size_t>(a)]);
  return assemble(fr, G, nullptr).first;
}

RwcMap rwc_map(double lambda, const SuperOperatorMatrix& k2, double tol) {
  if (!std::isfinite(lambda)) throw InputError("rwc_map: lambda must be finite");
  RwcMap out;
  out.map = expm(k2, lambda * lambda);
  out.cptp = cptp_report(out.map, tol);
  return out;
}

std::vector<MarkovRow> markov_compare(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f,
                                      double lambda, const std::vector<double>& t_grid, const DensityMatrix& rho0,
                                      bool with_lamb, int threads) {
  if (rho0.dim() != h.dim()) throw ContractViolation("markov_compare: rho0 dimension mismatch");
  const SuperOperatorMatrix L = rwc_davies_limit(h, s, f);
  std::vector<MarkovRow> rows(t_grid.size());
  parallel_for(t_grid.size(), threads, [&](std::size_t i) {
    const double t = t_grid[i];
    const CumulantK2 k2 = cumulant_k2(h, s, f, t);
    const ComplexMatrix a = rwc_map(lambda, k2.superop(with_lamb)).map.apply(rho0.matrix());
    const ComplexMatrix b = expm(L, lambda * lambda * t).apply(rho0.matrix());
    rows[i] = {t, trace_distance(a, b)};
  });
  return rows;
}

}  // namespace molbat
