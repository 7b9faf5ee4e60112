#include "molbat/exciton.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "molbat/errors.hpp"
#include "molbat/parallel.hpp"

namespace molbat {

namespace {

using Triplet = Eigen::Triplet<double>;

// An electron moves from mode `from` to mode `to` at `rate`. Downward jumps
// are c_from c_to^dagger, upward ones c_to^dagger c_from; from == to marks the
// number-diagonal intraband terms.
struct Move {
  Index from;
  Index to;
  double rate;
  bool upward;
};

Index bit_of(Index mode, Index n) { return Index{1} << (n - 1 - mode); }

double boltzmann(double de, double T) { return std::exp(-de / T); }

void add_intraband_moves(const std::vector<double>& e, const Eigen::MatrixXd& gam, Index offset, double T,
                         std::vector<Move>& out) {
  const Index n = static_cast<Index>(e.size());
  for (Index k = 0; k < n; ++k)
    for (Index kp = 0; kp < n; ++kp) {
      const double de = e[static_cast<std::size_t>(k)] - e[static_cast<std::size_t>(kp)];
      if (de < 0.0 || gam(k, kp) == 0.0) continue;
      out.push_back({offset + k, offset + kp, gam(k, kp), false});
      out.push_back({offset + kp, offset + k, gam(k, kp) * boltzmann(de, T), true});
    }
}

void add_interband_moves(const ExcitonFactoryParams& p, std::vector<Move>& out) {
  for (Index k = 0; k < p.n_a(); ++k)
    for (Index l = 0; l < p.n_b(); ++l) {
      const double eps = p.band_a[static_cast<std::size_t>(k)] - p.band_b[static_cast<std::size_t>(l)];
      const double g = p.gamma_inter(k, l);
      if (eps <= 0.0 || g == 0.0) continue;
      out.push_back({k, p.n_a() + l, g, false});
      out.push_back({p.n_a() + l, k, g * boltzmann(eps - p.delta_g, p.hot_T(eps)), true});
    }
}

std::vector<Move> moves(const ExcitonFactoryParams& p, bool intra, bool inter) {
  std::vector<Move> out;
  if (intra) {
    add_intraband_moves(p.band_a, p.Gamma_a, 0, p.T, out);
    add_intraband_moves(p.band_b, p.Gamma_b, p.n_a(), p.T, out);
  }
  if (inter) add_interband_moves(p, out);
  std::erase_if(out, [](const Move& m) { return m.rate == 0.0; });
  return out;
}

std::vector<double> mode_energies(const ExcitonFactoryParams& p) {
  std::vector<double> e = p.band_a;
  e.insert(e.end(), p.band_b.begin(), p.band_b.end());
  return e;
}

HermitianOperator free_hamiltonian(const ExcitonFactoryParams& p) {
  const Index n = p.n_modes();
  const Index dim = Index{1} << n;
  const std::vector<double> e = mode_energies(p);
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (Index s = 0; s < dim; ++s) {
    double en = 0.0;
    for (Index j = 0; j < n; ++j)
      if (s & bit_of(j, n)) en += e[static_cast<std::size_t>(j)];
    h(s, s) = en;
  }
  return HermitianOperator(h);
}

GKLSGenerator dense_generator(const ExcitonFactoryParams& p, bool intra, bool inter) {
  p.validate();
  const auto ops = fermion_mode_ops(p.fermion_register());
  std::vector<Channel> ch;
  for (const Move& m : moves(p, intra, inter)) {
    const ComplexMatrix& c_from = ops[static_cast<std::size_t>(m.from)].first;
    const ComplexMatrix& cd_to = ops[static_cast<std::size_t>(m.to)].second;
    ch.push_back({m.rate, m.upward ? ComplexMatrix(cd_to * c_from) : ComplexMatrix(c_from * cd_to)});
  }
  return GKLSGenerator(free_hamiltonian(p), std::move(ch));
}

// GTH elimination for the stationary vector of a chain given by its
// off-diagonal rates a(i, j) = rate i -> j. Subtraction free.
RealVector gth_stationary(Eigen::MatrixXd a) {
  const Index n = a.rows();
  for (Index k = n - 1; k >= 1; --k) {
    double s = 0.0;
    for (Index j = 0; j < k; ++j) s += a(k, j);
    if (!(s > 0.0)) throw NonErgodic("classical_stationary: chain is reducible", 2);
    for (Index i = 0; i < k; ++i) a(i, k) /= s;
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < k; ++i) a(i, j) += a(i, k) * a(k, j);
  }
  RealVector x(n);
  x(0) = 1.0;
  for (Index k = 1; k < n; ++k) {
    double s = 0.0;
    for (Index i = 0; i < k; ++i) s += x(i) * a(i, k);
    x(k) = s;
  }
  return x / x.sum();
}

double log_fermi(double x) { return x > 0.0 ? -x - std::log1p(std::exp(-x)) : -std::log1p(std::exp(x)); }

double log_abs_expm1(double z) {
  if (z > 30.0) return z + std::log1p(-std::exp(-z));
  const double v = std::abs(std::expm1(z));
  return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(v);
}

double total_filling(const ExcitonFactoryParams& p, double mu_b, double delta_mu) {
  double n = 0.0;
  for (double e : p.band_a) n += fermi_dirac(e, mu_b + delta_mu, p.T);
  for (double e : p.band_b) n += fermi_dirac(e, mu_b, p.T);
  return n;
}

double residual_at(const ExcitonFactoryParams& p, double delta_mu) {
  const double mu_b = fix_mu_b(p, delta_mu);
  return interband_residual({mu_b + delta_mu, mu_b, p.T}, p).exact;
}

}  // namespace

double PiecewiseLinear::operator()(double at) const {
  if (x.size() == 1 || at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

void PiecewiseLinear::validate(const char* what) const {
  if (x.empty() || x.size() != y.size())
    throw InputError(std::string(what) + ": table needs matching, non-empty x and y");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw InputError(std::string(what) + ": knots must increase strictly");
  for (double v : y)
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + ": values must be positive and finite");
}

double ExcitonFactoryParams::gap() const {
  return *std::min_element(band_a.begin(), band_a.end()) - *std::max_element(band_b.begin(), band_b.end());
}

void ExcitonFactoryParams::validate() const {
  if (band_a.empty() || band_b.empty()) throw InputError("exciton factory: both bands need at least one mode");
  if (n_modes() > FermionRegister::kMaxModes) {
    std::ostringstream os;
    os << "exciton factory: " << n_modes() << " modes exceeds the limit of " << FermionRegister::kMaxModes;
    throw ResourceError(os.str());
  }
  if (!std::is_sorted(band_a.begin(), band_a.end()) || !std::is_sorted(band_b.begin(), band_b.end()))
    throw InputError("exciton factory: band energies must be listed in ascending order");
  if (!(gap() > 0.0)) throw InputError("exciton factory: gap min E_a - max E_b must be positive");
  auto check = [](const Eigen::MatrixXd& m, Index r, Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      std::ostringstream os;
      os << "exciton factory: " << name << " must be " << r << " x " << c;
      throw InputError(os.str());
    }
    if (!m.allFinite() || (m.array() < 0.0).any())
      throw InputError(std::string("exciton factory: ") + name + " must be finite and >= 0");
  };
  check(Gamma_a, n_a(), n_a(), "Gamma_a");
  check(Gamma_b, n_b(), n_b(), "Gamma_b");
  check(gamma_inter, n_a(), n_b(), "gamma_inter");
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("exciton factory: T must be positive");
  hot_T.validate("exciton factory hot_T");
  if (!std::isfinite(delta_g)) throw InputError("exciton factory: delta_g must be finite");
  const int ne = electron_count();
  if (ne < 0 || ne > n_modes()) throw InputError("exciton factory: electron number outside [0, n]");
}

FermionRegister ExcitonFactoryParams::fermion_register() const {
  std::vector<FermionMode> m;
  for (double e : band_a) m.push_back({Band::A, e});
  for (double e : band_b) m.push_back({Band::B, e});
  return FermionRegister(std::move(m));
}

GKLSGenerator intraband_generator(const ExcitonFactoryParams& p) { return dense_generator(p, true, false); }
GKLSGenerator interband_generator(const ExcitonFactoryParams& p) { return dense_generator(p, false, true); }
GKLSGenerator build_factory_generator(const ExcitonFactoryParams& p) { return dense_generator(p, true, true); }

std::vector<Index> number_sector(Index n_modes, int electrons) {
  std::vector<Index> out;
  for (Index s = 0; s < (Index{1} << n_modes); ++s)
    if (std::popcount(static_cast<unsigned long long>(s)) == electrons) out.push_back(s);
  return out;
}

GKLSGenerator restrict_to_sector(const GKLSGenerator& g, const std::vector<Index>& states) {
  const Index m = static_cast<Index>(states.size());
  if (m == 0) throw InputError("restrict_to_sector: empty sector");
  auto project = [&](const ComplexMatrix& x) {
    ComplexMatrix y(m, m);
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) y(i, j) = x(states[static_cast<std::size_t>(i)], states[static_cast<std::size_t>(j)]);
    return y;
  };
  std::vector<Channel> ch;
  for (const auto& c : g.channels()) {
    ComplexMatrix j = project(c.jump);
    if (j.squaredNorm() > 0.0) ch.push_back({c.rate, std::move(j)});
  }
  return GKLSGenerator(HermitianOperator::hermitized(project(g.hamiltonian().matrix())), std::move(ch));
}

DensityMatrix factory_stationary_state(const ExcitonFactoryParams& p) {
  const GKLSGenerator full = build_factory_generator(p);
  const std::vector<Index> states = number_sector(p.n_modes(), p.electron_count());
  const ComplexMatrix rs = solve_stationary(restrict_to_sector(full, states)).rho;
  const Index dim = full.dim();
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  for (std::size_t j = 0; j < states.size(); ++j)
    for (std::size_t i = 0; i < states.size(); ++i)
      rho(states[i], states[j]) = rs(static_cast<Index>(i), static_cast<Index>(j));
  return DensityMatrix::from_numerical(rho);
}

ClassicalChain classical_reduction(const ExcitonFactoryParams& p, bool intra, bool inter) {
  p.validate();
  for (const auto* band : {&p.band_a, &p.band_b})
    for (std::size_t i = 1; i < band->size(); ++i)
      if ((*band)[i] - (*band)[i - 1] <= 1e-12 * std::max(1.0, std::abs((*band)[i])))
        throw InputError("classical_reduction: degenerate single-particle energies, coherences may mix");
  const Index n = p.n_modes();
  const Index dim = Index{1} << n;
  std::vector<Triplet> t;
  const auto mv = moves(p, intra, inter);
  for (Index s = 0; s < dim; ++s)
    for (const Move& m : mv) {
      if (m.from == m.to) continue;
      const Index bf = bit_of(m.from, n), bt = bit_of(m.to, n);
      if (!(s & bf) || (s & bt)) continue;
      const Index target = s ^ bf ^ bt;
      t.emplace_back(target, s, m.rate);
      t.emplace_back(s, s, -m.rate);
    }
  ClassicalChain c;
  c.n_modes = n;
  c.Q.resize(dim, dim);
  c.Q.setFromTriplets(t.begin(), t.end());
  return c;
}

RealVector classical_stationary(const ExcitonFactoryParams& p) {
  const ClassicalChain c = classical_reduction(p);
  const std::vector<Index> states = number_sector(c.n_modes, p.electron_count());
  const Index m = static_cast<Index>(states.size());
  std::vector<Index> pos(static_cast<std::size_t>(c.Q.rows()), -1);
  for (Index i = 0; i < m; ++i) pos[static_cast<std::size_t>(states[static_cast<std::size_t>(i)])] = i;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (Index col = 0; col < c.Q.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(c.Q, col); it; ++it) {
      if (it.row() == it.col()) continue;
      const Index from = pos[static_cast<std::size_t>(it.col())], to = pos[static_cast<std::size_t>(it.row())];
      if (from >= 0 && to >= 0) a(from, to) += it.value();
    }
  const RealVector x = gth_stationary(std::move(a));
  RealVector full = RealVector::Zero(c.Q.rows());
  for (Index i = 0; i < m; ++i) full(states[static_cast<std::size_t>(i)]) = x(i);
  return full;
}

RealVector ansatz_occupations(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p) {
  RealVector f(p.n_modes());
  for (Index k = 0; k < p.n_a(); ++k) f(k) = fermi_dirac(p.band_a[static_cast<std::size_t>(k)], g.mu_a, g.T);
  for (Index l = 0; l < p.n_b(); ++l)
    f(p.n_a() + l) = fermi_dirac(p.band_b[static_cast<std::size_t>(l)], g.mu_b, g.T);
  return f;
}

RealVector grand_canonical_probabilities(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p) {
  p.validate();
  if (!(g.T > 0.0)) throw InputError("grand_canonical_state: T must be positive");
  const Index n = p.n_modes();
  const std::vector<double> e = mode_energies(p);
  // log-occupations keep nearly full or empty modes exact
  RealVector lf(n), le(n);
  for (Index j = 0; j < n; ++j) {
    const double mu = j < p.n_a() ? g.mu_a : g.mu_b;
    const double x = (e[static_cast<std::size_t>(j)] - mu) / g.T;
    lf(j) = log_fermi(x);
    le(j) = log_fermi(-x);
  }
  const Index dim = Index{1} << n;
  RealVector pr(dim);
  for (Index s = 0; s < dim; ++s) {
    double l = 0.0;
    for (Index j = 0; j < n; ++j) l += (s & bit_of(j, n)) ? lf(j) : le(j);
    pr(s) = std::exp(l);
  }
  return pr;
}

DensityMatrix grand_canonical_state(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p) {
  if (p.n_modes() > kMaxDenseFermionModes)
    throw ResourceError("grand_canonical_state: dense state limited to " + std::to_string(kMaxDenseFermionModes) +
                        " modes");
  const RealVector pr = grand_canonical_probabilities(g, p);
  return DensityMatrix(pr.cast<cplx>().asDiagonal().toDenseMatrix());
}

InterbandResidual interband_residual(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p) {
  InterbandResidual r;
  const RealVector pr = grand_canonical_probabilities(g, p);
  const ClassicalChain c = classical_reduction(p, false, true);
  r.exact = (c.Q * pr).cwiseAbs().sum();

  for (Index k = 0; k < p.n_a(); ++k)
    for (Index l = 0; l < p.n_b(); ++l) {
      const double ea = p.band_a[static_cast<std::size_t>(k)], eb = p.band_b[static_cast<std::size_t>(l)];
      const double eps = ea - eb;
      const double gam = p.gamma_inter(k, l);
      if (eps <= 0.0 || gam == 0.0) continue;
      const double x = (eps - g.delta_mu()) / g.T;
      const double y = (eps - p.delta_g) / p.hot_T(eps);
      const double xa = (ea - g.mu_a) / g.T, xb = (eb - g.mu_b) / g.T;
      const double la = log_abs_expm1(x - y);
      const double t1 = -x + log_fermi(-xa) + log_fermi(xb);  // e^{-X} (1 - f_a) f_b
      const double t2 = log_fermi(xa) + log_fermi(-xb);       // f_a (1 - f_b)
      r.bound += gam * (std::exp(la + t1) + std::exp(la + t2));
    }
  return r;
}

double fix_mu_b(const ExcitonFactoryParams& p, double delta_mu) {
  p.validate();
  const double target = p.electron_count();
  if (target <= 0.0 || target >= static_cast<double>(p.n_modes()))
    throw InputError("fix_mu_b: electron number must lie strictly between 0 and the mode count");
  const std::vector<double> e = mode_energies(p);
  const double emin = *std::min_element(e.begin(), e.end()), emax = *std::max_element(e.begin(), e.end());
  double lo = emin - std::abs(delta_mu) - 800.0 * p.T;
  double hi = emax + std::abs(delta_mu) + 800.0 * p.T;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (total_filling(p, mid, delta_mu) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double predicted_delta_mu(double gap, double T, double T_hot, double delta_g) {
  if (!(T_hot > 0.0)) throw InputError("predicted_delta_mu: T_hot must be positive");
  const double r = T / T_hot;
  return (1.0 - r) * gap + r * delta_g;
}

double effective_gap(const GrandCanonicalAnsatz& g, const ExcitonFactoryParams& p) {
  double wsum = 0.0, esum = 0.0;
  for (Index k = 0; k < p.n_a(); ++k)
    for (Index l = 0; l < p.n_b(); ++l) {
      const double ea = p.band_a[static_cast<std::size_t>(k)], eb = p.band_b[static_cast<std::size_t>(l)];
      const double eps = ea - eb;
      const double gam = p.gamma_inter(k, l);
      if (eps <= 0.0 || gam == 0.0) continue;
      const double xa = (ea - g.mu_a) / g.T, xb = (eb - g.mu_b) / g.T;
      // e^{-X} (1 - f_a) f_b equals f_a (1 - f_b)
      const double w = 2.0 * gam * std::exp(log_fermi(xa) + log_fermi(-xb));
      wsum += w;
      esum += w * eps;
    }
  if (!(wsum > 0.0)) return p.gap();
  return esum / wsum;
}

DeltaMuOptimum optimal_delta_mu(const ExcitonFactoryParams& p, const std::vector<double>& grid, int threads) {
  p.validate();
  if (grid.size() < 3) throw InputError("optimal_delta_mu: grid needs at least 3 points");
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("optimal_delta_mu: grid must be ascending");
  std::vector<double> res(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) { res[i] = residual_at(p, grid[i]); });
  const std::size_t i = static_cast<std::size_t>(std::min_element(res.begin(), res.end()) - res.begin());
  if (i == 0 || i + 1 == grid.size()) {
    std::ostringstream os;
    os << "optimal_delta_mu: minimum at grid edge " << grid[i] << ", widen grid";
    throw InputError(os.str());
  }
  // golden section on the two neighbouring cells
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = grid[i - 1], b = grid[i + 1];
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = residual_at(p, c), fd = residual_at(p, d);
  const double tol = 1e-12 * std::max(1.0, std::abs(grid[i]));
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = residual_at(p, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = residual_at(p, d);
    }
  }
  DeltaMuOptimum o;
  o.delta_mu = 0.5 * (a + b);
  o.mu_b = fix_mu_b(p, o.delta_mu);
  const GrandCanonicalAnsatz g{o.mu_b + o.delta_mu, o.mu_b, p.T};
  o.residual = interband_residual(g, p).exact;
  if (res[i] < o.residual) {
    o.delta_mu = grid[i];
    o.mu_b = fix_mu_b(p, o.delta_mu);
    o.residual = res[i];
  }
  o.effective_gap = effective_gap({o.mu_b + o.delta_mu, o.mu_b, p.T}, p);
  o.predicted = predicted_delta_mu(o.effective_gap, p.T, p.hot_T(o.effective_gap), p.delta_g);
  return o;
}

ModeFilling mode_filling(const RealVector& probs, Index n_modes) {
  if (probs.size() != (Index{1} << n_modes)) throw ContractViolation("mode_filling: length is not 2^n");
  ModeFilling f{RealVector::Zero(n_modes), RealVector::Zero(n_modes)};
  for (Index s = 0; s < probs.size(); ++s)
    for (Index j = 0; j < n_modes; ++j) ((s & bit_of(j, n_modes)) ? f.occupied : f.empty)(j) += probs(s);
  return f;
}

ModeFilling mode_filling(const DensityMatrix& rho, Index n_modes) {
  return mode_filling(RealVector(rho.matrix().diagonal().real()), n_modes);
}

FermiDiracFit fit_fermi_dirac(const ExcitonFactoryParams& p, const ModeFilling& filling) {
  const std::vector<double> e = mode_energies(p);
  std::vector<Index> use;
  bool has_a = false, has_b = false;
  for (Index j = 0; j < p.n_modes(); ++j)
    if (filling.occupied(j) > 1e-300 && filling.empty(j) > 1e-300) {
      use.push_back(j);
      (j < p.n_a() ? has_a : has_b) = true;
    }
  if (!has_a || !has_b || use.size() < 3)
    throw NumericalFailure("fit_fermi_dirac: too few modes with resolvable occupation");
  // y = beta E - beta mu_band
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Index>(use.size()), 3);
  RealVector y(static_cast<Index>(use.size()));
  for (std::size_t r = 0; r < use.size(); ++r) {
    const Index j = use[r];
    const Index row = static_cast<Index>(r);
    a(row, 0) = e[static_cast<std::size_t>(j)];
    a(row, j < p.n_a() ? 1 : 2) = -1.0;
    y(row) = std::log(filling.empty(j)) - std::log(filling.occupied(j));
  }
  const RealVector sol = a.colPivHouseholderQr().solve(y);
  FermiDiracFit fit;
  fit.T = 1.0 / sol(0);
  fit.mu_a = sol(1) / sol(0);
  fit.mu_b = sol(2) / sol(0);
  for (Index j = 0; j < p.n_modes(); ++j) {
    const double mu = j < p.n_a() ? fit.mu_a : fit.mu_b;
    const double f = filling.occupied(j) / (filling.occupied(j) + filling.empty(j));
    fit.residual = std::max(fit.residual, std::abs(fermi_dirac(e[static_cast<std::size_t>(j)], mu, fit.T) - f));
  }
  return fit;
}

ExcitonicSpectrum factory_spectrum(const ExcitonFactoryParams& p, const GrandCanonicalAnsatz& g,
                                   const Eigen::MatrixXd& g_abs2, double eta) {
  p.validate();
  ExcitonicSpectrum s;
  s.E_a = p.band_a;
  s.E_b = p.band_b;
  s.g_abs2 = g_abs2;
  s.mu_a = g.mu_a;
  s.mu_b = g.mu_b;
  s.T = g.T;
  s.eta = eta;
  return s;
}

}  // namespace molbat
