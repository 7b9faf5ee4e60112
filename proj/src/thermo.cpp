#include "molbat/thermo.hpp"

#include <algorithm>
#include <cmath>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

constexpr double kInfBeta = std::numeric_limits<double>::infinity();

double mean_energy(const DensityMatrix& rho, const HermitianOperator& h) {
  return (rho.matrix() * h.matrix()).trace().real();
}

void require_same_dim(const DensityMatrix& rho, const HermitianOperator& h, const char* where) {
  if (rho.dim() != h.dim()) throw ContractViolation(std::string(where) + ": state and Hamiltonian dimensions differ");
}

double degeneracy_tol(const RealVector& e) {
  return 1e-12 * std::max(1.0, e.maxCoeff() - e.minCoeff());
}

// Mean occupation 1/(e^{x} - 1) and the oscillator entropy at x = beta w0.
double bose(double x) { return std::isinf(x) ? 0.0 : 1.0 / std::expm1(x); }
double oscillator_entropy(double x) {
  if (std::isinf(x)) return 0.0;
  return x * bose(x) - std::log1p(-std::exp(-x));
}

// (1 + e^{x})^-1 without overflow
double occupancy(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double battery_gibbs_entropy(const BatteryParams& p, double beta) {
  return oscillator_entropy(beta * p.omega0) + binary_entropy(occupancy(beta * p.E_el));
}

}  // namespace

DensityMatrix passive_state(const DensityMatrix& rho, const HermitianOperator& h) {
  require_same_dim(rho, h, "passive_state");
  const RealVector lam = herm_eig(rho.op()).values;
  const EigenSystem eh = herm_eig(h);
  const Index d = h.dim();
  RealVector desc(d);
  for (Index k = 0; k < d; ++k) desc(k) = lam(d - 1 - k);
  const ComplexMatrix sigma = eh.vectors * desc.cast<cplx>().asDiagonal() * eh.vectors.adjoint();
  return DensityMatrix::from_numerical(sigma);
}

double ergotropy(const DensityMatrix& rho, const HermitianOperator& h) {
  require_same_dim(rho, h, "ergotropy");
  const RealVector lam = herm_eig(rho.op()).values;
  const RealVector eps = herm_eig(h).values;
  const Index d = h.dim();
  double passive = 0.0;
  for (Index k = 0; k < d; ++k) passive += lam(d - 1 - k) * eps(k);
  return std::max(0.0, mean_energy(rho, h) - passive);
}

double gibbs_entropy(const RealVector& energies, double beta) {
  const double e0 = energies.minCoeff();
  if (std::isinf(beta)) {
    const double tol = degeneracy_tol(energies);
    const auto g = (energies.array() - e0 <= tol).count();
    return std::log(static_cast<double>(g));
  }
  double z = 0.0, u = 0.0;
  for (Index i = 0; i < energies.size(); ++i) {
    const double de = energies(i) - e0;
    const double w = std::exp(-beta * de);
    z += w;
    u += w * de;
  }
  return std::log(z) + beta * u / z;
}

double gibbs_energy(const RealVector& energies, double beta) {
  const double e0 = energies.minCoeff();
  if (std::isinf(beta)) {
    const double tol = degeneracy_tol(energies);
    double s = 0.0;
    int g = 0;
    for (Index i = 0; i < energies.size(); ++i)
      if (energies(i) - e0 <= tol) {
        s += energies(i);
        ++g;
      }
    return s / g;
  }
  double z = 0.0, u = 0.0;
  for (Index i = 0; i < energies.size(); ++i) {
    const double w = std::exp(-beta * (energies(i) - e0));
    z += w;
    u += w * energies(i);
  }
  return u / z;
}

double equal_entropy_beta(const RealVector& energies, double s) {
  double lo = kBetaLow, hi = kBetaHigh;
  if (gibbs_entropy(energies, lo) <= s) return lo;
  if (gibbs_entropy(energies, hi) >= s) return hi;
  // entropy decreases strictly in beta; bisect on a log scale
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double f = gibbs_entropy(energies, mid) - s;
    if (std::abs(f) <= 1e-2 * kEntropyTol) return mid;
    (f > 0.0 ? lo : hi) = mid;
    if (hi / lo - 1.0 < 1e-15) break;
  }
  return std::sqrt(lo * hi);
}

ErgotropyReport bound_ergotropy(const DensityMatrix& rho, const HermitianOperator& h) {
  require_same_dim(rho, h, "bound_ergotropy");
  const RealVector eps = herm_eig(h).values;
  const double energy = mean_energy(rho, h);
  const double d = static_cast<double>(h.dim());
  ErgotropyReport r;
  r.W_max = ergotropy(rho, h);
  r.S_state = von_neumann_entropy(rho);
  if (r.S_state <= 1e-12) {
    r.edge = EntropyEdge::Pure;
    r.beta_bar = kInfBeta;
    r.S_gibbs = gibbs_entropy(eps, kInfBeta);
    r.W_bar_max = energy - eps.minCoeff();
  } else if (r.S_state >= std::log(d) - 1e-12) {
    r.edge = EntropyEdge::MaximallyMixed;
    r.beta_bar = 0.0;
    r.S_gibbs = std::log(d);
    r.W_bar_max = energy - eps.mean();
  } else {
    r.beta_bar = equal_entropy_beta(eps, r.S_state);
    r.S_gibbs = gibbs_entropy(eps, r.beta_bar);
    r.W_bar_max = energy - gibbs_energy(eps, r.beta_bar);
  }
  return r;
}

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("binary_entropy: argument outside [0, 1]");
  double h = 0.0;
  if (x > 0.0) h -= x * std::log(x);
  if (x < 1.0) h -= (1.0 - x) * std::log1p(-x);
  return h;
}

double battery_entropy_closed_form(const BatteryParams& p, BatteryEntropy which, double beta_bar) {
  require_truncation(p);
  if (which == BatteryEntropy::Stationary) {
    const double x = p.T == 0.0 ? kInfBeta : p.omega0 / p.T;
    return oscillator_entropy(x) + binary_entropy(charged_fraction(p));
  }
  if (!(beta_bar >= 0.0)) throw InputError("battery_entropy_closed_form: Gibbs entropy needs beta_bar >= 0");
  return battery_gibbs_entropy(p, beta_bar);
}

BatteryBoundWork battery_bound_work_closed_form(const BatteryParams& p) {
  const double s = battery_entropy_closed_form(p, BatteryEntropy::Stationary);
  const double x = p.T == 0.0 ? kInfBeta : p.omega0 / p.T;
  const double f = charged_fraction(p);
  const double energy = p.omega0 * bose(x) + p.E_el * f;
  BatteryBoundWork r;
  if (s <= 1e-12) {
    r.beta_bar = kInfBeta;
  } else {
    double lo = kBetaLow, hi = kBetaHigh;
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      const double g = battery_gibbs_entropy(p, mid) - s;
      if (std::abs(g) <= 1e-2 * kEntropyTol) {
        lo = hi = mid;
        break;
      }
      (g > 0.0 ? lo : hi) = mid;
      if (hi / lo - 1.0 < 1e-15) break;
    }
    r.beta_bar = std::sqrt(lo * hi);
  }
  const double xb = r.beta_bar * p.omega0;
  r.W_bar_max = energy - p.omega0 * bose(xb) - p.E_el * occupancy(r.beta_bar * p.E_el);
  return r;
}

ZeroTWork zero_T_work(const BatteryParams& p) {
  ZeroTWork z;
  z.boundary = std::abs(p.delta_mu - p.E_el) <= 1e-12 * std::max(1.0, std::abs(p.E_el));
  z.limit = p.delta_mu > p.E_el && !z.boundary ? p.E_el : 0.0;
  z.finite_T = bound_ergotropy(stationary_closed_form(p), battery_hamiltonian(p)).W_bar_max;
  return z;
}

}  // namespace molbat
