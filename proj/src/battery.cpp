#include "molbat/battery.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "molbat/errors.hpp"

namespace molbat {

namespace {

double boltzmann_q(const BatteryParams& p) { return p.T == 0.0 ? 0.0 : std::exp(-p.omega0 / p.T); }

ComplexMatrix thermal_diag(double q, Index levels) {
  ComplexMatrix t = ComplexMatrix::Zero(levels, levels);
  double pn = 1.0 - q;
  for (Index n = 0; n < levels; ++n) {
    t(n, n) = pn;
    pn *= q;
  }
  return t;
}

ComplexMatrix branch(Index e, const ComplexMatrix& osc) { return kron(ket_bra(e, e, 2), osc); }

}  // namespace

TruncationReport truncation_tail(const BatteryParams& p) {
  p.validate();
  const double q = boltzmann_q(p);
  TruncationReport r;
  r.tail_ground = q == 0.0 ? 0.0 : std::pow(q, static_cast<double>(p.N - 1));
  const Index big = 2 * p.N + 20 + static_cast<Index>(std::ceil(4.0 * p.xi0 * p.xi0));
  const ComplexMatrix w = weyl(p.xi0, FockSpace(big));
  const ComplexMatrix rho = w * thermal_diag(q, big) * w.adjoint();
  double tail = 0.0;
  for (Index n = p.N - 1; n < big; ++n) tail += rho(n, n).real();
  // levels >= big carry at most q^big of the undisplaced weight
  r.tail_excited = std::max(0.0, tail) + (q == 0.0 ? 0.0 : std::pow(q, static_cast<double>(big)));
  r.ok = r.tail_ground < kTruncationTailTol && r.tail_excited < kTruncationTailTol;
  return r;
}

void require_truncation(const BatteryParams& p) {
  const TruncationReport r = truncation_tail(p);
  if (!r.ok) {
    std::ostringstream os;
    os << "raise N: thermal tail above level N-2 is " << std::max(r.tail_ground, r.tail_excited) << " at N = " << p.N
       << " (limit " << kTruncationTailTol << ")";
    throw TruncationError(os.str());
  }
}

ComplexMatrix oscillator_thermal(const BatteryParams& p) { return thermal_diag(boltzmann_q(p), p.N); }

DensityMatrix conditioned_gibbs(const BatteryParams& p, int which) {
  p.validate();
  if (which != 0 && which != 1) throw InputError("conditioned_gibbs: branch must be 0 or 1");
  ComplexMatrix tau = oscillator_thermal(p);
  if (which == 1) {
    const ComplexMatrix w = weyl(p.xi0, FockSpace(p.N));
    tau = w * tau * w.adjoint();
  }
  return DensityMatrix::from_numerical(branch(which, tau));
}

double charged_fraction(const BatteryParams& p) {
  const double d = p.E_el - p.delta_mu;
  if (p.T == 0.0) return d > 0.0 ? 0.0 : (d < 0.0 ? 1.0 : 0.5);
  return fermi_dirac(p.E_el, p.delta_mu, p.T);
}

DensityMatrix stationary_closed_form(const BatteryParams& p) {
  const double f = charged_fraction(p);
  const ComplexMatrix rho = (1.0 - f) * conditioned_gibbs(p, 0).matrix() + f * conditioned_gibbs(p, 1).matrix();
  return DensityMatrix::from_numerical(rho);
}

GKLSGenerator thermal_rc_generator(const BatteryParams& p) {
  require_truncation(p);
  const ComplexMatrix b = displaced_annihilator(p);
  std::vector<Channel> ch;
  ch.push_back({p.gamma, b});
  ch.push_back({p.gamma * boltzmann_q(p), b.adjoint()});
  ch.push_back({p.decoherence_rate(), electronic_op(ket_bra(1, 1, 2), p.N)});
  std::erase_if(ch, [](const Channel& c) { return c.rate == 0.0; });
  return GKLSGenerator(battery_hamiltonian(p), std::move(ch));
}

ExcitonicSpectrum resonant_exciton_spectrum(const BatteryParams& p, int sidebands, double eta) {
  if (sidebands < 1) throw InputError("resonant_exciton_spectrum: need at least one sideband");
  if (!(p.T > 0.0)) throw InputError("resonant_exciton_spectrum: the exciton bath needs T > 0");
  ExcitonicSpectrum s;
  s.E_b = {0.0};
  for (int j = 0; j < sidebands; ++j) s.E_a.push_back(p.E_el + j * p.omega0);
  s.g_abs2 = Eigen::MatrixXd::Constant(sidebands, 1, p.gamma_ex * eta * std::sqrt(2.0 * std::numbers::pi));
  // split the Boltzmann suppression of the central pair evenly between the bands
  s.mu_b = 0.5 * (p.E_el - p.delta_mu);
  s.mu_a = s.mu_b + p.delta_mu;
  s.T = p.T;
  s.eta = eta;
  return s;
}

GKLSGenerator charging_generator(const BatteryParams& p, const CouplingSpectrum& g3) {
  require_truncation(p);
  DaviesOptions opt;
  opt.min_rate = 1e-14;
  return assemble_davies(battery_hamiltonian(p),
                         {Coupling{electronic_op(ket_bra(0, 1, 2), p.N), g3, CouplingKind::RotatingWave}}, opt);
}

BatteryGenerator charging_model(const BatteryParams& p, const CouplingSpectrum& g3) {
  return {thermal_rc_generator(p), p.decoherence_rate(), charging_generator(p, g3)};
}

BatteryGenerator discharging_model(const BatteryParams& p, const CouplingSpectrum& g) {
  return {thermal_rc_generator(p), p.decoherence_rate(), discharge_generator(p, g)};
}

ComplexMatrix vm_series(int m, double xi0, Index levels) {
  ComplexMatrix v = ComplexMatrix::Zero(levels, levels);
  if (xi0 == 0.0) {
    if (m == 0) v.setIdentity();
    return v;
  }
  const long double lx = std::log(std::abs(static_cast<long double>(xi0)));
  const int sgn_m = (xi0 < 0.0 && (m % 2 != 0)) ? -1 : 1;
  for (Index n = std::max<Index>(0, -m); n < levels && n + m < levels; ++n) {
    const long double half = 0.5L * (std::lgamma(static_cast<long double>(n + 1)) +
                                     std::lgamma(static_cast<long double>(n + m + 1)));
    long double sum = 0.0L;
    for (Index k = std::max<Index>(0, -m); k <= n; ++k) {
      const long double lt = (2 * k + m) * lx - std::lgamma(static_cast<long double>(k + 1)) -
                             std::lgamma(static_cast<long double>(k + m + 1)) + half -
                             std::lgamma(static_cast<long double>(n - k + 1));
      const long double term = std::exp(lt);
      sum += (k % 2 == 0) ? term : -term;
    }
    v(n + m, n) = static_cast<double>(sgn_m * sum);
  }
  return v;
}

VmOperator vm_operator(int m, const BatteryParams& p) {
  p.validate();
  if (std::abs(m) > p.N - 2) {
    std::ostringstream os;
    os << "vm_operator: |m| = " << std::abs(m) << " exceeds N - 2 = " << p.N - 2;
    throw InputError(os.str());
  }
  const FockSpace f(p.N);
  const ComplexMatrix osc = std::exp(-0.5 * p.xi0 * p.xi0) * vm_series(m, p.xi0, p.N) * weyl(-p.xi0, f);
  return {m, kron(ket_bra(0, 1, 2), osc)};
}

double vm_frequency(int m, const BatteryParams& p) { return p.E_el - m * p.omega0; }

GKLSGenerator discharge_generator(const BatteryParams& p, const CouplingSpectrum& g) {
  require_truncation(p);
  const int mmax = static_cast<int>(p.N - 2);
  std::vector<Channel> ch;
  const FockSpace f(p.N);
  const ComplexMatrix wm = weyl(-p.xi0, f);
  const double pref = std::exp(-0.5 * p.xi0 * p.xi0);
  for (int m = -mmax; m <= mmax; ++m) {
    const double w = vm_frequency(m, p);
    const double down = g.downward(w);
    const double up = g.upward(w);
    if (down == 0.0 && up == 0.0) continue;
    const ComplexMatrix v = kron(ket_bra(0, 1, 2), pref * vm_series(m, p.xi0, p.N) * wm);
    if (down > 0.0) ch.push_back({down, v});
    if (up > 0.0) ch.push_back({up, v.adjoint()});
  }
  double mx = 0.0;
  for (const auto& c : ch) mx = std::max(mx, c.rate * c.jump.squaredNorm());
  std::erase_if(ch, [mx](const Channel& c) { return c.rate * c.jump.squaredNorm() <= 1e-14 * mx; });
  return GKLSGenerator(battery_hamiltonian(p), std::move(ch));
}

DischargeRates discharge_rate(const BatteryParams& p, const CouplingSpectrum& g, bool with_direct) {
  require_truncation(p);
  DischargeRates r;
  const double s = p.huang_rhys();
  const double q = boltzmann_q(p);
  const int mmax = static_cast<int>(p.N - 2);

  if (with_direct) {
    const GKLSGenerator l1 = discharge_generator(p, g);
    const ComplexMatrix out = l1.apply_dissipator(conditioned_gibbs(p, 1).matrix());
    r.direct = out.topLeftCorner(p.N, p.N).trace().real();
  }

  double closed = 0.0;
  for (int m = -mmax; m <= mmax; ++m) {
    const double gw = g(vm_frequency(m, p));
    if (gw == 0.0) continue;
    const ComplexMatrix v = vm_series(m, p.xi0, p.N);
    const RealVector col2 = v.cwiseAbs2().colwise().sum().transpose();  // diag of v^dag v
    double tr = 0.0, qn = 1.0;
    for (Index n = 0; n < p.N; ++n) {
      tr += qn * col2(n);
      qn *= q;
    }
    closed += gw * tr;
  }
  r.closed_form = std::exp(-s) * (1.0 - q) * closed;

  // Poisson weights e^{-S} S^m / m!, summed until they are negligible past the mean.
  double poisson = 0.0;
  for (int m = 0;; ++m) {
    const double lw = -s + (m == 0 ? 0.0 : m * std::log(s)) - std::lgamma(m + 1.0);
    const double w = (s == 0.0) ? (m == 0 ? 1.0 : 0.0) : std::exp(lw);
    poisson += g(vm_frequency(m, p)) * w;
    if (m > s && w < 1e-18) break;
    if (m > 100000) break;
  }
  r.poisson = poisson;
  r.asymptotic = g(p.E_el - s * p.omega0);
  return r;
}

double sideband_completeness(const BatteryParams& p) {
  const double q = boltzmann_q(p);
  const int mmax = static_cast<int>(p.N - 2);
  double total = 0.0;
  for (int m = -mmax; m <= mmax; ++m) {
    const ComplexMatrix v = vm_series(m, p.xi0, p.N);
    const RealVector col2 = v.cwiseAbs2().colwise().sum().transpose();
    double qn = 1.0;
    for (Index n = 0; n < p.N; ++n) {
      total += qn * col2(n);
      qn *= q;
    }
  }
  return (1.0 - q) * std::exp(-p.huang_rhys()) * total;
}

}  // namespace molbat
