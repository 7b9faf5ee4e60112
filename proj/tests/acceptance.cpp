// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "molbat/battery.hpp"
#include "molbat/config.hpp"
#include "molbat/davies.hpp"
#include "molbat/exciton.hpp"
#include "molbat/records.hpp"
#include "molbat/rwc.hpp"
#include "molbat/scenarios.hpp"
#include "molbat/thermo.hpp"

using namespace molbat;
using namespace testing_util;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a measured quantity; fails the criterion when ok is false.
  void note(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok || detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [FAIL]");
  }
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

int failures = 0;

void criterion(int n, const char* name, const std::function<void(Outcome&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + "exception: " + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

HermitianOperator qubit(double w0) {
  ComplexMatrix h = ComplexMatrix::Zero(2, 2);
  h(1, 1) = w0;
  return HermitianOperator(h);
}

ComplexMatrix sigma_x() {
  ComplexMatrix s = ComplexMatrix::Zero(2, 2);
  s(0, 1) = s(1, 0) = 1.0;
  return s;
}

double op_norm(const ComplexMatrix& m) { return m.jacobiSvd().singularValues()(0); }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

ExcitonFactoryParams factory(std::vector<double> a, std::vector<double> b, double intra, double inter) {
  ExcitonFactoryParams p;
  p.band_a = std::move(a);
  p.band_b = std::move(b);
  p.Gamma_a = Eigen::MatrixXd::Constant(p.n_a(), p.n_a(), intra);
  p.Gamma_b = Eigen::MatrixXd::Constant(p.n_b(), p.n_b(), intra);
  p.gamma_inter = Eigen::MatrixXd::Constant(p.n_a(), p.n_b(), inter);
  p.Gamma_a.diagonal().setZero();
  p.Gamma_b.diagonal().setZero();
  p.T = 0.05;
  p.hot_T = PiecewiseLinear::constant(0.1);
  p.delta_g = 0.2;
  return p;
}

ExcitonFactoryParams random_factory(std::mt19937_64& rng, Index na, Index nb) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a, b;
  for (Index k = 0; k < na; ++k) a.push_back(1.0 + 0.1 * k + 0.05 * u(rng));
  for (Index l = 0; l < nb; ++l) b.push_back(-0.1 * (nb - 1 - l) - 0.05 * u(rng));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  ExcitonFactoryParams p = factory(a, b, 0.0, 0.0);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < na; ++j) p.Gamma_a(i, j) = i == j ? 0.0 : u(rng);
  for (Index i = 0; i < nb; ++i)
    for (Index j = 0; j < nb; ++j) p.Gamma_b(i, j) = i == j ? 0.0 : u(rng);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < nb; ++j) p.gamma_inter(i, j) = 0.1 * u(rng);
  p.T = 0.05 + 0.1 * u(rng);
  p.hot_T = {{0.8, 1.6}, {0.1 + 0.2 * u(rng), 0.2 + 0.3 * u(rng)}};
  p.delta_g = 0.5 * u(rng);
  return p;
}

BatteryParams battery(double xi0, double delta_mu) {
  BatteryParams p;
  p.xi0 = xi0;
  p.delta_mu = delta_mu;
  return p;
}

// 1
void gibbs_stationarity(Outcome& o) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(2, 10);
  std::uniform_real_distribution<double> temp(0.2, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = dim(rng);
    const double T = temp(rng);
    const HermitianOperator h(random_hermitian(d, rng));
    const ComplexMatrix s = random_hermitian(d, rng);
    const GKLSGenerator g = assemble_davies(h, {Coupling{s, ThermalSpectrum{OhmicProfile{0.2, 3.0}, T}}});
    worst = std::max(worst, trace_norm(g.apply(gibbs_state(h, T).matrix())));
  }
  o.note(worst <= 1e-10, "max ||L rho_beta||_1 = " + sci(worst) + " over 20 draws (tol 1e-10)");
}

// 2
void cptp(Outcome& o) {
  const double tol = 1e-9;
  const std::vector<double> times{0.1, 1.0, 10.0};
  std::mt19937_64 rng(202);
  std::vector<std::pair<std::string, GKLSGenerator>> gens;
  for (Index d : {2, 4, 6}) {
    const HermitianOperator h(random_hermitian(d, rng));
    gens.emplace_back("thermal d=" + std::to_string(d),
                      assemble_davies(h, {Coupling{random_hermitian(d, rng), ThermalSpectrum{OhmicProfile{0.2, 3.0}, 0.5}}}));
  }
  {
    const HermitianOperator h(random_hermitian(5, rng));
    gens.emplace_back("chemical d=5",
                      assemble_davies(h, {Coupling{random_hermitian(5, rng), ChemicalSpectrum{FlatProfile{0.1}, 0.3, 0.4}}}));
  }
  BatteryParams p = battery(0.3, 1.0);
  p.N = 10;
  p.T = 0.02;
  gens.emplace_back("battery charging N=10", charging_model(p, CouplingSpectrum(resonant_exciton_spectrum(p))).total());
  gens.emplace_back("battery discharge N=10", discharging_model(p, ThermalSpectrum{OhmicProfile{0.05, 1.5}, p.T}).total());
  gens.emplace_back("exciton factory 2+2", build_factory_generator(random_factory(rng, 2, 2)));

  double worst = std::numeric_limits<double>::infinity();
  int maps = 0;
  bool all = true;
  for (const auto& [name, g] : gens)
    for (double t : times) {
      const CptpReport r = cptp_report(propagator(g, t), tol);
      worst = std::min(worst, r.min_choi_eigenvalue);
      all = all && r.cptp;
      ++maps;
      if (!r.cptp) o.note(false, name + " t=" + sci(t));
    }
  o.note(all, std::to_string(maps) + " Davies semigroup maps, min Choi eigenvalue " + sci(worst));

  worst = std::numeric_limits<double>::infinity();
  maps = 0;
  all = true;
  const BathCorrelation f(ExponentialCorrelation{0.2, 0.8, 0.5});
  for (Index d : {2, 4}) {
    const HermitianOperator h(random_hermitian(d, rng));
    const ComplexMatrix s = random_hermitian(d, rng);
    for (double t : times) {
      const CumulantK2 k = cumulant_k2(h, s, f, t);
      for (bool lamb : {false, true}) {
        const RwcMap m = rwc_map(0.5, k.superop(lamb), tol);
        worst = std::min(worst, m.cptp.min_choi_eigenvalue);
        all = all && m.cptp.cptp;
        ++maps;
      }
    }
  }
  o.note(all, std::to_string(maps) + " cumulant maps, min Choi eigenvalue " + sci(worst));
}

// 3
void battery_stationary(Outcome& o) {
  double worst = 0.0;
  for (double xi : {0.0, 0.8, 1.5})
    for (double dmu : {0.8, 1.0, 1.1}) {
      const BatteryParams p = battery(xi, dmu);
      const BatteryGenerator bg = charging_model(p, CouplingSpectrum(resonant_exciton_spectrum(p)));
      const DensityMatrix rho = stationary_state(bg.total());
      const double td = trace_distance(rho.matrix(), stationary_closed_form(p).matrix());
      worst = std::max(worst, td);
      if (td > 1e-6) o.note(false, "xi0=" + sci(xi) + " dmu=" + sci(dmu) + " td=" + sci(td));
    }
  o.note(worst <= 1e-6, "max trace distance " + sci(worst) + " on the 3x3 grid, N=40 (tol 1e-6)");
}

// 4
void discharge_chain(Outcome& o) {
  double worst = 0.0;
  for (double xi : {0.5, 1.5}) {
    const BatteryParams p = battery(xi, 1.0);
    const DischargeRates r = discharge_rate(p, ThermalSpectrum{OhmicProfile{0.05, 1.5}, p.T});
    worst = std::max(worst, std::abs(r.direct - r.closed_form));
  }
  o.note(worst <= 1e-9, "|direct - closed form| = " + sci(worst) + " (tol 1e-9)");

  BatteryParams p = battery(1.5, 1.0);
  p.T = 0.0;
  const double g0 = 3e-3;
  const DischargeRates flat = discharge_rate(p, TabulatedSpectrum{{-50.0, 50.0}, {g0, g0}});
  const double dev = std::max({std::abs(flat.poisson - g0), std::abs(flat.closed_form - g0), std::abs(flat.direct - g0)});
  o.note(dev <= 1e-10, "flat T=0 rate - G0 = " + sci(dev) + " (tol 1e-10)");

  BatteryParams big = battery(std::sqrt(20.0), 1.0);
  big.T = 0.0;
  big.N = 100;
  const DischargeRates a =
      discharge_rate(big, ThermalSpectrum{GaussianProfile{1e-2, 0.0, 2.0}, std::numeric_limits<double>::infinity()}, false);
  const double arel = std::abs(a.closed_form - a.asymptotic) / a.closed_form;
  o.note(arel <= 0.1, "S=20 asymptotic vs exact sum rel. diff " + sci(arel) + " (tol 0.1)");

  const CouplingSpectrum g = ThermalSpectrum{GaussianProfile{1e-2, 1.0, 0.3}, 0.0};
  std::vector<double> rates;
  for (double s : {5.0, 10.0, 20.0}) {
    BatteryParams q = battery(std::sqrt(s), 1.0);
    q.T = 0.0;
    q.N = 100;
    rates.push_back(discharge_rate(q, g, false).closed_form);
  }
  const bool monotone = rates[0] >= rates[1] && rates[1] >= rates[2];
  o.note(monotone && rates[0] / rates[2] >= 1e3,
         "rates at S=5,10,20: " + sci(rates[0]) + ", " + sci(rates[1]) + ", " + sci(rates[2]) + " (drop " +
             sci(rates[0] / rates[2]) + ", need >= 1e3)");
}

// 5
void vm_dual(Outcome& o) {
  const BatteryParams p = battery(1.2, 1.0);
  const ComplexMatrix lower = electronic_op(ket_bra(0, 1, 2), p.N);
  const BohrDecomposition bd = bohr_decompose(battery_hamiltonian(p), lower);
  // levels near the truncation edge are polluted in the Bohr operators
  const Index keep = 20;
  double worst = 0.0;
  for (int m = -2; m <= 4; ++m) {
    const BohrComponent* c = bd.find(vm_frequency(m, p), 1e-8);
    if (!c) {
      o.note(false, "no Bohr component for m=" + std::to_string(m));
      continue;
    }
    const ComplexMatrix a = c->op.block(0, p.N, keep, keep);
    const ComplexMatrix b = vm_operator(m, p).matrix.block(0, p.N, keep, keep);
    Index i = 0, j = 0;
    b.cwiseAbs().maxCoeff(&i, &j);
    const cplx phase = a(i, j) / b(i, j);
    worst = std::max({worst, std::abs(std::abs(phase) - 1.0), max_abs(a - phase * b)});
  }
  o.note(worst <= 1e-8, "max elementwise deviation " + sci(worst) + " for m=-2..4 (tol 1e-8)");
}

// 6
void delta_mu_prediction(Outcome& o) {
  ExcitonFactoryParams p = factory({1.0}, {0.0}, 0.0, 0.1);
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-0.5 + 0.05 * i);
  const double gap = 1.0;
  const DeltaMuOptimum opt = optimal_delta_mu(p, grid);
  const double e1 = std::abs(opt.delta_mu - predicted_delta_mu(gap, p.T, p.hot_T(gap), p.delta_g));
  o.note(e1 <= 1e-3, "single pair |minimizer - closed form| = " + sci(e1) + " (tol 1e-3)");

  p.hot_T = PiecewiseLinear::constant(p.T);
  const double e2 = std::abs(optimal_delta_mu(p, grid).delta_mu - p.delta_g);
  o.note(e2 <= 1e-6, "isothermal |minimizer - delta_g| = " + sci(e2) + " (tol 1e-6)");

  p.delta_g = 0.0;
  p.hot_T = PiecewiseLinear::constant(2.0 * p.T);
  const DeltaMuOptimum half = optimal_delta_mu(p, grid);
  const double e3 = std::abs(half.delta_mu - half.effective_gap / 2.0);
  o.note(e3 <= 1e-3, "T_hot=2T |minimizer - gap/2| = " + sci(e3) + " (tol 1e-3)");

  // a dominant pair among six modes
  ExcitonFactoryParams q = factory({1.0, 1.3, 1.6}, {-0.6, -0.3, 0.0}, 0.2, 0.0);
  q.gamma_inter(0, 2) = 0.1;
  for (Index k = 0; k < 3; ++k)
    for (Index l = 0; l < 3; ++l)
      if (!(k == 0 && l == 2)) q.gamma_inter(k, l) = 1e-9;
  const DeltaMuOptimum dom = optimal_delta_mu(q, grid);
  const double e4 = std::abs(dom.delta_mu - predicted_delta_mu(1.0, q.T, q.hot_T(1.0), q.delta_g));
  o.note(e4 <= 1e-3, "dominant pair in 6 modes |minimizer - closed form| = " + sci(e4) + " (tol 1e-3)");
}

// 7
void residual_bound(Outcome& o) {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    const ExcitonFactoryParams p = random_factory(rng, 1 + k % 3, 1 + (k / 3) % 3);
    const double dmu = u(rng);
    const double mu_b = fix_mu_b(p, dmu);
    const InterbandResidual r = interband_residual({mu_b + dmu, mu_b, p.T}, p);
    worst = std::min(worst, r.bound - r.exact);
  }
  o.note(worst >= -1e-10, "min (bound - exact) = " + sci(worst) + " over 20 factories (tol -1e-10)");
}

// 8
void ergotropy_suite(Outcome& o) {
  std::mt19937_64 rng(808);
  const Index d = 6;
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const DensityMatrix rho = random_density(d, rng);
    const HermitianOperator h(random_hermitian(d, rng));
    const RealVector lam = herm_eig(rho.op()).values;
    const RealVector eps = herm_eig(h).values;
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double e = 0.0;
      for (Index i = 0; i < d; ++i) e += lam(i) * eps(perm[static_cast<std::size_t>(i)]);
      best = std::min(best, e);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double passive = (passive_state(rho, h).matrix() * h.matrix()).trace().real();
    worst = std::max(worst, std::abs(best - passive));
  }
  o.note(worst <= 1e-10, "passive energy vs 720-permutation oracle " + sci(worst) + " (tol 1e-10)");

  std::uniform_int_distribution<int> dim(2, 8);
  double slack = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 50; ++k) {
    const Index n = dim(rng);
    const ErgotropyReport r = bound_ergotropy(random_density(n, rng), HermitianOperator(random_hermitian(n, rng)));
    slack = std::min(slack, r.W_bar_max - r.W_max);
  }
  o.note(slack >= -1e-10, "min (W_bar - W) = " + sci(slack) + " over 50 draws");

  double step = 0.0;
  for (double dmu : {0.8, 1.2}) {
    BatteryParams p = battery(0.8, dmu);
    p.T = 1e-4;
    const ZeroTWork z = zero_T_work(p);
    step = std::max(step, std::abs(z.finite_T - (dmu > p.E_el ? p.E_el : 0.0)));
  }
  o.note(step <= 1e-3, "zero-T step deviation " + sci(step) + " at dmu=0.8,1.2 (tol 1e-3)");

  double ent = 0.0;
  for (double dmu : {0.8, 1.0, 1.1}) {
    const BatteryParams p = battery(1.5, dmu);
    ent = std::max(ent, std::abs(battery_entropy_closed_form(p, BatteryEntropy::Stationary) -
                                 von_neumann_entropy(stationary_closed_form(p))));
  }
  const BatteryParams p = battery(1.5, 1.0);
  const HermitianOperator h = battery_hamiltonian(p);
  for (double bb : {30.0, 60.0})
    ent = std::max(ent, std::abs(battery_entropy_closed_form(p, BatteryEntropy::Gibbs, bb) -
                                 von_neumann_entropy(gibbs_state(h, 1.0 / bb))));
  o.note(ent <= 1e-8, "closed-form entropies vs numerical " + sci(ent) + " (tol 1e-8)");
}

// 9
void rwc_convergence(Outcome& o) {
  const double kappa = 1.0;
  const double lambda = 1.0;
  const BathCorrelation f(ExponentialCorrelation{0.05, kappa, 0.3});
  const HermitianOperator h = qubit(1.0);
  const SuperOperatorMatrix L = rwc_davies_limit(h, sigma_x(), f);
  const double t = 200.0 / kappa;
  const CumulantK2 k = cumulant_k2(h, sigma_x(), f, t);
  const double l2 = lambda * lambda;
  const double dist = op_norm(l2 * k.dissipative.matrix / t - l2 * L.matrix);
  o.note(dist < 1e-3, "||lambda^2 K2(t)/t - L|| = " + sci(dist) + " at t = 200/kappa (tol 1e-3)");

  const CumulantK2 k0 = cumulant_k2(h, sigma_x(), f, 0.0);
  const double id = max_abs(rwc_map(lambda, k0.superop(true)).map.matrix - ComplexMatrix::Identity(4, 4));
  o.note(id == 0.0, "map at t = 0 deviates from identity by " + sci(id));
}

// 10
void kms_laws(Outcome& o) {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  double worst = 0.0;
  for (const RateProfile& prof : {RateProfile{FlatProfile{0.02}}, RateProfile{OhmicProfile{0.1, 1.5}},
                                  RateProfile{GaussianProfile{0.1, 0.7, 0.4}}}) {
    const CouplingSpectrum g(ThermalSpectrum{prof, 0.15});
    for (int i = 0; i < 5; ++i) {
      const double w = u(rng);
      worst = std::max(worst, rel(g(-w) / g(w), std::exp(-w / 0.15)));
    }
  }
  o.note(worst <= 1e-6, "thermal max rel. error " + sci(worst));

  worst = 0.0;
  const CouplingSpectrum chem(ChemicalSpectrum{FlatProfile{0.05}, 0.2, 0.4});
  for (int i = 0; i < 5; ++i) {
    const double w = u(rng);
    worst = std::max(worst, rel(chem.upward(w) / chem.downward(w), std::exp(-(w - 0.4) / 0.2)));
  }
  o.note(worst <= 1e-6, "chemical max rel. error " + sci(worst));

  // random frequencies inside the broadened lines, plus the direct negative
  // frequency sum at the line centres
  ExcitonicSpectrum s;
  s.E_a = {1.00, 1.05};
  s.E_b = {0.0, -0.04};
  s.g_abs2 = Eigen::MatrixXd(2, 2);
  s.g_abs2 << 1e-2, 2e-2, 3e-2, 0.5e-2;
  s.mu_a = 0.95;
  s.mu_b = 0.02;
  s.T = 0.01;
  s.eta = 1e-3;
  const CouplingSpectrum ex(s);
  std::uniform_int_distribution<int> line(0, 3);
  std::uniform_real_distribution<double> off(-s.eta, s.eta);
  worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const int k = line(rng);
    const double centre = s.E_a[static_cast<std::size_t>(k / 2)] - s.E_b[static_cast<std::size_t>(k % 2)];
    const double w = centre + off(rng);
    const double law = std::exp(-(w - s.delta_mu()) / s.T);
    worst = std::max({worst, rel(ex(-w) / ex(w), law),
                      rel(excitonic_negative_direct(s, centre) / ex(centre), std::exp(-(centre - s.delta_mu()) / s.T))});
  }
  o.note(worst <= 1e-6, "excitonic max rel. error " + sci(worst));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 11
void determinism(Outcome& o) {
  const ScenarioConfig cfg = load_config(MOLBAT_SOURCE_DIR "/configs/default.json");
  const std::filesystem::path base = std::filesystem::temp_directory_path() / "molbat_acceptance";
  std::filesystem::remove_all(base);
  const EmittedFiles a = emit(run_scenario(cfg, {true, 1}), (base / "a").string(), cfg.name, OutputFormat::Csv);
  const EmittedFiles b = emit(run_scenario(cfg, {true, 4}), (base / "b").string(), cfg.name, OutputFormat::Csv);
  const std::string x = slurp(a.data), y = slurp(b.data);
  o.note(!x.empty() && x == y, std::to_string(x.size()) + " bytes, repeated runs " + (x == y ? "identical" : "differ"));
  std::filesystem::remove_all(base);
}

}  // namespace

int main() {
  criterion(1, "gibbs-stationarity", gibbs_stationarity);
  criterion(2, "cptp", cptp);
  criterion(3, "battery-stationary-state", battery_stationary);
  criterion(4, "discharge-rate-chain", discharge_chain);
  criterion(5, "vm-dual-construction", vm_dual);
  criterion(6, "delta-mu-prediction", delta_mu_prediction);
  criterion(7, "trace-norm-bound", residual_bound);
  criterion(8, "ergotropy-suite", ergotropy_suite);
  criterion(9, "rwc-convergence", rwc_convergence);
  criterion(10, "kms-laws", kms_laws);
  criterion(11, "determinism", determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures ? 1 : 0;
}
