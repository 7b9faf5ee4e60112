#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "molbat/battery.hpp"
#include "molbat/errors.hpp"

using namespace molbat;
using namespace testing_util;

namespace {

BatteryParams defaults(double xi0 = 1.5, double delta_mu = 1.0) {
  BatteryParams p;
  p.xi0 = xi0;
  p.delta_mu = delta_mu;
  return p;
}

double excited_population(const ComplexMatrix& rho) {
  const Index n = rho.rows() / 2;
  return rho.bottomRightCorner(n, n).trace().real();
}

CouplingSpectrum flat_table(double g0) {
  return TabulatedSpectrum{{-50.0, 50.0}, {g0, g0}};
}

}  // namespace

TEST_CASE("truncation guard") {
  CHECK(truncation_tail(defaults()).ok);
  BatteryParams p = defaults();
  p.N = 12;
  CHECK_FALSE(truncation_tail(p).ok);
  CHECK_THROWS_AS(thermal_rc_generator(p), TruncationError);
  p = defaults(0.0);
  p.T = 1.0;
  CHECK_THROWS_AS(require_truncation(p), TruncationError);
}

TEST_CASE("conditioned Gibbs mixtures are stationary under thermal_rc") {
  const BatteryParams p = defaults();
  const GKLSGenerator g = thermal_rc_generator(p);
  CHECK(g.channels().size() == 3);
  const ComplexMatrix r0 = conditioned_gibbs(p, 0).matrix();
  const ComplexMatrix r1 = conditioned_gibbs(p, 1).matrix();
  for (double p1 : {0.0, 0.3, 1.0}) {
    const ComplexMatrix rho = (1.0 - p1) * r0 + p1 * r1;
    CHECK(trace_norm(g.apply(rho)) <= 1e-9);
  }
}

TEST_CASE("undisplaced battery without dephasing is a damped oscillator next to an idle qubit") {
  BatteryParams p = defaults(0.0);
  p.G1_at_0 = 0.0;
  p.G2_at_0 = 0.0;
  p.N = 12;
  p.T = 0.02;
  const GKLSGenerator g = thermal_rc_generator(p);
  CHECK(g.channels().size() == 2);
  std::mt19937_64 rng(5);
  const ComplexMatrix rho = random_density(2 * p.N, rng).matrix();
  const ComplexMatrix a = boson_annihilator(FockSpace(p.N));
  const double q = std::exp(-p.omega0 / p.T);
  ComplexMatrix expect = ComplexMatrix::Zero(2 * p.N, 2 * p.N);
  for (Index e = 0; e < 2; ++e)
    for (Index f = 0; f < 2; ++f) {
      const ComplexMatrix x = rho.block(e * p.N, f * p.N, p.N, p.N);
      const ComplexMatrix n = a.adjoint() * a;
      ComplexMatrix y = -kI * (p.omega0 * n * x - x * p.omega0 * n);
      y += -kI * (e == 1 ? p.E_el : 0.0) * x + kI * (f == 1 ? p.E_el : 0.0) * x;
      y += p.gamma * (a * x * a.adjoint() - 0.5 * (n * x + x * n));
      const ComplexMatrix nn = a * a.adjoint();
      y += p.gamma * q * (a.adjoint() * x * a - 0.5 * (nn * x + x * nn));
      expect.block(e * p.N, f * p.N, p.N, p.N) = y;
    }
  CHECK(max_abs(g.apply(rho) - expect) < 1e-13);
}

TEST_CASE("thermal_rc conserves electronic populations") {
  BatteryParams p = defaults(0.3);
  p.N = 10;
  p.T = 0.02;
  const GKLSGenerator g = thermal_rc_generator(p);
  std::mt19937_64 rng(11);
  const DensityMatrix rho0 = random_density(2 * p.N, rng);
  const double e0 = excited_population(rho0.matrix());
  for (double t : {1.0, 20.0, 200.0}) {
    const DensityMatrix rho = propagate(propagator(g, t), rho0);
    CHECK(std::abs(excited_population(rho.matrix()) - e0) <= 1e-10);
  }
}

TEST_CASE("charging stationary state matches the closed form on the default grid") {
  for (double dmu : {0.8, 1.0, 1.1})
    for (double xi : {0.0, 0.8, 1.5}) {
      const BatteryParams p = defaults(xi, dmu);
      const BatteryGenerator bg = charging_model(p, resonant_exciton_spectrum(p));
      const StationaryReport rep = solve_stationary(bg.total());
      CHECK(rep.kernel_dim == 1);
      CHECK(trace_distance(rep.rho, stationary_closed_form(p).matrix()) <= 1e-6);
    }
}

TEST_CASE("charging at delta_mu = E_el fills both branches equally") {
  const BatteryParams p = defaults(0.8, 1.0);
  CHECK(charged_fraction(p) == doctest::Approx(0.5).epsilon(1e-15));
  const DensityMatrix rho = stationary_state(charging_model(p, resonant_exciton_spectrum(p)).total());
  CHECK(excited_population(rho.matrix()) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("charging with delta_mu = 0 leaves the battery empty") {
  const BatteryParams p = defaults(0.8, 0.0);
  const DensityMatrix rho = stationary_state(charging_model(p, resonant_exciton_spectrum(p)).total());
  CHECK(excited_population(rho.matrix()) < 1e-12);
  CHECK(trace_distance(rho.matrix(), conditioned_gibbs(p, 0).matrix()) < 1e-6);
}

TEST_CASE("V_m without displacement") {
  const BatteryParams p = defaults(0.0);
  const ComplexMatrix lower = electronic_op(ket_bra(0, 1, 2), p.N);
  CHECK(max_abs(vm_operator(0, p).matrix - lower) < 1e-15);
  for (int m : {-3, -1, 1, 2, 5}) CHECK(max_abs(vm_operator(m, p).matrix) == 0.0);
  CHECK_THROWS_AS(vm_operator(static_cast<int>(p.N) - 1, p), InputError);
}

TEST_CASE("Franck-Condon weights of v_m") {
  const double xi = 1.2, s = xi * xi;
  for (int m = 0; m <= 8; ++m) {
    const ComplexMatrix v = vm_series(m, xi, 40);
    const double w = v.col(0).squaredNorm();
    CHECK(w == doctest::Approx(std::pow(s, m) / std::tgamma(m + 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("V_m agrees with the Bohr decomposition of the lowering coupling") {
  const BatteryParams p = defaults(1.2);
  const ComplexMatrix lower = electronic_op(ket_bra(0, 1, 2), p.N);
  const auto bd = bohr_decompose(battery_hamiltonian(p), lower);
  const Index keep = 20;
  for (int m = -2; m <= 4; ++m) {
    const auto* c = bd.find(vm_frequency(m, p), 1e-8);
    REQUIRE(c != nullptr);
    const ComplexMatrix a = c->op.block(0, p.N, keep, keep);
    const ComplexMatrix b = vm_operator(m, p).matrix.block(0, p.N, keep, keep);
    Index i = 0, j = 0;
    b.cwiseAbs().maxCoeff(&i, &j);
    const cplx phase = a(i, j) / b(i, j);
    CHECK(std::abs(std::abs(phase) - 1.0) < 1e-8);
    CHECK(max_abs(a - phase * b) < 1e-8);
  }
}

TEST_CASE("discharge rate: direct trace equals the closed form") {
  for (double xi : {0.5, 1.5}) {
    const BatteryParams p = defaults(xi);
    const CouplingSpectrum g = ThermalSpectrum{OhmicProfile{0.05, 1.5}, p.T};
    const DischargeRates r = discharge_rate(p, g);
    CHECK(r.direct > 0.0);
    CHECK(std::abs(r.direct - r.closed_form) <= 1e-9);
  }
}

TEST_CASE("discharge rate: flat spectrum at T = 0 gives the bare rate") {
  BatteryParams p = defaults(1.5);
  p.T = 0.0;
  const double g0 = 3e-3;
  const DischargeRates r = discharge_rate(p, flat_table(g0));
  CHECK(std::abs(r.poisson - g0) <= 1e-10);
  CHECK(std::abs(r.closed_form - g0) <= 1e-10);
  CHECK(std::abs(r.direct - g0) <= 1e-10);
}

TEST_CASE("discharge rate without displacement is G(E_el)") {
  const BatteryParams p = defaults(0.0);
  const CouplingSpectrum g = ThermalSpectrum{GaussianProfile{1e-2, 0.9, 0.3}, p.T};
  const DischargeRates r = discharge_rate(p, g);
  CHECK(r.closed_form == doctest::Approx(g(p.E_el)).epsilon(1e-12));
  CHECK(r.direct == doctest::Approx(g(p.E_el)).epsilon(1e-10));
}

TEST_CASE("upward discharge channels vanish at T = 0") {
  BatteryParams p = defaults(0.8);
  p.T = 0.0;
  const CouplingSpectrum g = ThermalSpectrum{OhmicProfile{0.05, 1.5}, 0.0};
  for (int m = -5; m <= 9; ++m) CHECK(g.upward(vm_frequency(m, p)) == 0.0);
  // every surviving channel lowers the energy
  const GKLSGenerator l1 = discharge_generator(p, g);
  REQUIRE_FALSE(l1.channels().empty());
  const ComplexMatrix& h = l1.hamiltonian().matrix();
  for (const auto& c : l1.channels()) {
    const ComplexMatrix comm = h * c.jump - c.jump * h;
    const double released = -(c.jump.adjoint() * comm).trace().real() / c.jump.squaredNorm();
    CHECK(released > 0.0);
  }
}

TEST_CASE("discharge rate at large Huang-Rhys factor follows the shifted spectrum") {
  BatteryParams p = defaults(std::sqrt(20.0));
  p.T = 0.0;
  p.N = 100;
  const CouplingSpectrum g = ThermalSpectrum{GaussianProfile{1e-2, 0.0, 2.0}, std::numeric_limits<double>::infinity()};
  const DischargeRates r = discharge_rate(p, g, false);
  CHECK(std::abs(r.closed_form - r.poisson) <= 1e-12);
  CHECK(std::abs(r.poisson - r.asymptotic) <= 0.1 * r.asymptotic);
}

TEST_CASE("discharge is suppressed and monotone in S for a gap-centred spectrum") {
  const CouplingSpectrum g = ThermalSpectrum{GaussianProfile{1e-2, 1.0, 0.3}, 0.0};
  std::vector<double> rates;
  for (double s : {1.0, 5.0, 10.0, 20.0}) {
    BatteryParams p = defaults(std::sqrt(s));
    p.T = 0.0;
    p.N = 100;
    rates.push_back(discharge_rate(p, g, false).poisson);
  }
  for (std::size_t i = 1; i < rates.size(); ++i) CHECK(rates[i] <= rates[i - 1]);
  CHECK(rates[1] / rates[3] >= 1e3);
}

TEST_CASE("sideband completeness") {
  CHECK(std::abs(sideband_completeness(defaults()) - 1.0) <= 1e-8);
  CHECK(std::abs(sideband_completeness(defaults(0.8)) - 1.0) <= 1e-8);
}

TEST_CASE("thermal_rc + discharge propagator is CPTP") {
  BatteryParams p = defaults(0.3);
  p.N = 10;
  p.T = 0.02;
  const BatteryGenerator bg = discharging_model(p, ThermalSpectrum{OhmicProfile{0.05, 1.5}, p.T});
  for (double t : {0.5, 10.0}) CHECK(is_cptp(propagator(bg.total(), t), 1e-9));
}

TEST_CASE("empty battery is nearly stationary under discharge") {
  BatteryParams p = defaults(0.8);
  p.T = 0.05;
  p.N = 30;
  const CouplingSpectrum g = ThermalSpectrum{OhmicProfile{0.05, 1.5}, p.T};
  const BatteryGenerator bg = discharging_model(p, g);
  const double res = trace_norm(bg.total().apply(conditioned_gibbs(p, 0).matrix()));
  CHECK(res <= 1e-13 + 50.0 * g.downward(p.E_el) * std::exp(-p.E_el / p.T));
}
