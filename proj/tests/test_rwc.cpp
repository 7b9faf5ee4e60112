#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "molbat/davies.hpp"
#include "molbat/errors.hpp"
#include "molbat/operators.hpp"
#include "molbat/rwc.hpp"

using namespace molbat;
using namespace testing_util;

namespace {

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

BathCorrelation expo(double c, double kappa, double Omega = 0.0) { return BathCorrelation(ExponentialCorrelation{c, kappa, Omega}); }

}  // namespace

TEST_CASE("zero correlation gives a zero cumulant") {
  const CumulantK2 k = cumulant_k2(qubit(1.0), sigma_x(), expo(0.0, 1.0), 3.0);
  CHECK(max_abs(k.dissipative.matrix) == 0.0);
  CHECK(max_abs(k.lamb.matrix()) == 0.0);
}

TEST_CASE("spectrum of the exponential correlation") {
  const BathCorrelation f = expo(0.3, 0.5, 0.2);
  for (double w : {-1.0, -0.2, 0.0, 0.7}) CHECK(f.spectrum(w) == doctest::Approx(2 * 0.3 * 0.5 / (0.25 + (w + 0.2) * (w + 0.2))));
  CHECK(f(-1.3) == std::conj(f(1.3)));
  CHECK_THROWS_AS(BathCorrelation(ExponentialCorrelation{0.1, 0.0, 0.0}), InputError);
  CHECK_THROWS_AS(BathCorrelation(ExponentialCorrelation{0.1, 1.0, 1.0, 0.01}), InputError);
}

TEST_CASE("KMS option fixes the detailed-balance ratio at Omega") {
  const BathCorrelation f(ExponentialCorrelation{0.01, 0.2, 1.0, 0.5});
  CHECK(f.spectrum(-1.0) / f.spectrum(1.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("closed-form coefficients match quadrature") {
  for (const BathCorrelation& f : {expo(0.05, 1.0), expo(0.2, 0.3, 0.4), BathCorrelation(ExponentialCorrelation{0.01, 0.2, 1.0, 0.5})}) {
    for (double t : {0.05, 1.0, 7.5}) {
      for (double w : {-1.0, 0.0, 1.0})
        for (double wp : {-1.0, 0.0, 1.0}) {
          const CumulantCoefficients a = coefficients_closed_form(f, w, wp, t);
          const CumulantCoefficients b = coefficients_quadrature(f, w, wp, t);
          CHECK(std::abs(a.C - b.C) <= 1e-9);
          CHECK(std::abs(a.D - b.D) <= 1e-9);
        }
    }
  }
  // full superoperator on the two-level system
  const BathCorrelation f = expo(0.05, 1.0);
  const CumulantK2 a = cumulant_k2(qubit(1.0), sigma_x(), f, 4.0, CoefficientMethod::ClosedForm);
  const CumulantK2 b = cumulant_k2(qubit(1.0), sigma_x(), f, 4.0, CoefficientMethod::Quadrature);
  CHECK(max_abs(a.superop(true).matrix - b.superop(true).matrix) <= 1e-9);
}

TEST_CASE("tabulated correlation reproduces the exponential one") {
  TabulatedCorrelation tab;
  const BathCorrelation e = expo(0.05, 1.0, 0.3);
  for (int i = 0; i <= 1500; ++i) {
    tab.tau.push_back(0.02 * i);
    tab.F.push_back(e(0.02 * i));
  }
  const BathCorrelation f(tab);
  CHECK(std::abs(f(0.51) - e(0.51)) <= 1e-5);
  for (double w : {-1.0, 0.0, 1.0}) CHECK(std::abs(f.spectrum(w) - e.spectrum(w)) <= 1e-5);
  const CumulantK2 a = cumulant_k2(qubit(1.0), sigma_x(), e, 5.0);
  const CumulantK2 b = cumulant_k2(qubit(1.0), sigma_x(), f, 5.0);
  CHECK(max_abs(a.superop(true).matrix - b.superop(true).matrix) <= 1e-4);
}

TEST_CASE("non-positive-definite tabulated correlation is rejected") {
  TabulatedCorrelation tab{{0.0, 1.0, 2.0}, {1.0, -2.0, 0.0}};
  CHECK_THROWS_AS(BathCorrelation{tab}, InputError);
  CHECK_THROWS_AS(BathCorrelation(TabulatedCorrelation{{0.5, 1.0}, {1.0, 0.0}}), InputError);
}

TEST_CASE("long-time limit is the Davies generator") {
  const double kappa = 1.0;
  const BathCorrelation f = expo(0.05, kappa, 0.3);
  const HermitianOperator h = qubit(1.0);
  const SuperOperatorMatrix L = rwc_davies_limit(h, sigma_x(), f);
  const double t = 200.0 / kappa;
  const CumulantK2 k = cumulant_k2(h, sigma_x(), f, t);
  CHECK(op_norm(k.dissipative.matrix / t - L.matrix) < 1e-3);
  // the Davies limit keeps only the resonant rates G(+-1)
  const ComplexMatrix excited = ket_bra(1, 1, 2);
  const ComplexMatrix out = L.apply(excited);
  CHECK(out(0, 0).real() == doctest::Approx(f.spectrum(1.0)).epsilon(1e-12));
}

TEST_CASE("Kossakowski matrix is positive semidefinite") {
  std::mt19937_64 rng(4);
  const HermitianOperator h(random_hermitian(4, rng));
  const ComplexMatrix s = random_hermitian(4, rng);
  for (double t : {0.01, 0.5, 3.0, 40.0}) {
    const CumulantK2 k = cumulant_k2(h, s, expo(0.1, 0.7, -0.4), t);
    CHECK(max_abs(k.kossakowski - k.kossakowski.adjoint()) <= 1e-12 * max_abs(k.kossakowski));
    const RealVector ev = herm_eig(ComplexMatrix(0.5 * (k.kossakowski + k.kossakowski.adjoint()))).values;
    CHECK(ev(0) >= -1e-10 * ev(ev.size() - 1));
  }
}

TEST_CASE("cumulant map is CPTP and preserves Hermiticity") {
  std::mt19937_64 rng(8);
  for (Index d : {2, 20}) {
    const HermitianOperator h(random_hermitian(d, rng));
    const ComplexMatrix s = random_hermitian(d, rng) / std::sqrt(static_cast<double>(d));
    const BathCorrelation f = expo(0.2, 0.8, 0.5);
    for (double t : {0.1, 1.0, 10.0}) {
      const CumulantK2 k = cumulant_k2(h, s, f, t);
      for (bool lamb : {false, true}) {
        const RwcMap m = rwc_map(0.5, k.superop(lamb));
        CHECK(m.cptp.cptp);
        CHECK(m.cptp.trace_preservation_error <= 1e-10);
        CHECK(m.cptp.min_choi_eigenvalue >= -1e-8);
      }
      const ComplexMatrix rho = random_hermitian(d, rng);
      const ComplexMatrix out = k.superop(true).apply(rho);
      CHECK(max_abs(out - out.adjoint()) <= 1e-10);
      CHECK(std::abs(out.trace()) <= 1e-10);
      CHECK(is_hermitian(k.lamb.matrix()));
    }
  }
}

TEST_CASE("zero coupling gives the identity map") {
  const CumulantK2 k = cumulant_k2(qubit(1.0), sigma_x(), expo(0.3, 1.0), 2.0);
  const RwcMap m = rwc_map(0.0, k.superop(true));
  CHECK(max_abs(m.map.matrix - ComplexMatrix::Identity(4, 4)) == 0.0);
}

TEST_CASE("quadratic onset at short times") {
  const HermitianOperator h = qubit(1.0);
  const BathCorrelation f = expo(0.3, 1.0, 0.2);
  const double a = max_abs(cumulant_k2(h, sigma_x(), f, 1e-3).superop(true).matrix);
  const double b = max_abs(cumulant_k2(h, sigma_x(), f, 2e-3).superop(true).matrix);
  CHECK(b / a == doctest::Approx(4.0).epsilon(1e-2));
  // leading coefficient F(0) (S rho S - {S^2, rho}/2)
  const double t = 1e-4;
  const ComplexMatrix expect = 0.3 * t * t * sandwich(sigma_x(), sigma_x()).matrix - 0.3 * t * t * ComplexMatrix::Identity(4, 4);
  CHECK(max_abs(cumulant_k2(h, sigma_x(), f, t).dissipative.matrix - expect) <= 1e-3 * 0.3 * t * t);
}

TEST_CASE("markov comparison on a two-level system") {
  const double kappa = 1.0;
  const double c = 0.01;  // lambda^2 c / kappa^2 = 0.01
  const BathCorrelation f = expo(c, kappa, 0.2);
  const DensityMatrix rho0(ComplexMatrix::Constant(2, 2, 0.5));
  const auto rows = markov_compare(qubit(1.0), sigma_x(), f, 1.0, {0.0, 1.0, 10.0, 100.0 / kappa}, rho0, false, 2);
  CHECK(rows[0].distance <= 1e-15);
  CHECK(rows[3].distance < 1e-2);
  MESSAGE("distance at t = 100/kappa: " << rows[3].distance);
}

TEST_CASE("thermal correlation: both dynamics reach the Gibbs state") {
  const double T = 0.5;
  const BathCorrelation f(ExponentialCorrelation{0.01, 0.2, 1.0, T});
  const HermitianOperator h = qubit(1.0);
  const DensityMatrix rho0(ket_bra(0, 0, 2));
  const double t = 1e5;
  const auto rows = markov_compare(h, sigma_x(), f, 1.0, {t}, rho0);
  CHECK(rows[0].distance < 1e-4);
  const CumulantK2 k = cumulant_k2(h, sigma_x(), f, t);
  const ComplexMatrix out = rwc_map(1.0, k.superop(false)).map.apply(rho0.matrix());
  CHECK(trace_distance(out, gibbs_state(h, T).matrix()) < 1e-4);
  MESSAGE("distance to Davies " << rows[0].distance << ", to Gibbs " << trace_distance(out, gibbs_state(h, T).matrix()));
}

TEST_CASE("input contracts") {
  CHECK_THROWS_AS(cumulant_k2(qubit(1.0), sigma_x(), expo(0.1, 1.0), -1.0), ContractViolation);
  ComplexMatrix s = sigma_x();
  s(0, 1) = kI;
  CHECK_THROWS_AS(cumulant_k2(qubit(1.0), s, expo(0.1, 1.0), 1.0), ContractViolation);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(cumulant_k2(HermitianOperator(random_hermitian(21, rng)), random_hermitian(21, rng), expo(0.1, 1.0), 1.0),
                  ResourceError);
}
