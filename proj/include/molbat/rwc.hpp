#pragma once

// Second-order cumulant ("refined weak coupling") propagator for a single
// coupling S (x) R and its long-time Davies limit.
//
// Everything here lives in the interaction picture with respect to H. The
// Fourier convention is S(s) = sum_w exp(-i w s) S_w with w = E_l - E_k for
// the matrix element |k><l|, and G(w) = int F(tau) exp(-i w tau) dtau.

#include <string>
#include <variant>
#include <vector>

#include "molbat/linalg.hpp"

namespace molbat {

/// F(tau) = c exp(-kappa |tau|) exp(-i Omega tau).
///
/// With kms_T > 0 a mirrored component is added and the main one reversed:
/// F(tau) = c exp(-kappa |tau|) (exp(i Omega tau) + w exp(-i Omega tau)),
/// with w >= 0 fixed so that G(-Omega) = exp(-Omega / kms_T) G(Omega) holds
/// exactly (Omega > 0 required).
struct ExponentialCorrelation {
  double c = 0.0;
  double kappa = 1.0;
  double Omega = 0.0;
  double kms_T = 0.0;
};

/// Samples of F on tau >= 0 (tau[0] = 0, ascending, F(0) real), linearly
/// interpolated and extended by F(-tau) = conj F(tau). Zero beyond the last sample.
struct TabulatedCorrelation {
  std::vector<double> tau;
  std::vector<cplx> F;
};

class BathCorrelation {
 public:
  using Variant = std::variant<ExponentialCorrelation, TabulatedCorrelation>;

  /// Validates the fields and checks G(w) >= 0 on a frequency grid.
  BathCorrelation(ExponentialCorrelation e);
  BathCorrelation(TabulatedCorrelation t);

  cplx operator()(double tau) const;
  /// G(w), closed form or quadrature over the tabulated support.
  double spectrum(double omega) const;
  const Variant& variant() const { return v_; }
  /// Points on tau >= 0 where F is not smooth (besides 0).
  std::vector<double> breakpoints() const;
  /// Exponential components (c_j, z_j) with F(tau) = sum c_j exp(-z_j tau) on tau >= 0.
  std::vector<std::pair<double, cplx>> exponential_terms() const;

 private:
  void check_positive_spectrum() const;
  Variant v_;
};

/// Reads "tau,F" rows (real F) or "tau,re,im" rows; header line optional,
/// '#' comments allowed.
TabulatedCorrelation load_tabulated_correlation(const std::string& path);

/// C(w, w') = int_0^t ds int_0^t du F(s - u) exp(-i w s) exp(i w' u)
/// D(w, w') = same integral weighted by sgn(u - s).
struct CumulantCoefficients {
  cplx C;
  cplx D;
};

/// Closed form; requires an exponential correlation.
CumulantCoefficients coefficients_closed_form(const BathCorrelation& f, double w, double wp, double t);

/// Adaptive Gauss-Legendre quadrature of the one-dimensional reduction of the
/// double integral. Throws NumericalFailure when the tolerance is not met.
CumulantCoefficients coefficients_quadrature(const BathCorrelation& f, double w, double wp, double t,
                                             double tol = 1e-10);

struct CumulantK2 {
  double t = 0.0;
  std::vector<double> frequencies;  // distinct Bohr frequencies, ascending
  ComplexMatrix kossakowski;        // C over frequency pairs (Hermitian, PSD)
  SuperOperatorMatrix dissipative;  // the double-integral part
  HermitianOperator lamb;           // H_L(t)

  /// dissipative - i[H_L, .] when with_lamb, else dissipative.
  SuperOperatorMatrix superop(bool with_lamb) const;
};

enum class CoefficientMethod { Auto, ClosedForm, Quadrature };

/// Second cumulant at time t (S Hermitian, t >= 0). d <= 20.
CumulantK2 cumulant_k2(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f, double t,
                       CoefficientMethod method = CoefficientMethod::Auto);

/// Davies generator sum_w G(w) (S_w rho S_w^dagger - {S_w^dagger S_w, rho}/2)
/// in the interaction picture, without Lamb shift.
SuperOperatorMatrix rwc_davies_limit(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f);

struct RwcMap {
  SuperOperatorMatrix map;
  CptpReport cptp;
};

/// exp(lambda^2 K2) with its CPTP check at tol.
RwcMap rwc_map(double lambda, const SuperOperatorMatrix& k2, double tol = 1e-8);

struct MarkovRow {
  double t = 0.0;
  double distance = 0.0;  // trace distance of the two evolved states
};

/// Interaction-picture comparison of exp(lambda^2 K2(t)) rho0 with
/// exp(t lambda^2 L) rho0. Grid points are evaluated on up to `threads` workers.
std::vector<MarkovRow> markov_compare(const HermitianOperator& h, const ComplexMatrix& s, const BathCorrelation& f,
                                      double lambda, const std::vector<double>& t_grid, const DensityMatrix& rho0,
                                      bool with_lamb = false, int threads = 1);

}  // namespace molbat
