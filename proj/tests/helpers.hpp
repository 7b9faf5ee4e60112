#pragma once

#include <random>

#include "molbat/linalg.hpp"

namespace testing_util {

using namespace molbat;

inline ComplexMatrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline ComplexMatrix random_hermitian(Index d, std::mt19937_64& rng) {
  ComplexMatrix m = random_matrix(d, d, rng);
  return 0.5 * (m + m.adjoint());
}

inline ComplexMatrix random_unitary(Index d, std::mt19937_64& rng) {
  return random_matrix(d, d, rng).householderQr().householderQ();
}

inline DensityMatrix random_density(Index d, std::mt19937_64& rng) {
  ComplexMatrix g = random_matrix(d, d, rng);
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix::from_numerical(rho);
}

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_util
