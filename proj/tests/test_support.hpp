#pragma once

// Shared generators for the test suites and the acceptance binary.

#include <random>

#include "qmasearch/hamiltonian.hpp"

namespace qmasearch::testing {

/// Random term with spectrum in [0, 1] on `support`.
inline LocalTerm random_term(const QubitSet& support, Rng& rng) {
  const Eigen::Index d = Eigen::Index{1} << support.size();
  const Matrix U = haar_unitary(d, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RealVector ev(d);
  for (Eigen::Index i = 0; i < d; ++i) ev(i) = unit(rng);
  return LocalTerm(support, Matrix(U * ev.cast<Complex>().asDiagonal() * U.adjoint()));
}

/// m random 2-local terms on random qubit pairs of an n-qubit register.
inline LocalHamiltonian random_two_local(int n, int m, Rng& rng) {
  LocalHamiltonian h(n, 2);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int i = 0; i < m; ++i) {
    int a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    h.add(random_term({std::min(a, b), std::max(a, b)}, rng));
  }
  return h;
}

inline Matrix projector_one() {
  Matrix p = Matrix::Zero(2, 2);
  p(1, 1) = 1.0;
  return p;
}

/// sum_i |1><1|_i on n qubits.
inline LocalHamiltonian excitation_count(int n) {
  LocalHamiltonian h(n, 1);
  for (int i = 0; i < n; ++i) h.add(LocalTerm({i}, projector_one()));
  return h;
}

}  // namespace qmasearch::testing
