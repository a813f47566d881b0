#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qmasearch/linalg.hpp"

using namespace qmasearch;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vector ket(std::initializer_list<Complex> amps) {
  Vector v(static_cast<Eigen::Index>(amps.size()));
  Eigen::Index i = 0;
  for (auto a : amps) v(i++) = a;
  return v;
}

}  // namespace

TEST(PartialTrace, FullSupportIsIdentity) {
  Rng rng(11);
  const auto rho = random_density({0, 1, 2}, rng);
  const auto r = partial_trace(rho, {0, 1, 2});
  EXPECT_LT((r.matrix() - rho.matrix()).norm(), 1e-15);
}

TEST(PartialTrace, ProductState) {
  const auto rho = DensityMatrix::basis({0, 1}, 1);  // |01>
  EXPECT_LT((partial_trace(rho, {0}).matrix() - diag2(1, 0)).norm(), 1e-14);
  EXPECT_LT((partial_trace(rho, {1}).matrix() - diag2(0, 1)).norm(), 1e-14);
}

TEST(PartialTrace, BellStateReducesToMaximallyMixed) {
  const double s = 1.0 / std::sqrt(2.0);
  const auto bell = DensityMatrix::pure({0, 1}, ket({s, 0, 0, s}));
  EXPECT_LT((partial_trace(bell, {0}).matrix() - diag2(0.5, 0.5)).norm(), 1e-14);
}

TEST(PartialTrace, QubitOrderFollowsLabels) {
  // |0>_0 |1>_1 |+>_2 ; keep {0, 2} should be |0><0| (x) |+><+|.
  const double s = 1.0 / std::sqrt(2.0);
  const Vector psi = kron(kron(ket({1, 0}), ket({0, 1})), ket({s, s}));
  const auto rho = DensityMatrix::pure({0, 1, 2}, psi);
  const Matrix expect = kron(diag2(1, 0), Matrix::Constant(2, 2, 0.5));
  EXPECT_LT((partial_trace(rho, {0, 2}).matrix() - expect).norm(), 1e-14);
}

TEST(PartialTrace, RejectsIndexOutsideSupport) {
  const auto rho = DensityMatrix::maximally_mixed({0, 1});
  EXPECT_THROW(partial_trace(rho, {2}), DomainError);
  EXPECT_THROW(partial_trace(rho, {1, 0}), DomainError);
}

TEST(TraceNorm, Examples) {
  const auto z0 = DensityMatrix::basis({0}, 0);
  const auto z1 = DensityMatrix::basis({0}, 1);
  const auto mixed = DensityMatrix::maximally_mixed({0});
  EXPECT_NEAR(trace_norm_distance(z0, z0), 0.0, 1e-15);
  EXPECT_NEAR(trace_norm_distance(z0, z1), 2.0, 1e-15);
  EXPECT_NEAR(trace_norm_distance(z0, mixed), 1.0, 1e-15);
}

TEST(TraceNorm, SupportMismatchThrows) {
  EXPECT_THROW(trace_norm_distance(DensityMatrix::basis({0}, 0), DensityMatrix::basis({1}, 0)), DomainError);
}

TEST(TraceNorm, ClosedFormMatchesEigenvaluesForQubits) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Matrix d = random_density({0}, rng).matrix() - random_density({0}, rng).matrix();
    EXPECT_NEAR(trace_norm(d), hermitian_eigenvalues(d).cwiseAbs().sum(), 1e-13);
  }
}

TEST(TraceNorm, TriangleInequality) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const QubitSet s = (i % 2) ? QubitSet{0} : QubitSet{0, 1};
    const auto a = random_density(s, rng), b = random_density(s, rng), c = random_density(s, rng);
    const double ab = trace_norm_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 2.0 + 1e-12);
    EXPECT_NEAR(ab, trace_norm_distance(b, a), 1e-12);
    EXPECT_LE(trace_norm_distance(a, c), ab + trace_norm_distance(b, c) + 1e-9);
  }
}

TEST(TraceNorm, MonotoneUnderPartialTrace) {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_density({0, 1, 2}, rng), b = random_density({0, 1, 2}, rng);
    const double full = trace_norm_distance(a, b);
    for (const QubitSet& k : {QubitSet{0}, QubitSet{1, 2}, QubitSet{0, 2}})
      EXPECT_LE(trace_norm_distance(partial_trace(a, k), partial_trace(b, k)), full + 1e-9);
  }
}

TEST(Fidelity, Examples) {
  const double s = 1.0 / std::sqrt(2.0);
  const auto z0 = DensityMatrix::basis({0}, 0);
  const auto z1 = DensityMatrix::basis({0}, 1);
  const auto plus = DensityMatrix::pure({0}, ket({s, s}));
  EXPECT_NEAR(fidelity(z0, z0), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(z0, z1), 0.0, 1e-12);
  EXPECT_NEAR(fidelity(z0, plus), 0.5, 1e-12);
  EXPECT_NEAR(overlap(PureState(ket({1, 0})), PureState(ket({s, s}))), 0.5, 1e-15);
}

TEST(Fidelity, PureStatesReduceToOverlap) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto psi = random_pure_state(4, rng), phi = random_pure_state(4, rng);
    EXPECT_NEAR(fidelity(psi.density(), phi.density()), overlap(psi, phi), 1e-9);
  }
}

TEST(Fidelity, FuchsVanDeGraafForPureReference) {
  Rng rng(29);
  for (int i = 0; i < 200; ++i) {
    const auto psi = random_pure_state(4, rng);
    const auto rho = random_density({0, 1}, rng);
    const double f = (psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes())(0).real();
    EXPECT_LE(trace_norm_distance(rho, psi.density()), 2.0 * std::sqrt(std::max(0.0, 1.0 - f)) + 1e-9);
  }
}

TEST(HermitianEig, Examples) {
  const auto e = hermitian_eig(diag2(3, 1));
  EXPECT_NEAR(e.values(0), 1.0, 1e-15);
  EXPECT_NEAR(e.values(1), 3.0, 1e-15);

  const auto x = hermitian_eig(pauli(1));
  EXPECT_NEAR(x.values(0), -1.0, 1e-15);
  EXPECT_NEAR(x.values(1), 1.0, 1e-15);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(x.vectors.col(0).dot(ket({s, -s}))), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(x.vectors.col(1).dot(ket({s, s}))), 1.0, 1e-12);

  Matrix E(2, 2);
  E << 0.5, -0.5, -0.5, 0.5;
  const auto le = hermitian_eig(E);
  EXPECT_NEAR(le.values(0), 0.0, 1e-15);
  EXPECT_NEAR(le.values(1), 1.0, 1e-15);
}

TEST(HermitianEig, ReconstructionAndOrthonormality) {
  Rng rng(41);
  for (int d : {2, 8, 32}) {
    Matrix g = haar_unitary(d, rng) * Complex(0.3, 0.7);
    g += haar_unitary(d, rng);
    const Matrix A = g + g.adjoint();
    const auto e = hermitian_eig(A);
    for (Eigen::Index i = 1; i < e.values.size(); ++i) EXPECT_LE(e.values(i - 1), e.values(i));
    const Matrix rec = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    EXPECT_LE((A - rec).norm(), 1e-8 * A.norm());
    EXPECT_LE((e.vectors.adjoint() * e.vectors - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(HermitianOp, RejectsNonHermitianAndBadDimension) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(HermitianOp{m}, DomainError);
  EXPECT_THROW(HermitianOp{Matrix::Identity(3, 3)}, DomainError);
}

TEST(DensityMatrix, Invariants) {
  EXPECT_THROW(DensityMatrix({0}, diag2(0.6, 0.6)), DomainError);
  EXPECT_THROW(DensityMatrix({0}, diag2(1.5, -0.5)), DomainError);
  EXPECT_THROW(DensityMatrix({1, 0}, Matrix::Identity(4, 4) / 4.0), DomainError);
  // Tiny negative eigenvalues are clipped.
  const DensityMatrix r({0}, diag2(1.0 + 5e-11, -5e-11));
  EXPECT_GE(hermitian_eigenvalues(r.matrix())(0), 0.0);
}

TEST(PureState, NormEnforced) {
  EXPECT_THROW(PureState(ket({1, 1})), DomainError);
  EXPECT_THROW(PureState(ket({1, 0, 0})), DomainError);
}

TEST(Haar, UnitaryAndDeterministic) {
  Rng rng(1), again(1);
  for (int d : {1, 2, 4, 16}) {
    const Matrix U = haar_unitary(d, rng);
    EXPECT_LE((U.adjoint() * U - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index j = 0; j < d; ++j) EXPECT_NEAR(U.col(j).norm(), 1.0, 1e-12);
    EXPECT_EQ(U, haar_unitary(d, again));
  }
  Rng r1(9);
  EXPECT_NEAR(std::abs(haar_unitary(1, r1)(0, 0)), 1.0, 1e-15);
}

TEST(Haar, FirstMomentQubit) {
  Rng rng(2024);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += std::norm(haar_unitary(2, rng)(0, 0));
  EXPECT_NEAR(sum / n, 0.5, 0.02);
}

TEST(Haar, OverlapDistributionKolmogorovSmirnov) {
  // y = |<phi|psi>|^2 for Haar psi in d = 4 has CDF 1 - (1 - y)^3.
  Rng rng(77);
  const int n = 10000;
  const int d = 4;
  std::vector<double> y(n);
  for (auto& v : y) v = std::norm(haar_unitary(d, rng)(0, 0));
  std::sort(y.begin(), y.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double F = 1.0 - std::pow(1.0 - y[static_cast<std::size_t>(i)], d - 1);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(ProjectToDensity, Examples) {
  Rng rng(8);
  const auto rho = random_density({0, 1}, rng);
  EXPECT_LT((project_to_density(rho.op(), {0, 1}).matrix() - rho.matrix()).norm(), 1e-12);
  EXPECT_LT((project_to_density(HermitianOp(diag2(2, 0))).matrix() - diag2(1, 0)).norm(), 1e-14);
  EXPECT_LT((project_to_density(HermitianOp(diag2(0.6, 0.6))).matrix() - diag2(0.5, 0.5)).norm(), 1e-14);
}

TEST(ProjectToDensity, AlwaysValid) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    Matrix g = haar_unitary(4, rng) * 3.0;
    const auto r = project_to_density(HermitianOp(Matrix(g + g.adjoint())));
    EXPECT_NEAR(r.matrix().trace().real(), 1.0, 1e-10);
    EXPECT_GE(hermitian_eigenvalues(r.matrix())(0), -1e-12);
  }
}

TEST(EmbedLocal, Examples) {
  const HermitianOp p1(diag2(0, 1));
  EXPECT_EQ(embed_local(p1, {0}, 1).matrix(), p1.matrix());
  Matrix expect = Matrix::Zero(4, 4);
  expect(2, 2) = expect(3, 3) = 1.0;
  EXPECT_LT((embed_local(p1, {0}, 2).matrix() - expect).norm(), 1e-15);
  Matrix expect1 = Matrix::Zero(4, 4);
  expect1(1, 1) = expect1(3, 3) = 1.0;
  EXPECT_LT((embed_local(p1, {1}, 2).matrix() - expect1).norm(), 1e-15);
}

TEST(EmbedLocal, SpectralNormPreserved) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    Matrix g = haar_unitary(4, rng);
    const HermitianOp t(Matrix(g + g.adjoint()));
    EXPECT_NEAR(operator_norm(embed_local(t, {0, 2}, 4)), operator_norm(t), 1e-10);
  }
}

TEST(EmbedLocal, Errors) {
  const HermitianOp p1(diag2(0, 1));
  EXPECT_THROW(embed_local(p1, {3}, 2), DomainError);
  EXPECT_THROW(embed_local(HermitianOp(Matrix::Identity(4, 4)), {1, 1}, 2), DomainError);
  EXPECT_THROW(embed_local(p1, {0}, 13), CapacityError);
}

TEST(ApplyLocal, MatchesEmbeddedOperator) {
  Rng rng(31);
  const Matrix U = haar_unitary(4, rng);
  Vector psi = random_pure_state(8, rng).amplitudes();
  const Vector ref = embed(U, 3, {2, 0}) * psi;
  apply_local(psi, U, 3, {2, 0});
  EXPECT_LT((psi - ref).norm(), 1e-12);
}
