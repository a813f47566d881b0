#include <gtest/gtest.h>

#include <cmath>

#include "qmasearch/hamiltonian.hpp"
#include "test_support.hpp"

using namespace qmasearch;
using qmasearch::testing::excitation_count;
using qmasearch::testing::projector_one;
using qmasearch::testing::random_two_local;

TEST(Assemble, Examples) {
  EXPECT_EQ(assemble(LocalHamiltonian(2, 1)).matrix(), Matrix::Zero(4, 4));

  Rng rng(1);
  const auto t = qmasearch::testing::random_term({0, 1}, rng);
  LocalHamiltonian single(2, 2, {t});
  EXPECT_LT((assemble(single).matrix() - t.matrix.matrix()).norm(), 1e-15);

  const Matrix h = assemble(excitation_count(2)).matrix();
  Matrix expect = Matrix::Zero(4, 4);
  expect(1, 1) = 1;
  expect(2, 2) = 1;
  expect(3, 3) = 2;
  EXPECT_LT((h - expect).norm(), 1e-15);
}

TEST(Assemble, NormAtMostTermCount) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto h = random_two_local(4, 6, rng);
    EXPECT_LE(operator_norm(assemble(h)), h.m() + 1e-10);
  }
}

TEST(Assemble, CapacityLimit) {
  LocalHamiltonian h(13, 1);
  EXPECT_THROW(assemble(h), CapacityError);
}

TEST(LocalTerm, Invariants) {
  EXPECT_THROW(LocalTerm({0}, Matrix(2.0 * projector_one())), DomainError);
  EXPECT_THROW(LocalTerm({0}, Matrix(-1.0 * projector_one())), DomainError);
  EXPECT_THROW(LocalTerm({0, 1}, projector_one()), DomainError);
  LocalHamiltonian h(2, 1);
  EXPECT_THROW(h.add(LocalTerm({0, 1}, Matrix::Identity(4, 4))), DomainError);
  EXPECT_THROW(h.add(LocalTerm({2}, projector_one())), DomainError);
  EXPECT_THROW(LocalHamiltonian(0, 1), DomainError);
}

TEST(Energy, Examples) {
  const auto h = excitation_count(2);
  EXPECT_NEAR(energy(h, DensityMatrix::basis({0, 1}, 0)), 0.0, 1e-15);
  EXPECT_NEAR(energy(LocalHamiltonian(2, 1), DensityMatrix::maximally_mixed({0, 1})), 0.0, 1e-15);
  EXPECT_NEAR(energy(h, DensityMatrix::maximally_mixed({0, 1})), 1.0, 1e-15);
  EXPECT_THROW(energy(h, DensityMatrix::maximally_mixed({0})), DomainError);
}

TEST(EnergyFromMarginals, Examples) {
  LocalHamiltonian h(1, 1, {LocalTerm({0}, projector_one())});
  const double s = 1.0 / std::sqrt(2.0);
  Vector plus(2);
  plus << s, s;
  EXPECT_NEAR(energy_from_marginals(h, std::vector<DensityMatrix>{DensityMatrix::pure({0}, plus)}), 0.5, 1e-15);

  // Two conflicting marginals covering the same term: the larger wins.
  const std::vector<DensityMatrix> conflict{DensityMatrix::basis({0}, 0), DensityMatrix::basis({0}, 1)};
  EXPECT_NEAR(energy_from_marginals(h, conflict), 1.0, 1e-15);

  LocalHamiltonian h2(2, 2, {LocalTerm({0, 1}, Matrix::Identity(4, 4))});
  EXPECT_THROW(energy_from_marginals(h2, std::vector<DensityMatrix>{DensityMatrix::basis({0}, 0)}), DomainError);
}

TEST(EnergyFromMarginals, ExactFamilyMatchesEnergy) {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const auto h = random_two_local(4, 5, rng);
    const auto xi = random_density({0, 1, 2, 3}, rng);
    std::vector<DensityMatrix> fam;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) fam.push_back(partial_trace(xi, {a, b}));
    EXPECT_NEAR(energy_from_marginals(h, fam), energy(h, xi), 1e-9);
  }
}

TEST(EnergyFromMarginals, ProductStateFamily) {
  const auto h = excitation_count(3);
  Rng rng(4);
  const auto a = random_density({0}, rng), b = random_density({0}, rng), c = random_density({0}, rng);
  const DensityMatrix xi({0, 1, 2}, kron(kron(a.matrix(), b.matrix()), c.matrix()));
  std::vector<DensityMatrix> fam{partial_trace(xi, {0}), partial_trace(xi, {1}), partial_trace(xi, {2})};
  EXPECT_NEAR(energy_from_marginals(h, fam), energy(h, xi), 1e-12);
}

TEST(Energy, BoundedByTermCountAndAboveGroundEnergy) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto h = random_two_local(3, 4, rng);
    const double l0 = spectral_summary(h).lambda0;
    for (int j = 0; j < 10; ++j) {
      const auto xi = random_density({0, 1, 2}, rng);
      const double e = energy(h, xi);
      EXPECT_GE(e, -1e-12);
      EXPECT_LE(e, h.m() + 1e-12);
      EXPECT_LE(l0, e + 1e-9);
    }
  }
}

TEST(SpectralSummary, Examples) {
  const auto s = spectral_summary(excitation_count(2));
  EXPECT_NEAR(s.lambda0, 0.0, 1e-15);
  EXPECT_NEAR(s.gap, 1.0, 1e-14);
  EXPECT_EQ(s.ground_dim, 1);

  const auto z = spectral_summary(LocalHamiltonian(3, 1));
  EXPECT_EQ(z.lambda0, 0.0);
  EXPECT_EQ(z.gap, 0.0);
  EXPECT_EQ(z.ground_dim, 8);

  LocalHamiltonian id(1, 1, {LocalTerm({0}, Matrix::Identity(2, 2))});
  EXPECT_NEAR(spectral_summary(id).lambda0, 1.0, 1e-15);
}

TEST(SpectralSummary, DegenerateGroundSpace) {
  Matrix p11 = Matrix::Zero(4, 4);
  p11(3, 3) = 1.0;
  LocalHamiltonian h(2, 2, {LocalTerm({0, 1}, p11)});
  const auto s = spectral_summary(h);
  EXPECT_EQ(s.ground_dim, 3);
  EXPECT_NEAR(s.gap, 1.0, 1e-14);
}
