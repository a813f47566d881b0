#include <gtest/gtest.h>

#include <cmath>

#include "qmasearch/io.hpp"
#include "qmasearch/witness_search.hpp"

using namespace qmasearch;

namespace {

const std::string kData = QMASEARCH_DATA_DIR;

QuantumCircuit load(const std::string& name) { return io::load_circuit(kData + "/" + name + ".json"); }

WitnessSearchParams scaled_for(const QuantumCircuit& c, int M, double eps = 0.25, double p1 = 4.0) {
  const double gap = spectral_gap_H0(build_clock(pre_idle(c, M), 0.0)).legal_gap;
  return scaled_params(c, M, gap / 100.0, eps, p1, 1);
}

WitnessReport run(const QuantumCircuit& c, const WitnessSearchParams& p, std::uint64_t seed = 7) {
  ExactOracle oracle(InvalidPolicy::SeededRandom, 5);
  auto out = find_witness_marginals(c, p, oracle, SearchMode::Randomized, seed);
  if (const auto* f = std::get_if<WitnessFailure>(&out)) throw std::runtime_error("search failed: " + f->failure.reason);
  return std::get<WitnessReport>(std::move(out));
}

}  // namespace

TEST(DeriveParams, SingleGateExample) {
  const auto p = derive_params(load("circuit_identity"), 1.0, 1.0, 1, 1.0);
  EXPECT_EQ(p.M, 32);
  EXPECT_EQ(p.T_tilde, 33);
  EXPECT_DOUBLE_EQ(p.eps_penalty, 1.0 / 267267200.0);
  EXPECT_DOUBLE_EQ(p.eps, 0.5);
  EXPECT_DOUBLE_EQ(p.a, 34.0 * 34.0 * p.eps_penalty * p.eps_penalty);
}

TEST(DeriveParams, Scaling) {
  const auto c = load("circuit_hadamard");
  const auto base = derive_params(c, 1.0, 1.0, 1);
  const auto p2 = derive_params(c, 1.0, 2.0, 1);
  EXPECT_DOUBLE_EQ(p2.eps, base.eps / 2.0);
  EXPECT_EQ(p2.M, 4 * base.M);
  for (const auto& p : {base, p2, derive_params(c, 3.0, 1.5, 1, 2.0)}) {
    const double t1 = p.T_tilde + 1.0;
    EXPECT_NEAR(p.a / (p.eps_penalty * p.eps_penalty), p.c0 * t1 * t1, 1e-9 * t1 * t1);
    EXPECT_NEAR(p.eps_penalty * 100.0 * (p.c0 + 1.0) * std::pow(t1, 4) * std::pow(p.p1 * p.p2, 2), 1.0, 1e-12);
  }
  EXPECT_THROW(derive_params(c, 0.5, 1.0, 1), PreconditionError);
  EXPECT_THROW(derive_params(c, 1.0, 1.0, 0), PreconditionError);
  EXPECT_THROW(derive_params(c, 1.0, 1.0, 1, 0.0), PreconditionError);
}

TEST(ScaledParams, Validation) {
  const auto c = load("circuit_identity");
  EXPECT_THROW(scaled_params(c, -1, 0.01, 0.25, 4.0, 1), PreconditionError);
  EXPECT_THROW(scaled_params(c, 2, 0.0, 0.25, 4.0, 1), PreconditionError);
  EXPECT_THROW(scaled_params(c, 2, 0.01, 0.6, 4.0, 1), PreconditionError);
  const auto p = scaled_params(c, 2, 0.01, 0.25, 4.0, 1, 1.0);
  EXPECT_EQ(p.T_tilde, 3);
  EXPECT_DOUBLE_EQ(p.p2, 2.0);
  EXPECT_DOUBLE_EQ(p.a, 16.0 * 1e-4);
}

TEST(FindWitnessMarginals, StrictParametersExceedCapacity) {
  const auto c = load("circuit_identity");
  ExactOracle oracle;
  EXPECT_THROW(find_witness_marginals(c, derive_params(c, 1.0, 1.0, 1), oracle, SearchMode::Randomized, 1), CapacityError);
}

TEST(FindWitnessMarginals, PenaltyAboveGapSixteenthRejected) {
  const auto c = load("circuit_identity");
  const double gap = spectral_gap_H0(build_clock(pre_idle(c, 2), 0.0)).legal_gap;
  ExactOracle oracle;
  EXPECT_THROW(find_witness_marginals(c, scaled_params(c, 2, gap / 8.0, 0.25, 4.0, 1), oracle, SearchMode::Randomized, 1),
               PreconditionError);
}

TEST(FindWitnessMarginals, ScaledExamplesVerify) {
  for (const char* name : {"circuit_identity", "circuit_hadamard", "circuit_cnot"}) {
    const auto c = load(name);
    const auto p = scaled_for(c, 2);
    const auto r = run(c, p);
    EXPECT_EQ(r.marginals.size(), witness_subsets(c, 1).size()) << name;
    EXPECT_GE(r.p_hat, 0.0);
    EXPECT_LE(r.p_hat, 1.0);
    EXPECT_NEAR(r.pre_idle_overlap, 2.0 / (2.0 + c.T() + 1.0), 1e-10);
    const auto v = verify_report(c, r);
    EXPECT_TRUE(v.keys_ok) << name;
    EXPECT_TRUE(v.p_hat_exact_ok) << name << " error " << v.p_hat_exact_error;
    EXPECT_TRUE(v.p_hat_ok) << name << " error " << v.p_hat_error << " tol " << v.bounds.p_hat_search_tol;
    EXPECT_TRUE(v.marginals_ok) << name << " distance " << v.proof.proof_distance;
    EXPECT_TRUE(v.passed) << name;
  }
}

TEST(FindWitnessMarginals, IdentityReportsAcceptingWitness) {
  const auto c = load("circuit_identity");
  const auto r = run(c, scaled_for(c, 3));
  ASSERT_EQ(r.marginals.size(), 1u);
  const auto& rho = r.marginals.begin()->second;
  // The only accepted witness is |1>; the reported marginal must lean towards it.
  EXPECT_GT(rho.matrix()(1, 1).real(), 0.5);
  EXPECT_NEAR(verify_report(c, r).p_star, 1.0, 1e-12);
}

TEST(VerifyReport, DetectsCorruption) {
  const auto c = load("circuit_identity");
  const auto r = run(c, scaled_for(c, 2));
  ASSERT_TRUE(verify_report(c, r).passed);

  Matrix X = Matrix::Zero(2, 2);
  X(0, 1) = X(1, 0) = 1.0;
  auto flipped = r;
  for (auto& [s, rho] : flipped.marginals) rho = DensityMatrix(s, Matrix(X * rho.matrix() * X));
  const auto vf = verify_report(c, flipped);
  EXPECT_FALSE(vf.marginals_ok);
  EXPECT_FALSE(vf.passed);

  auto shifted = r;
  shifted.p_hat_raw += 2.0 / r.params.p1;
  const auto vs = verify_report(c, shifted);
  EXPECT_FALSE(vs.p_hat_ok);
  EXPECT_FALSE(vs.passed);

  auto missing = r;
  missing.marginals.clear();
  EXPECT_FALSE(verify_report(c, missing).keys_ok);
}

TEST(BoundChain, ExplicitValues) {
  const auto c = load("circuit_identity");
  const auto p = scaled_params(c, 2, 0.01, 0.25, 4.0, 1);
  const auto b = bound_chain(p, 0.5, 1.0, p.a, 4);
  EXPECT_NEAR(b.energy_ceiling, 0.01 * 0.01 / 0.5 + p.a, 1e-15);
  EXPECT_NEAR(b.fidelity_deficit, b.energy_ceiling / 0.5, 1e-15);
  EXPECT_NEAR(b.p_hat_exact_tol, 2.0 * 0.01 * 64.0, 1e-12);
  EXPECT_NEAR(b.p_hat_search_tol, b.p_hat_exact_tol + 4.0 * p.a / (5.0 * 0.01), 1e-12);
  EXPECT_NEAR(p_hat_from_energy(0.0, p), 1.0, 1e-15);
  EXPECT_NEAR(p_hat_from_energy(0.01 / 4.0, p), 0.0, 1e-12);
}

TEST(WitnessSubsets, InsideWitnessRegister) {
  const auto c = load("circuit_cnot");
  for (const auto& s : witness_subsets(c, 1))
    for (int q : s) EXPECT_TRUE(std::binary_search(c.witness.begin(), c.witness.end(), q));
  EXPECT_EQ(witness_subsets(c, 1).size(), c.witness.size());
}
