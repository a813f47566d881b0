#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qmasearch/io.hpp"
#include "qmasearch/oracle.hpp"
#include "test_support.hpp"

using namespace qmasearch;
using qmasearch::testing::excitation_count;
using qmasearch::testing::projector_one;
using qmasearch::testing::random_two_local;

namespace {

LocalHamiltonian one_qubit_excitation() { return LocalHamiltonian(1, 1, {LocalTerm({0}, projector_one())}); }

Matrix diag2(double p0, double p1) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = p0;
  m(1, 1) = p1;
  return m;
}

// Bloch vector of a single-qubit state.
Eigen::Vector3d bloch(const Matrix& rho) {
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

// Brute force of v(bound) over a Bloch-ball grid of the given step, for a
// Hamiltonian whose terms all act on qubit 0 of a 1-qubit register.
double bloch_grid_value(const LocalHamiltonian& h, const std::vector<DensityMatrix>& D, double bound, double step) {
  const Matrix H = assemble_matrix(h);
  const double h0 = 0.5 * H.trace().real();
  const Eigen::Vector3d hv(H(0, 1).real(), -H(0, 1).imag(), 0.5 * (H(0, 0) - H(1, 1)).real());
  std::vector<Eigen::Vector3d> targets;
  for (const auto& rho : D) targets.push_back(bloch(rho.matrix()));
  const int k = static_cast<int>(std::lround(1.0 / step));
  double best = std::numeric_limits<double>::infinity();
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j)
      for (int l = -k; l <= k; ++l) {
        const Eigen::Vector3d r(i * step, j * step, l * step);
        if (r.squaredNorm() > 1.0 + 1e-12) continue;
        if (h0 + hv.dot(r) > bound) continue;
        double worst = 0.0;
        for (const auto& s : targets) worst = std::max(worst, (r - s).norm());
        best = std::min(best, worst);
      }
  return best;
}

}  // namespace

TEST(ClassifyLedmv, SingleQubitExamples) {
  const auto h = one_qubit_excitation();
  EXPECT_EQ(classify_ledmv({h, {DensityMatrix::basis({0}, 0)}, 0.0, 0.2, 0.1, 0.5}), Verdict::Yes);
  EXPECT_EQ(classify_ledmv({h, {DensityMatrix::basis({0}, 1)}, 0.0, 0.2, 0.1, 0.5}), Verdict::No);
}

TEST(ClassifyLedmv, EmptyFeasibleSetIsNo) {
  LocalHamiltonian id(1, 1, {LocalTerm({0}, Matrix::Identity(2, 2))});
  EXPECT_EQ(classify_ledmv({id, {}, 0.5, 0.1, 0.0, 1.0}), Verdict::No);
  EXPECT_EQ(classify_ledmv({id, {DensityMatrix::basis({0}, 0)}, 0.5, 0.1, 0.1, 0.5}), Verdict::No);
  // The window a + delta reaches lambda0: not NO, and not YES at a.
  EXPECT_EQ(classify_ledmv({id, {}, 0.95, 0.1, 0.0, 1.0}), Verdict::Invalid);
  EXPECT_EQ(classify_ledmv({id, {}, 1.0, 0.1, 0.0, 1.0}), Verdict::Yes);
}

TEST(ClassifyLedmv, StraddlingInstanceIsInvalid) {
  // H = |1><1|, rho = diag(1/2, 1/2): v(b) = 2 (1/2 - b) for b <= 1/2.
  const auto h = one_qubit_excitation();
  const DensityMatrix rho({0}, diag2(0.5, 0.5));
  EXPECT_NEAR(min_max_marginal_distance(h, {rho}, 0.2, 1e-7), 0.6, 1e-6);
  EXPECT_NEAR(min_max_marginal_distance(h, {rho}, 0.4, 1e-7), 0.2, 1e-6);
  EXPECT_EQ(classify_ledmv({h, {rho}, 0.2, 0.2, 0.5, 0.7}), Verdict::Invalid);
  // Values within tol of a threshold are resolved toward INVALID.
  EXPECT_EQ(classify_ledmv({h, {rho}, 0.2, 0.2, 0.6, 0.9}, 1e-3), Verdict::Invalid);
}

TEST(ClassifyLedmv, Preconditions) {
  const auto h = one_qubit_excitation();
  const std::vector<DensityMatrix> D{DensityMatrix::basis({0}, 0)};
  EXPECT_THROW(classify_ledmv({h, D, 0.0, 0.2, 0.5, 0.5}), PreconditionError);
  EXPECT_THROW(classify_ledmv({h, D, 0.0, 0.2, 0.1, 0.100005}), PreconditionError);  // tol > (beta-alpha)/10
  EXPECT_THROW(classify_ledmv({h, D, 0.0, 1e-6, 0.1, 0.5}), PreconditionError);   // tol > delta/10
  EXPECT_THROW(classify_ledmv({h, D, 2.0, 0.2, 0.1, 0.5}), PreconditionError);    // a > m
  EXPECT_THROW(classify_ledmv({h, {DensityMatrix::basis({1}, 0)}, 0.0, 0.2, 0.1, 0.5}), DomainError);
  EXPECT_THROW(classify_ledmv({excitation_count(11), {}, 0.0, 0.2, 0.0, 0.5}), CapacityError);
}

TEST(ClassifyLedmv, YesComesWithCheckableWitness) {
  Rng rng(11);
  ExactOracle oracle;
  oracle.set_cache_enabled(false);
  int yes = 0;
  for (int i = 0; i < 10; ++i) {
    const auto h = random_two_local(3, 3, rng);
    const auto ph = PreparedHamiltonian::from(h);
    // A low-energy mixture of the ground state and a random state.
    const Matrix g = ph.ground * ph.ground.adjoint();
    const DensityMatrix xi({0, 1, 2}, Matrix(0.85 * g + 0.15 * random_density({0, 1, 2}, rng).matrix()));
    const double e = energy(h, xi);
    std::vector<DensityMatrix> D{partial_trace(xi, {0, 1}), partial_trace(xi, {2})};
    const LedmvInstance inst{h, D, e, 0.05, 0.1, 0.5};
    const auto c = oracle.classify(inst);
    ASSERT_EQ(c.verdict, Verdict::Yes);
    ++yes;
    const DensityMatrix w({0, 1, 2}, c.witness);
    EXPECT_LE(energy(h, w), inst.a + 1e-6);
    for (const auto& rho : D) EXPECT_LE(trace_norm_distance(partial_trace(w, rho.support()), rho), inst.alpha + 1e-6);
  }
  EXPECT_EQ(yes, 10);
}

TEST(ClassifyLedmv, AgreesWithBlochGridBruteForce) {
  const std::string dir = QMASEARCH_DATA_DIR;
  std::vector<LedmvInstance> corpus{io::load_instance(dir + "/ledmv_no_1q.json"),
                                    io::load_instance(dir + "/ledmv_yes_1q.json")};
  Rng rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    LocalHamiltonian h(1, 1, {qmasearch::testing::random_term({0}, rng)});
    std::vector<DensityMatrix> D{random_density({0}, rng)};
    if (i % 3 == 0) D.push_back(random_density({0}, rng));
    const double l0 = spectral_summary(h).lambda0;
    const double a = l0 + 0.3 * unit(rng);
    const double alpha = 0.2 + 0.6 * unit(rng);
    corpus.push_back({h, D, a, 0.1, alpha, alpha + 0.3});
  }
  const double step = 0.02;
  int compared = 0;
  for (const auto& inst : corpus) {
    const double g_a = bloch_grid_value(inst.H, inst.D, inst.a, step);
    const double g_ad = bloch_grid_value(inst.H, inst.D, inst.a + inst.delta, step);
    const double v_a = min_max_marginal_distance(inst.H, inst.D, inst.a, 1e-7);
    const double v_ad = min_max_marginal_distance(inst.H, inst.D, inst.a + inst.delta, 1e-7);
    // Grid points are states, so the grid never beats the optimum.
    EXPECT_GE(g_a, v_a - 1e-6);
    EXPECT_GE(g_ad, v_ad - 1e-6);
    EXPECT_LE(g_a - v_a, 0.05);
    EXPECT_LE(g_ad - v_ad, 0.05);
    // Grid verdict, decided only when both values are clear of the thresholds.
    const double margin = 0.06;
    const bool clear = std::abs(g_a - inst.alpha) > margin && std::abs(g_ad - inst.beta) > margin;
    if (!clear) continue;
    Verdict grid = Verdict::Invalid;
    if (g_a <= inst.alpha) grid = Verdict::Yes;
    else if (g_ad >= inst.beta) grid = Verdict::No;
    EXPECT_EQ(classify_ledmv(inst), grid);
    ++compared;
  }
  EXPECT_GE(compared, 8);
}

TEST(ClassifyCldm, Examples) {
  Rng rng(13);
  const auto psi = random_pure_state(8, rng);
  const DensityMatrix xi({0, 1, 2}, psi.density().matrix());
  EXPECT_EQ(classify_cldm({partial_trace(xi, {0, 1}), partial_trace(xi, {1, 2})}, 0.2, 3), Verdict::Yes);
  EXPECT_EQ(classify_cldm({DensityMatrix::basis({0}, 0), DensityMatrix::basis({0}, 1)}, 0.5, 1), Verdict::No);
  EXPECT_EQ(classify_cldm({random_density({1}, rng)}, 0.5, 2), Verdict::Yes);
}

TEST(Answer, Policies) {
  const auto h = one_qubit_excitation();
  const LedmvInstance yes{h, {DensityMatrix::basis({0}, 0)}, 0.0, 0.2, 0.1, 0.5};
  const LedmvInstance invalid{h, {DensityMatrix({0}, diag2(0.5, 0.5))}, 0.2, 0.2, 0.5, 0.7};
  for (auto p : {InvalidPolicy::AlwaysYes, InvalidPolicy::AlwaysNo, InvalidPolicy::SeededRandom}) {
    const auto a = answer(yes, p, 3, 0);
    EXPECT_EQ(a.answer, Verdict::Yes);
    EXPECT_EQ(a.ground_truth, Verdict::Yes);
  }
  EXPECT_EQ(answer(invalid, InvalidPolicy::AlwaysNo, 0, 0).answer, Verdict::No);
  EXPECT_EQ(answer(invalid, InvalidPolicy::AlwaysYes, 0, 0).answer, Verdict::Yes);
  EXPECT_EQ(answer(invalid, InvalidPolicy::AlwaysYes, 0, 0).ground_truth, Verdict::Invalid);

  int yes_count = 0;
  for (std::uint64_t idx = 0; idx < 200; ++idx) {
    const auto first = answer(invalid, InvalidPolicy::SeededRandom, 99, idx).answer;
    EXPECT_EQ(first, policy_answer(InvalidPolicy::SeededRandom, 99, idx));
    EXPECT_EQ(first, answer(invalid, InvalidPolicy::SeededRandom, 99, idx).answer);
    yes_count += first == Verdict::Yes;
  }
  EXPECT_GT(yes_count, 60);
  EXPECT_LT(yes_count, 140);
}

TEST(Answer, PolicyNamesRoundTrip) {
  for (auto p : {InvalidPolicy::AlwaysYes, InvalidPolicy::AlwaysNo, InvalidPolicy::SeededRandom})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_THROW(parse_policy("sometimes"), DomainError);
}

TEST(ExactOracle, CachedVerdictsMatchFreshClassification) {
  Rng rng(14);
  const auto h = random_two_local(3, 3, rng);
  const double l0 = spectral_summary(h).lambda0;
  ExactOracle cached(InvalidPolicy::SeededRandom, 5);
  ExactOracle fresh(InvalidPolicy::SeededRandom, 5);
  fresh.set_cache_enabled(false);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto base = random_density({0}, rng);
  for (int i = 0; i < 40; ++i) {
    std::vector<DensityMatrix> D{base};
    if (i % 2) D.push_back(random_density({1, 2}, rng));
    const double alpha = 0.1 + unit(rng);
    const LedmvInstance inst{h, D, l0 + 0.5 * unit(rng), 0.05, alpha, alpha + 0.4};
    const auto a = cached.query(inst);
    const auto b = fresh.query(inst);
    EXPECT_EQ(a.ground_truth, b.ground_truth) << "query " << i;
    EXPECT_EQ(a.answer, b.answer) << "query " << i;
  }
  EXPECT_EQ(cached.queries(), 40U);
}

TEST(ExactOracle, AuditLogIsLineDelimitedJson) {
  std::ostringstream log;
  ExactOracle oracle(InvalidPolicy::AlwaysNo, 0);
  oracle.set_audit_stream(&log);
  const auto h = one_qubit_excitation();
  oracle.query({h, {DensityMatrix::basis({0}, 0)}, 0.0, 0.2, 0.1, 0.5});
  oracle.query({h, {DensityMatrix({0}, diag2(0.5, 0.5))}, 0.2, 0.2, 0.5, 0.7});
  std::istringstream in(log.str());
  std::string line;
  std::vector<nlohmann::json> records;
  while (std::getline(in, line)) records.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(records.size(), 2U);
  EXPECT_EQ(records[0]["query"], 0);
  EXPECT_EQ(records[0]["ground_truth"], "YES");
  EXPECT_EQ(records[1]["ground_truth"], "INVALID");
  EXPECT_EQ(records[1]["answer"], "NO");
  for (const char* key : {"instance_hash", "a", "delta", "alpha", "beta", "solver_value", "duality_gap", "cached"})
    EXPECT_TRUE(records[1].contains(key)) << key;
  EXPECT_EQ(oracle.log().size(), 2U);
}

TEST(InstanceHash, DeterministicAndSensitive) {
  const auto h = one_qubit_excitation();
  const LedmvInstance a{h, {DensityMatrix::basis({0}, 0)}, 0.0, 0.2, 0.1, 0.5};
  LedmvInstance b = a;
  EXPECT_EQ(instance_hash(a), instance_hash(b));
  b.alpha = 0.11;
  EXPECT_NE(instance_hash(a), instance_hash(b));
  LedmvInstance c = a;
  c.D = {DensityMatrix::basis({0}, 1)};
  EXPECT_NE(instance_hash(a), instance_hash(c));
}

TEST(EstimateGroundEnergy, Examples) {
  ExactOracle oracle;
  const auto g = estimate_ground_energy(excitation_count(2), 0.01, oracle);
  EXPECT_GE(g.estimate, -0.01);
  EXPECT_LE(g.estimate, 0.01);

  LocalHamiltonian id(1, 1, {LocalTerm({0}, Matrix::Identity(2, 2))});
  const auto g1 = estimate_ground_energy(id, 0.05, oracle);
  EXPECT_GE(g1.estimate, 0.95);
  EXPECT_LE(g1.estimate, 1.05);
  EXPECT_THROW(estimate_ground_energy(id, 1e-7, oracle), PreconditionError);
}

TEST(EstimateGroundEnergy, BracketsLambda0UnderEveryPolicy) {
  Rng rng(15);
  std::uniform_int_distribution<int> pick_n(2, 5);
  std::uniform_int_distribution<int> pick_m(1, 6);
  for (int i = 0; i < 100; ++i) {
    const int n = pick_n(rng);
    const auto h = random_two_local(n, pick_m(rng), rng);
    const double l0 = spectral_summary(h).lambda0;
    for (auto p : {InvalidPolicy::AlwaysYes, InvalidPolicy::AlwaysNo, InvalidPolicy::SeededRandom}) {
      ExactOracle oracle(p, static_cast<std::uint64_t>(i));
      const double delta = 0.01;
      const auto g = estimate_ground_energy(h, delta, oracle);
      EXPECT_LE(g.lo, l0 + 1e-12);
      EXPECT_GE(g.hi, l0 - 1e-12);
      EXPECT_LE(std::abs(g.estimate - l0), delta + 1e-12);
      EXPECT_LE(g.queries, static_cast<int>(std::ceil(std::log2(h.m() / delta))) + 3);
    }
  }
}
