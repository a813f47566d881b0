#pragma once

// Adaptive oracle search for the q-local marginals of a low-energy state.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qmasearch/oracle.hpp"

namespace qmasearch {

enum class SearchMode { Randomized, Derandomized };

inline std::string to_string(SearchMode m) { return m == SearchMode::Randomized ? "randomized" : "derandomized"; }

inline SearchMode parse_mode(const std::string& s) {
  if (s == "randomized") return SearchMode::Randomized;
  if (s == "derandomized") return SearchMode::Derandomized;
  throw DomainError("marginal_search: unknown mode '" + s + "'");
}

/// Smallest energy spacing of the query ladder.
inline constexpr double kMinLadderStep = 2e-6;

struct SearchConfig {
  int q = 1;
  double a = 0.1;    // target energy slack above lambda0
  double eps = 0.2;  // marginal accuracy (trace norm)
  std::uint64_t max_steps_T = 0;  // 0 selects the mode's default budget
  SearchMode mode = SearchMode::Randomized;
  std::uint64_t seed = 0;

  void validate(const LocalHamiltonian& H) const {
    if (q < 1 || q > 3) throw PreconditionError("marginal_search: q must be 1, 2 or 3");
    if (q > H.n()) throw PreconditionError("marginal_search: q exceeds the number of qubits");
    if (!(eps > 0.0 && eps < 2.0)) throw PreconditionError("marginal_search: eps must lie in (0, 2)");
    if (!(a >= 1e-6) || a > std::max(1, H.m())) throw PreconditionError("marginal_search: a must lie in [1e-6, m]");
  }
};

/// All q-element subsets of {0..n-1} in lexicographic order.
inline std::vector<QubitSet> q_subsets(int n, int q) {
  std::vector<QubitSet> out;
  QubitSet cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == q) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

/// Reduced state of the first q qubits of U|0^{2q}> for Haar-random U.
inline DensityMatrix sample_marginal(int q, Rng& rng) {
  if (q < 1 || q > 3) throw PreconditionError("marginal_search: sample_marginal needs 1 <= q <= 3");
  const Eigen::Index s = Eigen::Index{1} << q;
  const Vector psi = haar_unitary(s * s, rng).col(0);
  Matrix A(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) A(i, j) = psi(i * s + j);
  Matrix rho = A * A.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(full_support(q), rho);
}

/// Pauli strings on q qubits, excluding the identity, in lexicographic order
/// of their labels (I < X < Y < Z per qubit).
inline std::vector<Matrix> pauli_strings(int q) {
  std::vector<Matrix> out;
  const int total = 1 << (2 * q);
  for (int code = 1; code < total; ++code) {
    Matrix p = Matrix::Identity(1, 1);
    for (int k = q - 1; k >= 0; --k) {
      const int which = (code >> (2 * k)) & 3;
      const Matrix& f = pauli(which);
      Matrix next(p.rows() * 2, p.cols() * 2);
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j) next.block(2 * i, 2 * j, 2, 2) = p(i, j) * f;
      p = next;
    }
    out.push_back(p);
  }
  return out;
}

/// Largest net the covering construction will materialize.
inline constexpr std::uint64_t kMaxNetPoints = 2'000'000;

/// Finite set N of q-qubit states with (1/2)||rho - sigma||_1 <= eps for
/// every state sigma and some rho in N.
///
/// Points of a cubic grid of pitch h = 4 eps / sqrt(4^q - 1) in Pauli
/// coordinates (rho = (I + sum_P r_P P) / 2^q) are projected onto the state
/// set. A state's nearest grid point is within h sqrt(4^q-1)/2 in Pauli
/// coordinates, which bounds the trace norm by the same amount; projection
/// onto the convex state set does not increase the Frobenius distance, so
/// the halved distance after projection stays <= eps. Only grid points that
/// can be nearest to some state are kept. Order is lexicographic in the grid
/// coordinates.
inline std::vector<DensityMatrix> covering_set(int q, double eps) {
  if (q < 1 || q > 2) throw CapacityError("marginal_search: covering sets are available for q = 1, 2 only");
  if (!(eps > 0.0)) throw DomainError("marginal_search: covering radius must be positive");
  const Eigen::Index s = Eigen::Index{1} << q;
  if (eps >= 1.0 - 1.0 / static_cast<double>(s)) {
    return {DensityMatrix::maximally_mixed(full_support(q))};
  }
  const int dims = (1 << (2 * q)) - 1;
  const double h = 4.0 * eps / std::sqrt(static_cast<double>(dims));
  const double cell_radius = 0.5 * h * std::sqrt(static_cast<double>(dims));
  // Pauli coordinates of states lie in the ball of radius sqrt(2^q - 1).
  const double ball = std::sqrt(static_cast<double>(s - 1));
  const int kmax = static_cast<int>(std::ceil((1.0 + 0.5 * h) / h));
  const int per_axis = 2 * kmax + 1;
  const double raw = std::pow(static_cast<double>(per_axis), dims);
  if (raw > static_cast<double>(kMaxNetPoints) * 64.0) {
    throw CapacityError("marginal_search: covering set for q=" + std::to_string(q) + ", eps=" + std::to_string(eps) +
                        " needs about " + std::to_string(raw) + " grid points");
  }
  const auto paulis = pauli_strings(q);
  std::vector<DensityMatrix> net;
  std::vector<int> k(static_cast<std::size_t>(dims), -kmax);
  const Matrix id = Matrix::Identity(s, s);
  while (true) {
    double norm2 = 0.0;
    bool in_box = true;
    for (int i = 0; i < dims; ++i) {
      const double c = k[static_cast<std::size_t>(i)] * h;
      if (std::abs(c) > 1.0 + 0.5 * h) in_box = false;
      norm2 += c * c;
    }
    if (in_box && std::sqrt(norm2) <= ball + cell_radius) {
      Matrix m = id;
      for (int i = 0; i < dims; ++i) m += (k[static_cast<std::size_t>(i)] * h) * paulis[static_cast<std::size_t>(i)];
      m /= static_cast<double>(s);
      net.push_back(project_to_density(HermitianOp(m), full_support(q)));
      if (net.size() > kMaxNetPoints) {
        throw CapacityError("marginal_search: covering set exceeds " + std::to_string(kMaxNetPoints) + " points");
      }
    }
    int i = dims - 1;
    while (i >= 0 && k[static_cast<std::size_t>(i)] == kmax) k[static_cast<std::size_t>(i--)] = -kmax;
    if (i < 0) break;
    ++k[static_cast<std::size_t>(i)];
  }
  return net;
}

struct CoveringAudit {
  std::size_t net_size = 0;
  std::size_t samples = 0;
  double worst = 0.0;  // largest over samples of the halved distance to the nearest net point
  bool passed = false;
};

/// Monte-Carlo check of covering_set(q, eps): samples alternate between Haar
/// pure states and Hilbert-Schmidt mixed states.
inline CoveringAudit covering_audit(int q, double eps, std::size_t samples, Rng& rng) {
  const auto net = covering_set(q, eps);
  const Eigen::Index s = Eigen::Index{1} << q;
  CoveringAudit a;
  a.net_size = net.size();
  a.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    const Matrix sigma = (i % 2 == 0) ? random_pure_state(s, rng).density().matrix()
                                      : random_density(full_support(q), rng).matrix();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rho : net) best = std::min(best, 0.5 * trace_norm(rho.matrix() - sigma));
    a.worst = std::max(a.worst, best);
  }
  a.passed = a.worst <= eps;
  return a;
}

/// Independent check of a marginal family against the exact spectrum.
struct PosthocCheck {
  double lambda0 = 0.0;
  double energy_bound = 0.0;     // lambda0 + a
  double value_lower = 0.0;      // certified bracket on the min-max distance
  double value_upper = 0.0;
  double witness_energy = 0.0;   // energy of the explicit state found
  double witness_distance = 0.0; // its worst marginal distance, recomputed
  bool passed = false;
};

/// Confirms that some state of energy <= lambda0 + a has every marginal
/// within eps + 1e-6 of the family. The witness returned by the solver is
/// re-evaluated with energy() and trace_norm_distance().
inline PosthocCheck verify_marginals(const LocalHamiltonian& H, const std::vector<DensityMatrix>& marginals, double a,
                                     double eps, double tol = 1e-7) {
  const auto ph = PreparedHamiltonian::from(H);
  PosthocCheck c;
  c.lambda0 = ph.lambda0;
  c.energy_bound = ph.lambda0 + a;
  const auto r = min_max_marginal_bounds(ph, marginals, c.energy_bound, tol);
  c.value_lower = r.lower;
  c.value_upper = r.upper;
  if (r.witness.size() == 0) return c;
  const DensityMatrix xi(full_support(H.n()), r.witness);
  c.witness_energy = energy(H, xi);
  for (const auto& rho : marginals) {
    c.witness_distance = std::max(c.witness_distance, trace_norm_distance(partial_trace(xi, rho.support()), rho));
  }
  c.passed = c.witness_energy <= c.energy_bound + 1e-9 && c.witness_distance <= eps + 1e-6;
  return c;
}

struct StepRecord {
  QubitSet subset;
  double a_l = 0.0;
  std::uint64_t proposals = 0;
  std::uint64_t queries = 0;
};

struct MarginalReport {
  std::map<QubitSet, DensityMatrix> marginals;
  double lambda_hat = 0.0;  // midpoint estimate of lambda0
  double lambda_lo = 0.0;   // binary-search bracket
  double lambda_hi = 0.0;
  double delta = 0.0;       // ladder spacing
  double a_used = 0.0;      // slack after enforcing the minimal ladder step
  std::uint64_t queries_used = 0;
  std::uint64_t steps_used = 0;  // total proposals
  std::uint64_t budget = 0;
  std::vector<StepRecord> steps;
  std::vector<std::string> warnings;
  PosthocCheck verification;

  std::vector<DensityMatrix> marginal_list() const {
    std::vector<DensityMatrix> v;
    for (const auto& [s, rho] : marginals) v.push_back(rho);
    return v;
  }
};

struct SearchFailure {
  std::size_t step = 0;  // 1-based index of the subset being searched
  std::uint64_t proposals = 0;
  std::uint64_t queries = 0;
  std::string reason;
};

using SearchOutcome = std::variant<MarginalReport, SearchFailure>;

inline std::uint64_t default_budget(const SearchConfig& cfg, std::size_t num_subsets, std::size_t net_size) {
  if (cfg.mode == SearchMode::Derandomized) return static_cast<std::uint64_t>(num_subsets * net_size);
  const double t = 3.0 * static_cast<double>(num_subsets) * std::pow(2.0 / cfg.eps, 2.0 * ((1 << cfg.q) - 1));
  if (t >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::ceil(t));
}

/// Runs the search. Queries use alpha = eps/2, beta = eps, and a ladder
/// a_l = hi + l delta with delta = a/(|I|+2), where [lo, hi] (width <= delta)
/// is the binary-search bracket on lambda0. The final query's energy window
/// a_|I| + delta then stays below lambda0 + a.
inline SearchOutcome find_marginals(const LocalHamiltonian& H, const SearchConfig& cfg, LedmvOracle& oracle,
                                    bool verify = true) {
  cfg.validate(H);
  if (H.n() > kOracleMaxQubits) throw CapacityError("marginal_search: register too large");
  const auto subsets = q_subsets(H.n(), cfg.q);
  const std::size_t L = subsets.size();

  MarginalReport rep;
  rep.a_used = cfg.a;
  rep.delta = cfg.a / static_cast<double>(L + 2);
  if (rep.delta < kMinLadderStep) {
    rep.delta = kMinLadderStep;
    rep.a_used = kMinLadderStep * static_cast<double>(L + 2);
    rep.warnings.push_back("a raised to " + std::to_string(rep.a_used) + " to keep the ladder step above " +
                           std::to_string(kMinLadderStep));
  }

  std::vector<DensityMatrix> net;
  if (cfg.mode == SearchMode::Derandomized) net = covering_set(cfg.q, cfg.eps / 4.0);
  rep.budget = cfg.max_steps_T ? cfg.max_steps_T : default_budget(cfg, L, net.size());
  Rng rng(cfg.seed);

  std::uint64_t queries = 0;
  const auto ge = estimate_ground_energy(H, rep.delta / 2.0, oracle);
  queries += static_cast<std::uint64_t>(ge.queries);
  rep.lambda_hat = ge.estimate;
  rep.lambda_lo = ge.lo;
  rep.lambda_hi = ge.hi;

  std::vector<DensityMatrix> accepted;
  std::uint64_t proposals = 0;
  for (std::size_t l = 0; l < L; ++l) {
    StepRecord step;
    step.subset = subsets[l];
    step.a_l = std::min(ge.hi + static_cast<double>(l + 1) * rep.delta, static_cast<double>(H.m()));
    std::size_t net_pos = 0;
    bool done = false;
    while (!done) {
      if (proposals >= rep.budget) {
        return SearchFailure{l + 1, proposals, queries, "proposal budget of " + std::to_string(rep.budget) + " exhausted"};
      }
      std::optional<DensityMatrix> cand;
      if (cfg.mode == SearchMode::Randomized) {
        cand.emplace(subsets[l], sample_marginal(cfg.q, rng).matrix());
      } else {
        if (net_pos >= net.size()) {
          return SearchFailure{l + 1, proposals, queries, "covering set exhausted without an accepted candidate"};
        }
        cand.emplace(subsets[l], net[net_pos++].matrix());
      }
      ++proposals;
      ++step.proposals;
      std::vector<DensityMatrix> D = accepted;
      D.push_back(*cand);
      LedmvInstance inst{H, std::move(D), step.a_l, rep.delta, cfg.eps / 2.0, cfg.eps};
      const auto ans = oracle.query(inst);
      ++queries;
      ++step.queries;
      if (ans.answer == Verdict::Yes) {
        accepted.push_back(*cand);
        done = true;
      }
    }
    rep.steps.push_back(step);
  }
  for (const auto& rho : accepted) rep.marginals.emplace(rho.support(), rho);
  rep.queries_used = queries;
  rep.steps_used = proposals;
  if (verify) rep.verification = verify_marginals(H, accepted, rep.a_used, cfg.eps);
  return rep;
}

struct GappedSchedule {
  SearchConfig cfg;
  SpectralSummary spectrum;
};

/// eps = eps'/2 and a = eps'^2 gap / 16, so that every marginal of the
/// output is within eps' of the corresponding ground-state marginal.
inline GappedSchedule gapped_schedule(const LocalHamiltonian& H, double eps_prime, SearchConfig base = {}) {
  const auto spec = spectral_summary(H);
  if (spec.ground_dim != 1) throw PreconditionError("marginal_search: gapped schedule needs a unique ground state");
  if (spec.gap < 1e-3) throw PreconditionError("marginal_search: gapped schedule needs a spectral gap of at least 1e-3");
  if (!(eps_prime > 0.0)) throw PreconditionError("marginal_search: eps' must be positive");
  base.eps = eps_prime / 2.0;
  base.a = eps_prime * eps_prime * spec.gap / 16.0;
  return {base, spec};
}

/// Exact q-local marginals of the (unique) ground state.
inline std::map<QubitSet, DensityMatrix> ground_state_marginals(const LocalHamiltonian& H, int q) {
  const auto eig = hermitian_eig(assemble_matrix(H));
  const Vector g = eig.vectors.col(0);
  const DensityMatrix psi(full_support(H.n()), Matrix(g * g.adjoint()));
  std::map<QubitSet, DensityMatrix> out;
  for (const auto& s : q_subsets(H.n(), q)) out.emplace(s, partial_trace(psi, s));
  return out;
}

}  // namespace qmasearch
