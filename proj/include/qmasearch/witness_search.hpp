#pragma once

// Marginals of near-optimal witnesses: pre-idle a verifier circuit, build its
// small-penalty clock Hamiltonian, run the marginal search on it and keep the
// witness-register marginals together with an acceptance estimate.

#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qmasearch/clock.hpp"
#include "qmasearch/marginal_search.hpp"
#include "qmasearch/oracle.hpp"

namespace qmasearch {

enum class ParamMode { Strict, Scaled };

inline std::string to_string(ParamMode m) { return m == ParamMode::Strict ? "strict" : "scaled"; }

struct WitnessSearchParams {
  ParamMode mode = ParamMode::Strict;
  double p1 = 1.0;  // acceptance accuracy 1/p1
  double p2 = 1.0;  // marginal accuracy 1/p2
  int q = 1;
  double c0 = 1.0;
  int T = 0;  // gates of the original circuit
  int M = 0;
  int T_tilde = 0;
  double eps_penalty = 0.0;
  double a = 0.0;
  double eps = 0.0;
};

namespace detail {

inline void check_p(double p1, double p2, int q, double c0) {
  if (!(p1 >= 1.0) || !(p2 >= 1.0)) throw PreconditionError("witness_search: p1 and p2 must be at least 1");
  if (q < 1) throw PreconditionError("witness_search: q must be positive");
  if (!(c0 > 0.0)) throw PreconditionError("witness_search: c0 must be positive");
}

}  // namespace detail

/// Parameters from the verbatim formulas: M = (4 p2)^2 (T+1) rounded up,
/// eps_penalty = 1/(100 (c0+1) (T~+1)^4 (p1 p2)^2), a = c0 (T~+1)^2 eps_penalty^2,
/// eps = 1/(2 p2). Pure arithmetic; capacity is checked when the search runs.
inline WitnessSearchParams derive_params(const QuantumCircuit& circuit, double p1, double p2, int q, double c0 = 1.0) {
  circuit.validate();
  detail::check_p(p1, p2, q, c0);
  WitnessSearchParams p;
  p.mode = ParamMode::Strict;
  p.p1 = p1;
  p.p2 = p2;
  p.q = q;
  p.c0 = c0;
  p.T = circuit.T();
  p.M = static_cast<int>(std::ceil(16.0 * p2 * p2 * (p.T + 1) - 1e-9));
  p.T_tilde = p.M + p.T;
  const double t1 = p.T_tilde + 1.0;
  p.eps_penalty = 1.0 / (100.0 * (c0 + 1.0) * std::pow(t1, 4) * (p1 * p2) * (p1 * p2));
  p.a = c0 * t1 * t1 * p.eps_penalty * p.eps_penalty;
  p.eps = 1.0 / (2.0 * p2);
  return p;
}

/// User-sized parameters: M, eps_penalty and eps are given, a follows the
/// same relation a = c0 (T~+1)^2 eps_penalty^2 and p2 = 1/(2 eps).
inline WitnessSearchParams scaled_params(const QuantumCircuit& circuit, int M, double eps_penalty, double eps, double p1,
                                         int q, double c0 = 1.0) {
  circuit.validate();
  if (M < 0) throw PreconditionError("witness_search: M must be non-negative");
  if (!(eps_penalty > 0.0 && eps_penalty <= 1.0)) throw PreconditionError("witness_search: eps_penalty must lie in (0, 1]");
  if (!(eps > 0.0 && eps <= 0.5)) throw PreconditionError("witness_search: eps must lie in (0, 1/2]");
  detail::check_p(p1, 1.0 / (2.0 * eps), q, c0);
  WitnessSearchParams p;
  p.mode = ParamMode::Scaled;
  p.p1 = p1;
  p.p2 = 1.0 / (2.0 * eps);
  p.q = q;
  p.c0 = c0;
  p.T = circuit.T();
  p.M = M;
  p.T_tilde = M + p.T;
  p.eps_penalty = eps_penalty;
  const double t1 = p.T_tilde + 1.0;
  p.a = c0 * t1 * t1 * eps_penalty * eps_penalty;
  p.eps = eps;
  return p;
}

/// Acceptance estimate from an energy: 1 - lambda (T~+1)/eps_penalty.
inline double p_hat_from_energy(double lambda, const WitnessSearchParams& p) {
  return 1.0 - lambda * (p.T_tilde + 1.0) / p.eps_penalty;
}

/// Explicit bound expressions evaluated at concrete parameters.
struct BoundChain {
  double gap = 0.0;              // measured Delta of H_0 for the idled circuit
  double energy_ceiling = 0.0;   // delta: upper bound on the energy of states in the window
  double fidelity_deficit = 0.0; // delta / Delta, bounds 1 - ||Pi_hist Psi||^2
  double acceptance_loss = 0.0;  // bound on p* - p~ for the nearby history state
  double trace_bound = 0.0;      // bound on ||tr_{not W} Psi - psi psi||_1
  double p_hat_exact_tol = 0.0;  // 2 c0 eps_penalty (T~+1)^3
  double p_hat_search_tol = 0.0; // adds (T~+1) a/((|I|+1) eps_penalty)
};

/// Evaluates the bound chain for states with energy <= lambda0 + window. The
/// acceptance and fidelity terms follow the history-overlap argument with the
/// window in place of c0 eps^2/Delta; the trace bound uses
/// ||psi psi - phi phi||_1 = 2 sqrt(1 - |<psi|phi>|^2) for both the overlap
/// and the pre-idling step.
inline BoundChain bound_chain(const WitnessSearchParams& p, double gap, double p_star, double window, int num_subsets) {
  BoundChain b;
  b.gap = gap;
  const double t1 = p.T_tilde + 1.0;
  const double center = p.eps_penalty * (1.0 - p_star) / t1;
  b.energy_ceiling = center + p.c0 * p.eps_penalty * p.eps_penalty / gap + window;
  b.fidelity_deficit = b.energy_ceiling / gap;
  b.acceptance_loss = t1 * (b.energy_ceiling - center) / p.eps_penalty + 2.0 * t1 * std::sqrt(b.fidelity_deficit) +
                      b.fidelity_deficit;
  const double idle = p.M > 0 ? 1.0 - static_cast<double>(p.M) / (p.M + p.T + 1.0) : 1.0;
  b.trace_bound = 2.0 * std::sqrt(std::min(1.0, b.fidelity_deficit)) + 2.0 * std::sqrt(idle);
  b.p_hat_exact_tol = 2.0 * p.c0 * p.eps_penalty * t1 * t1 * t1;
  b.p_hat_search_tol = b.p_hat_exact_tol + t1 * p.a / ((num_subsets + 1.0) * p.eps_penalty);
  return b;
}

struct WitnessReport {
  WitnessSearchParams params;
  std::map<QubitSet, DensityMatrix> marginals;  // keys: q-subsets of W
  double lambda_hat = 0.0;
  double p_hat = 0.0;      // clipped to [0, 1]
  double p_hat_raw = 0.0;
  double lambda0 = 0.0;     // exact ground energy of H_FK
  double p_hat_exact = 0.0; // p_hat from lambda0
  double gap = 0.0;
  double pre_idle_overlap = 0.0;  // for the optimal witness, equals M/(M+T+1)
  int num_subsets = 0;            // |J|
  MarginalReport search;
};

struct WitnessFailure {
  WitnessSearchParams params;
  SearchFailure failure;
};

using WitnessOutcome = std::variant<WitnessReport, WitnessFailure>;

/// q-subsets of the full register that lie inside W.
inline std::vector<QubitSet> witness_subsets(const QuantumCircuit& c, int q) {
  std::vector<QubitSet> out;
  for (const auto& s : q_subsets(c.num_qubits, q)) {
    bool inside = true;
    for (int x : s) inside = inside && std::binary_search(c.witness.begin(), c.witness.end(), x);
    if (inside) out.push_back(s);
  }
  return out;
}

inline WitnessOutcome find_witness_marginals(const QuantumCircuit& circuit, const WitnessSearchParams& params,
                                             LedmvOracle& oracle, SearchMode mode, std::uint64_t seed) {
  circuit.validate();
  if (params.T != circuit.T()) throw PreconditionError("witness_search: parameters were derived for a different circuit");
  if (params.q > circuit.witness_size()) throw PreconditionError("witness_search: q exceeds the witness register");
  const int total = circuit.num_qubits + params.T_tilde;
  if (total > kOracleMaxQubits) {
    throw CapacityError("witness_search: the idled clock Hamiltonian needs " + std::to_string(total) +
                        " qubits, above the oracle limit of " + std::to_string(kOracleMaxQubits) +
                        "; use scaled parameters");
  }
  const QuantumCircuit idled = pre_idle(circuit, params.M);
  const ClockHamiltonian h = build_clock(idled, params.eps_penalty);
  WitnessReport rep;
  rep.params = params;
  rep.gap = spectral_gap_H0(h).legal_gap;
  if (params.eps_penalty > rep.gap / 16.0) {
    throw PreconditionError("witness_search: eps_penalty = " + std::to_string(params.eps_penalty) +
                            " exceeds Delta/16 = " + std::to_string(rep.gap / 16.0));
  }
  const auto acc = max_acceptance(circuit);
  rep.pre_idle_overlap = params.M > 0 ? pre_idle_overlap(idled, params.M, acc.optimal_witness) : 0.0;
  rep.lambda0 = hermitian_eigenvalues(h.total.matrix())(0);
  rep.p_hat_exact = p_hat_from_energy(rep.lambda0, params);

  SearchConfig cfg;
  cfg.q = params.q;
  cfg.a = params.a;
  cfg.eps = params.eps;
  cfg.mode = mode;
  cfg.seed = seed;
  auto outcome = find_marginals(h.terms, cfg, oracle);
  if (auto* f = std::get_if<SearchFailure>(&outcome)) return WitnessFailure{params, *f};
  rep.search = std::get<MarginalReport>(std::move(outcome));
  rep.num_subsets = static_cast<int>(q_subsets(h.n(), params.q).size());
  rep.lambda_hat = rep.search.lambda_hat;
  rep.p_hat_raw = p_hat_from_energy(rep.lambda_hat, params);
  rep.p_hat = std::clamp(rep.p_hat_raw, 0.0, 1.0);
  for (const auto& s : witness_subsets(circuit, params.q)) rep.marginals.emplace(s, rep.search.marginals.at(s));
  return rep;
}

// ---------------------------------------------------------------------------

/// Best achievable worst-case distance between the given witness-register
/// marginals and those of a witness accepted with probability >= threshold.
struct ProofSearch {
  double value_lower = 0.0;
  double value_upper = sdp::kInfinity;
  double proof_acceptance = 0.0;  // tr[M xi] of the explicit proof found
  double proof_distance = sdp::kInfinity;  // its recomputed worst distance
  Matrix proof;                   // density matrix on W
};

/// Solved as a consistency problem on the witness register with the single
/// term I - M (rejection operator) and energy bound 1 - threshold.
inline ProofSearch nearest_accepted_proof(const QuantumCircuit& c, const std::map<QubitSet, DensityMatrix>& marginals,
                                          double threshold, double tol = 1e-7) {
  const auto acc = max_acceptance(c);
  const int nw = c.witness_size();
  auto relabel = [&](int q) {
    const auto it = std::find(c.witness.begin(), c.witness.end(), q);
    if (it == c.witness.end()) throw DomainError("witness_search: marginal on qubit " + std::to_string(q) + " outside W");
    return static_cast<int>(it - c.witness.begin());
  };
  std::vector<DensityMatrix> D;
  for (const auto& [s, rho] : marginals) {
    QubitSet local;
    for (int q : s) local.push_back(relabel(q));
    D.emplace_back(local, rho.matrix());
  }
  const Eigen::Index dw = acc.M.rows();
  LocalHamiltonian rej(nw, nw);
  rej.add(LocalTerm(full_support(nw), Matrix(Matrix::Identity(dw, dw) - acc.M)));
  const auto ph = PreparedHamiltonian::from(rej);
  const auto r = min_max_marginal_bounds(ph, D, 1.0 - threshold, tol);
  ProofSearch out;
  out.value_lower = r.lower;
  out.value_upper = r.upper;
  if (r.witness.size() == 0) return out;
  out.proof = r.witness;
  out.proof_acceptance = (acc.M * r.witness).trace().real();
  const DensityMatrix xi(full_support(nw), r.witness);
  out.proof_distance = 0.0;
  for (const auto& rho : D) out.proof_distance = std::max(out.proof_distance, trace_norm_distance(partial_trace(xi, rho.support()), rho));
  return out;
}

struct WitnessVerification {
  double p_star = 0.0;
  double p_hat_error = 0.0;        // |p* - p_hat_raw|
  double p_hat_exact_error = 0.0;  // |p* - p_hat_exact|
  BoundChain bounds;
  double acceptance_threshold = 0.0;  // p* - 1/p1
  double marginal_tolerance = 0.0;    // 1/p2
  ProofSearch proof;
  double ground_marginal_distance = 0.0;  // report vs exact ground state of H_FK, for reference
  bool keys_ok = false;
  bool p_hat_exact_ok = false;
  bool p_hat_ok = false;
  bool marginals_ok = false;
  bool passed = false;
  double p_hat_margin = 0.0;     // p_hat_search_tol - p_hat_error
  double marginal_margin = 0.0;  // 1/p2 - proof distance
};

/// Independent check of a report: p* from the exact acceptance operator, the
/// two p_hat windows, and a proof accepted with probability >= p* - 1/p1
/// whose marginals lie within 1/p2 of the reported ones. Mixed proofs are allowed.
inline WitnessVerification verify_report(const QuantumCircuit& circuit, const WitnessReport& report) {
  const auto& p = report.params;
  WitnessVerification v;
  const auto acc = max_acceptance(circuit);
  v.p_star = acc.p_star;
  v.bounds = bound_chain(p, report.gap, v.p_star, p.a, report.num_subsets);
  v.p_hat_error = std::abs(v.p_star - report.p_hat_raw);
  v.p_hat_exact_error = std::abs(v.p_star - report.p_hat_exact);
  v.p_hat_exact_ok = v.p_hat_exact_error <= v.bounds.p_hat_exact_tol + 1e-9;
  v.p_hat_ok = v.p_hat_error <= v.bounds.p_hat_search_tol + 1e-9;
  v.p_hat_margin = v.bounds.p_hat_search_tol - v.p_hat_error;

  const auto expected = witness_subsets(circuit, p.q);
  v.keys_ok = report.marginals.size() == expected.size();
  for (const auto& s : expected) v.keys_ok = v.keys_ok && report.marginals.count(s) == 1;

  v.acceptance_threshold = v.p_star - 1.0 / p.p1;
  v.marginal_tolerance = 1.0 / p.p2;
  if (v.keys_ok) {
    v.proof = nearest_accepted_proof(circuit, report.marginals, v.acceptance_threshold);
    v.marginals_ok = v.proof.proof.size() > 0 && v.proof.proof_acceptance >= v.acceptance_threshold - 1e-9 &&
                     v.proof.proof_distance <= v.marginal_tolerance + 1e-6;
    v.marginal_margin = v.marginal_tolerance - v.proof.proof_distance;

    const ClockHamiltonian h = build_clock(pre_idle(circuit, p.M), p.eps_penalty);
    const auto eig = hermitian_eig(h.total.matrix());
    const Vector g = eig.vectors.col(0);
    const DensityMatrix ground(full_support(h.n()), Matrix(g * g.adjoint()));
    for (const auto& [s, rho] : report.marginals) {
      v.ground_marginal_distance = std::max(v.ground_marginal_distance, trace_norm_distance(partial_trace(ground, s), rho));
    }
  }
  v.passed = v.keys_ok && v.p_hat_exact_ok && v.p_hat_ok && v.marginals_ok;
  return v;
}

}  // namespace qmasearch
