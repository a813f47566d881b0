#pragma once

// Exact classical stand-in for the low-energy density-matrix verification
// oracle, with configurable answers on promise-violating queries.

#include <bit>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmasearch/sdp.hpp"

namespace qmasearch {

/// Largest register the oracle solves over.
inline constexpr int kOracleMaxQubits = 10;

enum class Verdict { Yes, No, Invalid };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "YES";
    case Verdict::No: return "NO";
    default: return "INVALID";
  }
}

enum class InvalidPolicy { AlwaysYes, AlwaysNo, SeededRandom };

inline std::string to_string(InvalidPolicy p) {
  switch (p) {
    case InvalidPolicy::AlwaysYes: return "always-yes";
    case InvalidPolicy::AlwaysNo: return "always-no";
    default: return "seeded-random";
  }
}

inline InvalidPolicy parse_policy(const std::string& s) {
  if (s == "always-yes") return InvalidPolicy::AlwaysYes;
  if (s == "always-no") return InvalidPolicy::AlwaysNo;
  if (s == "seeded-random") return InvalidPolicy::SeededRandom;
  throw DomainError("oracle: unknown invalid-query policy '" + s + "'");
}

/// One oracle query: is there a state of energy <= a whose marginals are
/// alpha-close to D (YES), or are all states of energy <= a + delta at least
/// beta-far from D (NO)?
struct LedmvInstance {
  LocalHamiltonian H;
  std::vector<DensityMatrix> D;
  double a = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 1.0;

  void validate() const {
    if (!(beta > alpha)) throw PreconditionError("oracle: beta must exceed alpha strictly");
    if (alpha < 0.0 || a < 0.0 || delta < 0.0) throw PreconditionError("oracle: a, delta, alpha must be non-negative");
    if (a > std::max(H.m(), 0) + 1e-12) throw PreconditionError("oracle: a exceeds the number of terms");
    for (const auto& rho : D) validate_qubit_set(rho.support(), H.n(), "oracle");
  }

  std::vector<QubitSet> supports() const {
    std::vector<QubitSet> s;
    for (const auto& rho : D) s.push_back(rho.support());
    return s;
  }
  std::vector<Matrix> targets() const {
    std::vector<Matrix> t;
    for (const auto& rho : D) t.push_back(rho.matrix());
    return t;
  }
};

namespace detail {

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    bytes(&u, sizeof u);
  }
  void matrix(const Matrix& m) {
    i64(m.rows());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      f64(m.data()[i].real());
      f64(m.data()[i].imag());
    }
  }
  void qubits(const QubitSet& s) {
    i64(static_cast<std::int64_t>(s.size()));
    for (int q : s) i64(q);
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t hamiltonian_hash(const LocalHamiltonian& h) {
  detail::Fnv1a f;
  f.i64(h.n());
  f.i64(h.k());
  for (const auto& t : h.terms()) {
    f.qubits(t.support);
    f.matrix(t.matrix.matrix());
  }
  return f.h;
}

inline std::uint64_t instance_hash(const LedmvInstance& inst) {
  detail::Fnv1a f;
  f.i64(static_cast<std::int64_t>(hamiltonian_hash(inst.H)));
  for (const auto& rho : inst.D) {
    f.qubits(rho.support());
    f.matrix(rho.matrix());
  }
  f.f64(inst.a);
  f.f64(inst.delta);
  f.f64(inst.alpha);
  f.f64(inst.beta);
  return f.h;
}

/// Deterministic answer to an invalid query.
inline Verdict policy_answer(InvalidPolicy p, std::uint64_t seed, std::uint64_t query_index) {
  switch (p) {
    case InvalidPolicy::AlwaysYes: return Verdict::Yes;
    case InvalidPolicy::AlwaysNo: return Verdict::No;
    default: return (detail::splitmix64(seed ^ detail::splitmix64(query_index)) & 1U) ? Verdict::Yes : Verdict::No;
  }
}

// ---------------------------------------------------------------------------

/// Certified bracket on min over {xi : tr[H xi] <= bound} of
/// max_j ||tr_{not C_j} xi - rho_j||_1.
inline sdp::Result min_max_marginal_bounds(const PreparedHamiltonian& ph, const std::vector<DensityMatrix>& D,
                                           double energy_bound, double tol) {
  if (ph.n > kOracleMaxQubits) {
    throw CapacityError("oracle: " + std::to_string(ph.n) + " qubits exceeds the oracle limit of " +
                        std::to_string(kOracleMaxQubits));
  }
  std::vector<QubitSet> s;
  std::vector<Matrix> t;
  for (const auto& rho : D) {
    s.push_back(rho.support());
    t.push_back(rho.matrix());
  }
  sdp::Options opt;
  opt.tol = tol;
  return sdp::solve(ph, energy_bound, s, t, opt);
}

/// The minimal achievable worst-case marginal distance, to within tol. The
/// value returned is the certified upper end of the bracket; +infinity when
/// no state satisfies the energy bound.
inline double min_max_marginal_distance(const LocalHamiltonian& H, const std::vector<DensityMatrix>& D,
                                        double energy_bound, double tol = 1e-6) {
  check_capacity(H.n(), "oracle");
  if (H.n() > kOracleMaxQubits) throw CapacityError("oracle: register too large for the oracle");
  const auto ph = PreparedHamiltonian::from(H);
  return min_max_marginal_bounds(ph, D, energy_bound, tol).upper;
}

/// Full record of one classification.
struct Classification {
  Verdict verdict = Verdict::Invalid;
  double lower_a = 0.0, upper_a = sdp::kInfinity;        // bracket on v(a)
  double lower_ad = 0.0, upper_ad = sdp::kInfinity;      // bracket on v(a + delta), when evaluated
  bool cached = false;
  int solver_iterations = 0;
  Matrix witness;  // a state with energy <= a, when one was produced
  double witness_energy = 0.0;
  // Everything the solver certified along the way, for reuse.
  std::vector<std::pair<Matrix, double>> states;
  std::vector<sdp::DualCertificate> certificates;
};

namespace detail {

inline void check_tolerance(const LedmvInstance& inst, double tol) {
  if (inst.D.empty()) return;
  if (tol > (inst.beta - inst.alpha) / 10.0 + 1e-18)
    throw PreconditionError("oracle: tol must be at most (beta - alpha)/10");
  if (inst.delta > 0.0 && tol > inst.delta / 10.0 + 1e-18)
    throw PreconditionError("oracle: tol must be at most delta/10");
}

/// Classification without any cache; the reference semantics.
inline Classification classify_fresh(const PreparedHamiltonian& ph, const LedmvInstance& inst, double tol) {
  Classification c;
  if (inst.D.empty()) {
    const double slack = ph.feasibility_slack();
    const bool feasible_a = inst.a >= ph.lambda0 - slack;
    const bool feasible_ad = inst.a + inst.delta >= ph.lambda0 - slack;
    c.lower_a = c.upper_a = feasible_a ? 0.0 : sdp::kInfinity;
    c.lower_ad = c.upper_ad = feasible_ad ? 0.0 : sdp::kInfinity;
    c.verdict = feasible_a ? Verdict::Yes : (feasible_ad ? Verdict::Invalid : Verdict::No);
    if (feasible_a) {
      c.witness = ph.ground * ph.ground.adjoint();
      c.witness_energy = ph.lambda0;
    }
    return c;
  }
  const auto s = inst.supports();
  const auto t = inst.targets();
  sdp::Options opt;
  opt.tol = tol;
  opt.threshold = inst.alpha;
  const auto r1 = sdp::solve(ph, inst.a, s, t, opt);
  c.lower_a = r1.lower;
  c.upper_a = r1.upper;
  c.solver_iterations = r1.iterations;
  if (!r1.infeasible) {
    c.witness = r1.witness;
    c.witness_energy = r1.witness_energy;
    if (r1.witness.size() > 0) c.states.emplace_back(r1.witness, r1.witness_energy);
    c.certificates.push_back(r1.certificate);
  }
  if (r1.upper <= inst.alpha) {
    c.verdict = Verdict::Yes;
    return c;
  }
  if (r1.upper < inst.beta) {
    c.upper_ad = r1.upper;
    c.verdict = Verdict::Invalid;
    return c;
  }
  opt.threshold = inst.beta;
  const auto r2 = sdp::solve(ph, inst.a + inst.delta, s, t, opt);
  c.lower_ad = r2.lower;
  c.upper_ad = r2.upper;
  c.solver_iterations += r2.iterations;
  if (!r2.infeasible) {
    if (r2.witness.size() > 0) c.states.emplace_back(r2.witness, r2.witness_energy);
    c.certificates.push_back(r2.certificate);
  }
  c.verdict = r2.lower >= inst.beta ? Verdict::No : Verdict::Invalid;
  return c;
}

}  // namespace detail

/// YES iff the certified value at energy a is <= alpha; otherwise NO iff the
/// certified value at energy a + delta is >= beta (an empty feasible set
/// counts as NO); otherwise INVALID. Values within tol of a threshold fall
/// on the INVALID side.
inline Verdict classify_ledmv(const LedmvInstance& inst, double tol = 1e-6) {
  inst.validate();
  detail::check_tolerance(inst, tol);
  if (inst.H.n() > kOracleMaxQubits) throw CapacityError("oracle: register too large for the oracle");
  return detail::classify_fresh(PreparedHamiltonian::from(inst.H), inst, tol).verdict;
}

/// Consistency of local density matrices, as the energy-free special case.
inline Verdict classify_cldm(const std::vector<DensityMatrix>& D, double gamma, int n, double tol = 1e-6) {
  LedmvInstance inst{LocalHamiltonian(n, 1), D, 0.0, 0.0, tol, gamma};
  return classify_ledmv(inst, tol);
}

struct OracleAnswer {
  Verdict answer = Verdict::No;
  Verdict ground_truth = Verdict::Invalid;
  std::uint64_t query_index = 0;
};

inline OracleAnswer answer(const LedmvInstance& inst, InvalidPolicy policy, std::uint64_t seed,
                           std::uint64_t query_index, double tol = 1e-6) {
  OracleAnswer a;
  a.query_index = query_index;
  a.ground_truth = classify_ledmv(inst, tol);
  a.answer = a.ground_truth == Verdict::Invalid ? policy_answer(policy, seed, query_index) : a.ground_truth;
  return a;
}

// ---------------------------------------------------------------------------

/// Anything that answers LEDMV queries.
class LedmvOracle {
 public:
  virtual ~LedmvOracle() = default;
  virtual OracleAnswer query(const LedmvInstance& inst) = 0;
};

struct AuditRecord {
  std::uint64_t index = 0;
  std::uint64_t hash = 0;
  double a = 0, delta = 0, alpha = 0, beta = 0;
  Verdict ground_truth = Verdict::Invalid;
  Verdict answer = Verdict::Invalid;
  double value = 0.0;  // certified upper bound on v(a)
  double gap = 0.0;    // width of the certified bracket on v(a)
  bool cached = false;

  nlohmann::ordered_json to_json() const {
    auto num = [](double v) -> nlohmann::ordered_json {
      if (std::isfinite(v)) return v;
      return v > 0 ? "inf" : "-inf";
    };
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
    nlohmann::ordered_json j;
    j["query"] = index;
    j["instance_hash"] = hex;
    j["a"] = a;
    j["delta"] = delta;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["ground_truth"] = to_string(ground_truth);
    j["answer"] = to_string(answer);
    j["solver_value"] = num(value);
    j["duality_gap"] = num(gap);
    j["cached"] = cached;
    return j;
  }
};

/// Oracle backed by the exact solver. Certificates from earlier solves are
/// reused when they decide a query with a margin of at least tol, which makes
/// every answer identical to that of a fresh classification.
class ExactOracle : public LedmvOracle {
 public:
  explicit ExactOracle(InvalidPolicy policy = InvalidPolicy::AlwaysNo, std::uint64_t seed = 0, double tol = 1e-6)
      : policy_(policy), seed_(seed), tol_(tol) {}

  void set_audit_stream(std::ostream* os) { audit_ = os; }
  void set_cache_enabled(bool on) { cache_enabled_ = on; }

  OracleAnswer query(const LedmvInstance& inst) override {
    const auto c = classify(inst);
    OracleAnswer a;
    a.query_index = next_index_++;
    a.ground_truth = c.verdict;
    a.answer = c.verdict == Verdict::Invalid ? policy_answer(policy_, seed_, a.query_index) : c.verdict;

    AuditRecord r;
    r.index = a.query_index;
    r.hash = instance_hash(inst);
    r.a = inst.a;
    r.delta = inst.delta;
    r.alpha = inst.alpha;
    r.beta = inst.beta;
    r.ground_truth = c.verdict;
    r.answer = a.answer;
    r.value = c.upper_a;
    r.gap = (std::isfinite(c.upper_a) ? c.upper_a - c.lower_a : 0.0);
    r.cached = c.cached;
    if (audit_) *audit_ << r.to_json().dump() << '\n';
    log_.push_back(r);
    last_ = c;
    return a;
  }

  /// Ground-truth classification. The tolerance is tightened to
  /// min(tol, delta/10, (beta-alpha)/10) so callers with fine promise gaps
  /// stay within the solver's precondition.
  Classification classify(const LedmvInstance& inst) {
    inst.validate();
    if (inst.H.n() > kOracleMaxQubits) throw CapacityError("oracle: register too large for the oracle");
    double tol = std::min(tol_, (inst.beta - inst.alpha) / 10.0);
    if (inst.delta > 0.0) tol = std::min(tol, inst.delta / 10.0);
    auto& entry = prepared(inst.H);
    if (inst.D.empty() || !cache_enabled_) return detail::classify_fresh(entry.ph, inst, tol);

    const auto s = inst.supports();
    const auto t = inst.targets();
    Classification c;
    c.cached = true;

    // Stage one: value at energy a against alpha.
    bool not_yes = false;
    for (const auto& w : entry.witnesses) {
      if (w.energy > inst.a) continue;
      const double u = sdp::max_marginal_distance(w.state, entry.ph.n, s, t);
      if (u <= inst.alpha - tol) {
        c.verdict = Verdict::Yes;
        c.upper_a = u;
        c.witness = w.state;
        c.witness_energy = w.energy;
        return c;
      }
    }
    auto certs = entry.certificates.find(s);
    double best_lower_ad = 0.0;
    if (certs != entry.certificates.end()) {
      for (const auto& cert : certs->second) {
        c.lower_a = std::max(c.lower_a, cert.lower_bound(inst.a, t));
        best_lower_ad = std::max(best_lower_ad, cert.lower_bound(inst.a + inst.delta, t));
      }
      not_yes = c.lower_a >= inst.alpha + tol;
    }
    if (!not_yes) {
      const auto fresh = detail::classify_fresh(entry.ph, inst, tol);
      remember(entry, s, fresh);
      return fresh;
    }

    // Stage two: value at energy a + delta against beta.
    if (best_lower_ad >= inst.beta + tol) {
      c.verdict = Verdict::No;
      c.lower_ad = best_lower_ad;
      return c;
    }
    for (const auto& w : entry.witnesses) {
      if (w.energy > inst.a + inst.delta) continue;
      const double u = sdp::max_marginal_distance(w.state, entry.ph.n, s, t);
      if (u < inst.beta) {
        c.verdict = Verdict::Invalid;
        c.upper_ad = u;
        return c;
      }
    }
    const auto fresh = detail::classify_fresh(entry.ph, inst, tol);
    remember(entry, s, fresh);
    return fresh;
  }

  std::uint64_t queries() const { return next_index_; }
  const std::vector<AuditRecord>& log() const { return log_; }
  const Classification& last() const { return last_; }
  InvalidPolicy policy() const { return policy_; }
  std::uint64_t seed() const { return seed_; }
  double tol() const { return tol_; }

  /// Exact ground data for H (computed once per Hamiltonian).
  const PreparedHamiltonian& prepare(const LocalHamiltonian& H) { return prepared(H).ph; }

 private:
  struct Witness {
    Matrix state;
    double energy;
  };
  struct Entry {
    PreparedHamiltonian ph;
    std::deque<Witness> witnesses;
    std::map<std::vector<QubitSet>, std::deque<sdp::DualCertificate>> certificates;
  };
  static constexpr std::size_t kCacheDepth = 48;

  Entry& prepared(const LocalHamiltonian& H) {
    const auto h = hamiltonian_hash(H);
    auto it = cache_.find(h);
    if (it == cache_.end()) {
      auto e = std::make_unique<Entry>();
      e->ph = PreparedHamiltonian::from(H);
      it = cache_.emplace(h, std::move(e)).first;
    }
    return *it->second;
  }

  void remember(Entry& e, const std::vector<QubitSet>& s, const Classification& c) {
    for (const auto& [state, energy] : c.states) {
      e.witnesses.push_front(Witness{state, energy});
      if (e.witnesses.size() > kCacheDepth) e.witnesses.pop_back();
    }
    auto& dq = e.certificates[s];
    for (const auto& cert : c.certificates) {
      dq.push_front(cert);
      if (dq.size() > kCacheDepth) dq.pop_back();
    }
  }

 private:
  InvalidPolicy policy_;
  std::uint64_t seed_;
  double tol_;
  bool cache_enabled_ = true;
  std::ostream* audit_ = nullptr;
  std::uint64_t next_index_ = 0;
  std::vector<AuditRecord> log_;
  Classification last_;
  std::map<std::uint64_t, std::unique_ptr<Entry>> cache_;
};

// ---------------------------------------------------------------------------

struct GroundEnergyEstimate {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int queries = 0;
};

/// Bracket the ground energy with oracle queries on empty marginal lists.
/// Each query asks about a = c with promise width delta/2, where c sits
/// delta/4 below the bracket midpoint; YES moves hi to c + delta/2 and NO
/// moves lo to c. The bracket width w maps to (w + delta/2)/2, so the loop
/// ends once w <= 2 delta, and the midpoint is within delta of lambda0.
inline GroundEnergyEstimate estimate_ground_energy(const LocalHamiltonian& H, double delta, LedmvOracle& oracle) {
  if (!(delta >= 1e-6)) throw PreconditionError("oracle: binary-search delta must be at least 1e-6");
  const double dq = delta / 2.0;
  GroundEnergyEstimate g;
  g.lo = 0.0;
  g.hi = static_cast<double>(H.m());
  while (g.hi - g.lo > 2.0 * delta) {
    const double c = 0.5 * (g.lo + g.hi - dq);
    LedmvInstance inst{H, {}, c, dq, 0.0, 1.0};
    const auto ans = oracle.query(inst);
    ++g.queries;
    if (ans.answer == Verdict::Yes) {
      g.hi = c + dq;
    } else {
      g.lo = c;
    }
  }
  g.estimate = 0.5 * (g.lo + g.hi);
  return g;
}

}  // namespace qmasearch
