#pragma once

// Circuits, the small-penalty Feynman-Kitaev Hamiltonian with a unary clock,
// history states, pre-idling and exact acceptance probabilities.
//
// Register layout of a clock Hamiltonian for a circuit on N qubits with T
// gates: computational qubits 0..N-1 followed by clock qubits c_1..c_T at
// positions N..N+T-1. Clock time t is encoded as 1^t 0^(T-t).

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qmasearch/hamiltonian.hpp"
#include "qmasearch/linalg.hpp"

namespace qmasearch {

/// State-vector routines (history states, pre-idle overlaps) accept registers
/// up to this size; dense Hamiltonians stay within kMaxQubits.
inline constexpr int kMaxVectorQubits = 22;

struct Gate {
  QubitSet support;  // tensor order of `matrix`, first entry most significant
  Matrix matrix;

  Gate(QubitSet s, Matrix u) : support(std::move(s)), matrix(std::move(u)) {
    if (support.empty() || support.size() > 2) throw DomainError("clock: gates act on one or two qubits");
    if (support.size() == 2 && support[0] == support[1]) throw DomainError("clock: gate support repeats a qubit");
    const Eigen::Index d = Eigen::Index{1} << support.size();
    if (matrix.rows() != d || matrix.cols() != d) {
      throw DomainError("clock: gate on " + detail::join(support) + " needs a " + std::to_string(d) + "x" +
                        std::to_string(d) + " matrix");
    }
    const double err = (matrix.adjoint() * matrix - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (err > 1e-10) throw DomainError("clock: gate on " + detail::join(support) + " is not unitary (error " + std::to_string(err) + ")");
  }

  static Gate identity(int qubit) { return Gate({qubit}, Matrix::Identity(2, 2)); }
};

struct QuantumCircuit {
  int num_qubits = 1;
  QubitSet witness;
  QubitSet ancillas;
  int output = 0;
  std::vector<Gate> gates;

  int T() const { return static_cast<int>(gates.size()); }

  void validate() const {
    if (num_qubits < 1) throw DomainError("clock: circuit needs at least one qubit");
    validate_qubit_set(witness, num_qubits, "clock");
    validate_qubit_set(ancillas, num_qubits, "clock");
    std::vector<int> all = witness;
    all.insert(all.end(), ancillas.begin(), ancillas.end());
    std::sort(all.begin(), all.end());
    if (static_cast<int>(all.size()) != num_qubits || std::adjacent_find(all.begin(), all.end()) != all.end()) {
      throw DomainError("clock: witness and ancilla registers must partition the " + std::to_string(num_qubits) + " qubits");
    }
    if (output < 0 || output >= num_qubits) throw DomainError("clock: output qubit out of range");
    if (gates.empty()) throw DomainError("clock: circuit has no gates (T >= 1 required)");
    for (const auto& g : gates)
      for (int q : g.support)
        if (q < 0 || q >= num_qubits) throw DomainError("clock: gate acts on qubit " + std::to_string(q) + " outside the circuit");
  }

  int witness_size() const { return static_cast<int>(witness.size()); }
};

namespace detail {

/// Computational-register index with witness bits `w` placed on W and ancillas 0.
inline Eigen::Index input_index(const QuantumCircuit& c, Eigen::Index w) {
  const int nw = c.witness_size();
  Eigen::Index x = 0;
  for (int b = 0; b < nw; ++b)
    if ((w >> (nw - 1 - b)) & 1) x |= Eigen::Index{1} << (c.num_qubits - 1 - c.witness[static_cast<std::size_t>(b)]);
  return x;
}

/// Basis index of clock time t on a T-qubit unary register.
inline Eigen::Index clock_code(int t, int T) { return (Eigen::Index{1} << T) - (Eigen::Index{1} << (T - t)); }

}  // namespace detail

/// Embedding of witness vectors into the computational register (ancillas |0>).
inline Matrix input_isometry(const QuantumCircuit& c) {
  c.validate();
  const Eigen::Index dw = Eigen::Index{1} << c.witness_size();
  Matrix J = Matrix::Zero(Eigen::Index{1} << c.num_qubits, dw);
  for (Eigen::Index w = 0; w < dw; ++w) J(detail::input_index(c, w), w) = 1.0;
  return J;
}

/// Applies gates [0, upto) of `c` to a computational-register vector.
inline void apply_gates(const QuantumCircuit& c, Vector& psi, int upto) {
  for (int t = 0; t < upto; ++t) {
    const auto& g = c.gates[static_cast<std::size_t>(t)];
    apply_local(psi, g.matrix, c.num_qubits, g.support);
  }
}

inline Matrix circuit_unitary(const QuantumCircuit& c) {
  c.validate();
  check_capacity(c.num_qubits, "clock");
  const Eigen::Index d = Eigen::Index{1} << c.num_qubits;
  Matrix U = Matrix::Identity(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector col = U.col(j);
    apply_gates(c, col, c.T());
    U.col(j) = col;
  }
  return U;
}

struct AcceptanceResult {
  double p_star = 0.0;
  PureState optimal_witness{Vector::Ones(1)};
  Matrix M;                // acceptance operator on W, 0 <= M <= I
  RealVector probabilities;  // eigenvalues of M, descending
};

/// Maximum acceptance probability: top eigenpair of M = A^dag Pi A with
/// A = U J and Pi = |1><1| on the output qubit.
inline AcceptanceResult max_acceptance(const QuantumCircuit& c) {
  c.validate();
  check_capacity(c.num_qubits, "clock");
  const Matrix A = circuit_unitary(c) * input_isometry(c);
  const Eigen::Index d = Eigen::Index{1} << c.num_qubits;
  Matrix PA = A;
  for (Eigen::Index x = 0; x < d; ++x)
    if (((x >> (c.num_qubits - 1 - c.output)) & 1) == 0) PA.row(x).setZero();
  AcceptanceResult r;
  r.M = A.adjoint() * PA;
  r.M = 0.5 * (r.M + r.M.adjoint()).eval();
  const auto eig = hermitian_eig(r.M);
  r.probabilities = eig.values.reverse();
  r.p_star = r.probabilities(0);
  r.optimal_witness = PureState::normalized(eig.vectors.col(eig.vectors.cols() - 1));
  return r;
}

/// Acceptance probability tr[M xi] of a (possibly mixed) witness.
inline double acceptance_probability(const QuantumCircuit& c, const Matrix& witness_density) {
  const auto r = max_acceptance(c);
  if (witness_density.rows() != r.M.rows()) throw DomainError("clock: witness dimension does not match the register");
  return (r.M * witness_density).trace().real();
}

/// M identity gates prepended.
inline QuantumCircuit pre_idle(const QuantumCircuit& c, int M) {
  if (M < 0) throw PreconditionError("clock: pre-idling length must be non-negative");
  QuantumCircuit out = c;
  out.gates.clear();
  for (int i = 0; i < M; ++i) out.gates.push_back(Gate::identity(c.output));
  out.gates.insert(out.gates.end(), c.gates.begin(), c.gates.end());
  return out;
}

/// Random circuit: each gate is a Haar unitary on one or two random qubits.
/// The last `num_witness` qubits form the witness; qubit 0 is the output.
inline QuantumCircuit random_circuit(int num_qubits, int T, int num_witness, Rng& rng) {
  if (num_witness < 1 || num_witness > num_qubits) throw DomainError("clock: witness size out of range");
  QuantumCircuit c;
  c.num_qubits = num_qubits;
  for (int q = 0; q < num_qubits; ++q) (q >= num_qubits - num_witness ? c.witness : c.ancillas).push_back(q);
  c.output = 0;
  std::uniform_int_distribution<int> pick(0, num_qubits - 1);
  std::bernoulli_distribution two(0.5);
  for (int t = 0; t < T; ++t) {
    const int a = pick(rng);
    if (num_qubits > 1 && two(rng)) {
      int b = pick(rng);
      while (b == a) b = pick(rng);
      c.gates.emplace_back(QubitSet{a, b}, haar_unitary(4, rng));
    } else {
      c.gates.emplace_back(QubitSet{a}, haar_unitary(2, rng));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

/// Path Laplacian E of the walk on clock times 0..T (eigenvalues 1 - cos(pi k/(T+1))).
inline Eigen::MatrixXd path_laplacian(int T) {
  if (T < 1) throw DomainError("clock: path Laplacian needs T >= 1");
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(T + 1, T + 1);
  for (int t = 1; t <= T; ++t) {
    E(t - 1, t - 1) += 0.5;
    E(t, t) += 0.5;
    E(t - 1, t) -= 0.5;
    E(t, t - 1) -= 0.5;
  }
  return E;
}

struct ClockHamiltonian {
  QuantumCircuit circuit;
  double eps_penalty = 0.0;
  HermitianOp H_in, H_clock, H_prop, H_out;
  HermitianOp total;
  LocalHamiltonian terms{1, 1};  // total as a 5-local Hamiltonian

  int N() const { return circuit.num_qubits; }
  int T() const { return circuit.T(); }
  int n() const { return N() + T(); }
  int clock_qubit(int t) const { return N() + t - 1; }
  HermitianOp H0() const { return H_in + H_clock + H_prop; }
  QubitSet witness_qubits() const { return circuit.witness; }
};

namespace detail {

/// Local matrix on the sorted union `support` for (gate op on `gate_pos`) (x) (clock op on `clock_pos`).
inline Matrix local_product(const Matrix& g, const std::vector<int>& gate_pos, const Matrix& k,
                            const std::vector<int>& clock_pos, int s) {
  std::vector<int> order = gate_pos;
  order.insert(order.end(), clock_pos.begin(), clock_pos.end());
  return embed(kron(g, k), s, order);
}

inline Matrix ket_bra(Eigen::Index dim, Eigen::Index i, Eigen::Index j) {
  Matrix m = Matrix::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

/// Propagation term E_t on the gate support plus the clock qubits that witness
/// the t-1 -> t transition.
inline LocalTerm propagation_term(const ClockHamiltonian& h, int t) {
  const Gate& g = h.circuit.gates[static_cast<std::size_t>(t - 1)];
  const int T = h.T();
  std::vector<int> clocks;
  Eigen::Index before = 0, after = 0;  // local clock patterns for t-1 and t
  if (T == 1) {
    clocks = {h.clock_qubit(1)};
    before = 0;  // |0>
    after = 1;   // |1>
  } else if (t == 1) {
    clocks = {h.clock_qubit(1), h.clock_qubit(2)};
    before = 0b00;
    after = 0b10;
  } else if (t == T) {
    clocks = {h.clock_qubit(T - 1), h.clock_qubit(T)};
    before = 0b10;
    after = 0b11;
  } else {
    clocks = {h.clock_qubit(t - 1), h.clock_qubit(t), h.clock_qubit(t + 1)};
    before = 0b100;
    after = 0b110;
  }
  std::vector<int> support = g.support;
  support.insert(support.end(), clocks.begin(), clocks.end());
  std::vector<int> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  auto pos = [&](const std::vector<int>& qs) {
    std::vector<int> p;
    for (int q : qs) p.push_back(static_cast<int>(std::find(sorted.begin(), sorted.end(), q) - sorted.begin()));
    return p;
  };
  const int s = static_cast<int>(sorted.size());
  const Eigen::Index dc = Eigen::Index{1} << clocks.size();
  const Eigen::Index dg = g.matrix.rows();
  const Matrix Ig = Matrix::Identity(dg, dg);
  const auto gp = pos(g.support);
  const auto cp = pos(clocks);
  Matrix m = local_product(Ig, gp, ket_bra(dc, after, after) + ket_bra(dc, before, before), cp, s);
  m -= local_product(g.matrix, gp, ket_bra(dc, after, before), cp, s);
  m -= local_product(g.matrix.adjoint(), gp, ket_bra(dc, before, after), cp, s);
  return LocalTerm(sorted, Matrix(0.5 * m));
}

inline Matrix projector(int bit) {
  Matrix p = Matrix::Zero(2, 2);
  p(bit, bit) = 1.0;
  return p;
}

}  // namespace detail

/// H_FK = H_in + H_clock + H_prop + eps_penalty H_out on N + T qubits.
inline ClockHamiltonian build_clock(const QuantumCircuit& circuit, double eps_penalty) {
  circuit.validate();
  if (!(eps_penalty >= 0.0) || eps_penalty > 1.0) throw DomainError("clock: eps_penalty must lie in [0, 1]");
  const int n = circuit.num_qubits + circuit.T();
  check_capacity(n, "clock");
  ClockHamiltonian h;
  h.circuit = circuit;
  h.eps_penalty = eps_penalty;
  const int T = circuit.T();

  LocalHamiltonian in(n, 5), clk(n, 5), prop(n, 5), out(n, 5);
  const Matrix P0 = detail::projector(0), P1 = detail::projector(1);
  for (int anc : circuit.ancillas) in.add(LocalTerm({anc, h.clock_qubit(1)}, kron(P1, P0)));
  for (int t = 1; t < T; ++t) clk.add(LocalTerm({h.clock_qubit(t), h.clock_qubit(t + 1)}, kron(P0, P1)));
  for (int t = 1; t <= T; ++t) prop.add(detail::propagation_term(h, t));
  out.add(LocalTerm({circuit.output, h.clock_qubit(T)}, kron(P0, P1)));

  h.H_in = in.m() ? assemble(in) : HermitianOp::zero(n);
  h.H_clock = clk.m() ? assemble(clk) : HermitianOp::zero(n);
  h.H_prop = assemble(prop);
  h.H_out = assemble(out);
  h.total = h.H0() + h.H_out * eps_penalty;

  h.terms = LocalHamiltonian(n, 5);
  for (const auto* part : {&in, &clk, &prop})
    for (const auto& term : part->terms()) h.terms.add(term);
  if (eps_penalty > 0.0)
    for (const auto& term : out.terms()) h.terms.add(LocalTerm(term.support, term.matrix * eps_penalty));
  return h;
}

// ---------------------------------------------------------------------------

/// Full-register vector of the history state of `witness` for `c`.
inline Vector history_vector(const QuantumCircuit& c, const Vector& witness) {
  c.validate();
  const int T = c.T();
  const int n = c.num_qubits + T;
  if (n > kMaxVectorQubits) throw CapacityError("clock: history state on " + std::to_string(n) + " qubits exceeds capacity");
  const Eigen::Index dw = Eigen::Index{1} << c.witness_size();
  if (witness.size() != dw) throw DomainError("clock: witness dimension does not match |W| = " + std::to_string(c.witness_size()));
  Vector psi = Vector::Zero(Eigen::Index{1} << c.num_qubits);
  for (Eigen::Index w = 0; w < dw; ++w) psi(detail::input_index(c, w)) = witness(w);
  Vector out = Vector::Zero(Eigen::Index{1} << n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(T + 1));
  for (int t = 0; t <= T; ++t) {
    if (t > 0) apply_local(psi, c.gates[static_cast<std::size_t>(t - 1)].matrix, c.num_qubits, c.gates[static_cast<std::size_t>(t - 1)].support);
    const Eigen::Index code = detail::clock_code(t, T);
    for (Eigen::Index x = 0; x < psi.size(); ++x) out((x << T) + code) += norm * psi(x);
  }
  return out;
}

inline PureState history_state(const QuantumCircuit& c, const PureState& witness) {
  return PureState(history_vector(c, witness.amplitudes()));
}

/// Orthonormal basis of the history-state span: columns eta(e_w).
inline Matrix history_basis(const QuantumCircuit& c) {
  const Eigen::Index dw = Eigen::Index{1} << c.witness_size();
  const int n = c.num_qubits + c.T();
  Matrix B(Eigen::Index{1} << n, dw);
  for (Eigen::Index w = 0; w < dw; ++w) B.col(w) = history_vector(c, Vector::Unit(dw, w));
  return B;
}

/// |<eta(psi)| psi (x) Phi>|^2 for the idled circuit, with
/// Phi = M^{-1/2} sum_{t<M} |0..0>|t>.
inline double pre_idle_overlap(const QuantumCircuit& idled, int M, const PureState& witness) {
  if (M < 1 || M > idled.T()) throw PreconditionError("clock: pre-idle overlap needs 1 <= M <= T~");
  for (int t = 0; t < M; ++t) {
    const auto& g = idled.gates[static_cast<std::size_t>(t)];
    if ((g.matrix - Matrix::Identity(g.matrix.rows(), g.matrix.cols())).cwiseAbs().maxCoeff() > 1e-14) {
      throw PreconditionError("clock: the first M gates are not identities");
    }
  }
  const Vector eta = history_vector(idled, witness.amplitudes());
  const int T = idled.T();
  Vector psi = Vector::Zero(Eigen::Index{1} << idled.num_qubits);
  const Eigen::Index dw = witness.dim();
  for (Eigen::Index w = 0; w < dw; ++w) psi(detail::input_index(idled, w)) = witness.amplitudes()(w);
  Complex ov = 0.0;
  const double norm = 1.0 / std::sqrt(static_cast<double>(M));
  for (int t = 0; t < M; ++t) {
    const Eigen::Index code = detail::clock_code(t, T);
    for (Eigen::Index x = 0; x < psi.size(); ++x) ov += std::conj(eta((x << T) + code)) * norm * psi(x);
  }
  return std::norm(ov);
}

// ---------------------------------------------------------------------------
// Legal-clock sector. Basis ordered by (x, t) with x the computational index.

inline std::vector<Eigen::Index> legal_indices(const ClockHamiltonian& h) {
  const int T = h.T();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index x = 0; x < (Eigen::Index{1} << h.N()); ++x)
    for (int t = 0; t <= T; ++t) idx.push_back((x << T) + detail::clock_code(t, T));
  return idx;
}

inline Matrix restrict_to_legal(const ClockHamiltonian& h, const Matrix& full) {
  const auto idx = legal_indices(h);
  const auto d = static_cast<Eigen::Index>(idx.size());
  Matrix out(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = full(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  return out;
}

/// Largest |entry| of W^dag H_prop W - I (x) E on the legal sector, with
/// W = sum_t U_t..U_1 (x) |t><t|.
inline double propagation_basis_residual(const ClockHamiltonian& h) {
  const int T = h.T();
  const Eigen::Index dN = Eigen::Index{1} << h.N();
  const Eigen::Index L = dN * (T + 1);
  Matrix W = Matrix::Zero(L, L);
  Matrix U = Matrix::Identity(dN, dN);
  for (int t = 0; t <= T; ++t) {
    if (t > 0) {
      for (Eigen::Index j = 0; j < dN; ++j) {
        Vector col = U.col(j);
        apply_local(col, h.circuit.gates[static_cast<std::size_t>(t - 1)].matrix, h.N(), h.circuit.gates[static_cast<std::size_t>(t - 1)].support);
        U.col(j) = col;
      }
    }
    for (Eigen::Index x = 0; x < dN; ++x)
      for (Eigen::Index y = 0; y < dN; ++y) W(x * (T + 1) + t, y * (T + 1) + t) = U(x, y);
  }
  const Matrix lhs = W.adjoint() * restrict_to_legal(h, h.H_prop.matrix()) * W;
  const Matrix rhs = kron(Matrix::Identity(dN, dN), path_laplacian(T).cast<Complex>());
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

struct GapReport {
  double legal_gap = 0.0;  // gap of H_0 above its null space inside the legal sector
  double full_gap = 0.0;   // same on the full register
  int null_dim = 0;        // expected 2^|W|
  double null_residual = 0.0;  // largest of the first null_dim eigenvalues
  double bound = 0.0;      // 1/(T+1)^2
};

inline GapReport spectral_gap_H0(const ClockHamiltonian& h) {
  GapReport g;
  g.null_dim = 1 << h.circuit.witness_size();
  const Matrix H0 = h.H0().matrix();
  const RealVector legal = hermitian_eigenvalues(restrict_to_legal(h, H0));
  const RealVector full = hermitian_eigenvalues(H0);
  g.null_residual = std::max(std::abs(legal(g.null_dim - 1)), std::abs(full(g.null_dim - 1)));
  g.legal_gap = legal.size() > g.null_dim ? legal(g.null_dim) : std::numeric_limits<double>::infinity();
  g.full_gap = full(g.null_dim);
  g.bound = 1.0 / ((h.T() + 1.0) * (h.T() + 1.0));
  return g;
}

struct SpccPair {
  double eigenvalue = 0.0;
  double acceptance = 0.0;
  double center = 0.0;     // eps (1 - P)/(T + 1)
  double deviation = 0.0;  // |eigenvalue - center|
};

struct SpccReport {
  bool passed = false;
  bool cardinality_ok = false;
  int low_count = 0;       // eigenvalues of H_FK at most eps_penalty
  int expected_count = 0;  // 2^|W|
  double gap = 0.0;        // legal-sector gap of H_0 used as Delta
  double c0 = 0.0;
  double half_width = 0.0;  // c0 eps^2 / Delta
  double min_c0 = 0.0;      // smallest c0 for which every pair passes
  std::vector<SpccPair> pairs;
  std::string diagnostic;
};

/// Checks that the eigenvalues of H_FK below eps_penalty sit in the windows
/// eps (1 - P_i)/(T+1) +- c0 eps^2/Delta, pairing ascending eigenvalues with
/// descending acceptance probabilities.
inline SpccReport verify_spcc(const ClockHamiltonian& h, double c0) {
  if (!(c0 > 0.0)) throw PreconditionError("clock: c0 must be positive");
  SpccReport r;
  r.c0 = c0;
  r.gap = spectral_gap_H0(h).legal_gap;
  const double eps = h.eps_penalty;
  if (!(eps > 0.0)) throw PreconditionError("clock: the interval check needs eps_penalty > 0");
  if (eps > r.gap / 16.0) {
    throw PreconditionError("clock: eps_penalty = " + std::to_string(eps) + " exceeds Delta/16 = " + std::to_string(r.gap / 16.0));
  }
  const RealVector ev = hermitian_eigenvalues(restrict_to_legal(h, h.total.matrix()));
  const auto acc = max_acceptance(h.circuit);
  r.expected_count = static_cast<int>(acc.probabilities.size());
  for (Eigen::Index i = 0; i < ev.size() && ev(i) <= eps; ++i) ++r.low_count;
  r.half_width = c0 * eps * eps / r.gap;
  r.cardinality_ok = r.low_count == r.expected_count;
  if (!r.cardinality_ok) {
    r.diagnostic = "found " + std::to_string(r.low_count) + " eigenvalues <= eps_penalty, expected " +
                   std::to_string(r.expected_count);
    r.min_c0 = std::numeric_limits<double>::infinity();
    return r;
  }
  double worst = 0.0;
  for (int i = 0; i < r.low_count; ++i) {
    SpccPair p;
    p.eigenvalue = ev(i);
    p.acceptance = acc.probabilities(i);
    p.center = eps * (1.0 - p.acceptance) / (h.T() + 1.0);
    p.deviation = std::abs(p.eigenvalue - p.center);
    worst = std::max(worst, p.deviation);
    r.pairs.push_back(p);
  }
  r.min_c0 = worst * r.gap / (eps * eps);
  r.passed = worst <= r.half_width;
  return r;
}

struct OverlapReport {
  int checked = 0;          // eigenvectors with energy <= Delta/2
  double min_slack = 0.0;   // min over them of ||Pi_hist Psi||^2 - (1 - energy/Delta)
  double gap = 0.0;
};

/// For every legal-sector eigenvector of H_FK with energy <= Delta/2, compares
/// its weight on the history span with 1 - energy/Delta.
inline OverlapReport check_history_overlap(const ClockHamiltonian& h) {
  OverlapReport r;
  r.gap = spectral_gap_H0(h).legal_gap;
  const auto idx = legal_indices(h);
  const Matrix B_full = history_basis(h.circuit);
  Matrix B(static_cast<Eigen::Index>(idx.size()), B_full.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) B.row(static_cast<Eigen::Index>(i)) = B_full.row(idx[i]);
  const auto eig = hermitian_eig(restrict_to_legal(h, h.total.matrix()));
  r.min_slack = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eig.values.size() && eig.values(i) <= r.gap / 2.0; ++i) {
    const double weight = (B.adjoint() * eig.vectors.col(i)).squaredNorm();
    r.min_slack = std::min(r.min_slack, weight - (1.0 - eig.values(i) / r.gap));
    ++r.checked;
  }
  return r;
}

}  // namespace qmasearch
