#pragma once

// k-local Hamiltonians H = sum_i H_i with 0 <= H_i <= I.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qmasearch/linalg.hpp"

namespace qmasearch {

/// Eigenvalues within this distance of lambda0 belong to the ground space.
inline constexpr double kDegeneracyTol = 1e-8;

struct LocalTerm {
  QubitSet support;
  HermitianOp matrix;

  LocalTerm(QubitSet s, HermitianOp m) : support(std::move(s)), matrix(std::move(m)) {
    if (matrix.dim() != (Eigen::Index{1} << support.size())) {
      throw DomainError("hamiltonian: term dimension " + std::to_string(matrix.dim()) +
                        " does not match support " + detail::join(support));
    }
    const RealVector ev = hermitian_eigenvalues(matrix.matrix());
    if (ev(0) < -1e-10 || ev(ev.size() - 1) > 1.0 + 1e-10) {
      throw DomainError("hamiltonian: term on " + detail::join(support) + " has spectrum [" + std::to_string(ev(0)) +
                        ", " + std::to_string(ev(ev.size() - 1)) + "] outside [0, 1]");
    }
  }
  LocalTerm(QubitSet s, const Matrix& m) : LocalTerm(std::move(s), HermitianOp(m)) {}
};

class LocalHamiltonian {
 public:
  LocalHamiltonian(int n, int k, std::vector<LocalTerm> terms = {}) : n_(n), k_(k) {
    if (n < 1) throw DomainError("hamiltonian: qubit count must be positive");
    if (k < 1) throw DomainError("hamiltonian: locality must be positive");
    for (auto& t : terms) add(std::move(t));
  }

  void add(LocalTerm t) {
    validate_qubit_set(t.support, n_, "hamiltonian");
    if (static_cast<int>(t.support.size()) > k_) {
      throw DomainError("hamiltonian: term on " + detail::join(t.support) + " exceeds locality " + std::to_string(k_));
    }
    terms_.push_back(std::move(t));
  }

  int n() const { return n_; }
  int k() const { return k_; }
  int m() const { return static_cast<int>(terms_.size()); }
  const std::vector<LocalTerm>& terms() const { return terms_; }

 private:
  int n_;
  int k_;
  std::vector<LocalTerm> terms_;
};

inline void check_capacity(int n, const char* module) {
  if (n > kMaxQubits) {
    throw CapacityError(std::string(module) + ": " + std::to_string(n) + " qubits exceeds the dense limit of " +
                        std::to_string(kMaxQubits));
  }
}

inline Matrix assemble_matrix(const LocalHamiltonian& h) {
  check_capacity(h.n(), "hamiltonian");
  const Eigen::Index d = Eigen::Index{1} << h.n();
  Matrix out = Matrix::Zero(d, d);
  for (const auto& t : h.terms()) {
    const auto idx = subsystem_index(h.n(), t.support);
    const auto s = static_cast<Eigen::Index>(idx.local.size());
    const Matrix& m = t.matrix.matrix();
    for (auto e : idx.rest)
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b)
          out(idx.local[static_cast<std::size_t>(a)] + e, idx.local[static_cast<std::size_t>(b)] + e) += m(a, b);
  }
  return out;
}

inline HermitianOp assemble(const LocalHamiltonian& h) { return HermitianOp(assemble_matrix(h)); }

inline QubitSet full_support(int n) {
  QubitSet s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

/// tr[H xi] for a state on all n qubits.
inline double energy(const LocalHamiltonian& h, const DensityMatrix& xi) {
  if (xi.support() != full_support(h.n())) {
    throw DomainError("hamiltonian: energy needs a state on all " + std::to_string(h.n()) + " qubits, got support " +
                      detail::join(xi.support()));
  }
  double e = 0.0;
  for (const auto& t : h.terms()) {
    const Matrix r = partial_trace(xi.matrix(), h.n(), t.support);
    e += (t.matrix.matrix() * r).trace().real();
  }
  return e;
}

/// Sum over terms of the largest term energy among all supplied marginals
/// whose support contains the term.
inline double energy_from_marginals(const LocalHamiltonian& h, const std::vector<DensityMatrix>& marginals) {
  double total = 0.0;
  for (std::size_t i = 0; i < h.terms().size(); ++i) {
    const auto& t = h.terms()[i];
    bool covered = false;
    double best = 0.0;
    for (const auto& rho : marginals) {
      if (!std::includes(rho.support().begin(), rho.support().end(), t.support.begin(), t.support.end())) continue;
      const auto pos = detail::positions_in(rho.support(), t.support, "hamiltonian");
      const Matrix r = partial_trace(rho.matrix(), rho.num_qubits(), pos);
      const double v = (t.matrix.matrix() * r).trace().real();
      best = covered ? std::max(best, v) : v;
      covered = true;
    }
    if (!covered) {
      throw DomainError("hamiltonian: term " + std::to_string(i) + " on " + detail::join(t.support) +
                        " is not covered by any marginal");
    }
    total += best;
  }
  return total;
}

inline double energy_from_marginals(const LocalHamiltonian& h, const std::map<QubitSet, DensityMatrix>& marginals) {
  std::vector<DensityMatrix> v;
  v.reserve(marginals.size());
  for (const auto& [s, rho] : marginals) v.push_back(rho);
  return energy_from_marginals(h, v);
}

struct SpectralSummary {
  double lambda0 = 0.0;
  double gap = 0.0;
  int ground_dim = 1;
};

inline SpectralSummary spectral_summary_of(const RealVector& ev) {
  SpectralSummary s;
  s.lambda0 = ev(0);
  s.ground_dim = 0;
  s.gap = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) - s.lambda0 <= kDegeneracyTol) {
      ++s.ground_dim;
    } else {
      s.gap = ev(i) - s.lambda0;
      break;
    }
  }
  return s;
}

inline SpectralSummary spectral_summary(const LocalHamiltonian& h) {
  return spectral_summary_of(hermitian_eigenvalues(assemble_matrix(h)));
}

}  // namespace qmasearch
