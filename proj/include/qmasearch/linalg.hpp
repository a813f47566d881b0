#pragma once

// Dense complex Hermitian linear algebra on labelled qubit registers.
//
// Conventions used throughout the library:
//   * qubit 0 is the most significant bit of a computational-basis index;
//   * a DensityMatrix on support {i_1 < ... < i_s} orders its tensor factors
//     by increasing qubit label;
//   * distances are the un-halved trace norm ||rho - sigma||_1 unless a
//     function name says otherwise.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qmasearch/errors.hpp"

namespace qmasearch {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using QubitSet = std::vector<int>;
using Rng = std::mt19937_64;

/// Largest register the dense routines accept.
inline constexpr int kMaxQubits = 12;
/// Eigenvalues above this negative floor are treated as zero.
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;

namespace detail {

inline bool is_power_of_two(Eigen::Index d) { return d >= 1 && (d & (d - 1)) == 0; }

inline int log2_dim(Eigen::Index d) {
  int s = 0;
  while ((Eigen::Index{1} << s) < d) ++s;
  return s;
}

inline std::string join(const std::vector<int>& v) {
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out + "}";
}

}  // namespace detail

/// Throws unless `s` is strictly increasing with entries in [0, n).
inline void validate_qubit_set(const QubitSet& s, int n, const char* module = "linalg") {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] >= n) {
      throw DomainError(std::string(module) + ": qubit index " + std::to_string(s[i]) +
                        " out of range for " + std::to_string(n) + " qubits");
    }
    if (i && s[i] <= s[i - 1]) {
      throw DomainError(std::string(module) + ": qubit set " + detail::join(s) +
                        " is not sorted and distinct");
    }
  }
}

/// Basis-index offsets for a bipartition of an n-qubit register into the
/// qubits at `positions` (in the given order, first = most significant) and
/// the remaining qubits (in increasing order). Every basis index is uniquely
/// `local[a] + rest[e]`.
struct SubsystemIndex {
  std::vector<Eigen::Index> local;
  std::vector<Eigen::Index> rest;
};

inline SubsystemIndex subsystem_index(int n, const std::vector<int>& positions) {
  const int k = static_cast<int>(positions.size());
  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  for (int p : positions) kept[static_cast<std::size_t>(p)] = true;
  std::vector<int> others;
  for (int q = 0; q < n; ++q)
    if (!kept[static_cast<std::size_t>(q)]) others.push_back(q);

  auto offsets = [n](const std::vector<int>& qubits) {
    const int m = static_cast<int>(qubits.size());
    std::vector<Eigen::Index> out(std::size_t{1} << m, 0);
    for (std::size_t v = 0; v < out.size(); ++v) {
      Eigen::Index off = 0;
      for (int b = 0; b < m; ++b) {
        if ((v >> (m - 1 - b)) & 1U) off |= Eigen::Index{1} << (n - 1 - qubits[static_cast<std::size_t>(b)]);
      }
      out[v] = off;
    }
    return out;
  };
  (void)k;
  return SubsystemIndex{offsets(positions), offsets(others)};
}

/// Partial trace of an arbitrary (not necessarily Hermitian) 2^n x 2^n matrix
/// onto the qubits at `keep` (positions in the register, output ordered as given).
inline Matrix partial_trace(const Matrix& m, int n, const std::vector<int>& keep) {
  const auto idx = subsystem_index(n, keep);
  const auto s = static_cast<Eigen::Index>(idx.local.size());
  Matrix out = Matrix::Zero(s, s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) {
      Complex acc = 0.0;
      const auto ra = idx.local[static_cast<std::size_t>(a)];
      const auto cb = idx.local[static_cast<std::size_t>(b)];
      for (auto e : idx.rest) acc += m(ra + e, cb + e);
      out(a, b) = acc;
    }
  }
  return out;
}

/// local (on the qubits at `positions`) tensored with the identity elsewhere.
inline Matrix embed(const Matrix& local, int n, const std::vector<int>& positions) {
  const auto idx = subsystem_index(n, positions);
  const Eigen::Index d = Eigen::Index{1} << n;
  Matrix out = Matrix::Zero(d, d);
  const auto s = static_cast<Eigen::Index>(idx.local.size());
  for (auto e : idx.rest)
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b) {
        const Complex v = local(a, b);
        if (v != Complex(0.0)) out(idx.local[static_cast<std::size_t>(a)] + e, idx.local[static_cast<std::size_t>(b)] + e) = v;
      }
  return out;
}

// ---------------------------------------------------------------------------

/// Hermitian operator on 2^s dimensions. Construction symmetrizes the input;
/// inputs that are visibly non-Hermitian are rejected.
class HermitianOp {
 public:
  HermitianOp() : m_(Matrix::Zero(1, 1)) {}

  explicit HermitianOp(const Matrix& m) {
    if (m.rows() != m.cols() || !detail::is_power_of_two(m.rows())) {
      throw DomainError("linalg: Hermitian operator must be square with power-of-two dimension, got " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    const double skew = (m - m.adjoint()).norm();
    if (skew > 1e-8 * std::max(1.0, m.norm())) {
      throw DomainError("linalg: matrix is not Hermitian (||A - A^dag||_F = " + std::to_string(skew) + ")");
    }
    m_ = 0.5 * (m + m.adjoint());
  }

  static HermitianOp zero(int num_qubits) {
    const Eigen::Index d = Eigen::Index{1} << num_qubits;
    return HermitianOp(Matrix::Zero(d, d));
  }
  static HermitianOp identity(int num_qubits) {
    const Eigen::Index d = Eigen::Index{1} << num_qubits;
    return HermitianOp(Matrix::Identity(d, d));
  }

  Eigen::Index dim() const { return m_.rows(); }
  int num_qubits() const { return detail::log2_dim(m_.rows()); }
  const Matrix& matrix() const { return m_; }

  HermitianOp operator+(const HermitianOp& o) const { return HermitianOp(Matrix(m_ + o.m_)); }
  HermitianOp operator*(double c) const { return HermitianOp(Matrix(c * m_)); }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  RealVector values;  // ascending
  Matrix vectors;     // orthonormal columns
};

inline EigenDecomposition hermitian_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw SolverFailure("linalg: Hermitian eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline EigenDecomposition hermitian_eig(const HermitianOp& a) { return hermitian_eig(a.matrix()); }

inline RealVector hermitian_eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverFailure("linalg: Hermitian eigensolver did not converge");
  return es.eigenvalues();
}

/// Spectral norm of a Hermitian operator.
inline double operator_norm(const HermitianOp& a) {
  const RealVector ev = hermitian_eigenvalues(a.matrix());
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
inline double trace_norm(const Matrix& hermitian) {
  if (hermitian.rows() == 2) {
    const double a = hermitian(0, 0).real(), d = hermitian(1, 1).real();
    const double r = std::hypot(0.5 * (a - d), std::abs(hermitian(0, 1)));
    const double m = 0.5 * (a + d);
    return std::abs(m + r) + std::abs(m - r);
  }
  return hermitian_eigenvalues(hermitian).cwiseAbs().sum();
}

// ---------------------------------------------------------------------------

/// Unit-trace PSD operator on a labelled set of qubits.
class DensityMatrix {
 public:
  DensityMatrix(QubitSet support, const Matrix& m) : DensityMatrix(std::move(support), HermitianOp(m)) {}

  DensityMatrix(QubitSet support, HermitianOp op) : support_(std::move(support)), op_(std::move(op)) {
    validate_qubit_set(support_, support_.empty() ? 0 : support_.back() + 1);
    if (op_.dim() != (Eigen::Index{1} << support_.size())) {
      throw DomainError("linalg: density matrix dimension " + std::to_string(op_.dim()) +
                        " does not match support " + detail::join(support_));
    }
    const double tr = op_.matrix().trace().real();
    if (std::abs(tr - 1.0) > kTraceTol) {
      throw DomainError("linalg: density matrix trace is " + std::to_string(tr) + ", expected 1");
    }
    auto eig = hermitian_eig(op_);
    if (eig.values(0) < -kPsdTol) {
      throw DomainError("linalg: density matrix has eigenvalue " + std::to_string(eig.values(0)));
    }
    if (eig.values(0) < 0.0) {
      RealVector clipped = eig.values.cwiseMax(0.0);
      clipped /= clipped.sum();
      op_ = HermitianOp(Matrix(eig.vectors * clipped.asDiagonal() * eig.vectors.adjoint()));
    }
  }

  static DensityMatrix pure(QubitSet support, const Vector& psi) {
    const Vector v = psi / psi.norm();
    return DensityMatrix(std::move(support), Matrix(v * v.adjoint()));
  }

  static DensityMatrix basis(QubitSet support, Eigen::Index index) {
    const Eigen::Index d = Eigen::Index{1} << support.size();
    Vector v = Vector::Zero(d);
    v(index) = 1.0;
    return pure(std::move(support), v);
  }

  static DensityMatrix maximally_mixed(QubitSet support) {
    const Eigen::Index d = Eigen::Index{1} << support.size();
    return DensityMatrix(std::move(support), Matrix(Matrix::Identity(d, d) / static_cast<double>(d)));
  }

  const QubitSet& support() const { return support_; }
  const HermitianOp& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }
  int num_qubits() const { return static_cast<int>(support_.size()); }

 private:
  QubitSet support_;
  HermitianOp op_;
};

/// Normalized state vector on 2^s dimensions.
class PureState {
 public:
  explicit PureState(Vector amplitudes) : amps_(std::move(amplitudes)) {
    if (!detail::is_power_of_two(amps_.size())) {
      throw DomainError("linalg: pure state length " + std::to_string(amps_.size()) + " is not a power of two");
    }
    if (std::abs(amps_.norm() - 1.0) > 1e-10) {
      throw DomainError("linalg: pure state norm is " + std::to_string(amps_.norm()));
    }
  }

  static PureState normalized(const Vector& v) { return PureState(v / v.norm()); }

  Eigen::Index dim() const { return amps_.size(); }
  int num_qubits() const { return detail::log2_dim(amps_.size()); }
  const Vector& amplitudes() const { return amps_; }

  DensityMatrix density(QubitSet support) const { return DensityMatrix(std::move(support), Matrix(amps_ * amps_.adjoint())); }
  DensityMatrix density() const {
    QubitSet s(static_cast<std::size_t>(num_qubits()));
    std::iota(s.begin(), s.end(), 0);
    return density(std::move(s));
  }

 private:
  Vector amps_;
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> positions_in(const QubitSet& support, const QubitSet& keep, const char* module) {
  std::vector<int> pos;
  pos.reserve(keep.size());
  for (int q : keep) {
    auto it = std::lower_bound(support.begin(), support.end(), q);
    if (it == support.end() || *it != q) {
      throw DomainError(std::string(module) + ": qubit " + std::to_string(q) + " is not in support " + join(support));
    }
    pos.push_back(static_cast<int>(it - support.begin()));
  }
  return pos;
}

}  // namespace detail

/// Reduced state on `keep`, which must be a sorted subset of rho's support.
inline DensityMatrix partial_trace(const DensityMatrix& rho, const QubitSet& keep) {
  validate_qubit_set(keep, rho.support().empty() ? 0 : rho.support().back() + 1);
  if (keep == rho.support()) return rho;
  const auto pos = detail::positions_in(rho.support(), keep, "linalg");
  return DensityMatrix(keep, partial_trace(rho.matrix(), rho.num_qubits(), pos));
}

inline double trace_norm_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.support() != sigma.support()) {
    throw DomainError("linalg: trace distance between supports " + detail::join(rho.support()) + " and " +
                      detail::join(sigma.support()));
  }
  return trace_norm(rho.matrix() - sigma.matrix());
}

/// Squared Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.support() != sigma.support()) {
    throw DomainError("linalg: fidelity between supports " + detail::join(rho.support()) + " and " +
                      detail::join(sigma.support()));
  }
  // Eigenvalues at round-off level are zeroed before square roots are taken.
  constexpr double kFloor = 1e-13;
  const auto er = hermitian_eig(rho.matrix());
  const RealVector sq = er.values.unaryExpr([](double v) { return v > kFloor ? std::sqrt(v) : 0.0; });
  const Matrix root = er.vectors * sq.asDiagonal() * er.vectors.adjoint();
  const Matrix inner = root * sigma.matrix() * root;
  const RealVector ev = hermitian_eigenvalues(Matrix(0.5 * (inner + inner.adjoint())));
  const double f = ev.unaryExpr([](double v) { return v > kFloor ? std::sqrt(v) : 0.0; }).sum();
  return std::clamp(f * f, 0.0, 1.0);
}

/// |<psi|phi>|^2.
inline double overlap(const PureState& psi, const PureState& phi) {
  if (psi.dim() != phi.dim()) throw DomainError("linalg: overlap between states of different dimension");
  return std::norm(psi.amplitudes().dot(phi.amplitudes()));
}

/// Haar-distributed unitary from the QR decomposition of a complex Ginibre
/// matrix with the phases of R's diagonal divided out.
inline Matrix haar_unitary(Eigen::Index d, Rng& rng) {
  if (d < 1) throw DomainError("linalg: Haar unitary dimension must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = Complex(normal(rng), normal(rng)) * std::sqrt(0.5);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Complex rjj = r(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= (mag > 0.0 ? rjj / mag : Complex(1.0));
  }
  return q;
}

inline PureState random_pure_state(Eigen::Index d, Rng& rng) { return PureState::normalized(haar_unitary(d, rng).col(0)); }

/// Hilbert-Schmidt random density matrix (reduction of a Haar pure state with
/// an environment of equal dimension).
inline DensityMatrix random_density(QubitSet support, Rng& rng) {
  const Eigen::Index d = Eigen::Index{1} << support.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = Complex(normal(rng), normal(rng));
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(support), rho);
}

/// Euclidean projection of a vector onto the probability simplex.
inline RealVector project_to_simplex(const RealVector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Nearest unit-trace PSD matrix (in Frobenius norm): eigenvalues are
/// projected onto the simplex, eigenvectors are kept.
inline DensityMatrix project_to_density(const HermitianOp& a, QubitSet support) {
  const auto eig = hermitian_eig(a);
  const RealVector p = project_to_simplex(eig.values);
  return DensityMatrix(std::move(support), Matrix(eig.vectors * p.asDiagonal() * eig.vectors.adjoint()));
}

inline DensityMatrix project_to_density(const HermitianOp& a) {
  QubitSet s(static_cast<std::size_t>(a.num_qubits()));
  std::iota(s.begin(), s.end(), 0);
  return project_to_density(a, std::move(s));
}

/// term (acting on `support`) tensored with the identity on the rest of an
/// n-qubit register.
inline HermitianOp embed_local(const HermitianOp& term, const QubitSet& support, int n) {
  if (n > kMaxQubits) throw CapacityError("linalg: " + std::to_string(n) + " qubits exceeds dense ceiling");
  validate_qubit_set(support, n);
  if (term.dim() != (Eigen::Index{1} << support.size())) {
    throw DomainError("linalg: term dimension " + std::to_string(term.dim()) + " does not match support " +
                      detail::join(support));
  }
  return HermitianOp(embed(term.matrix(), n, support));
}

/// A (x) B with A acting on the more significant factor.
inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

/// psi <- (U on the qubits at `positions`) psi, in place, for an n-qubit vector.
inline void apply_local(Vector& psi, const Matrix& U, int n, const std::vector<int>& positions) {
  const auto idx = subsystem_index(n, positions);
  const auto s = static_cast<Eigen::Index>(idx.local.size());
  Vector buf(s);
  for (auto e : idx.rest) {
    for (Eigen::Index a = 0; a < s; ++a) buf(a) = psi(idx.local[static_cast<std::size_t>(a)] + e);
    const Vector out = U * buf;
    for (Eigen::Index a = 0; a < s; ++a) psi(idx.local[static_cast<std::size_t>(a)] + e) = out(a);
  }
}

/// Pauli matrices I, X, Y, Z.
inline Matrix pauli(int which) {
  Matrix p(2, 2);
  switch (which) {
    case 0: p << 1, 0, 0, 1; break;
    case 1: p << 0, 1, 1, 0; break;
    case 2: p << 0, Complex(0, -1), Complex(0, 1), 0; break;
    default: p << 1, 0, 0, -1; break;
  }
  return p;
}

/// Single-qubit state with Bloch vector r (|r| <= 1).
inline Matrix bloch_density(double x, double y, double z) {
  return 0.5 * (pauli(0) + x * pauli(1) + y * pauli(2) + z * pauli(3));
}

}  // namespace qmasearch
