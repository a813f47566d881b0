#pragma once

// Certified solver for
//
//   v(b) = min { max_j ||tr_{not C_j} xi - rho_j||_1 : xi density matrix, tr[H xi] <= b }.
//
// The problem is written as a complex semidefinite program
//
//   min t  s.t.  tr xi = 1,  tr[H xi] + s = b,
//                tr_{not C_j} xi - P_j + N_j = rho_j,
//                tr P_j + tr N_j + u_j = t,
//                xi, P_j, N_j >= 0,  s, u_j, t >= 0
//
// and solved by an infeasible primal-dual interior-point method (HKM search
// direction, Mehrotra predictor-corrector). Iterates are never trusted
// directly: every iteration produces
//   * an upper bound, from rounding the xi block to an exactly feasible
//     density matrix and evaluating the objective on it;
//   * a lower bound, from the Lagrange dual function evaluated at the
//     rescaled dual iterate.
// The solver stops once the two bounds are within tol of each other or on the
// same side of a caller-supplied threshold.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "qmasearch/hamiltonian.hpp"

namespace qmasearch {

/// Dense Hamiltonian with its exact ground data, shared by many queries.
struct PreparedHamiltonian {
  int n = 0;
  int m = 0;
  bool has_terms = false;
  Matrix H;
  RealVector spectrum;
  Matrix vectors;  // eigenvectors, columns in ascending order of energy
  Vector ground;
  double lambda0 = 0.0;

  static PreparedHamiltonian from(const LocalHamiltonian& h) {
    check_capacity(h.n(), "oracle");
    PreparedHamiltonian p;
    p.n = h.n();
    p.m = h.m();
    p.has_terms = h.m() > 0;
    p.H = assemble_matrix(h);
    const auto eig = hermitian_eig(p.H);
    p.spectrum = eig.values;
    p.vectors = eig.vectors;
    p.ground = eig.vectors.col(0);
    p.lambda0 = eig.values(0);
    return p;
  }

  Eigen::Index dim() const { return H.rows(); }
  /// Energy bounds this far below lambda0 are treated as lambda0 itself.
  double feasibility_slack() const { return 1e-11 * std::max(1, m); }
};

namespace sdp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Lagrange dual certificate: for every target family on the same supports
/// and every energy bound b,
///   v(b) >= max(0, (lambda_min - mu (b - shift) - sum_j tr[Y_j rho_j]) / max(1, weight)),
/// where lambda_min = lambda_min(mu (H - shift) + sum_j Y_j (x) I). The shift
/// is lambda0; it keeps mu lambda0 from cancelling against mu b when mu is large.
///
/// A certificate with ground_gap > 0 bounds the problem restricted to the
/// ground space G (lambda_min is then taken on G and mu = 0). A state of
/// energy <= b has weight >= 1 - (b - lambda0)/ground_gap on G, so it lies
/// within 2 sqrt((b - lambda0)/ground_gap) of a state on G, and that margin is
/// subtracted.
struct DualCertificate {
  double lambda_min = 0.0;
  double mu = 0.0;
  double shift = 0.0;
  double weight = 0.0;
  double ground_gap = 0.0;
  std::vector<Matrix> Y;

  double lower_bound(double bound, const std::vector<Matrix>& targets) const {
    double g = lambda_min - mu * (bound - shift);
    for (std::size_t j = 0; j < Y.size(); ++j) g -= (Y[j].cwiseProduct(targets[j].transpose())).sum().real();
    double v = g / std::max(1.0, weight);
    if (ground_gap > 0.0) v -= 2.0 * std::sqrt(std::max(0.0, bound - shift) / ground_gap);
    return std::max(0.0, v);
  }
};

struct Options {
  double tol = 1e-6;
  int max_iterations = 120;
  /// Stop as soon as the certified interval lies on one side of this value.
  std::optional<double> threshold;
};

struct Result {
  double lower = 0.0;
  double upper = kInfinity;
  bool infeasible = false;
  Matrix witness;  // density matrix attaining `upper`, energy <= bound
  double witness_energy = 0.0;
  DualCertificate certificate;
  int iterations = 0;
};

/// max_j ||tr_{not C_j} xi - rho_j||_1 for a state xi on n qubits.
inline double max_marginal_distance(const Matrix& xi, int n, const std::vector<QubitSet>& supports,
                                    const std::vector<Matrix>& targets) {
  double worst = 0.0;
  for (std::size_t j = 0; j < supports.size(); ++j) {
    const Matrix r = partial_trace(xi, n, supports[j]);
    worst = std::max(worst, trace_norm(Matrix(0.5 * (r + r.adjoint()) - targets[j])));
  }
  return worst;
}

namespace detail {

/// Orthonormal Hermitian basis of s x s matrices under <A,B> = Re tr[AB].
/// Row r holds B_r in row-major order.
inline Matrix hermitian_basis(Eigen::Index s) {
  const Eigen::Index s2 = s * s;
  Matrix bm = Matrix::Zero(s2, s2);
  const double h = std::sqrt(0.5);
  Eigen::Index r = 0;
  for (Eigen::Index a = 0; a < s; ++a) bm(r++, a * s + a) = 1.0;
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index c = a + 1; c < s; ++c) {
      bm(r, a * s + c) = h;
      bm(r, c * s + a) = h;
      ++r;
      bm(r, a * s + c) = Complex(0.0, h);
      bm(r, c * s + a) = Complex(0.0, -h);
      ++r;
    }
  return bm;
}

/// c_r = Re tr[B_r R].
inline RealVector basis_coeffs(const Matrix& bm, const Matrix& R) {
  const Eigen::Index s = R.rows();
  Vector v(s * s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b) v(a * s + b) = R(b, a);
  return (bm * v).real();
}

/// sum_r y_r B_r.
inline Matrix basis_combine(const Matrix& bm, const RealVector& y) {
  const auto s = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(bm.rows()))));
  const Vector v = bm.transpose() * y.cast<Complex>();
  Matrix out(s, s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b) out(a, b) = v(a * s + b);
  return out;
}

inline Matrix ptrace(const Matrix& Y, const SubsystemIndex& idx) {
  const auto s = static_cast<Eigen::Index>(idx.local.size());
  Matrix out(s, s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index b = 0; b < s; ++b) {
      Complex acc = 0.0;
      const auto ra = idx.local[static_cast<std::size_t>(a)];
      const auto cb = idx.local[static_cast<std::size_t>(b)];
      for (auto e : idx.rest) acc += Y(ra + e, cb + e);
      out(a, b) = acc;
    }
  return out;
}

inline void embed_add(Matrix& Y, const Matrix& local, const SubsystemIndex& idx) {
  const auto s = static_cast<Eigen::Index>(idx.local.size());
  for (auto e : idx.rest)
    for (Eigen::Index a = 0; a < s; ++a)
      for (Eigen::Index b = 0; b < s; ++b)
        Y(idx.local[static_cast<std::size_t>(a)] + e, idx.local[static_cast<std::size_t>(b)] + e) += local(a, b);
}

inline double re_tr_prod(const Matrix& A, const Matrix& B) { return (A.cwiseProduct(B.transpose())).sum().real(); }

inline Matrix herm(const Matrix& A) { return 0.5 * (A + A.adjoint()); }

struct Blocks {
  Matrix xi;
  std::vector<Matrix> P, N;
  RealVector lp;

  Blocks& axpy(double a, const Blocks& o) {
    xi += a * o.xi;
    for (std::size_t j = 0; j < P.size(); ++j) {
      P[j] += a * o.P[j];
      N[j] += a * o.N[j];
    }
    lp += a * o.lp;
    return *this;
  }
};

inline double inner(const Blocks& a, const Blocks& b) {
  double v = re_tr_prod(a.xi, b.xi) + a.lp.dot(b.lp);
  for (std::size_t j = 0; j < a.P.size(); ++j) v += re_tr_prod(a.P[j], b.P[j]) + re_tr_prod(a.N[j], b.N[j]);
  return v;
}

template <class F>
Blocks map_blocks(const Blocks& a, F f) {
  Blocks out;
  out.xi = f(a.xi);
  for (std::size_t j = 0; j < a.P.size(); ++j) {
    out.P.push_back(f(a.P[j]));
    out.N.push_back(f(a.N[j]));
  }
  out.lp = a.lp;
  return out;
}

/// Blockwise herm(A B C); the LP part is the elementwise product.
inline Blocks herm_product(const Blocks& A, const Blocks& B, const Blocks& C) {
  Blocks out;
  out.xi = herm(A.xi * B.xi * C.xi);
  for (std::size_t j = 0; j < A.P.size(); ++j) {
    out.P.push_back(herm(A.P[j] * B.P[j] * C.P[j]));
    out.N.push_back(herm(A.N[j] * B.N[j] * C.N[j]));
  }
  out.lp = A.lp.cwiseProduct(B.lp).cwiseProduct(C.lp);
  return out;
}

inline Matrix hpd_inverse(const Matrix& A) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw SolverFailure("oracle: interior-point iterate lost positive definiteness");
  return herm(llt.solve(Matrix::Identity(A.rows(), A.cols())));
}

/// Largest a with X + a dX >= 0 (infinity if unbounded).
inline double max_step(const Blocks& X, const Blocks& dX) {
  double step = kInfinity;
  auto block = [&step](const Matrix& x, const Matrix& dx) {
    Eigen::LLT<Matrix> llt(x);
    if (llt.info() != Eigen::Success) throw SolverFailure("oracle: interior-point iterate lost positive definiteness");
    const Matrix L = llt.matrixL();
    const Matrix t1 = L.triangularView<Eigen::Lower>().solve(dx);
    const Matrix t2 = L.triangularView<Eigen::Lower>().solve(Matrix(t1.adjoint())).adjoint();
    const double lmin = hermitian_eigenvalues(herm(t2))(0);
    if (lmin < 0.0) step = std::min(step, -1.0 / lmin);
  };
  block(X.xi, dX.xi);
  for (std::size_t j = 0; j < X.P.size(); ++j) {
    block(X.P[j], dX.P[j]);
    block(X.N[j], dX.N[j]);
  }
  for (Eigen::Index i = 0; i < X.lp.size(); ++i)
    if (dX.lp(i) < 0.0) step = std::min(step, -X.lp(i) / dX.lp(i));
  return step;
}

struct Group {
  SubsystemIndex idx;
  Eigen::Index s = 1;
  Matrix basis;
  Eigen::Index offset = 0;
};

class InteriorPoint {
 public:
  /// With `ground` set, xi is restricted to V X V^dagger for the columns V of
  /// the ground space and the energy constraint is dropped.
  InteriorPoint(const PreparedHamiltonian& ph, double bound, const std::vector<QubitSet>& supports,
                const std::vector<Matrix>& targets, std::optional<Eigen::Index> ground = std::nullopt)
      : ph_(ph), bound_(bound), supports_(supports), targets_(targets) {
    n_ = ph.n;
    d_ = ph.dim();
    dx_ = d_;
    energy_ = ph.has_terms;
    if (ground) {
      restricted_ = true;
      energy_ = false;
      dx_ = *ground;
      V_ = ph.vectors.leftCols(dx_);
      ground_gap_ = dx_ < d_ ? ph.spectrum(dx_) - ph.lambda0 : kInfinity;
    }
    l_ = supports.size();

    Eigen::Index row = 0;
    groups_.push_back(Group{subsystem_index(n_, {}), 1, hermitian_basis(1), row});
    row += 1;
    for (const auto& c : supports) {
      const auto s = Eigen::Index{1} << c.size();
      groups_.push_back(Group{subsystem_index(n_, c), s, hermitian_basis(s), row});
      row += s * s;
    }
    energy_row_ = energy_ ? row++ : -1;
    link0_ = row;
    m_ = row + static_cast<Eigen::Index>(l_);

    lp_sigma_ = energy_ ? 0 : -1;
    lp_u0_ = energy_ ? 1 : 0;
    lp_t_ = lp_u0_ + static_cast<Eigen::Index>(l_);
    lp_size_ = lp_t_ + 1;

    nu_ = static_cast<double>(dx_ + lp_size_);
    for (std::size_t j = 0; j < l_; ++j) nu_ += 2.0 * static_cast<double>(groups_[j + 1].s);

    b_ = RealVector::Zero(m_);
    b_(0) = 1.0;
    for (std::size_t j = 0; j < l_; ++j) {
      const auto& g = groups_[j + 1];
      b_.segment(g.offset, g.s * g.s) = basis_coeffs(g.basis, targets_[j]);
    }
    if (energy_) b_(energy_row_) = bound_;
  }

  Result run(const Options& opt) {
    Blocks X = identity_blocks(1.0);
    X.xi /= static_cast<double>(dx_);
    Blocks Z = identity_blocks(1.0);
    RealVector y = RealVector::Zero(m_);
    Blocks C = zero_blocks();
    C.lp(lp_t_) = 1.0;

    Result res;
    res.upper = kInfinity;
    res.lower = 0.0;
    double gamma = 0.9;

    for (int it = 1; it <= opt.max_iterations; ++it) {
      res.iterations = it;
      // Late iterates can become numerically singular; the certified bracket
      // gathered so far is then the final answer.
      try {
      Blocks W_lp = map_blocks(Z, hpd_inverse);
      W_lp.lp = Z.lp.cwiseInverse();

      Blocks Rd = C;
      Rd.axpy(-1.0, adjoint(y)).axpy(-1.0, Z);
      const double mu = inner(X, Z) / nu_;

      const Eigen::MatrixXd M = schur(X, W_lp);
      Eigen::LLT<Eigen::MatrixXd> llt(M);
      const bool chol_ok = llt.info() == Eigen::Success;
      Eigen::LDLT<Eigen::MatrixXd> ldlt;
      if (!chol_ok) ldlt.compute(M);
      auto solve = [&](const RealVector& rhs) -> RealVector {
        RealVector s = chol_ok ? RealVector(llt.solve(rhs)) : RealVector(ldlt.solve(rhs));
        if (!s.allFinite()) throw SolverFailure("oracle: Schur complement system is singular");
        return s;
      };

      const RealVector base = b_ + apply(herm_product(X, Rd, W_lp));

      // Predictor.
      RealVector dy = solve(base);
      Blocks dZa = Rd;
      dZa.axpy(-1.0, adjoint(dy));
      Blocks dXa = herm_product(X, dZa, W_lp);
      dXa.axpy(1.0, X);
      dXa = scaled(dXa, -1.0);
      const double ap_aff = std::min(1.0, max_step(X, dXa));
      const double ad_aff = std::min(1.0, max_step(Z, dZa));
      Blocks Xa = X, Za = Z;
      Xa.axpy(ap_aff, dXa);
      Za.axpy(ad_aff, dZa);
      const double mu_aff = inner(Xa, Za) / nu_;
      const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

      // Corrector.
      const Blocks cross = herm_product(dXa, dZa, W_lp);
      const RealVector rhs = base - sigma * mu * apply(W_lp) + apply(cross);
      dy = solve(rhs);
      Blocks dZ = Rd;
      dZ.axpy(-1.0, adjoint(dy));
      Blocks dX = W_lp;
      dX = scaled(dX, sigma * mu);
      dX.axpy(-1.0, X).axpy(-1.0, herm_product(X, dZ, W_lp)).axpy(-1.0, cross);

      const double ap = std::min(1.0, gamma * max_step(X, dX));
      const double ad = std::min(1.0, gamma * max_step(Z, dZ));
      X.axpy(ap, dX);
      y += ad * dy;
      Z.axpy(ad, dZ);
      gamma = 0.9 + 0.09 * std::min(ap, ad);

      certify_upper(full(X.xi), res);
      certify_lower(y, res);

      if (res.upper - res.lower <= opt.tol) return res;
      if (opt.threshold && (res.upper <= *opt.threshold || res.lower >= *opt.threshold)) return res;
      if (inner(X, Z) / nu_ < 1e-15 && it > 5) break;
      } catch (const SolverFailure&) {
        if (it == 1) throw;
        break;
      }
    }
    if (res.upper - res.lower <= opt.tol) return res;
    if (opt.threshold && (res.upper <= *opt.threshold || res.lower >= *opt.threshold)) return res;
    throw SolverFailure("oracle: interior-point solver stalled with certified interval [" +
                        std::to_string(res.lower) + ", " + std::to_string(res.upper) + "] after " +
                        std::to_string(res.iterations) + " iterations");
  }

 private:
  Blocks zero_blocks() const {
    Blocks B;
    B.xi = Matrix::Zero(dx_, dx_);
    for (std::size_t j = 0; j < l_; ++j) {
      const auto s = groups_[j + 1].s;
      B.P.push_back(Matrix::Zero(s, s));
      B.N.push_back(Matrix::Zero(s, s));
    }
    B.lp = RealVector::Zero(lp_size_);
    return B;
  }

  Blocks identity_blocks(double c) const {
    Blocks B = zero_blocks();
    B.xi.diagonal().setConstant(c);
    for (std::size_t j = 0; j < l_; ++j) {
      B.P[j].diagonal().setConstant(c);
      B.N[j].diagonal().setConstant(c);
    }
    B.lp.setConstant(c);
    return B;
  }

  static Blocks scaled(const Blocks& a, double c) {
    Blocks out = map_blocks(a, [c](const Matrix& m) { return Matrix(c * m); });
    out.lp = c * a.lp;
    return out;
  }

  /// Constraint map A(Y) (Y need not be Hermitian; real parts are taken).
  RealVector apply(const Blocks& Y) const {
    RealVector out = RealVector::Zero(m_);
    const Matrix xi = full(Y.xi);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& G = groups_[g];
      RealVector c = basis_coeffs(G.basis, ptrace(xi, G.idx));
      if (g > 0) c += basis_coeffs(G.basis, Y.N[g - 1]) - basis_coeffs(G.basis, Y.P[g - 1]);
      out.segment(G.offset, G.s * G.s) = c;
    }
    if (energy_) out(energy_row_) = re_tr_prod(ph_.H, xi) + Y.lp(lp_sigma_);
    for (std::size_t j = 0; j < l_; ++j) {
      out(link0_ + static_cast<Eigen::Index>(j)) = Y.P[j].trace().real() + Y.N[j].trace().real() +
                                                   Y.lp(lp_u0_ + static_cast<Eigen::Index>(j)) - Y.lp(lp_t_);
    }
    return out;
  }

  Blocks adjoint(const RealVector& y) const {
    Blocks out = zero_blocks();
    Matrix xi = Matrix::Zero(d_, d_);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& G = groups_[g];
      const Matrix local = basis_combine(G.basis, y.segment(G.offset, G.s * G.s));
      embed_add(xi, local, G.idx);
      if (g > 0) {
        const double yl = y(link0_ + static_cast<Eigen::Index>(g - 1));
        const Matrix id = Matrix::Identity(G.s, G.s);
        out.P[g - 1] = -local + yl * id;
        out.N[g - 1] = local + yl * id;
        out.lp(lp_u0_ + static_cast<Eigen::Index>(g - 1)) = yl;
        out.lp(lp_t_) -= yl;
      }
    }
    if (energy_) {
      xi += y(energy_row_) * ph_.H;
      out.lp(lp_sigma_) = y(energy_row_);
    }
    out.xi = reduce(xi);
    return out;
  }

  /// G[(a,b),(c,c')] = tr[E_ab(x)I  X  E_cc'(x)I  W] for two subsystem groups.
  static Matrix gtensor(const Matrix& X, const Matrix& W, const Group& g, const Group& h) {
    const Eigen::Index sg = g.s, sh = h.s;
    Matrix out(sg * sg, sh * sh);
    const auto& lg = g.idx.local;
    const auto& lh = h.idx.local;
    const auto& rg = g.idx.rest;
    const auto& rh = h.idx.rest;
    for (Eigen::Index be = 0; be < sg; ++be)
      for (Eigen::Index ga = 0; ga < sh; ++ga)
        for (Eigen::Index gp = 0; gp < sh; ++gp)
          for (Eigen::Index al = 0; al < sg; ++al) {
            Complex acc = 0.0;
            const auto xr = lg[static_cast<std::size_t>(be)];
            const auto xc = lh[static_cast<std::size_t>(ga)];
            const auto wr = lh[static_cast<std::size_t>(gp)];
            const auto wc = lg[static_cast<std::size_t>(al)];
            for (auto m : rg)
              for (auto f : rh) acc += X(xr + m, xc + f) * W(wr + f, wc + m);
            out(al * sg + be, ga * sh + gp) = acc;
          }
    return out;
  }

  Eigen::MatrixXd schur(const Blocks& X, const Blocks& W) const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m_, m_);
    const Matrix Xs = full(X.xi);
    const Matrix Ws = full(W.xi);
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (std::size_t h = g; h < groups_.size(); ++h) {
        const auto& G = groups_[g];
        const auto& Hh = groups_[h];
        const Matrix K = gtensor(Xs, Ws, G, Hh);
        const Eigen::MatrixXd blk = (G.basis * K * Hh.basis.transpose()).real();
        M.block(G.offset, Hh.offset, blk.rows(), blk.cols()) += blk;
        if (h != g) M.block(Hh.offset, G.offset, blk.cols(), blk.rows()) += blk.transpose();
      }
    if (energy_) {
      const Matrix HX = ph_.H * Xs;
      const Matrix WHX = Ws * HX;
      for (const auto& G : groups_) {
        const RealVector c = basis_coeffs(G.basis, ptrace(WHX, G.idx));
        M.block(energy_row_, G.offset, 1, c.size()) += c.transpose();
        M.block(G.offset, energy_row_, c.size(), 1) += c;
      }
      M(energy_row_, energy_row_) += re_tr_prod(HX, Matrix(ph_.H * Ws)) + X.lp(lp_sigma_) * W.lp(lp_sigma_);
    }
    const double tt = X.lp(lp_t_) * W.lp(lp_t_);
    for (std::size_t j = 0; j < l_; ++j) {
      const auto& G = groups_[j + 1];
      const Eigen::Index s = G.s;
      const Matrix &XP = X.P[j], &XN = X.N[j], &WP = W.P[j], &WN = W.N[j];
      Matrix S(s * s, s * s);
      for (Eigen::Index al = 0; al < s; ++al)
        for (Eigen::Index be = 0; be < s; ++be)
          for (Eigen::Index ga = 0; ga < s; ++ga)
            for (Eigen::Index gp = 0; gp < s; ++gp)
              S(al * s + be, ga * s + gp) = XP(be, ga) * WP(gp, al) + XN(be, ga) * WN(gp, al);
      M.block(G.offset, G.offset, s * s, s * s) += (G.basis * S * G.basis.transpose()).real();
      const Eigen::Index lk = link0_ + static_cast<Eigen::Index>(j);
      const RealVector c = basis_coeffs(G.basis, Matrix(XN * WN - XP * WP));
      M.block(G.offset, lk, s * s, 1) += c;
      M.block(lk, G.offset, 1, s * s) += c.transpose();
      const Eigen::Index u = lp_u0_ + static_cast<Eigen::Index>(j);
      M(lk, lk) += re_tr_prod(XP, WP) + re_tr_prod(XN, WN) + X.lp(u) * W.lp(u);
      for (std::size_t k = 0; k < l_; ++k) M(lk, link0_ + static_cast<Eigen::Index>(k)) += tt;
    }
    return 0.5 * (M + M.transpose());
  }

  void certify_upper(const Matrix& xi_block, Result& res) const {
    const auto eig = hermitian_eig(herm(xi_block));
    const RealVector p = project_to_simplex(eig.values);
    Matrix xi = eig.vectors * p.asDiagonal() * eig.vectors.adjoint();
    double e = ph_.has_terms ? re_tr_prod(ph_.H, xi) : 0.0;
    const double target = std::max(ph_.lambda0, bound_ - 1e-13 * std::max(1, ph_.m));
    if (energy_ && e > target) {
      if (!lower_energy(xi, e, target)) return;
      if (e > bound_) return;
    }
    xi = herm(xi);
    const double v = max_marginal_distance(xi, n_, supports_, targets_);
    if (v < res.upper) {
      res.upper = v;
      res.witness = xi;
      res.witness_energy = e;
    }
  }

  /// Moves xi to xi_s = exp(-s H') xi exp(-s H') / Z with H' = H - lambda0,
  /// choosing s by bisection so that the energy drops to `target`. The energy
  /// of xi_s is non-increasing in s (its derivative is -2 Var_s(H)), and the
  /// marginals move far less than under mixing with the ground state when the
  /// excess energy is small. Falls back to that mixing when xi has no weight
  /// near the ground space.
  bool lower_energy(Matrix& xi, double& e, double target) const {
    if (e - ph_.lambda0 <= 0.0) return false;
    const Matrix& V = ph_.vectors;
    const Matrix rot = V.adjoint() * xi * V;
    const RealVector gap = (ph_.spectrum.array() - ph_.lambda0).cwiseMax(0.0).matrix();
    const RealVector p = rot.diagonal().real().cwiseMax(0.0);
    auto energy_at = [&](double s) {
      const RealVector w = (-2.0 * s * gap.array()).exp().matrix().cwiseProduct(p);
      const double z = w.sum();
      return z > 0.0 ? ph_.lambda0 + gap.dot(w) / z : kInfinity;
    };
    double lo = 0.0, hi = 1.0;
    while (energy_at(hi) > target && hi < 1e12) hi *= 4.0;
    if (energy_at(hi) <= target) {
      for (int k = 0; k < 100 && hi - lo > 1e-14 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (energy_at(mid) > target ? lo : hi) = mid;
      }
      const RealVector f = (-hi * gap.array()).exp().matrix();
      Matrix scaled = f.cast<Complex>().asDiagonal() * rot * f.cast<Complex>().asDiagonal();
      scaled /= scaled.trace().real();
      xi = herm(Matrix(V * scaled * V.adjoint()));
      e = re_tr_prod(ph_.H, xi);
      if (e <= target + 1e-15 * std::max(1.0, std::abs(target))) return true;
    }
    const double theta = std::min(1.0, (e - target) / (e - ph_.lambda0));
    xi = (1.0 - theta) * xi + theta * (ph_.ground * ph_.ground.adjoint());
    e = re_tr_prod(ph_.H, xi);
    return true;
  }

  void certify_lower(const RealVector& y, Result& res) const {
    DualCertificate cert;
    cert.mu = energy_ ? std::max(0.0, -y(energy_row_)) : 0.0;
    cert.shift = ph_.lambda0;
    if (restricted_) cert.ground_gap = ground_gap_;
    Matrix S = Matrix::Zero(d_, d_);
    if (energy_) {
      S = cert.mu * ph_.H;
      S.diagonal().array() -= cert.mu * ph_.lambda0;
    }
    for (std::size_t j = 0; j < l_; ++j) {
      const auto& G = groups_[j + 1];
      const Matrix Yj = -basis_combine(G.basis, y.segment(G.offset, G.s * G.s));
      const RealVector ev = hermitian_eigenvalues(herm(Yj));
      cert.weight += std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
      embed_add(S, Yj, G.idx);
      cert.Y.push_back(Yj);
    }
    cert.lambda_min = hermitian_eigenvalues(herm(reduce(S)))(0);
    const double lb = cert.lower_bound(bound_, targets_);
    if (res.certificate.Y.size() != l_ || lb > res.lower) {
      res.lower = std::max(res.lower, lb);
      res.certificate = std::move(cert);
    }
  }

  Matrix full(const Matrix& x) const { return restricted_ ? Matrix(V_ * x * V_.adjoint()) : x; }
  Matrix reduce(const Matrix& x) const { return restricted_ ? Matrix(V_.adjoint() * x * V_) : x; }

  const PreparedHamiltonian& ph_;
  double bound_;
  bool restricted_ = false;
  Matrix V_;
  double ground_gap_ = 0.0;
  Eigen::Index dx_ = 1;
  const std::vector<QubitSet>& supports_;
  const std::vector<Matrix>& targets_;
  int n_ = 0;
  Eigen::Index d_ = 1;
  bool energy_ = false;
  std::size_t l_ = 0;
  std::vector<Group> groups_;
  Eigen::Index energy_row_ = -1, link0_ = 0, m_ = 0;
  Eigen::Index lp_sigma_ = -1, lp_u0_ = 0, lp_t_ = 0, lp_size_ = 1;
  double nu_ = 1.0;
  RealVector b_;
};

}  // namespace detail

/// Certified bracket [lower, upper] on v(bound). Returns lower = upper = +inf
/// when no state has energy <= bound.
inline Result solve(const PreparedHamiltonian& ph, double bound, const std::vector<QubitSet>& supports,
                    const std::vector<Matrix>& targets, const Options& opt = {}) {
  if (supports.size() != targets.size()) throw DomainError("oracle: marginal supports and targets differ in length");
  for (std::size_t j = 0; j < supports.size(); ++j) {
    validate_qubit_set(supports[j], ph.n, "oracle");
    if (targets[j].rows() != (Eigen::Index{1} << supports[j].size()))
      throw DomainError("oracle: marginal " + std::to_string(j) + " has the wrong dimension for its support");
  }
  Result res;
  if (bound < ph.lambda0 - ph.feasibility_slack()) {
    res.infeasible = true;
    res.lower = res.upper = kInfinity;
    return res;
  }
  const double b = std::max(bound, ph.lambda0);
  if (supports.empty()) {
    res.lower = res.upper = 0.0;
    res.witness = ph.ground * ph.ground.adjoint();
    res.witness_energy = ph.lambda0;
    return res;
  }
  // Bounds this close to lambda0 leave the interior-point method without a
  // usable interior. With G the ground space and Delta its gap, every
  // feasible state is within 2 sqrt((b - lambda0)/Delta) <= tol/2 of a state on
  // G, so the problem restricted to G is solved instead and that margin is
  // charged to the lower bound. A non-degenerate G needs no solver at all.
  Eigen::Index g = 1;
  while (g < ph.dim() && ph.spectrum(g) - ph.lambda0 <= ph.feasibility_slack()) ++g;
  const double excess = b - ph.lambda0;
  const double excitation = g < ph.dim() ? ph.spectrum(g) - ph.lambda0 : kInfinity;
  if (excess <= excitation * opt.tol * opt.tol / 16.0) {
    const double margin = std::isinf(excitation) ? 0.0 : 2.0 * std::sqrt(excess / excitation);
    if (g == 1) {
      res.witness = ph.ground * ph.ground.adjoint();
      res.witness_energy = ph.lambda0;
      res.upper = max_marginal_distance(res.witness, ph.n, supports, targets);
      res.lower = std::max(0.0, res.upper - margin);
      return res;
    }
    detail::InteriorPoint ip(ph, b, supports, targets, g);
    return ip.run(opt);
  }
  detail::InteriorPoint ip(ph, b, supports, targets);
  return ip.run(opt);
}

}  // namespace sdp
}  // namespace qmasearch
