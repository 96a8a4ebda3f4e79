// Bloch waveguide modes as a quadratic eigenproblem in k_x, its companion
// linearization, and shift-invert Arnoldi on top of the sparse LU.
//
// With H_z = h(x, y) e^{i k x} and h periodic along x, the TM operator gives
//
//   (M + k C − k² K) h = 0
//   M = ∂x ε⁻¹ ∂x + ∂y ε⁻¹ ∂y + ω²   (x periodic, y stretched by the PML)
//   C = i (∂x ε⁻¹ + ε⁻¹ ∂x)          (centered differences)
//   K = ε⁻¹                          (diagonal)
//
// linearized as B w = λ D w with
//
//   B = [ C  M ]    D = [ K  0 ]    w = [ λ h ]
//       [ I  0 ]        [ 0  I ]        [   h ]
//
// Nodes pinned by a modified Dirichlet boundary get an identity row in M
// and empty rows in C and K, which sends their eigenvalues to infinity.
#ifndef FDFILL_EIGEN_HPP_
#define FDFILL_EIGEN_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdfill/fdfd.hpp"
#include "fdfill/lu.hpp"
#include "fdfill/sparse.hpp"

namespace fdfill {

class ShiftError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QepMatrices {
  SparseMatrix K;
  SparseMatrix M;
  SparseMatrix C;
  GridSpec grid;
  BoundaryPair bc;
  std::vector<bool> pinned;

  Index size() const { return M.rows(); }
};

inline QepMatrices assemble_qep(const GridSpec& g, std::span<const Complex> eps, BoundaryPair bc, double omega,
                                const AssemblyOptions& opt = {}) {
  if (bc.x != BoundaryKind::Periodic) throw GridError("Bloch axis x must be periodic");
  if (g.pml_at(Side::XLow).thickness != 0 || g.pml_at(Side::XHigh).thickness != 0) {
    throw GridError("Bloch axis x cannot carry a PML");
  }
  AssembledSystem sys = assemble_tm(g, eps, bc, omega, opt);

  const Index n = g.size();
  TripletBuffer kb(n, n), cb(n, n);
  const double half_inv_dx = 0.5 / g.dx;
  const Complex iu(0.0, 1.0);
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      const Index row = g.flat(i, j);
      if (sys.pinned[row]) continue;
      const Complex e_self = 1.0 / eps[row];
      kb.add(row, row, e_self);
      const Index right = g.flat((i + 1) % g.nx, j);
      const Index left = g.flat((i + g.nx - 1) % g.nx, j);
      const Complex e_right = 1.0 / eps[right];
      const Complex e_left = 1.0 / eps[left];
      cb.add(row, right, iu * (e_right + e_self) * half_inv_dx);
      cb.add(row, left, -iu * (e_left + e_self) * half_inv_dx);
    }
  }
  QepMatrices q;
  q.K = triplet_to_csc(kb);
  q.M = std::move(sys.A);
  q.C = triplet_to_csc(cb);
  q.grid = g;
  q.bc = bc;
  q.pinned = std::move(sys.pinned);
  return q;
}

inline QepMatrices assemble_qep(const GridSpec& g, const MaterialMap& mat, BoundaryPair bc, double omega,
                                double omega_si, const AssemblyOptions& opt = {}) {
  auto eps = mat.evaluate(omega_si);
  return assemble_qep(g, eps, bc, omega, opt);
}

// Generalized problem B w = λ D w.
struct Pencil {
  SparseMatrix B;
  SparseMatrix D;
  // Length of the physical field inside w (N for a companion pencil,
  // dim(B) for a plain one).
  Index field_size = 0;
  bool companion = false;
  // Row permutation giving B − σD a zero-free diagonal for factorization
  // without pivoting.
  std::optional<Permutation> row_prepermutation;

  Index size() const { return B.rows(); }
};

// Swaps the two halves of a 2N index range.
inline Permutation block_swap(Index n) {
  std::vector<Index> f(static_cast<std::size_t>(2 * n));
  for (Index i = 0; i < n; ++i) {
    f[i] = i + n;
    f[i + n] = i;
  }
  return Permutation::from_forward(std::move(f));
}

namespace detail {

inline void append_block(TripletBuffer& buf, const SparseMatrix& m, Index row0, Index col0, Complex scale = 1.0) {
  for (Index j = 0; j < m.cols(); ++j) {
    auto rows = m.col_rows(j);
    auto vals = m.col_values(j);
    for (std::size_t t = 0; t < rows.size(); ++t) buf.add(rows[t] + row0, j + col0, scale * vals[t]);
  }
}

inline double norm1(const SparseMatrix& a) {
  double best = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (const auto& v : a.col_values(j)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace detail

inline Pencil linearize(const QepMatrices& q) {
  const Index n = q.M.rows();
  if (!q.M.square() || q.K.rows() != n || q.K.cols() != n || q.C.rows() != n || q.C.cols() != n) {
    throw DimensionError("linearize: K, M, C must share one square dimension");
  }
  const auto eye = SparseMatrix::identity(n);
  TripletBuffer bb(2 * n, 2 * n), db(2 * n, 2 * n);
  detail::append_block(bb, q.C, 0, 0);
  detail::append_block(bb, q.M, 0, n);
  detail::append_block(bb, eye, n, 0);
  detail::append_block(db, q.K, 0, 0);
  detail::append_block(db, eye, n, n);
  Pencil p;
  p.B = triplet_to_csc(bb);
  p.D = triplet_to_csc(db);
  p.field_size = n;
  p.companion = true;
  p.row_prepermutation = block_swap(n);
  return p;
}

// B w = λ w.
inline Pencil standard_pencil(const SparseMatrix& a) {
  if (!a.square()) throw DimensionError("standard_pencil: matrix must be square");
  Pencil p;
  p.B = a;
  p.D = SparseMatrix::identity(a.rows());
  p.field_size = a.rows();
  return p;
}

inline SparseMatrix shifted(const Pencil& p, Complex sigma) {
  return add(p.B, p.D, 1.0, -sigma);
}

struct ArnoldiConfig {
  Complex shift{0.0, 0.0};
  Index subspace = 40;
  Index wanted = 6;
  // Converged when ‖Op y − θ y‖ ≤ tol·|θ| for the shift-inverted operator.
  double tolerance = 1e-11;
  Index max_restarts = 60;
  std::uint64_t seed = 0x5eed;

  void validate() const {
    if (wanted < 1 || wanted >= subspace) throw std::invalid_argument("ArnoldiConfig: need 1 <= wanted < subspace");
    if (!(tolerance > 0.0)) throw std::invalid_argument("ArnoldiConfig: tolerance must be positive");
  }
};

struct EigenPair {
  Complex lambda;
  DenseVector w;
  // Normwise backward error ‖Bw − λDw‖ / ((‖B‖₁ + |λ|‖D‖₁)‖w‖).
  double residual = 0.0;
  // ‖Op y − θ y‖ / |θ| of the shift-inverted operator.
  double ritz_residual = 0.0;
  double energy_fraction = 1.0;
  bool converged = false;
};

struct ArnoldiResult {
  std::vector<EigenPair> pairs;
  bool converged = false;
  Index restarts = 0;
  Index applications = 0;
  FillStats fill;
};

inline DenseVector field_of(const Pencil& p, const EigenPair& e) {
  if (!p.companion) return e.w;
  return DenseVector(e.w.begin() + p.field_size, e.w.end());
}

inline double pencil_backward_error(const Pencil& p, Complex lambda, std::span<const Complex> w) {
  DenseVector bw = spmv(p.B, w);
  DenseVector dw = spmv(p.D, w);
  for (std::size_t i = 0; i < bw.size(); ++i) bw[i] -= lambda * dw[i];
  const double scale = (detail::norm1(p.B) + std::abs(lambda) * detail::norm1(p.D)) * norm2(w);
  return scale == 0.0 ? 0.0 : norm2(bw) / scale;
}

// ‖(M + λC − λ²K) x‖ / ((‖M‖₁ + |λ|‖C‖₁ + |λ|²‖K‖₁)‖x‖)
inline double qep_backward_error(const QepMatrices& q, Complex lambda, std::span<const Complex> x) {
  DenseVector r = spmv(q.M, x);
  DenseVector cx = spmv(q.C, x);
  DenseVector kx = spmv(q.K, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += lambda * cx[i] - lambda * lambda * kx[i];
  const double l = std::abs(lambda);
  const double scale = (detail::norm1(q.M) + l * detail::norm1(q.C) + l * l * detail::norm1(q.K)) * norm2(x);
  return scale == 0.0 ? 0.0 : norm2(r) / scale;
}

// ‖w_top − λ w_bottom‖ / ‖w‖ for a companion eigenvector.
inline double companion_structure_error(const Pencil& p, const EigenPair& e) {
  const Index n = p.field_size;
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += std::norm(e.w[i] - e.lambda * e.w[i + n]);
  return std::sqrt(s) / norm2(e.w);
}

inline double energy_fraction(std::span<const Complex> field, const GridSpec& g) {
  double inside = 0.0, total = 0.0;
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      const double e = std::norm(field[g.flat(i, j)]);
      total += e;
      if (!g.in_pml(i, j)) inside += e;
    }
  }
  return total == 0.0 ? 0.0 : inside / total;
}

namespace detail {

using DenseMat = Eigen::MatrixXcd;

// Shift-inverted operator y ↦ (B − σD)⁻¹ D y over a shared factorization.
class ShiftInvertOperator {
 public:
  ShiftInvertOperator(const Pencil& p, Complex sigma) : pencil_(p) {
    FactorOptions opt;
    opt.ordering = OrderingKind::Amd;
    opt.row_prepermutation = p.row_prepermutation;
    try {
      lu_ = factor(shifted(p, sigma), opt);
    } catch (const SingularPivotError& e) {
      throw ShiftError(std::string("B - sigma*D is singular at this shift; move sigma (") + e.what() + ")");
    }
    for (Index k = 0; k < lu_.size(); ++k) {
      auto vals = lu_.U.col_values(k);
      if (vals.empty() || vals.back() == Complex{}) {
        throw ShiftError("B - sigma*D is singular at this shift; move sigma");
      }
    }
  }

  DenseVector apply(std::span<const Complex> y) {
    ++applications_;
    DenseVector dy = spmv(pencil_.D, y);
    return solve(lu_, dy);
  }

  const LuFactors& factors() const { return lu_; }
  Index applications() const { return applications_; }

 private:
  const Pencil& pencil_;
  LuFactors lu_;
  Index applications_ = 0;
};

inline Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Orthogonalizes v against `basis` (two classical Gram–Schmidt passes) and
// normalizes. Returns the norm left after projection relative to the
// original.
inline double orthonormalize(DenseVector& v, const std::vector<DenseVector>& basis) {
  const double original = norm2(v);
  if (original == 0.0) return 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Complex> h(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) h[k] = dot(basis[k], v);
    for (std::size_t k = 0; k < basis.size(); ++k) {
      const Complex c = h[k];
      const auto& b = basis[k];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
    }
  }
  const double left = norm2(v);
  if (left == 0.0) return 0.0;
  for (auto& x : v) x /= left;
  return left / original;
}

inline DenseVector random_vector(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseVector v(static_cast<std::size_t>(n));
  for (auto& x : v) {
    const double re = u(rng);
    const double im = u(rng);
    x = Complex(re, im);
  }
  return v;
}

inline DenseVector combine(const std::vector<DenseVector>& basis, const Eigen::VectorXcd& y) {
  DenseVector out(basis.front().size());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const Complex c = y(static_cast<Eigen::Index>(k));
    if (c == Complex{}) continue;
    const auto& b = basis[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * b[i];
  }
  return out;
}

}  // namespace detail

// Eigenpairs of B w = λ D w closest to cfg.shift. The projected problem is
// solved by Rayleigh–Ritz on V with W = Op·V kept alongside, so residuals
// are exact; restarts keep the wanted Ritz vectors and grow the space again
// from the residual of the first unconverged one.
inline ArnoldiResult shift_invert_arnoldi(const Pencil& pencil, const ArnoldiConfig& cfg) {
  cfg.validate();
  const Index n = pencil.size();
  const Index m = std::min<Index>(cfg.subspace, n);
  const Index want = std::min<Index>(cfg.wanted, std::max<Index>(m - 1, 1));
  detail::ShiftInvertOperator op(pencil, cfg.shift);
  std::mt19937_64 rng(cfg.seed);

  std::vector<DenseVector> V, W;
  auto expand = [&](DenseVector v) {
    // Degenerate directions are replaced by fresh random ones.
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (detail::orthonormalize(v, V) > 1e-10) break;
      v = detail::random_vector(n, rng);
    }
    W.push_back(op.apply(v));
    V.push_back(std::move(v));
  };

  expand(detail::random_vector(n, rng));

  ArnoldiResult result;
  std::vector<Complex> theta;
  std::vector<Eigen::VectorXcd> y_sel;
  std::vector<double> res_sel;
  for (Index cycle = 0;; ++cycle) {
    while (static_cast<Index>(V.size()) < m) expand(W.back());

    const auto dim = static_cast<Eigen::Index>(V.size());
    detail::DenseMat H(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) H(r, c) = detail::dot(V[r], W[c]);
    }
    Eigen::ComplexEigenSolver<detail::DenseMat> es(H);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) idx[k] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });

    theta.clear();
    y_sel.clear();
    res_sel.clear();
    Index first_unconverged = -1;
    const Index keep = std::min<Index>(dim - 1, std::max<Index>(want + want / 2 + 1, want + 2));
    for (Index k = 0; k < keep; ++k) {
      const Complex th = es.eigenvalues()(idx[k]);
      Eigen::VectorXcd y = es.eigenvectors().col(idx[k]);
      y.normalize();
      DenseVector vy = detail::combine(V, y);
      DenseVector wy = detail::combine(W, y);
      double r = 0.0;
      for (std::size_t i = 0; i < vy.size(); ++i) r += std::norm(wy[i] - th * vy[i]);
      r = std::abs(th) == 0.0 ? INFINITY : std::sqrt(r) / std::abs(th);
      theta.push_back(th);
      y_sel.push_back(std::move(y));
      res_sel.push_back(r);
      if (k < want && first_unconverged < 0 && !(r <= cfg.tolerance)) first_unconverged = k;
    }

    const bool done = first_unconverged < 0;
    if (done || cycle >= cfg.max_restarts) {
      result.converged = done;
      result.restarts = cycle;
      for (Index k = 0; k < want; ++k) {
        EigenPair e;
        e.lambda = cfg.shift + 1.0 / theta[k];
        e.w = detail::combine(V, y_sel[k]);
        e.ritz_residual = res_sel[k];
        e.converged = res_sel[k] <= cfg.tolerance;
        e.residual = pencil_backward_error(pencil, e.lambda, e.w);
        result.pairs.push_back(std::move(e));
      }
      break;
    }

    // Thick restart: V ← orth(V·Y_keep), W follows by linearity.
    detail::DenseMat Y(dim, static_cast<Eigen::Index>(keep));
    for (Index k = 0; k < keep; ++k) Y.col(k) = y_sel[k];
    Eigen::HouseholderQR<detail::DenseMat> qr(Y);
    detail::DenseMat Qthin = qr.householderQ() * detail::DenseMat::Identity(dim, keep);
    std::vector<DenseVector> V2, W2;
    for (Index k = 0; k < keep; ++k) {
      V2.push_back(detail::combine(V, Qthin.col(k)));
      W2.push_back(detail::combine(W, Qthin.col(k)));
    }
    DenseVector r;
    {
      const Complex th = theta[first_unconverged];
      DenseVector vy = detail::combine(V, y_sel[first_unconverged]);
      r = detail::combine(W, y_sel[first_unconverged]);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= th * vy[i];
    }
    V = std::move(V2);
    W = std::move(W2);
    expand(std::move(r));
  }

  std::stable_sort(result.pairs.begin(), result.pairs.end(), [&](const EigenPair& a, const EigenPair& b) {
    return std::abs(a.lambda - cfg.shift) < std::abs(b.lambda - cfg.shift);
  });
  result.applications = op.applications();
  result.fill = op.factors().stats;
  return result;
}

struct FilterCriteria {
  double min_energy_fraction = 0.9;
  double max_residual = 1e-8;
};

// Keeps pairs whose field is mostly outside the PML and whose backward
// error is small. Order is preserved.
inline std::vector<EigenPair> mode_filter(std::vector<EigenPair> pairs, const Pencil& p, const GridSpec& g,
                                          const FilterCriteria& crit = {}) {
  std::vector<EigenPair> kept;
  for (auto& e : pairs) {
    DenseVector x = field_of(p, e);
    e.energy_fraction = static_cast<Index>(x.size()) == g.size() ? energy_fraction(x, g) : 0.0;
    if (e.energy_fraction >= crit.min_energy_fraction && e.residual <= crit.max_residual) {
      kept.push_back(std::move(e));
    }
  }
  return kept;
}

// Dense reference: eigenvalues of B w = λ D w via the eigenvalues ν of
// (B − σD)⁻¹ D, λ = σ + 1/ν. Infinite eigenvalues (ν ≈ 0) are dropped.
// Sorted by distance to σ.
inline std::vector<Complex> dense_pencil_eigenvalues(const Pencil& p, Complex sigma) {
  const Index n = p.size();
  if (n > 2 * kDenseOracleCap) throw OracleCapError("dense_pencil_eigenvalues: pencil too large");
  detail::DenseMat A = detail::DenseMat::Zero(n, n), Dm = detail::DenseMat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    auto rb = p.B.col_rows(j);
    auto vb = p.B.col_values(j);
    for (std::size_t t = 0; t < rb.size(); ++t) A(rb[t], j) += vb[t];
    auto rd = p.D.col_rows(j);
    auto vd = p.D.col_values(j);
    for (std::size_t t = 0; t < rd.size(); ++t) {
      A(rd[t], j) -= sigma * vd[t];
      Dm(rd[t], j) += vd[t];
    }
  }
  detail::DenseMat X = A.fullPivLu().solve(Dm);
  Eigen::ComplexEigenSolver<detail::DenseMat> es(X, false);
  double numax = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) numax = std::max(numax, std::abs(es.eigenvalues()(k)));
  std::vector<Complex> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const Complex nu = es.eigenvalues()(k);
    if (std::abs(nu) > 1e-12 * numax) out.push_back(sigma + 1.0 / nu);
  }
  std::sort(out.begin(), out.end(),
            [&](Complex a, Complex b) { return std::abs(a - sigma) < std::abs(b - sigma); });
  return out;
}

struct FrequencyPoint {
  double omega = 0.0;     // normalized
  double omega_si = 0.0;  // rad/s, for dispersive materials
};

struct BandRow {
  double omega = 0.0;
  Complex kx;
  double residual = 0.0;
  double energy_fraction = 0.0;
};

struct BandFailure {
  double omega = 0.0;
  std::string message;
};

// Largest |lambda - shift| among the converged pairs at one frequency.
// Eigenvalues closer to the shift than this were all found.
struct BandReach {
  double omega = 0.0;
  double radius = 0.0;
};

struct BandTable {
  std::vector<BandRow> rows;
  std::vector<BandFailure> failures;
  std::vector<BandReach> reach;
};

inline double reach_radius(const ArnoldiResult& r, Complex shift) {
  double radius = 0.0;
  for (const auto& e : r.pairs) radius = std::max(radius, std::abs(e.lambda - shift));
  return radius;
}

// For every frequency: assemble, linearize, shift-invert around cfg.shift,
// filter. Failures are recorded per frequency and the scan continues.
inline BandTable band_scan(const GridSpec& g, const MaterialMap& mat, BoundaryPair bc,
                           std::span<const FrequencyPoint> freqs, const ArnoldiConfig& cfg,
                           const FilterCriteria& crit = {}) {
  BandTable table;
  for (const auto& f : freqs) {
    try {
      QepMatrices q = assemble_qep(g, mat, bc, f.omega, f.omega_si);
      Pencil p = linearize(q);
      ArnoldiResult r = shift_invert_arnoldi(p, cfg);
      table.reach.push_back({f.omega, reach_radius(r, cfg.shift)});
      for (const auto& e : mode_filter(std::move(r.pairs), p, g, crit)) {
        table.rows.push_back({f.omega, e.lambda, e.residual, e.energy_fraction});
      }
    } catch (const std::exception& ex) {
      table.failures.push_back({f.omega, ex.what()});
    }
  }
  return table;
}

}  // namespace fdfill

#endif  // FDFILL_EIGEN_HPP_
