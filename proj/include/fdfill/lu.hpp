// Left-looking sparse LU (Gilbert–Peierls): each column of L and U comes
// from a sparse triangular solve whose pattern is the reach of the column in
// the graph of the L computed so far.
//
// Convention: the factors satisfy L·U = permute(A, P, Q), i.e.
// (L·U)(P(i), Q(j)) = A(i, j). L is unit lower triangular with the unit
// diagonal stored explicitly; U is upper triangular with the pivots on its
// diagonal. Structural zeros produced by numerical cancellation stay in the
// pattern.
#ifndef FDFILL_LU_HPP_
#define FDFILL_LU_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fdfill/graph.hpp"
#include "fdfill/ordering.hpp"
#include "fdfill/sparse.hpp"

namespace fdfill {

class SingularPivotError : public std::runtime_error {
 public:
  SingularPivotError(Index column, const std::string& what)
      : std::runtime_error(what + " (column " + std::to_string(column) + ")"),
        column_(column) {}
  Index column() const { return column_; }

 private:
  Index column_;
};

class StructuralSingularityError : public SingularPivotError {
 public:
  using SingularPivotError::SingularPivotError;
};

class OracleCapError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PivotPolicy {
  enum class Kind { None, Threshold } kind = Kind::None;
  double tau = 0.1;

  static PivotPolicy none() { return {}; }
  static PivotPolicy threshold(double tau = 0.1) { return {Kind::Threshold, tau}; }
};

struct FillStats {
  Index nnz_a = 0;
  Index nnz_l = 0;
  Index nnz_u = 0;
  // (nnz(L) + nnz(U) - n) / nnz(A)
  double fill_ratio = 0.0;
};

struct LuFactors {
  SparseMatrix L;
  SparseMatrix U;
  Permutation P;
  Permutation Q;
  FillStats stats;

  Index size() const { return L.rows(); }
};

struct SymbolicLu {
  std::vector<Index> l_col_ptr, l_rows;
  std::vector<Index> u_col_ptr, u_rows;
  Index nnz_l = 0;
  Index nnz_u = 0;
  Permutation P;
  Permutation Q;
};

namespace detail {

// Growing CSC storage for the factor being built.
struct GrowingCsc {
  std::vector<Index> ptr{0};
  std::vector<Index> rows;
  std::vector<Complex> vals;
};

// Depth-first reach of column `k` of `b` through the columns of `l`, where
// row i of the input is column pinv[i] of L when already pivotal. Writes the
// reach in topological order into xi[top..n) and returns top.
class Reach {
 public:
  explicit Reach(Index n) : xi_(n), stack_(n), pstack_(n), mark_(n, -1) {}

  Index operator()(const std::vector<Index>& l_ptr, const std::vector<Index>& l_rows,
                   std::span<const Index> start, const std::vector<Index>& pinv, Index stamp) {
    Index top = static_cast<Index>(xi_.size());
    for (Index s : start) {
      if (mark_[s] != stamp) top = dfs(s, l_ptr, l_rows, pinv, top, stamp);
    }
    return top;
  }

  std::span<const Index> result(Index top) const {
    return {xi_.data() + top, xi_.size() - static_cast<std::size_t>(top)};
  }

 private:
  Index dfs(Index root, const std::vector<Index>& l_ptr, const std::vector<Index>& l_rows,
            const std::vector<Index>& pinv, Index top, Index stamp) {
    Index head = 0;
    stack_[0] = root;
    while (head >= 0) {
      const Index j = stack_[head];
      const Index jnew = pinv[j];
      if (mark_[j] != stamp) {
        mark_[j] = stamp;
        pstack_[head] = jnew < 0 ? 0 : l_ptr[jnew];
      }
      bool done = true;
      const Index end = jnew < 0 ? 0 : l_ptr[jnew + 1];
      for (Index p = pstack_[head]; p < end; ++p) {
        const Index i = l_rows[p];
        if (mark_[i] == stamp) continue;
        pstack_[head] = p + 1;
        stack_[++head] = i;
        done = false;
        break;
      }
      if (done) {
        --head;
        xi_[--top] = j;
      }
    }
    return top;
  }

  std::vector<Index> xi_, stack_, pstack_, mark_;
};

inline SparseMatrix finish_csc(Index n, GrowingCsc&& g, const std::vector<Index>* remap) {
  if (remap != nullptr) {
    for (auto& r : g.rows) r = (*remap)[r];
  }
  std::vector<std::pair<Index, Complex>> col;
  for (Index j = 0; j < n; ++j) {
    const Index b = g.ptr[j], e = g.ptr[j + 1];
    col.clear();
    for (Index p = b; p < e; ++p) col.emplace_back(g.rows[p], g.vals[p]);
    std::sort(col.begin(), col.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (Index p = b; p < e; ++p) {
      g.rows[p] = col[p - b].first;
      g.vals[p] = col[p - b].second;
    }
  }
  return SparseMatrix(n, n, std::move(g.ptr), std::move(g.rows), std::move(g.vals));
}

inline FillStats make_stats(Index nnz_a, Index n, Index nnz_l, Index nnz_u) {
  FillStats s{nnz_a, nnz_l, nnz_u, 0.0};
  s.fill_ratio = nnz_a == 0 ? 0.0 : static_cast<double>(nnz_l + nnz_u - n) / static_cast<double>(nnz_a);
  return s;
}

}  // namespace detail

// Pattern of L and U for permute(A, p, q) factorized without pivoting.
inline SymbolicLu symbolic_lu(const SparseMatrix& a, const Permutation& p, const Permutation& q) {
  if (!a.square()) throw DimensionError("symbolic_lu: matrix must be square");
  const Index n = a.rows();
  const SparseMatrix ap = permute(a, p, q);
  SymbolicLu s;
  s.P = p;
  s.Q = q;
  s.l_col_ptr.reserve(n + 1);
  s.l_col_ptr.push_back(0);
  s.u_col_ptr.push_back(0);
  std::vector<Index> pinv(n, -1);
  detail::Reach reach(n);
  for (Index k = 0; k < n; ++k) {
    const Index top = reach(s.l_col_ptr, s.l_rows, ap.col_rows(k), pinv, k);
    auto pattern = reach.result(top);
    bool has_diag = false;
    std::vector<Index> lower;
    for (Index i : pattern) {
      if (i < k) {
        s.u_rows.push_back(i);
      } else if (i == k) {
        has_diag = true;
      } else {
        lower.push_back(i);
      }
    }
    if (!has_diag) {
      throw StructuralSingularityError(k, "structurally zero pivot");
    }
    s.u_rows.push_back(k);
    s.u_col_ptr.push_back(static_cast<Index>(s.u_rows.size()));
    pinv[k] = k;
    s.l_rows.push_back(k);
    s.l_rows.insert(s.l_rows.end(), lower.begin(), lower.end());
    s.l_col_ptr.push_back(static_cast<Index>(s.l_rows.size()));
  }
  for (Index j = 0; j < n; ++j) {
    std::sort(s.l_rows.begin() + s.l_col_ptr[j], s.l_rows.begin() + s.l_col_ptr[j + 1]);
    std::sort(s.u_rows.begin() + s.u_col_ptr[j], s.u_rows.begin() + s.u_col_ptr[j + 1]);
  }
  s.nnz_l = static_cast<Index>(s.l_rows.size());
  s.nnz_u = static_cast<Index>(s.u_rows.size());
  return s;
}

// Numeric factorization with explicit permutations. With PivotPolicy::none
// the result satisfies L·U = permute(A, p, q) exactly in pattern; with
// threshold pivoting the row permutation is refined column by column,
// keeping the diagonal candidate whenever |diag| ≥ τ·max|column|.
inline LuFactors factor_with(const SparseMatrix& a, const Permutation& p, const Permutation& q,
                             PivotPolicy pivoting = PivotPolicy::none()) {
  if (!a.square()) throw DimensionError("factor: matrix must be square");
  const Index n = a.rows();
  if (p.size() != n || q.size() != n) throw DimensionError("factor: permutation size mismatch");
  const SparseMatrix ap = permute(a, p, q);
  const bool threshold = pivoting.kind == PivotPolicy::Kind::Threshold;

  detail::GrowingCsc l, u;
  l.rows.reserve(static_cast<std::size_t>(2 * ap.nnz()));
  l.vals.reserve(static_cast<std::size_t>(2 * ap.nnz()));
  u.rows.reserve(static_cast<std::size_t>(2 * ap.nnz()));
  u.vals.reserve(static_cast<std::size_t>(2 * ap.nnz()));
  std::vector<Index> pinv(n, -1);
  std::vector<Complex> x(n);
  detail::Reach reach(n);

  for (Index k = 0; k < n; ++k) {
    const Index top = reach(l.ptr, l.rows, ap.col_rows(k), pinv, k);
    auto pattern = reach.result(top);
    for (Index i : pattern) x[i] = Complex{};
    {
      auto rows = ap.col_rows(k);
      auto vals = ap.col_values(k);
      for (std::size_t t = 0; t < rows.size(); ++t) x[rows[t]] = vals[t];
    }
    for (Index j : pattern) {
      const Index jnew = pinv[j];
      if (jnew < 0) continue;
      const Complex xj = x[j];
      // First entry of each L column is its unit diagonal.
      for (Index t = l.ptr[jnew] + 1; t < l.ptr[jnew + 1]; ++t) x[l.rows[t]] -= l.vals[t] * xj;
    }

    Index ipiv = -1;
    if (threshold) {
      double best = -1.0;
      for (Index i : pattern) {
        if (pinv[i] < 0 && std::abs(x[i]) > best) {
          best = std::abs(x[i]);
          ipiv = i;
        }
      }
      if (ipiv < 0) throw StructuralSingularityError(k, "no pivot candidate");
      if (best <= 0.0) throw SingularPivotError(k, "zero pivot column under threshold pivoting");
      // x[k] is only meaningful when row k is in this column's pattern.
      if (pinv[k] < 0 && std::find(pattern.begin(), pattern.end(), k) != pattern.end() &&
          std::abs(x[k]) >= pivoting.tau * best) {
        ipiv = k;
      }
    } else {
      if (pinv[k] >= 0 || std::find(pattern.begin(), pattern.end(), k) == pattern.end()) {
        throw StructuralSingularityError(k, "structurally zero pivot");
      }
      ipiv = k;
      if (x[k] == Complex{}) throw SingularPivotError(k, "exact zero pivot without pivoting");
    }

    const Complex pivot = x[ipiv];
    for (Index i : pattern) {
      if (pinv[i] >= 0) {
        u.rows.push_back(pinv[i]);
        u.vals.push_back(x[i]);
      }
    }
    u.rows.push_back(k);
    u.vals.push_back(pivot);
    u.ptr.push_back(static_cast<Index>(u.rows.size()));

    pinv[ipiv] = k;
    l.rows.push_back(ipiv);
    l.vals.push_back(Complex{1.0, 0.0});
    for (Index i : pattern) {
      if (pinv[i] < 0) {
        l.rows.push_back(i);
        l.vals.push_back(x[i] / pivot);
      }
    }
    l.ptr.push_back(static_cast<Index>(l.rows.size()));
  }

  LuFactors f;
  f.stats = detail::make_stats(a.nnz(), n, static_cast<Index>(l.rows.size()),
                               static_cast<Index>(u.rows.size()));
  f.L = detail::finish_csc(n, std::move(l), &pinv);
  f.U = detail::finish_csc(n, std::move(u), nullptr);
  // Rows of permute(A, p, q) were relabeled by pinv during pivoting.
  f.P = Permutation::from_forward(std::vector<Index>(pinv.begin(), pinv.end())).compose(p);
  f.Q = q;
  return f;
}

struct FactorOptions {
  OrderingKind ordering = OrderingKind::Amd;
  PivotPolicy pivoting = PivotPolicy::none();
  // Applied to the rows before ordering, e.g. to move a zero-free diagonal
  // into place for block matrices.
  std::optional<Permutation> row_prepermutation;
};

// Ordering (on the pattern of A' + A'ᵀ, A' = row-prepermuted A) followed by
// numeric factorization.
inline LuFactors factor(const SparseMatrix& a, const FactorOptions& opt = {}) {
  if (!a.square()) throw DimensionError("factor: matrix must be square");
  const Index n = a.rows();
  Permutation pre = opt.row_prepermutation.value_or(Permutation::identity(n));
  const SparseMatrix a1 = opt.row_prepermutation ? permute(a, pre, Permutation::identity(n)) : a;
  OrderingResult ord = compute_ordering(build_graph(a1), opt.ordering);
  Permutation p = ord.permutation.compose(pre);
  return factor_with(a, p, ord.permutation, opt.pivoting);
}

inline LuFactors factor(const SparseMatrix& a, OrderingKind ordering,
                        PivotPolicy pivoting = PivotPolicy::none()) {
  FactorOptions opt;
  opt.ordering = ordering;
  opt.pivoting = pivoting;
  return factor(a, opt);
}

// Solves A x = b with the stored factors.
inline void solve_in_place(const LuFactors& f, std::span<const Complex> b, std::span<Complex> x) {
  const Index n = f.size();
  if (static_cast<Index>(b.size()) != n || static_cast<Index>(x.size()) != n) {
    throw DimensionError("solve: dimension mismatch");
  }
  std::vector<Complex> y(n);
  for (Index i = 0; i < n; ++i) y[f.P(i)] = b[i];
  const auto& L = f.L;
  for (Index j = 0; j < n; ++j) {
    const Complex yj = y[j];
    if (yj == Complex{}) continue;
    auto rows = L.col_rows(j);
    auto vals = L.col_values(j);
    for (std::size_t t = 1; t < rows.size(); ++t) y[rows[t]] -= vals[t] * yj;
  }
  const auto& U = f.U;
  for (Index j = n - 1; j >= 0; --j) {
    auto rows = U.col_rows(j);
    auto vals = U.col_values(j);
    const std::size_t last = rows.size() - 1;
    y[j] /= vals[last];
    const Complex yj = y[j];
    if (yj == Complex{}) continue;
    for (std::size_t t = 0; t < last; ++t) y[rows[t]] -= vals[t] * yj;
  }
  for (Index i = 0; i < n; ++i) x[i] = y[f.Q(i)];
}

inline DenseVector solve(const LuFactors& f, std::span<const Complex> b) {
  DenseVector x(b.size());
  solve_in_place(f, b, x);
  return x;
}

// Sparse product A·B.
inline SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: dimension mismatch");
  TripletBuffer buf(a.rows(), b.cols());
  std::vector<Complex> acc(a.rows());
  std::vector<Index> mark(a.rows(), -1), touched;
  std::vector<Index> ptr(b.cols() + 1, 0), rows;
  std::vector<Complex> vals;
  for (Index j = 0; j < b.cols(); ++j) {
    touched.clear();
    auto br = b.col_rows(j);
    auto bv = b.col_values(j);
    for (std::size_t t = 0; t < br.size(); ++t) {
      auto ar = a.col_rows(br[t]);
      auto av = a.col_values(br[t]);
      for (std::size_t s = 0; s < ar.size(); ++s) {
        if (mark[ar[s]] != j) {
          mark[ar[s]] = j;
          acc[ar[s]] = Complex{};
          touched.push_back(ar[s]);
        }
        acc[ar[s]] += av[s] * bv[t];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (Index i : touched) {
      rows.push_back(i);
      vals.push_back(acc[i]);
    }
    ptr[j + 1] = static_cast<Index>(rows.size());
  }
  return SparseMatrix(a.rows(), b.cols(), std::move(ptr), std::move(rows), std::move(vals));
}

// max |permute(A,P,Q) − L·U|
inline double reconstruction_error(const SparseMatrix& a, const LuFactors& f) {
  SparseMatrix diff = add(permute(a, f.P, f.Q), multiply(f.L, f.U), 1.0, -1.0);
  return diff.max_abs();
}

inline double relative_residual(const SparseMatrix& a, std::span<const Complex> x,
                                std::span<const Complex> b) {
  DenseVector r = subtract(spmv(a, x), b);
  const double nb = norm2(b);
  return nb == 0.0 ? norm2(r) : norm2(r) / nb;
}

inline constexpr Index kDenseOracleCap = 400;
inline constexpr double kOracleZeroThreshold = 1e-14;

// Dense Gaussian elimination of permute(A, p, q) without pivoting. Entries
// below 1e-14·‖A‖_max are treated as zero when building the factor patterns.
inline LuFactors dense_lu_oracle(const SparseMatrix& a, const Permutation& p, const Permutation& q) {
  if (!a.square()) throw DimensionError("dense_lu_oracle: matrix must be square");
  const Index n = a.rows();
  if (n > kDenseOracleCap) {
    throw OracleCapError("dense_lu_oracle: n = " + std::to_string(n) + " exceeds cap " +
                         std::to_string(kDenseOracleCap));
  }
  const SparseMatrix ap = permute(a, p, q);
  std::vector<Complex> d(static_cast<std::size_t>(n * n));
  auto at = [&](Index i, Index j) -> Complex& { return d[static_cast<std::size_t>(i * n + j)]; };
  for (Index j = 0; j < n; ++j) {
    auto rows = ap.col_rows(j);
    auto vals = ap.col_values(j);
    for (std::size_t t = 0; t < rows.size(); ++t) at(rows[t], j) = vals[t];
  }
  for (Index k = 0; k < n; ++k) {
    if (at(k, k) == Complex{}) throw SingularPivotError(k, "dense oracle: zero pivot");
    for (Index i = k + 1; i < n; ++i) {
      if (at(i, k) == Complex{}) continue;
      at(i, k) /= at(k, k);
      const Complex lik = at(i, k);
      for (Index j = k + 1; j < n; ++j) at(i, j) -= lik * at(k, j);
    }
  }
  const double thr = kOracleZeroThreshold * a.max_abs();
  TripletBuffer lb(n, n), ub(n, n);
  for (Index i = 0; i < n; ++i) {
    lb.add(i, i, 1.0);
    for (Index j = 0; j < n; ++j) {
      const Complex v = at(i, j);
      if (std::abs(v) <= thr && !(i == j)) continue;
      if (j < i) {
        lb.add(i, j, v);
      } else {
        ub.add(i, j, v);
      }
    }
  }
  LuFactors f;
  f.L = triplet_to_csc(lb, ZeroPolicy::Keep);
  f.U = triplet_to_csc(ub, ZeroPolicy::Keep);
  f.P = p;
  f.Q = q;
  f.stats = detail::make_stats(a.nnz(), n, f.L.nnz(), f.U.nnz());
  return f;
}

inline LuFactors dense_lu_oracle(const SparseMatrix& a) {
  return dense_lu_oracle(a, Permutation::identity(a.rows()), Permutation::identity(a.cols()));
}

struct FillReport {
  std::string bc;
  Index nx = 0;
  Index ny = 0;
  std::string ordering;
  Index nnz_a = 0;
  Index nnz_l = 0;
  Index nnz_u = 0;
  double seconds = 0.0;
};

inline FillReport fill_report(const SparseMatrix& a, const FactorOptions& opt, std::string bc,
                              Index nx, Index ny) {
  const auto t0 = std::chrono::steady_clock::now();
  LuFactors f = factor(a, opt);
  const auto t1 = std::chrono::steady_clock::now();
  FillReport r;
  r.bc = std::move(bc);
  r.nx = nx;
  r.ny = ny;
  r.ordering = std::string(to_string(opt.ordering));
  r.nnz_a = f.stats.nnz_a;
  r.nnz_l = f.stats.nnz_l;
  r.nnz_u = f.stats.nnz_u;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  return r;
}

inline FillReport fill_report(const SparseMatrix& a, OrderingKind ordering, std::string bc = "",
                              Index nx = 0, Index ny = 0) {
  FactorOptions opt;
  opt.ordering = ordering;
  return fill_report(a, opt, std::move(bc), nx, ny);
}

// Percentage reduction of nnz(L) going from `reference` to `candidate`.
inline double reduction_percent(const FillReport& reference, const FillReport& candidate) {
  if (reference.nnz_l == 0) return 0.0;
  return 100.0 * static_cast<double>(reference.nnz_l - candidate.nnz_l) /
         static_cast<double>(reference.nnz_l);
}

}  // namespace fdfill

#endif  // FDFILL_LU_HPP_
