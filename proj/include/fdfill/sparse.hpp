// Compressed-sparse-column complex matrices, permutations and the handful of
// kernels every other part of fdfill is built on.
#ifndef FDFILL_SPARSE_HPP_
#define FDFILL_SPARSE_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace fdfill {

using Index = std::int64_t;
using Complex = std::complex<double>;
using DenseVector = std::vector<Complex>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Triplet {
  Index row;
  Index col;
  Complex value;
};

// Coordinate-format accumulator. Duplicates are allowed and sum on
// conversion; indices are validated by triplet_to_csc.
class TripletBuffer {
 public:
  TripletBuffer() = default;
  TripletBuffer(Index n_rows, Index n_cols) : n_rows_(n_rows), n_cols_(n_cols) {
    if (n_rows < 0 || n_cols < 0) {
      throw ConstructionError("negative matrix dimension");
    }
  }

  void add(Index row, Index col, Complex value) {
    entries_.push_back({row, col, value});
  }
  void reserve(std::size_t n) { entries_.reserve(n); }

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  std::span<const Triplet> entries() const { return entries_; }

 private:
  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Triplet> entries_;
};

class SparseMatrix {
 public:
  SparseMatrix() : col_ptr_(1, 0) {}

  // Takes ownership of raw CSC arrays. Row indices must be strictly
  // increasing within each column.
  SparseMatrix(Index n_rows, Index n_cols, std::vector<Index> col_ptr,
               std::vector<Index> row_ind, std::vector<Complex> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        col_ptr_(std::move(col_ptr)),
        row_ind_(std::move(row_ind)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix identity(Index n) {
    std::vector<Index> p(n + 1);
    std::vector<Index> r(n);
    std::iota(p.begin(), p.end(), Index{0});
    std::iota(r.begin(), r.end(), Index{0});
    return SparseMatrix(n, n, std::move(p), std::move(r),
                        std::vector<Complex>(n, Complex{1.0, 0.0}));
  }

  static SparseMatrix zero(Index n_rows, Index n_cols) {
    return SparseMatrix(n_rows, n_cols, std::vector<Index>(n_cols + 1, 0), {},
                        {});
  }

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  Index nnz() const { return col_ptr_.back(); }
  bool square() const { return n_rows_ == n_cols_; }

  std::span<const Index> col_ptr() const { return col_ptr_; }
  std::span<const Index> row_ind() const { return row_ind_; }
  std::span<const Complex> values() const { return values_; }

  std::span<const Index> col_rows(Index j) const {
    return {row_ind_.data() + col_ptr_[j],
            static_cast<std::size_t>(col_ptr_[j + 1] - col_ptr_[j])};
  }
  std::span<const Complex> col_values(Index j) const {
    return {values_.data() + col_ptr_[j],
            static_cast<std::size_t>(col_ptr_[j + 1] - col_ptr_[j])};
  }

  // Returns the stored value, or zero for a structural zero.
  Complex at(Index i, Index j) const {
    if (i < 0 || i >= n_rows_ || j < 0 || j >= n_cols_) {
      throw DimensionError("SparseMatrix::at index out of range");
    }
    auto rows = col_rows(j);
    auto it = std::lower_bound(rows.begin(), rows.end(), i);
    if (it == rows.end() || *it != i) return {};
    return values_[col_ptr_[j] + (it - rows.begin())];
  }

  bool contains(Index i, Index j) const {
    auto rows = col_rows(j);
    return std::binary_search(rows.begin(), rows.end(), i);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  SparseMatrix transpose() const {
    std::vector<Index> count(n_rows_ + 1, 0);
    for (Index r : row_ind_) ++count[r + 1];
    std::partial_sum(count.begin(), count.end(), count.begin());
    std::vector<Index> next(count.begin(), count.end() - 1);
    std::vector<Index> ri(nnz());
    std::vector<Complex> vals(nnz());
    for (Index j = 0; j < n_cols_; ++j) {
      for (Index p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
        Index q = next[row_ind_[p]]++;
        ri[q] = j;
        vals[q] = values_[p];
      }
    }
    return SparseMatrix(n_cols_, n_rows_, std::move(count), std::move(ri),
                        std::move(vals));
  }

  // Drops explicitly stored zeros.
  SparseMatrix pruned() const {
    std::vector<Index> p(n_cols_ + 1, 0);
    std::vector<Index> ri;
    std::vector<Complex> vals;
    ri.reserve(nnz());
    vals.reserve(nnz());
    for (Index j = 0; j < n_cols_; ++j) {
      for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
        if (values_[k] != Complex{}) {
          ri.push_back(row_ind_[k]);
          vals.push_back(values_[k]);
        }
      }
      p[j + 1] = static_cast<Index>(ri.size());
    }
    return SparseMatrix(n_rows_, n_cols_, std::move(p), std::move(ri),
                        std::move(vals));
  }

  bool same_pattern(const SparseMatrix& other) const {
    return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_ &&
           col_ptr_ == other.col_ptr_ && row_ind_ == other.row_ind_;
  }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.same_pattern(b) && a.values_ == b.values_;
  }

 private:
  void validate() const {
    if (n_rows_ < 0 || n_cols_ < 0) {
      throw ConstructionError("negative matrix dimension");
    }
    if (static_cast<Index>(col_ptr_.size()) != n_cols_ + 1 ||
        col_ptr_.front() != 0) {
      throw ConstructionError("column pointer array has wrong shape");
    }
    if (row_ind_.size() != values_.size() ||
        static_cast<Index>(row_ind_.size()) != col_ptr_.back()) {
      throw ConstructionError("row index / value arrays disagree with nnz");
    }
    for (Index j = 0; j < n_cols_; ++j) {
      if (col_ptr_[j + 1] < col_ptr_[j]) {
        throw ConstructionError("column pointers not monotone");
      }
      for (Index p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
        Index r = row_ind_[p];
        if (r < 0 || r >= n_rows_) {
          throw ConstructionError("row index out of range in column " +
                                  std::to_string(j));
        }
        if (p > col_ptr_[j] && row_ind_[p - 1] >= r) {
          throw ConstructionError("row indices not strictly increasing in column " +
                                  std::to_string(j));
        }
      }
    }
  }

  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> col_ptr_;
  std::vector<Index> row_ind_;
  std::vector<Complex> values_;
};

enum class ZeroPolicy { Prune, Keep };

// Sums duplicates, sorts each column and (by default) drops entries whose
// summed value is exactly zero.
inline SparseMatrix triplet_to_csc(const TripletBuffer& buf,
                                   ZeroPolicy zeros = ZeroPolicy::Prune) {
  const Index m = buf.rows();
  const Index n = buf.cols();
  auto entries = buf.entries();
  std::vector<Index> count(n + 1, 0);
  for (const auto& t : entries) {
    if (t.row < 0 || t.row >= m || t.col < 0 || t.col >= n) {
      throw ConstructionError("triplet (" + std::to_string(t.row) + ", " +
                              std::to_string(t.col) + ") outside " +
                              std::to_string(m) + "x" + std::to_string(n));
    }
    ++count[t.col + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<std::pair<Index, Complex>> slots(entries.size());
  {
    std::vector<Index> next(count.begin(), count.end() - 1);
    for (const auto& t : entries) slots[next[t.col]++] = {t.row, t.value};
  }

  std::vector<Index> p(n + 1, 0);
  std::vector<Index> ri;
  std::vector<Complex> vals;
  ri.reserve(entries.size());
  vals.reserve(entries.size());
  for (Index j = 0; j < n; ++j) {
    auto first = slots.begin() + count[j];
    auto last = slots.begin() + count[j + 1];
    std::stable_sort(first, last, [](const auto& a, const auto& b) {
      return a.first < b.first;
    });
    for (auto it = first; it != last;) {
      Index r = it->first;
      Complex sum{};
      for (; it != last && it->first == r; ++it) sum += it->second;
      if (zeros == ZeroPolicy::Keep || sum != Complex{}) {
        ri.push_back(r);
        vals.push_back(sum);
      }
    }
    p[j + 1] = static_cast<Index>(ri.size());
  }
  return SparseMatrix(m, n, std::move(p), std::move(ri), std::move(vals));
}

inline TripletBuffer csc_to_triplet(const SparseMatrix& a) {
  TripletBuffer buf(a.rows(), a.cols());
  buf.reserve(static_cast<std::size_t>(a.nnz()));
  for (Index j = 0; j < a.cols(); ++j) {
    auto rows = a.col_rows(j);
    auto vals = a.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) buf.add(rows[k], j, vals[k]);
  }
  return buf;
}

// Bijection on {0..n-1}. forward()[old] = new position, inverse()[new] = old.
class Permutation {
 public:
  Permutation() = default;

  static Permutation identity(Index n) {
    std::vector<Index> v(n);
    std::iota(v.begin(), v.end(), Index{0});
    return from_inverse(std::move(v));
  }

  // `order[k]` is the original index placed at position k (an elimination
  // order).
  static Permutation from_order(std::vector<Index> order) {
    return from_inverse(std::move(order));
  }

  static Permutation from_forward(std::vector<Index> forward) {
    Permutation p;
    p.inverse_ = invert(forward);
    p.forward_ = std::move(forward);
    return p;
  }

  static Permutation from_inverse(std::vector<Index> inverse) {
    Permutation p;
    p.forward_ = invert(inverse);
    p.inverse_ = std::move(inverse);
    return p;
  }

  Index size() const { return static_cast<Index>(forward_.size()); }
  std::span<const Index> forward() const { return forward_; }
  std::span<const Index> inverse() const { return inverse_; }
  Index operator()(Index old_index) const { return forward_[old_index]; }

  Permutation inverted() const {
    Permutation p;
    p.forward_ = inverse_;
    p.inverse_ = forward_;
    return p;
  }

  // (this ∘ first): apply `first`, then this.
  Permutation compose(const Permutation& first) const {
    if (first.size() != size()) throw DimensionError("permutation size mismatch");
    std::vector<Index> f(forward_.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = forward_[first.forward_[i]];
    return from_forward(std::move(f));
  }

  // y[p(i)] = x[i]
  template <typename T>
  std::vector<T> apply(std::span<const T> x) const {
    if (static_cast<Index>(x.size()) != size()) {
      throw DimensionError("permutation/vector length mismatch");
    }
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[forward_[i]] = x[i];
    return y;
  }
  // y[i] = x[p(i)]
  template <typename T>
  std::vector<T> apply_inverse(std::span<const T> x) const {
    if (static_cast<Index>(x.size()) != size()) {
      throw DimensionError("permutation/vector length mismatch");
    }
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[forward_[i]];
    return y;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  static std::vector<Index> invert(const std::vector<Index>& map) {
    const Index n = static_cast<Index>(map.size());
    std::vector<Index> inv(map.size(), -1);
    for (Index i = 0; i < n; ++i) {
      Index t = map[i];
      if (t < 0 || t >= n || inv[t] != -1) {
        throw ConstructionError("index array is not a permutation");
      }
      inv[t] = i;
    }
    return inv;
  }

  std::vector<Index> forward_;
  std::vector<Index> inverse_;
};

// Result (p(i), q(j)) = A(i, j), i.e. P A Qᵀ in matrix notation.
inline SparseMatrix permute(const SparseMatrix& a, const Permutation& p,
                            const Permutation& q) {
  if (p.size() != a.rows() || q.size() != a.cols()) {
    throw DimensionError("permute: permutation sizes do not match matrix");
  }
  const Index n = a.cols();
  std::vector<Index> cp(n + 1, 0);
  for (Index jn = 0; jn < n; ++jn) {
    Index jo = q.inverse()[jn];
    cp[jn + 1] = cp[jn] + (a.col_ptr()[jo + 1] - a.col_ptr()[jo]);
  }
  std::vector<Index> ri(a.nnz());
  std::vector<Complex> vals(a.nnz());
  std::vector<std::pair<Index, Complex>> col;
  for (Index jn = 0; jn < n; ++jn) {
    Index jo = q.inverse()[jn];
    auto rows = a.col_rows(jo);
    auto v = a.col_values(jo);
    col.clear();
    for (std::size_t k = 0; k < rows.size(); ++k) col.emplace_back(p(rows[k]), v[k]);
    std::sort(col.begin(), col.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t k = 0; k < col.size(); ++k) {
      ri[cp[jn] + k] = col[k].first;
      vals[cp[jn] + k] = col[k].second;
    }
  }
  return SparseMatrix(a.rows(), n, std::move(cp), std::move(ri), std::move(vals));
}

inline void spmv_into(const SparseMatrix& a, std::span<const Complex> x,
                      std::span<Complex> y) {
  if (static_cast<Index>(x.size()) != a.cols() ||
      static_cast<Index>(y.size()) != a.rows()) {
    throw DimensionError("spmv: dimension mismatch");
  }
  std::fill(y.begin(), y.end(), Complex{});
  auto cp = a.col_ptr();
  auto ri = a.row_ind();
  auto v = a.values();
  for (Index j = 0; j < a.cols(); ++j) {
    const Complex xj = x[j];
    if (xj == Complex{}) continue;
    for (Index p = cp[j]; p < cp[j + 1]; ++p) y[ri[p]] += v[p] * xj;
  }
}

inline DenseVector spmv(const SparseMatrix& a, std::span<const Complex> x) {
  DenseVector y(a.rows());
  spmv_into(a, x, y);
  return y;
}

// alpha*A + beta*B on the union pattern; exact-zero sums are pruned.
inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b,
                        Complex alpha = 1.0, Complex beta = 1.0) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: dimension mismatch");
  }
  TripletBuffer buf(a.rows(), a.cols());
  buf.reserve(static_cast<std::size_t>(a.nnz() + b.nnz()));
  for (Index j = 0; j < a.cols(); ++j) {
    auto ra = a.col_rows(j);
    auto va = a.col_values(j);
    for (std::size_t k = 0; k < ra.size(); ++k) buf.add(ra[k], j, alpha * va[k]);
    auto rb = b.col_rows(j);
    auto vb = b.col_values(j);
    for (std::size_t k = 0; k < rb.size(); ++k) buf.add(rb[k], j, beta * vb[k]);
  }
  return triplet_to_csc(buf);
}

inline double norm2(std::span<const Complex> x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return std::sqrt(s);
}

inline DenseVector subtract(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw DimensionError("vector length mismatch");
  DenseVector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

}  // namespace fdfill

#endif  // FDFILL_SPARSE_HPP_
