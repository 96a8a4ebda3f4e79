// Matrix Market coordinate I/O (complex, general; 1-based on disk).
#ifndef FDFILL_MATRIX_MARKET_HPP_
#define FDFILL_MATRIX_MARKET_HPP_

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fdfill/sparse.hpp"

namespace fdfill {

class MatrixMarketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

// Accepts real, integer and complex fields with general symmetry. Pattern
// files are rejected: every entry must carry a value.
inline SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MatrixMarketError("empty Matrix Market stream");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw MatrixMarketError("missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw MatrixMarketError("unsupported object '" + object + "'");
  if (format != "coordinate") {
    throw MatrixMarketError("only coordinate format is supported, got '" + format + "'");
  }
  if (field == "pattern") throw MatrixMarketError("pattern-only files carry no values");
  if (field != "complex" && field != "real" && field != "integer") {
    throw MatrixMarketError("unsupported field '" + field + "'");
  }
  if (symmetry != "general") {
    throw MatrixMarketError("only general symmetry is supported, got '" + symmetry + "'");
  }
  const bool is_complex = field == "complex";

  do {
    if (!std::getline(in, line)) throw MatrixMarketError("missing size line");
  } while (line.empty() || line[0] == '%');

  Index m = 0, n = 0, nz = 0;
  {
    std::istringstream sz(line);
    if (!(sz >> m >> n >> nz) || m < 0 || n < 0 || nz < 0) {
      throw MatrixMarketError("malformed size line: " + line);
    }
  }

  TripletBuffer buf(m, n);
  buf.reserve(static_cast<std::size_t>(nz));
  for (Index k = 0; k < nz; ++k) {
    do {
      if (!std::getline(in, line)) {
        throw MatrixMarketError("expected " + std::to_string(nz) + " entries, got " +
                                std::to_string(k));
      }
    } while (line.empty() || line[0] == '%');
    std::istringstream es(line);
    Index i = 0, j = 0;
    double re = 0.0, im = 0.0;
    if (!(es >> i >> j >> re) || (is_complex && !(es >> im))) {
      throw MatrixMarketError("malformed entry: " + line);
    }
    if (i < 1 || i > m || j < 1 || j > n) {
      throw MatrixMarketError("entry index out of range: " + line);
    }
    buf.add(i - 1, j - 1, Complex{re, im});
  }
  return triplet_to_csc(buf, ZeroPolicy::Keep);
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MatrixMarketError("cannot open " + path);
  return read_matrix_market(in);
}

inline void write_matrix_market(const SparseMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate complex general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index j = 0; j < a.cols(); ++j) {
    auto rows = a.col_rows(j);
    auto vals = a.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out << rows[k] + 1 << ' ' << j + 1 << ' ' << vals[k].real() << ' '
          << vals[k].imag() << '\n';
    }
  }
}

inline void write_matrix_market(const SparseMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MatrixMarketError("cannot write " + path);
  write_matrix_market(a, out);
}

}  // namespace fdfill

#endif  // FDFILL_MATRIX_MARKET_HPP_
