// 2D TM (H_z) finite-difference frequency-domain operator with a
// stretched-coordinate PML and a choice of boundary condition behind it.
//
// Units are normalized (c = ε₀ = μ₀ = 1). Cell sizes are in whatever length
// unit the caller picked, and ω is 2π / λ₀ in the inverse of that unit.
//
// Nodes sit at cell centers; node (i, j) has flat index i + nx·j with i
// along x. The operator is
//
//   (1/s_x) ∂x (1/(ε s_x)) ∂x + (1/s_y) ∂y (1/(ε s_y)) ∂y + ω²
//
// in divergence form with 1/ε at half-grid edges taken as the mean of the
// adjacent cells' 1/ε (harmonic mean of ε).
#ifndef FDFILL_FDFD_HPP_
#define FDFILL_FDFD_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fdfill/sparse.hpp"

namespace fdfill {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class BoundaryKind { Periodic, Dirichlet, ModifiedDirichlet };

inline std::string_view to_string(BoundaryKind b) {
  switch (b) {
    case BoundaryKind::Periodic: return "periodic";
    case BoundaryKind::Dirichlet: return "dirichlet";
    case BoundaryKind::ModifiedDirichlet: return "modified_dirichlet";
  }
  return "?";
}

inline BoundaryKind parse_boundary(std::string_view s) {
  if (s == "periodic") return BoundaryKind::Periodic;
  if (s == "dirichlet") return BoundaryKind::Dirichlet;
  if (s == "modified_dirichlet" || s == "modified") return BoundaryKind::ModifiedDirichlet;
  throw std::invalid_argument("unknown boundary kind '" + std::string(s) + "'");
}

struct BoundaryPair {
  BoundaryKind x = BoundaryKind::Periodic;
  BoundaryKind y = BoundaryKind::Periodic;

  static BoundaryPair both(BoundaryKind b) { return {b, b}; }
};

struct PmlSpec {
  Index thickness = 0;
  double order = 3.0;
  double r0 = 1e-15;
};

enum class Side { XLow, XHigh, YLow, YHigh };

struct GridSpec {
  Index nx = 0;
  Index ny = 0;
  double dx = 1.0;
  double dy = 1.0;
  std::array<PmlSpec, 4> pml{};  // indexed by Side

  const PmlSpec& pml_at(Side s) const { return pml[static_cast<std::size_t>(s)]; }
  PmlSpec& pml_at(Side s) { return pml[static_cast<std::size_t>(s)]; }

  Index size() const { return nx * ny; }
  Index flat(Index i, Index j) const { return i + nx * j; }
  std::pair<Index, Index> cell(Index flat_index) const { return {flat_index % nx, flat_index / nx}; }

  bool in_pml(Index i, Index j) const {
    return i < pml_at(Side::XLow).thickness || i >= nx - pml_at(Side::XHigh).thickness ||
           j < pml_at(Side::YLow).thickness || j >= ny - pml_at(Side::YHigh).thickness;
  }

  void validate() const {
    if (nx < 3 || ny < 3) throw GridError("grid needs at least 3 cells per axis");
    if (!(dx > 0.0) || !(dy > 0.0)) throw GridError("cell sizes must be positive");
    for (int s = 0; s < 4; ++s) {
      const auto& p = pml[s];
      const Index dim = s < 2 ? nx : ny;
      if (p.thickness < 0) throw GridError("negative PML thickness");
      if (2 * p.thickness >= dim) {
        throw GridError("PML thickness " + std::to_string(p.thickness) +
                        " must be below half the axis length " + std::to_string(dim));
      }
      if (p.thickness > 0 && (p.order < 1.0 || !(p.r0 > 0.0 && p.r0 < 1.0))) {
        throw GridError("PML needs order >= 1 and 0 < R0 < 1");
      }
    }
  }

  // Uniform PML on every side.
  static GridSpec uniform(Index nx, Index ny, double dx, double dy, Index pml_cells) {
    GridSpec g{nx, ny, dx, dy, {}};
    for (auto& p : g.pml) p.thickness = pml_cells;
    return g;
  }
};

// ---------------------------------------------------------------------------
// Materials

struct Vacuum {};
struct Dielectric {
  double eps_r = 1.0;
};
// SI parameters: plasma frequency in rad/s, collision rate in 1/s.
struct Drude {
  double omega_p = 0.0;
  double gamma = 0.0;
};
using Material = std::variant<Vacuum, Dielectric, Drude>;

// ε(ω) = 1 − ω_p² / (ω² + iγω), e^{−iωt} convention (Im ε > 0 is loss).
inline Complex drude_permittivity(const Drude& d, double omega_si) {
  return 1.0 - d.omega_p * d.omega_p / Complex(omega_si * omega_si, d.gamma * omega_si);
}

inline Complex permittivity(const Material& m, double omega_si) {
  return std::visit(
      [&](const auto& v) -> Complex {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Vacuum>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, Dielectric>) {
          return v.eps_r;
        } else {
          return drude_permittivity(v, omega_si);
        }
      },
      m);
}

class MaterialMap {
 public:
  MaterialMap() = default;
  MaterialMap(Index nx, Index ny) : nx_(nx), ny_(ny), cells_(static_cast<std::size_t>(nx * ny), Vacuum{}) {}

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }

  void set(Index i, Index j, Material m) { cells_.at(static_cast<std::size_t>(i + nx_ * j)) = m; }
  const Material& at(Index i, Index j) const { return cells_.at(static_cast<std::size_t>(i + nx_ * j)); }

  // Half-open cell rectangle [i0, i1) × [j0, j1), clipped to the grid.
  void fill_rect(Index i0, Index i1, Index j0, Index j1, const Material& m) {
    for (Index j = std::max<Index>(j0, 0); j < std::min(j1, ny_); ++j) {
      for (Index i = std::max<Index>(i0, 0); i < std::min(i1, nx_); ++i) set(i, j, m);
    }
  }

  // Relative permittivity per cell at the given angular frequency (rad/s;
  // only Drude cells depend on it).
  std::vector<Complex> evaluate(double omega_si) const {
    std::vector<Complex> eps(cells_.size());
    for (std::size_t k = 0; k < cells_.size(); ++k) eps[k] = permittivity(cells_[k], omega_si);
    return eps;
  }

 private:
  Index nx_ = 0;
  Index ny_ = 0;
  std::vector<Material> cells_;
};

// ---------------------------------------------------------------------------
// PML stretch

// σ_max = −(m + 1) ln R₀ / (2 d), d the physical PML thickness.
inline double pml_sigma_max(const PmlSpec& spec, double cell_size) {
  if (spec.thickness <= 0) return 0.0;
  return -(spec.order + 1.0) * std::log(spec.r0) /
         (2.0 * static_cast<double>(spec.thickness) * cell_size);
}

// s = 1 + iσ(depth)/ω with σ = σ_max (depth / thickness)^m. `depth_cells`
// is the distance into the layer from its inner edge, in cells; zero or
// negative means outside the layer. Depth is clamped to the layer thickness.
inline Complex stretch_factor(const PmlSpec& spec, double cell_size, double omega, double depth_cells) {
  if (spec.thickness <= 0 || depth_cells <= 0.0) return 1.0;
  const double t = static_cast<double>(spec.thickness);
  const double frac = std::min(depth_cells, t) / t;
  const double sigma = pml_sigma_max(spec, cell_size) * std::pow(frac, spec.order);
  return Complex(1.0, sigma / omega);
}

// Stretch along one axis, sampled at a continuous position u in node units
// (node k at u = k, half edges at k + 1/2).
class AxisStretch {
 public:
  AxisStretch(Index n, const PmlSpec& low, const PmlSpec& high, double cell_size, double omega)
      : n_(n), low_(low), high_(high), h_(cell_size), omega_(omega) {}

  Complex at(double u) const {
    const double inner_low = static_cast<double>(low_.thickness);
    const double inner_high = static_cast<double>(n_ - 1 - high_.thickness);
    if (low_.thickness > 0 && u < inner_low) return stretch_factor(low_, h_, omega_, inner_low - u);
    if (high_.thickness > 0 && u > inner_high) return stretch_factor(high_, h_, omega_, u - inner_high);
    return 1.0;
  }

 private:
  Index n_;
  PmlSpec low_, high_;
  double h_;
  double omega_;
};

// ---------------------------------------------------------------------------
// Assembly

struct AssemblyOptions {
  // Dirichlet variants normally need a PML on that axis; the bare grids of
  // small structural studies set this.
  bool allow_dirichlet_without_pml = false;
};

struct AssembledSystem {
  SparseMatrix A;
  GridSpec grid;
  BoundaryPair bc;
  Index couplings = 0;
  // Nodes forced to zero by a modified Dirichlet boundary.
  std::vector<bool> pinned;
};

namespace detail {

inline bool on_modified_boundary(const GridSpec& g, const BoundaryPair& bc, Index i, Index j) {
  return (bc.x == BoundaryKind::ModifiedDirichlet && (i == 0 || i == g.nx - 1)) ||
         (bc.y == BoundaryKind::ModifiedDirichlet && (j == 0 || j == g.ny - 1));
}

inline void check_boundary_guard(const GridSpec& g, const BoundaryPair& bc, const AssemblyOptions& opt) {
  if (opt.allow_dirichlet_without_pml) return;
  auto guarded = [](BoundaryKind b) { return b != BoundaryKind::Periodic; };
  if (guarded(bc.x) && (g.pml_at(Side::XLow).thickness == 0 || g.pml_at(Side::XHigh).thickness == 0)) {
    throw GridError("Dirichlet-type boundary on x requires a PML on both x sides");
  }
  if (guarded(bc.y) && (g.pml_at(Side::YLow).thickness == 0 || g.pml_at(Side::YHigh).thickness == 0)) {
    throw GridError("Dirichlet-type boundary on y requires a PML on both y sides");
  }
}

inline Complex inv_eps_edge(std::span<const Complex> eps, Index a, Index b) {
  return 0.5 * (1.0 / eps[a] + 1.0 / eps[b]);
}

}  // namespace detail

inline std::vector<bool> pinned_nodes(const GridSpec& g, const BoundaryPair& bc) {
  std::vector<bool> pinned(static_cast<std::size_t>(g.size()), false);
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) pinned[g.flat(i, j)] = detail::on_modified_boundary(g, bc, i, j);
  }
  return pinned;
}

// Assembles the TM operator. `eps` holds the relative permittivity of every
// cell (MaterialMap::evaluate).
inline AssembledSystem assemble_tm(const GridSpec& g, std::span<const Complex> eps, BoundaryPair bc,
                                   double omega, const AssemblyOptions& opt = {}) {
  g.validate();
  if (static_cast<Index>(eps.size()) != g.size()) {
    throw DimensionError("assemble_tm: permittivity map has " + std::to_string(eps.size()) +
                         " cells, grid has " + std::to_string(g.size()));
  }
  detail::check_boundary_guard(g, bc, opt);

  const AxisStretch sx(g.nx, g.pml_at(Side::XLow), g.pml_at(Side::XHigh), g.dx, omega);
  const AxisStretch sy(g.ny, g.pml_at(Side::YLow), g.pml_at(Side::YHigh), g.dy, omega);
  const auto pinned = pinned_nodes(g, bc);

  TripletBuffer buf(g.size(), g.size());
  buf.reserve(static_cast<std::size_t>(5 * g.size()));
  const double idx2 = 1.0 / (g.dx * g.dx);
  const double idy2 = 1.0 / (g.dy * g.dy);

  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      const Index row = g.flat(i, j);
      if (pinned[row]) {
        buf.add(row, row, 1.0);
        continue;
      }
      Complex diag = omega * omega;

      // One neighbor direction: (ni, nj) is the neighbor, `u_half` the
      // half-edge position along the axis, `scale` the row's 1/s factor.
      auto couple = [&](Index ni, Index nj, bool inside, Index cell_other, const AxisStretch& s,
                        double u_node, double u_half, double inv_h2) {
        const Index self = row;
        const Index edge_cell = inside ? cell_other : self;
        const Complex coef =
            detail::inv_eps_edge(eps, self, edge_cell) / (s.at(u_half) * s.at(u_node)) * inv_h2;
        diag -= coef;
        if (inside) {
          const Index col = g.flat(ni, nj);
          if (!pinned[col]) buf.add(row, col, coef);
        }
      };

      // x neighbors
      for (int dir : {-1, +1}) {
        Index ni = i + dir;
        bool inside = ni >= 0 && ni < g.nx;
        if (!inside && bc.x == BoundaryKind::Periodic) {
          ni = (ni + g.nx) % g.nx;
          inside = true;
        }
        couple(ni, j, inside, inside ? g.flat(ni, j) : row, sx, static_cast<double>(i),
               static_cast<double>(i) + 0.5 * dir, idx2);
      }
      // y neighbors
      for (int dir : {-1, +1}) {
        Index nj = j + dir;
        bool inside = nj >= 0 && nj < g.ny;
        if (!inside && bc.y == BoundaryKind::Periodic) {
          nj = (nj + g.ny) % g.ny;
          inside = true;
        }
        couple(i, nj, inside, inside ? g.flat(i, nj) : row, sy, static_cast<double>(j),
               static_cast<double>(j) + 0.5 * dir, idy2);
      }
      buf.add(row, row, diag);
    }
  }

  AssembledSystem sys;
  sys.A = triplet_to_csc(buf);
  sys.grid = g;
  sys.bc = bc;
  sys.pinned = pinned;
  sys.couplings = sys.A.nnz();
  for (Index k = 0; k < g.size(); ++k) {
    if (sys.A.contains(k, k)) --sys.couplings;
  }
  return sys;
}

inline AssembledSystem assemble_tm(const GridSpec& g, const MaterialMap& mat, BoundaryPair bc, double omega,
                                   double omega_si = 0.0, const AssemblyOptions& opt = {}) {
  if (mat.nx() != g.nx || mat.ny() != g.ny) throw DimensionError("material map does not match grid");
  auto eps = mat.evaluate(omega_si);
  return assemble_tm(g, eps, bc, omega, opt);
}

// Off-diagonal structural entries (directed couplings).
inline Index count_couplings(const AssembledSystem& sys) { return sys.couplings; }

// Right-hand side i·ω·M_z for a point source of the given amplitude.
inline DenseVector point_source(const GridSpec& g, Index i, Index j, Complex amplitude, double omega) {
  if (i < 0 || i >= g.nx || j < 0 || j >= g.ny) throw GridError("source location outside grid");
  if (g.in_pml(i, j)) throw GridError("source location lies inside the PML");
  DenseVector b(static_cast<std::size_t>(g.size()));
  b[g.flat(i, j)] = Complex(0.0, omega) * amplitude;
  return b;
}

enum class LineAxis { Row, Column };

// Row j (samples along x, length nx) or column i (along y, length ny).
inline DenseVector extract_line(std::span<const Complex> field, const GridSpec& g, LineAxis axis, Index index) {
  if (static_cast<Index>(field.size()) != g.size()) throw DimensionError("field/grid size mismatch");
  DenseVector out;
  if (axis == LineAxis::Row) {
    if (index < 0 || index >= g.ny) throw GridError("row index out of range");
    for (Index i = 0; i < g.nx; ++i) out.push_back(field[g.flat(i, index)]);
  } else {
    if (index < 0 || index >= g.nx) throw GridError("column index out of range");
    for (Index j = 0; j < g.ny; ++j) out.push_back(field[g.flat(index, j)]);
  }
  return out;
}

// Restriction of a field to the non-PML cells, row by row.
inline DenseVector interior_values(std::span<const Complex> field, const GridSpec& g) {
  DenseVector out;
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      if (!g.in_pml(i, j)) out.push_back(field[g.flat(i, j)]);
    }
  }
  return out;
}

}  // namespace fdfill

#endif  // FDFILL_FDFD_HPP_
