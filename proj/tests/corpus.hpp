// Matrices shared by the unit tests and the acceptance runner.
#ifndef FDFILL_TESTS_CORPUS_HPP_
#define FDFILL_TESTS_CORPUS_HPP_

#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fdfill/eigen.hpp"
#include "fdfill/experiments.hpp"
#include "fdfill/fdfd.hpp"
#include "fdfill/sparse.hpp"

namespace corpus {

using namespace fdfill;

struct Entry {
  std::string name;
  SparseMatrix a;
  std::optional<Permutation> row_prepermutation;
};

// Hub at node 0 coupled to every other node; 2 on the diagonal, 1 elsewhere.
inline constexpr Complex kArrowDiag{2.0, 1.0};

// Real diagonal d with hub first has a zero leading minor at k = d*d.
inline SparseMatrix arrow(Index n, bool hub_last = false, Complex diagonal = 2.0) {
  TripletBuffer t(n, n);
  const Index hub = hub_last ? n - 1 : 0;
  for (Index i = 0; i < n; ++i) {
    t.add(i, i, diagonal);
    if (i != hub) {
      t.add(i, hub, 1.0);
      t.add(hub, i, 1.0);
    }
  }
  return triplet_to_csc(t);
}

inline std::vector<Complex> vacuum(const GridSpec& g) {
  return std::vector<Complex>(static_cast<std::size_t>(g.size()), Complex{1.0, 0.0});
}

// Bare n×n vacuum grid without PML (structural studies).
inline AssembledSystem bare_grid(Index n, BoundaryKind bc) {
  const GridSpec g = GridSpec::uniform(n, n, 0.1, 0.1, 0);
  AssemblyOptions opt;
  opt.allow_dirichlet_without_pml = true;
  return assemble_tm(g, vacuum(g), BoundaryPair::both(bc), 2.0 * std::numbers::pi, opt);
}

inline AssembledSystem pml_grid(Index n, Index pml, BoundaryKind bc) {
  const GridSpec g = GridSpec::uniform(n, n, 4.0 / static_cast<double>(n - 2 * pml),
                                       4.0 / static_cast<double>(n - 2 * pml), pml);
  return assemble_tm(g, vacuum(g), BoundaryPair::both(bc), 2.0 * std::numbers::pi);
}

// Scaled-down waveguide cell: periodic x, PML + backing along y, dielectric
// walls with a Drude strip.
inline ExperimentConfig small_waveguide(Index nx = 8, Index ny = 12, Index pml = 2) {
  ExperimentConfig c;
  c.experiment = "bands";
  c.grid.nx = nx;
  c.grid.ny = ny;
  c.grid.dx = 0.2 / static_cast<double>(nx);
  c.grid.dy = 0.1;
  c.grid.pml_at(Side::YLow).thickness = pml;
  c.grid.pml_at(Side::YHigh).thickness = pml;
  c.wavelength = 2.0;
  const Index wall = std::max<Index>(1, ny / 8);
  for (auto j0 : {pml + 1, ny - pml - 1 - wall}) {
    c.materials.push_back({0, nx, j0, j0 + wall, Dielectric{16.0}});
    c.materials.push_back({nx * 2 / 5, nx * 3 / 5, j0, j0 + wall, kWaveguideMetal});
  }
  return c;
}

inline QepMatrices waveguide_qep(const ExperimentConfig& c, BoundaryKind backing) {
  const MaterialMap mat = build_materials(c);
  return assemble_qep(c.grid, mat, {BoundaryKind::Periodic, backing}, omega_normalized(c.wavelength),
                      omega_si(c.wavelength, c.length_unit_m));
}

// Same pattern, random complex values of modulus in [0.5, 1.5]; the
// diagonal is boosted so no pivot vanishes.
inline SparseMatrix randomized(const SparseMatrix& a, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.5, 1.5), ang(0.0, 2.0 * std::numbers::pi);
  std::vector<Complex> vals(a.values().size());
  for (Index j = 0; j < a.cols(); ++j) {
    auto rows = a.col_rows(j);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const std::size_t k = static_cast<std::size_t>(a.col_ptr()[j]) + t;
      vals[k] = std::polar(mag(rng), ang(rng));
    }
  }
  return SparseMatrix(a.rows(), a.cols(), std::vector<Index>(a.col_ptr().begin(), a.col_ptr().end()),
                      std::vector<Index>(a.row_ind().begin(), a.row_ind().end()), std::move(vals));
}

// Matrices with n ≤ 200, used for the dense-oracle comparisons.
inline std::vector<Entry> small_corpus() {
  std::vector<Entry> out;
  out.push_back({"arrow5", arrow(5, false, kArrowDiag), {}});
  out.push_back({"arrow50", arrow(50, false, kArrowDiag), {}});
  out.push_back({"arrow50_hub_last", arrow(50, true, kArrowDiag), {}});
  for (auto bc : {BoundaryKind::Periodic, BoundaryKind::Dirichlet, BoundaryKind::ModifiedDirichlet}) {
    out.push_back({"grid10_" + std::string(to_string(bc)), bare_grid(10, bc).A, {}});
    out.push_back({"pml14_" + std::string(to_string(bc)), pml_grid(14, 3, bc).A, {}});
  }
  for (auto bc : {BoundaryKind::Periodic, BoundaryKind::ModifiedDirichlet}) {
    Pencil p = linearize(waveguide_qep(small_waveguide(), bc));
    out.push_back({"pencil96_" + std::string(to_string(bc)), shifted(p, 0.0), p.row_prepermutation});
    out.push_back({"pencil96_shift_" + std::string(to_string(bc)), shifted(p, Complex(3.0, 0.1)),
                   p.row_prepermutation});
  }
  return out;
}

}  // namespace corpus

#endif  // FDFILL_TESTS_CORPUS_HPP_
