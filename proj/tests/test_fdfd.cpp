#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "corpus.hpp"
#include "fdfill/fdfd.hpp"
#include "fdfill/lu.hpp"

using namespace fdfill;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Directed couplings counted straight from the neighbor rules.
Index enumerate_couplings(Index n, BoundaryKind bc) {
  auto boundary = [&](Index i, Index j) { return i == 0 || j == 0 || i == n - 1 || j == n - 1; };
  Index count = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (bc == BoundaryKind::ModifiedDirichlet && boundary(i, j)) continue;
      const Index di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        Index a = i + di[d], b = j + dj[d];
        const bool outside = a < 0 || b < 0 || a >= n || b >= n;
        if (outside && bc != BoundaryKind::Periodic) continue;
        a = (a + n) % n;
        b = (b + n) % n;
        if (bc == BoundaryKind::ModifiedDirichlet && boundary(a, b)) continue;
        ++count;
      }
    }
  }
  return count;
}

}  // namespace

TEST_CASE("PML conductivity and stretch") {
  PmlSpec spec{30, 3.0, 1e-15};
  // −(m+1) ln R₀ / (2 T Δ) with m = 3, R₀ = 1e−15, T = 30, Δ = 1 reduces
  // to ln 10.
  CHECK(pml_sigma_max(spec, 1.0) == Approx(2.302585092994046).epsilon(1e-14));
  CHECK(pml_sigma_max(spec, 4.0 / 301.0) == Approx(2.302585092994046 * 301.0 / 4.0).epsilon(1e-14));
  CHECK(pml_sigma_max(PmlSpec{0, 3.0, 1e-15}, 1.0) == 0.0);

  const double w = 2.0 * kPi;
  CHECK(stretch_factor(spec, 0.1, w, 0.0) == Complex(1.0, 0.0));
  CHECK(stretch_factor(spec, 0.1, w, -3.0) == Complex(1.0, 0.0));
  const Complex full = stretch_factor(spec, 0.1, w, 30.0);
  CHECK(full.real() == 1.0);
  CHECK(full.imag() == Approx(pml_sigma_max(spec, 0.1) / w));
  CHECK(stretch_factor(spec, 0.1, w, 15.0).imag() == Approx(full.imag() / 8.0));

  AxisStretch s(100, spec, spec, 0.1, w);
  CHECK(s.at(50.0) == Complex(1.0, 0.0));
  CHECK(s.at(30.0) == Complex(1.0, 0.0));
  CHECK(s.at(69.0) == Complex(1.0, 0.0));
  CHECK(s.at(0.0) == full);
  CHECK(s.at(99.0) == full);
}

TEST_CASE("10x10 assembly sizes") {
  CHECK(corpus::bare_grid(10, BoundaryKind::Periodic).A.nnz() == 500);
  CHECK(corpus::bare_grid(10, BoundaryKind::Dirichlet).A.nnz() == 460);
  auto mod = corpus::bare_grid(10, BoundaryKind::ModifiedDirichlet);
  CHECK(mod.A.nnz() == 100 + enumerate_couplings(10, BoundaryKind::ModifiedDirichlet));
  for (Index k = 0; k < 100; ++k) {
    auto [i, j] = mod.grid.cell(k);
    if (i == 0 || j == 0 || i == 9 || j == 9) {
      CHECK(mod.A.col_rows(k).size() == 1);
      CHECK(mod.A.at(k, k) == Complex(1.0, 0.0));
    }
  }
}

TEST_CASE("interior vacuum rows carry exactly five entries") {
  auto sys = corpus::pml_grid(20, 4, BoundaryKind::Dirichlet);
  SparseMatrix at = sys.A.transpose();
  for (Index j = 1; j < 19; ++j) {
    for (Index i = 1; i < 19; ++i) CHECK(at.col_rows(sys.grid.flat(i, j)).size() == 5);
  }
}

TEST_CASE("coupling counts match direct enumeration") {
  for (Index n : {4, 7, 100}) {
    for (auto bc : {BoundaryKind::Periodic, BoundaryKind::Dirichlet, BoundaryKind::ModifiedDirichlet}) {
      INFO(n << " " << to_string(bc));
      CHECK(count_couplings(corpus::bare_grid(n, bc)) == enumerate_couplings(n, bc));
    }
    const Index p = count_couplings(corpus::bare_grid(n, BoundaryKind::Periodic));
    const Index d = count_couplings(corpus::bare_grid(n, BoundaryKind::Dirichlet));
    const Index m = count_couplings(corpus::bare_grid(n, BoundaryKind::ModifiedDirichlet));
    CHECK(p > d);
    CHECK(d > m);
  }
  CHECK(count_couplings(corpus::bare_grid(100, BoundaryKind::Periodic)) == 40000);
}

TEST_CASE("harmonic permittivity averaging on edges") {
  GridSpec g = GridSpec::uniform(4, 4, 0.5, 0.5, 0);
  std::vector<Complex> eps(16, Complex{1.0, 0.0});
  eps[g.flat(2, 1)] = 4.0;
  auto sys = assemble_tm(g, eps, BoundaryPair::both(BoundaryKind::Periodic), 1.0);
  // 1/ε on the edge = mean of 1/ε of the two cells.
  CHECK(sys.A.at(g.flat(1, 1), g.flat(2, 1)) == Complex(0.5 * (1.0 + 0.25) / 0.25, 0.0));
  CHECK(sys.A.at(g.flat(1, 1), g.flat(0, 1)) == Complex(1.0 / 0.25, 0.0));
  CHECK(sys.A.at(g.flat(2, 1), g.flat(1, 1)) == sys.A.at(g.flat(1, 1), g.flat(2, 1)));
}

TEST_CASE("Drude permittivity") {
  const Drude metal = kWaveguideMetal;
  const Complex e = drude_permittivity(metal, omega_si(2.0, 1e-6));
  CHECK(e.real() == Approx(-4.768).margin(5e-3));
  CHECK(e.imag() > 0.0);
  CHECK(e.imag() == Approx(0.0337).margin(5e-4));
  // γ = 0 is lossless.
  CHECK(drude_permittivity(Drude{metal.omega_p, 0.0}, 1e15).imag() == 0.0);
}

TEST_CASE("assembly guards") {
  GridSpec bare = GridSpec::uniform(10, 10, 0.1, 0.1, 0);
  auto eps = corpus::vacuum(bare);
  CHECK_THROWS_AS(assemble_tm(bare, eps, BoundaryPair::both(BoundaryKind::Dirichlet), 1.0), GridError);
  CHECK_THROWS_AS(assemble_tm(bare, eps, BoundaryPair::both(BoundaryKind::ModifiedDirichlet), 1.0), GridError);
  CHECK_NOTHROW(assemble_tm(bare, eps, BoundaryPair::both(BoundaryKind::Periodic), 1.0));

  GridSpec thick = GridSpec::uniform(10, 10, 0.1, 0.1, 5);
  CHECK_THROWS_AS(assemble_tm(thick, eps, BoundaryPair::both(BoundaryKind::Periodic), 1.0), GridError);
  GridSpec tiny = GridSpec::uniform(2, 10, 0.1, 0.1, 0);
  CHECK_THROWS_AS(tiny.validate(), GridError);

  GridSpec ok = GridSpec::uniform(10, 10, 0.1, 0.1, 2);
  CHECK_THROWS_AS(assemble_tm(ok, std::vector<Complex>(99, 1.0), BoundaryPair{}, 1.0), DimensionError);
}

TEST_CASE("point sources") {
  GridSpec g = GridSpec::uniform(301, 301, 4.0 / 241.0, 4.0 / 241.0, 30);
  const double w = 2.0 * kPi;
  DenseVector b = point_source(g, 150, 150, 1.0, w);
  Index nonzeros = 0;
  for (Index k = 0; k < g.size(); ++k) nonzeros += b[k] != Complex{};
  CHECK(nonzeros == 1);
  CHECK(b[150 + 301 * 150] == Complex(0.0, w));

  DenseVector zero = point_source(g, 150, 150, 0.0, w);
  CHECK(norm2(zero) == 0.0);

  DenseVector other = point_source(g, 100, 200, 1.0, w);
  for (Index k = 0; k < g.size(); ++k) CHECK((b[k] == Complex{} || other[k] == Complex{}));

  CHECK_THROWS_AS(point_source(g, 10, 150, 1.0, w), GridError);
  CHECK_THROWS_AS(point_source(g, 150, 400, 1.0, w), GridError);
}

TEST_CASE("line extraction") {
  GridSpec g = GridSpec::uniform(6, 4, 1.0, 1.0, 0);
  DenseVector constant(24, Complex(2.0, -1.0));
  auto row = extract_line(constant, g, LineAxis::Row, 2);
  CHECK(row.size() == 6);
  for (auto v : row) CHECK(v == Complex(2.0, -1.0));
  CHECK(extract_line(constant, g, LineAxis::Column, 5).size() == 4);
  CHECK_THROWS_AS(extract_line(constant, g, LineAxis::Row, 4), GridError);
  CHECK_THROWS_AS(extract_line(constant, g, LineAxis::Column, -1), GridError);
}

TEST_CASE("centered source gives a symmetric line") {
  auto sys = corpus::pml_grid(41, 8, BoundaryKind::ModifiedDirichlet);
  const auto& g = sys.grid;
  DenseVector x = solve(factor(sys.A), point_source(g, 20, 20, 1.0, 2.0 * kPi));
  auto line = extract_line(x, g, LineAxis::Row, 20);
  double asym = 0.0;
  for (Index i = 0; i < g.nx; ++i) asym = std::max(asym, std::abs(line[i] - line[g.nx - 1 - i]));
  CHECK(asym <= 1e-10 * norm2(line));
  auto column = extract_line(x, g, LineAxis::Column, 20);
  for (Index i = 0; i < g.nx; ++i) CHECK(std::abs(column[i] - line[i]) <= 1e-10 * norm2(line));
}

TEST_CASE("reciprocity between two interior points") {
  for (auto bc : {BoundaryKind::Periodic, BoundaryKind::ModifiedDirichlet}) {
    auto sys = corpus::pml_grid(40, 8, bc);
    const auto& g = sys.grid;
    auto f = factor(sys.A);
    const double w = 2.0 * kPi;
    DenseVector x1 = solve(f, point_source(g, 12, 15, 1.0, w));
    DenseVector x2 = solve(f, point_source(g, 25, 22, 1.0, w));
    const Complex g21 = x1[g.flat(25, 22)];
    const Complex g12 = x2[g.flat(12, 15)];
    CHECK(std::abs(g21 - g12) <= 1e-8 * std::abs(g12));
  }
}

TEST_CASE("discrete plane waves are eigenfunctions of the periodic operator") {
  const Index nx = 16, ny = 12;
  const double dx = 0.1, dy = 0.15;
  GridSpec g = GridSpec::uniform(nx, ny, dx, dy, 0);
  for (auto [mx, my] : {std::pair<int, int>{1, 0}, {3, 2}, {-2, 5}}) {
    const double p = 2.0 * kPi * mx / nx, q = 2.0 * kPi * my / ny;
    const double symbol = 4.0 / (dx * dx) * std::pow(std::sin(p / 2), 2) + 4.0 / (dy * dy) * std::pow(std::sin(q / 2), 2);
    const double w = std::sqrt(symbol);
    auto sys = assemble_tm(g, corpus::vacuum(g), BoundaryPair{}, w);
    DenseVector h(static_cast<std::size_t>(g.size()));
    for (Index j = 0; j < ny; ++j) {
      for (Index i = 0; i < nx; ++i) h[g.flat(i, j)] = std::exp(Complex(0.0, p * i + q * j));
    }
    CHECK(norm2(spmv(sys.A, h)) <= 1e-12 * sys.A.max_abs() * norm2(h));
  }
}

TEST_CASE("boundary and ordering names round-trip") {
  for (auto b : {BoundaryKind::Periodic, BoundaryKind::Dirichlet, BoundaryKind::ModifiedDirichlet}) {
    CHECK(parse_boundary(to_string(b)) == b);
  }
  CHECK_THROWS(parse_boundary("neumann"));
}
