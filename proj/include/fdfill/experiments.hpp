// End-to-end studies: driven-field comparison, fill scans, coupling tables,
// waveguide bands and ad hoc factorization. Each run takes a validated
// ExperimentConfig and returns a RunReport (JSON) plus CSV artifacts.
#ifndef FDFILL_EXPERIMENTS_HPP_
#define FDFILL_EXPERIMENTS_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fdfill/eigen.hpp"
#include "fdfill/fdfd.hpp"
#include "fdfill/lu.hpp"
#include "fdfill/matrix_market.hpp"

namespace fdfill {

inline constexpr const char* kVersion = "fdfill 0.1.0";
inline constexpr double kSpeedOfLight = 2.99792458e8;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using json = nlohmann::ordered_json;

struct MaterialRegion {
  Index i0 = 0, i1 = 0, j0 = 0, j1 = 0;  // half-open cell ranges
  Material material;
};

struct SourceSpec {
  std::optional<Index> i, j;  // default: grid center
  double amplitude = 1.0;
};

struct ExperimentConfig {
  std::string experiment;
  GridSpec grid;
  std::vector<MaterialRegion> materials;
  OrderingKind ordering = OrderingKind::Amd;
  // Free-space wavelength in grid length units, and the size of that unit
  // in meters (only Drude materials need the SI frequency).
  double wavelength = 1.0;
  double length_unit_m = 1e-6;
  SourceSpec source;
  double tolerance = 1e-6;

  // fill-scan / coupling-table
  std::vector<Index> sizes;
  Index pml_cells = 20;
  double domain_wavelengths = 4.0;

  // bands
  std::vector<double> wavelengths;
  std::vector<double> pencil_shifts;
  Complex shift{0.0, 0.0};
  Index wanted = 12;
  Index subspace = 40;
  double arnoldi_tolerance = 1e-11;
  FilterCriteria filter;
  double min_pencil_reduction = 20.0;

  // factor
  std::string matrix_path;

  std::string output_dir = "fdfill-out";
  bool dump_matrices = false;
  std::uint64_t seed = 0x5eed;
  Index workers = 1;
};

struct RunReport {
  json document;
  bool passed = true;

  void check(const std::string& name, bool ok, json detail) {
    document["checks"].push_back({{"name", name}, {"passed", ok}, {"detail", std::move(detail)}});
    passed = passed && ok;
  }
};

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline json material_to_json(const Material& m) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Vacuum>) {
          return {{"type", "vacuum"}};
        } else if constexpr (std::is_same_v<T, Dielectric>) {
          return {{"type", "dielectric"}, {"eps_r", v.eps_r}};
        } else {
          return {{"type", "drude"}, {"omega_p", v.omega_p}, {"gamma", v.gamma}};
        }
      },
      m);
}

inline Material material_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "vacuum") {
    reject_unknown(j, {"type"}, "material");
    return Vacuum{};
  }
  if (type == "dielectric") {
    reject_unknown(j, {"type", "eps_r"}, "material");
    double e = j.at("eps_r").get<double>();
    if (e < 1.0) throw ConfigError("dielectric eps_r must be >= 1");
    return Dielectric{e};
  }
  if (type == "drude") {
    reject_unknown(j, {"type", "omega_p", "gamma"}, "material");
    return Drude{j.at("omega_p").get<double>(), j.at("gamma").get<double>()};
  }
  throw ConfigError("unknown material type '" + type + "'");
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  const auto& g = c.grid;
  json pml = {{"x_low", g.pml_at(Side::XLow).thickness},
              {"x_high", g.pml_at(Side::XHigh).thickness},
              {"y_low", g.pml_at(Side::YLow).thickness},
              {"y_high", g.pml_at(Side::YHigh).thickness},
              {"order", g.pml[0].order},
              {"r0", g.pml[0].r0}};
  json mats = json::array();
  for (const auto& r : c.materials) {
    mats.push_back({{"cells", {r.i0, r.i1, r.j0, r.j1}}, {"material", detail::material_to_json(r.material)}});
  }
  return {{"experiment", c.experiment},
          {"grid", {{"nx", g.nx}, {"ny", g.ny}, {"dx", g.dx}, {"dy", g.dy}, {"pml", pml}}},
          {"materials", mats},
          {"ordering", std::string(to_string(c.ordering))},
          {"wavelength", c.wavelength},
          {"length_unit_m", c.length_unit_m},
          {"source",
           {{"i", c.source.i ? json(*c.source.i) : json(nullptr)},
            {"j", c.source.j ? json(*c.source.j) : json(nullptr)},
            {"amplitude", c.source.amplitude}}},
          {"tolerance", c.tolerance},
          {"sizes", c.sizes},
          {"pml_cells", c.pml_cells},
          {"domain_wavelengths", c.domain_wavelengths},
          {"wavelengths", c.wavelengths},
          {"pencil_shifts", c.pencil_shifts},
          {"shift", {c.shift.real(), c.shift.imag()}},
          {"wanted", c.wanted},
          {"subspace", c.subspace},
          {"arnoldi_tolerance", c.arnoldi_tolerance},
          {"filter", {{"min_energy_fraction", c.filter.min_energy_fraction}, {"max_residual", c.filter.max_residual}}},
          {"min_pencil_reduction", c.min_pencil_reduction},
          {"matrix_path", c.matrix_path},
          {"output_dir", c.output_dir},
          {"dump_matrices", c.dump_matrices},
          {"seed", c.seed},
          {"workers", c.workers}};
}

inline const std::set<std::string>& known_experiments() {
  static const std::set<std::string> names{"driven-compare", "fill-scan", "coupling-table", "bands", "factor"};
  return names;
}

// Fills `c` from `j`; keys absent from `j` keep their current values.
inline void merge_config(ExperimentConfig& c, const json& j) {
  detail::reject_unknown(j,
                         {"experiment", "grid", "materials", "ordering", "wavelength", "length_unit_m", "source",
                          "tolerance", "sizes", "pml_cells", "domain_wavelengths", "wavelengths", "pencil_shifts",
                          "shift", "wanted", "subspace", "arnoldi_tolerance", "filter", "min_pencil_reduction",
                          "matrix_path", "output_dir", "dump_matrices", "seed", "workers"},
                         "config");
  try {
    if (j.contains("experiment")) c.experiment = j["experiment"].get<std::string>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      detail::reject_unknown(g, {"nx", "ny", "dx", "dy", "pml"}, "grid");
      if (g.contains("nx")) c.grid.nx = g["nx"].get<Index>();
      if (g.contains("ny")) c.grid.ny = g["ny"].get<Index>();
      if (g.contains("dx")) c.grid.dx = g["dx"].get<double>();
      if (g.contains("dy")) c.grid.dy = g["dy"].get<double>();
      if (g.contains("pml")) {
        const auto& p = g["pml"];
        detail::reject_unknown(p, {"x_low", "x_high", "y_low", "y_high", "order", "r0"}, "grid.pml");
        const char* sides[] = {"x_low", "x_high", "y_low", "y_high"};
        for (int s = 0; s < 4; ++s) {
          if (p.contains(sides[s])) c.grid.pml[s].thickness = p[sides[s]].get<Index>();
        }
        for (auto& side : c.grid.pml) {
          if (p.contains("order")) side.order = p["order"].get<double>();
          if (p.contains("r0")) side.r0 = p["r0"].get<double>();
        }
      }
    }
    if (j.contains("materials")) {
      c.materials.clear();
      for (const auto& r : j["materials"]) {
        detail::reject_unknown(r, {"cells", "material"}, "materials[]");
        const auto& cells = r.at("cells");
        if (!cells.is_array() || cells.size() != 4) throw ConfigError("materials[].cells must be [i0, i1, j0, j1]");
        c.materials.push_back({cells[0].get<Index>(), cells[1].get<Index>(), cells[2].get<Index>(),
                               cells[3].get<Index>(), detail::material_from_json(r.at("material"))});
      }
    }
    if (j.contains("ordering")) c.ordering = parse_ordering(j["ordering"].get<std::string>());
    if (j.contains("wavelength")) c.wavelength = j["wavelength"].get<double>();
    if (j.contains("length_unit_m")) c.length_unit_m = j["length_unit_m"].get<double>();
    if (j.contains("source")) {
      const auto& s = j["source"];
      detail::reject_unknown(s, {"i", "j", "amplitude"}, "source");
      if (s.contains("i")) c.source.i = s["i"].is_null() ? std::nullopt : std::optional<Index>(s["i"].get<Index>());
      if (s.contains("j")) c.source.j = s["j"].is_null() ? std::nullopt : std::optional<Index>(s["j"].get<Index>());
      if (s.contains("amplitude")) c.source.amplitude = s["amplitude"].get<double>();
    }
    if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<Index>>();
    if (j.contains("pml_cells")) c.pml_cells = j["pml_cells"].get<Index>();
    if (j.contains("domain_wavelengths")) c.domain_wavelengths = j["domain_wavelengths"].get<double>();
    if (j.contains("wavelengths")) c.wavelengths = j["wavelengths"].get<std::vector<double>>();
    if (j.contains("pencil_shifts")) c.pencil_shifts = j["pencil_shifts"].get<std::vector<double>>();
    if (j.contains("shift")) {
      const auto& s = j["shift"];
      if (s.is_number()) {
        c.shift = s.get<double>();
      } else if (s.is_array() && s.size() == 2) {
        c.shift = Complex(s[0].get<double>(), s[1].get<double>());
      } else {
        throw ConfigError("shift must be a number or [re, im]");
      }
    }
    if (j.contains("wanted")) c.wanted = j["wanted"].get<Index>();
    if (j.contains("subspace")) c.subspace = j["subspace"].get<Index>();
    if (j.contains("arnoldi_tolerance")) c.arnoldi_tolerance = j["arnoldi_tolerance"].get<double>();
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      detail::reject_unknown(f, {"min_energy_fraction", "max_residual"}, "filter");
      if (f.contains("min_energy_fraction")) c.filter.min_energy_fraction = f["min_energy_fraction"].get<double>();
      if (f.contains("max_residual")) c.filter.max_residual = f["max_residual"].get<double>();
    }
    if (j.contains("min_pencil_reduction")) c.min_pencil_reduction = j["min_pencil_reduction"].get<double>();
    if (j.contains("matrix_path")) c.matrix_path = j["matrix_path"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("dump_matrices")) c.dump_matrices = j["dump_matrices"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<Index>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

inline void validate_config(const ExperimentConfig& c) {
  if (!known_experiments().count(c.experiment)) throw ConfigError("unknown experiment '" + c.experiment + "'");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.experiment == "driven-compare" || c.experiment == "bands") {
    try {
      c.grid.validate();
    } catch (const GridError& e) {
      throw ConfigError(e.what());
    }
    if (!(c.wavelength > 0.0)) throw ConfigError("wavelength must be positive");
    for (const auto& r : c.materials) {
      if (r.i0 < 0 || r.j0 < 0 || r.i1 > c.grid.nx || r.j1 > c.grid.ny || r.i0 > r.i1 || r.j0 > r.j1) {
        throw ConfigError("material rectangle outside grid");
      }
    }
  }
  if ((c.experiment == "fill-scan" || c.experiment == "coupling-table") && c.sizes.empty()) {
    throw ConfigError(c.experiment + " needs a non-empty 'sizes' list");
  }
  if (c.experiment == "fill-scan") {
    for (Index s : c.sizes) {
      if (s < 3) throw ConfigError("fill-scan sizes must be >= 3");
    }
  }
  if (c.experiment == "bands") {
    if (c.wanted < 1 || c.wanted >= c.subspace) throw ConfigError("need 1 <= wanted < subspace");
  }
  if (c.experiment == "factor" && c.matrix_path.empty()) throw ConfigError("factor needs 'matrix_path'");
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  merge_config(c, j);
  validate_config(c);
  return c;
}

// key=value override, dotted keys address nested objects
// ("grid.nx=61", "sizes=[51,101]", "ordering=amd").
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Presets

inline MaterialMap build_materials(const ExperimentConfig& c) {
  MaterialMap m(c.grid.nx, c.grid.ny);
  for (const auto& r : c.materials) m.fill_rect(r.i0, r.i1, r.j0, r.j1, r.material);
  return m;
}

inline double omega_normalized(double wavelength) { return 2.0 * std::numbers::pi / wavelength; }
inline double omega_si(double wavelength, double length_unit_m) {
  return 2.0 * std::numbers::pi * kSpeedOfLight / (wavelength * length_unit_m);
}

// Hollow-core waveguide unit cell: x period 0.2 µm on 100 cells, 150 cells
// along y at 0.02 µm with a 10-cell PML on each y side, 0.2 µm vacuum
// cladding, two 0.3 µm walls 1.6 µm apart. Each wall is ε = 16 dielectric
// with a 0.04 µm wide Drude metal strip per period.
inline const Drude kWaveguideMetal{0.72 * std::numbers::pi * 1e15, 5.5e12};

inline ExperimentConfig waveguide_preset() {
  ExperimentConfig c;
  c.experiment = "bands";
  c.grid.nx = 100;
  c.grid.ny = 150;
  c.grid.dx = 0.002;
  c.grid.dy = 0.02;
  c.grid.pml_at(Side::YLow).thickness = 10;
  c.grid.pml_at(Side::YHigh).thickness = 10;
  c.length_unit_m = 1e-6;
  c.wavelength = 2.0;
  for (auto [j0, j1] : {std::pair<Index, Index>{20, 35}, {115, 130}}) {
    c.materials.push_back({0, 100, j0, j1, Dielectric{16.0}});
    c.materials.push_back({40, 60, j0, j1, kWaveguideMetal});
  }
  c.wavelengths = {1.9, 2.0, 2.1};
  const double lambda_p_um = 2.0 * std::numbers::pi * kSpeedOfLight / kWaveguideMetal.omega_p * 1e6;
  c.pencil_shifts = {0.0, 2.0 * std::numbers::pi / lambda_p_um};
  c.shift = 0.0;
  c.wanted = 12;
  c.subspace = 40;
  c.tolerance = 1e-3;
  c.output_dir = "fdfill-out/bands";
  return c;
}

// Square vacuum domain of `interior` cells spanning `a` wavelengths
// (λ₀ = 1) plus `pml` cells on every side.
inline GridSpec driven_grid(Index interior, Index pml, double domain_wavelengths) {
  const double h = domain_wavelengths / static_cast<double>(interior);
  return GridSpec::uniform(interior + 2 * pml, interior + 2 * pml, h, h, pml);
}

inline ExperimentConfig preset(const std::string& experiment, bool full_scale = false) {
  ExperimentConfig c;
  if (experiment == "driven-compare") {
    c.experiment = experiment;
    const Index interior = full_scale ? 301 : 101;
    const Index pml = full_scale ? 30 : 20;
    c.grid = driven_grid(interior, pml, 4.0);
    c.wavelength = 1.0;
    c.tolerance = 1e-6;
    c.output_dir = "fdfill-out/driven-compare";
  } else if (experiment == "fill-scan") {
    c.experiment = experiment;
    c.sizes = full_scale ? std::vector<Index>{101, 201, 301, 401, 501} : std::vector<Index>{51, 101, 151};
    c.pml_cells = full_scale ? 30 : 20;
    c.output_dir = "fdfill-out/fill-scan";
  } else if (experiment == "coupling-table") {
    c.experiment = experiment;
    c.sizes = {4, 10, 100};
    c.output_dir = "fdfill-out/coupling-table";
  } else if (experiment == "bands") {
    c = waveguide_preset();
  } else if (experiment == "factor") {
    c.experiment = experiment;
    c.output_dir = "fdfill-out/factor";
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::ofstream open_csv(const std::filesystem::path& path, const std::string& schema, const std::string& header) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# schema: " << schema << "\n" << header << "\n";
  return out;
}

inline json fill_json(const FillReport& r) {
  return {{"bc", r.bc},       {"nx", r.nx},       {"ny", r.ny},       {"ordering", r.ordering},
          {"nnz_A", r.nnz_a}, {"nnz_L", r.nnz_l}, {"nnz_U", r.nnz_u}, {"seconds", r.seconds}};
}

// Runs f(0..n-1) on up to `workers` threads; the first exception is
// rethrown after all workers finish.
template <typename F>
void parallel_for(Index n, Index workers, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (Index k = 0; k < n; ++k) f(k);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (Index w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (Index k = next++; k < n; k = next++) {
        try {
          f(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline RunReport start_report(const ExperimentConfig& c) {
  RunReport r;
  r.document = {{"experiment", c.experiment},
                {"version", kVersion},
                {"config", config_to_json(c)},
                {"fill_reports", json::array()},
                {"artifacts", json::array()},
                {"results", json::object()},
                {"checks", json::array()},
                {"timings", json::object()}};
  return r;
}

inline void add_artifact(RunReport& r, const std::filesystem::path& p) { r.document["artifacts"].push_back(p.string()); }

inline void add_fill(RunReport& r, const FillReport& f) {
  json j = fill_json(f);
  // Timings live in their own section so the rest of the report is
  // reproducible.
  r.document["timings"]["factor:" + f.bc + ":" + std::to_string(f.nx) + "x" + std::to_string(f.ny) + ":" +
                        f.ordering] = f.seconds;
  j.erase("seconds");
  r.document["fill_reports"].push_back(std::move(j));
}

inline void write_fill_csv(const std::filesystem::path& path, const std::vector<FillReport>& rows) {
  auto out = open_csv(path, "fill_report/1", "bc,nx,ny,ordering,nnz_A,nnz_L,nnz_U,seconds");
  for (const auto& r : rows) {
    out << r.bc << ',' << r.nx << ',' << r.ny << ',' << r.ordering << ',' << r.nnz_a << ',' << r.nnz_l << ','
        << r.nnz_u << ',' << fmt(r.seconds) << '\n';
  }
}

}  // namespace detail

inline void write_report(const RunReport& r, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << r.document.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Experiments

struct DrivenSolution {
  AssembledSystem system;
  LuFactors factors;
  DenseVector field;
};

inline DrivenSolution solve_driven(const ExperimentConfig& c, BoundaryKind backing, const MaterialMap& mat) {
  const double w = omega_normalized(c.wavelength);
  const double wsi = omega_si(c.wavelength, c.length_unit_m);
  DrivenSolution s{assemble_tm(c.grid, mat, BoundaryPair::both(backing), w, wsi), {}, {}};
  const Index si = c.source.i.value_or(c.grid.nx / 2);
  const Index sj = c.source.j.value_or(c.grid.ny / 2);
  DenseVector b = point_source(c.grid, si, sj, c.source.amplitude, w);
  FactorOptions opt;
  opt.ordering = c.ordering;
  s.factors = factor(s.system.A, opt);
  s.field = solve(s.factors, b);
  return s;
}

inline double interior_relative_difference(std::span<const Complex> a, std::span<const Complex> b, const GridSpec& g) {
  DenseVector ia = interior_values(a, g);
  DenseVector ib = interior_values(b, g);
  const double diff = norm2(subtract(ia, ib));
  const double ref = std::max(norm2(ia), norm2(ib));
  return ref == 0.0 ? diff : diff / ref;
}

inline RunReport run_driven_compare(const ExperimentConfig& c) {
  validate_config(c);
  RunReport report = detail::start_report(c);
  const std::filesystem::path dir(c.output_dir);
  const MaterialMap mat = build_materials(c);
  const auto t0 = std::chrono::steady_clock::now();

  const BoundaryKind kinds[2] = {BoundaryKind::Periodic, BoundaryKind::ModifiedDirichlet};
  std::vector<DrivenSolution> sol(2);
  std::vector<FillReport> fills;
  for (int k = 0; k < 2; ++k) {
    const auto s0 = std::chrono::steady_clock::now();
    try {
      sol[k] = solve_driven(c, kinds[k], mat);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(to_string(kinds[k])) + ": " + e.what());
    }
    FillReport f{std::string(to_string(kinds[k])), c.grid.nx, c.grid.ny, std::string(to_string(c.ordering)),
                 sol[k].factors.stats.nnz_a, sol[k].factors.stats.nnz_l, sol[k].factors.stats.nnz_u,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count()};
    detail::add_fill(report, f);
    fills.push_back(f);
  }

  const auto& g = c.grid;
  const double diff = interior_relative_difference(sol[0].field, sol[1].field, g);
  const Index line_row = c.source.j.value_or(g.ny / 2);
  DenseVector la = extract_line(sol[0].field, g, LineAxis::Row, line_row);
  DenseVector lb = extract_line(sol[1].field, g, LineAxis::Row, line_row);

  for (int k = 0; k < 2; ++k) {
    auto path = dir / ("field_" + std::string(to_string(kinds[k])) + ".csv");
    auto out = detail::open_csv(path, "field/1", "i,j,re_hz,im_hz,in_pml");
    for (Index j = 0; j < g.ny; ++j) {
      for (Index i = 0; i < g.nx; ++i) {
        const Complex v = sol[k].field[g.flat(i, j)];
        out << i << ',' << j << ',' << detail::fmt(v.real()) << ',' << detail::fmt(v.imag()) << ','
            << (g.in_pml(i, j) ? 1 : 0) << '\n';
      }
    }
    detail::add_artifact(report, path);
    if (c.dump_matrices) {
      auto mpath = dir / ("A_" + std::string(to_string(kinds[k])) + ".mtx");
      write_matrix_market(sol[k].system.A, mpath.string());
      detail::add_artifact(report, mpath);
    }
  }
  {
    auto path = dir / "line.csv";
    auto out = detail::open_csv(path, "line/1", "i,re_periodic,im_periodic,re_modified,im_modified");
    for (Index i = 0; i < g.nx; ++i) {
      out << i << ',' << detail::fmt(la[i].real()) << ',' << detail::fmt(la[i].imag()) << ','
          << detail::fmt(lb[i].real()) << ',' << detail::fmt(lb[i].imag()) << '\n';
    }
    detail::add_artifact(report, path);
  }
  detail::write_fill_csv(dir / "fill.csv", fills);
  detail::add_artifact(report, dir / "fill.csv");

  const double reduction = reduction_percent(fills[0], fills[1]);
  report.document["results"] = {{"interior_relative_l2_difference", diff},
                                {"line_row", line_row},
                                {"nnz_L_reduction_percent", reduction},
                                {"residual_periodic", relative_residual(sol[0].system.A, sol[0].field,
                                                                        point_source(g, c.source.i.value_or(g.nx / 2),
                                                                                     c.source.j.value_or(g.ny / 2),
                                                                                     c.source.amplitude,
                                                                                     omega_normalized(c.wavelength)))}};
  report.check("interior fields agree between periodic and modified Dirichlet backing", diff <= c.tolerance,
               {{"difference", diff}, {"tolerance", c.tolerance}});
  report.document["timings"]["total"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct FillScanRow {
  Index size = 0;
  FillReport periodic, dirichlet, modified;
  double reduction = 0.0;  // periodic → modified
};

inline FillScanRow fill_scan_point(Index interior, Index pml, double domain_wavelengths, OrderingKind ordering) {
  const GridSpec g = driven_grid(interior, pml, domain_wavelengths);
  const std::vector<Complex> eps(static_cast<std::size_t>(g.size()), Complex{1.0, 0.0});
  const double w = omega_normalized(1.0);
  AssemblyOptions opt;
  opt.allow_dirichlet_without_pml = pml == 0;
  FillScanRow row;
  row.size = interior;
  auto one = [&](BoundaryKind b) {
    auto sys = assemble_tm(g, eps, BoundaryPair::both(b), w, opt);
    FactorOptions fo;
    fo.ordering = ordering;
    return fill_report(sys.A, fo, std::string(to_string(b)), g.nx, g.ny);
  };
  row.periodic = one(BoundaryKind::Periodic);
  row.dirichlet = one(BoundaryKind::Dirichlet);
  row.modified = one(BoundaryKind::ModifiedDirichlet);
  row.reduction = reduction_percent(row.periodic, row.modified);
  return row;
}

inline RunReport run_fill_scan(const ExperimentConfig& c) {
  validate_config(c);
  RunReport report = detail::start_report(c);
  const std::filesystem::path dir(c.output_dir);
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<std::optional<FillScanRow>> rows(c.sizes.size());
  std::vector<std::string> errors(c.sizes.size());
  detail::parallel_for(static_cast<Index>(c.sizes.size()), c.workers, [&](Index k) {
    try {
      rows[k] = fill_scan_point(c.sizes[k], c.pml_cells, c.domain_wavelengths, c.ordering);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });

  auto path = dir / "fill_scan.csv";
  auto out = detail::open_csv(path, "fill_scan/1",
                              "interior,nx,nnz_A_periodic,nnz_L_periodic,nnz_L_dirichlet,nnz_L_modified,"
                              "reduction_percent");
  json points = json::array();
  std::vector<FillReport> all;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k]) {
      points.push_back({{"interior", c.sizes[k]}, {"error", errors[k]}});
      report.check("fill point " + std::to_string(c.sizes[k]) + " factorized", false, {{"error", errors[k]}});
      continue;
    }
    const auto& r = *rows[k];
    for (const auto* f : {&r.periodic, &r.dirichlet, &r.modified}) {
      detail::add_fill(report, *f);
      all.push_back(*f);
    }
    out << r.size << ',' << r.periodic.nx << ',' << r.periodic.nnz_a << ',' << r.periodic.nnz_l << ','
        << r.dirichlet.nnz_l << ',' << r.modified.nnz_l << ',' << detail::fmt(r.reduction) << '\n';
    points.push_back({{"interior", r.size},
                      {"nnz_L_periodic", r.periodic.nnz_l},
                      {"nnz_L_dirichlet", r.dirichlet.nnz_l},
                      {"nnz_L_modified", r.modified.nnz_l},
                      {"reduction_percent", r.reduction}});
    report.check("nnz(L) reduction periodic -> modified > 0 at interior " + std::to_string(r.size),
                 r.reduction > 0.0, {{"reduction_percent", r.reduction}});
  }
  // Control row: identical boundary on both sides of the comparison.
  if (rows.front()) {
    const double control = reduction_percent(rows.front()->periodic, rows.front()->periodic);
    out << "# control," << rows.front()->periodic.nx << ",,,,," << detail::fmt(control) << '\n';
    report.check("control row (periodic vs periodic) gives 0%", control == 0.0, {{"reduction_percent", control}});
  }
  out.close();
  detail::add_artifact(report, path);
  detail::write_fill_csv(dir / "fill.csv", all);
  detail::add_artifact(report, dir / "fill.csv");
  report.document["results"]["points"] = points;
  report.document["timings"]["total"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct CouplingRow {
  Index size = 0;
  Index periodic = 0, dirichlet = 0, modified = 0;
  Index published_periodic = 0, published_dirichlet = 0, published_modified = 0;
};

// Table values published alongside the modified boundary: 4N²,
// 4(N−2)² + 4(N−2) + 8 and 4(N−2)² + (N−2).
inline CouplingRow coupling_row(Index n) {
  const std::vector<Complex> eps(static_cast<std::size_t>(n * n), Complex{1.0, 0.0});
  const GridSpec g = GridSpec::uniform(n, n, 1.0 / static_cast<double>(n), 1.0 / static_cast<double>(n), 0);
  AssemblyOptions opt;
  opt.allow_dirichlet_without_pml = true;
  const double w = omega_normalized(1.0);
  CouplingRow r;
  r.size = n;
  r.periodic = count_couplings(assemble_tm(g, eps, BoundaryPair::both(BoundaryKind::Periodic), w, opt));
  r.dirichlet = count_couplings(assemble_tm(g, eps, BoundaryPair::both(BoundaryKind::Dirichlet), w, opt));
  r.modified = count_couplings(assemble_tm(g, eps, BoundaryPair::both(BoundaryKind::ModifiedDirichlet), w, opt));
  const Index m = n - 2;
  r.published_periodic = 4 * n * n;
  r.published_dirichlet = 4 * m * m + 4 * m + 8;
  r.published_modified = 4 * m * m + m;
  return r;
}

inline RunReport run_coupling_table(const ExperimentConfig& c) {
  validate_config(c);
  RunReport report = detail::start_report(c);
  const std::filesystem::path dir(c.output_dir);
  auto path = dir / "couplings.csv";
  auto out = detail::open_csv(path, "couplings/1", "n,bc,count,published,delta");
  json rows = json::array();
  for (Index n : c.sizes) {
    if (n < 3) throw ConfigError("coupling-table sizes must be >= 3");
    const CouplingRow r = coupling_row(n);
    const std::pair<const char*, std::pair<Index, Index>> cols[] = {
        {"periodic", {r.periodic, r.published_periodic}},
        {"dirichlet", {r.dirichlet, r.published_dirichlet}},
        {"modified_dirichlet", {r.modified, r.published_modified}}};
    for (const auto& [name, v] : cols) {
      out << n << ',' << name << ',' << v.first << ',' << v.second << ',' << (v.first - v.second) << '\n';
      rows.push_back({{"n", n}, {"bc", name}, {"count", v.first}, {"published", v.second}, {"delta", v.first - v.second}});
    }
    report.check("periodic couplings equal 4N^2 at N=" + std::to_string(n), r.periodic == r.published_periodic,
                 {{"count", r.periodic}});
    report.check("couplings decrease periodic > dirichlet > modified at N=" + std::to_string(n),
                 r.periodic > r.dirichlet && r.dirichlet > r.modified || n < 4,
                 {{"periodic", r.periodic}, {"dirichlet", r.dirichlet}, {"modified", r.modified}});
  }
  out.close();
  detail::add_artifact(report, path);
  report.document["results"]["rows"] = rows;
  return report;
}

struct ModeMatch {
  double omega = 0.0;
  Complex kx_modified;
  Complex kx_periodic;
  double relative_difference = 0.0;
};

// Radius both runs resolved at omega; 0 when either run has no data there.
inline double common_reach(const BandTable& a, const BandTable& b, double omega) {
  auto find = [omega](const BandTable& t) {
    for (const auto& r : t.reach) {
      if (r.omega == omega) return r.radius;
    }
    return 0.0;
  };
  return std::min(find(a), find(b));
}

// Nearest periodic-backed mode for every modified-backed one strictly inside
// the common reach. Modes beyond it may be missing from the other run only
// because fewer eigenvalues were requested than lie that far out.
inline std::vector<ModeMatch> match_modes(const BandTable& modified, const BandTable& periodic, Complex shift,
                                          Index* outside = nullptr) {
  std::vector<ModeMatch> out;
  if (outside) *outside = 0;
  for (const auto& m : modified.rows) {
    const double reach = common_reach(modified, periodic, m.omega);
    if (std::abs(m.kx - shift) >= reach * (1.0 - 1e-6)) {
      if (outside) ++*outside;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    Complex partner{std::nan(""), std::nan("")};
    for (const auto& p : periodic.rows) {
      if (p.omega != m.omega) continue;
      const double d = std::abs(p.kx - m.kx);
      if (d < best) {
        best = d;
        partner = p.kx;
      }
    }
    out.push_back({m.omega, m.kx, partner, best / std::abs(m.kx)});
  }
  return out;
}

// Modes of t strictly inside the common reach.
inline Index modes_inside(const BandTable& t, const BandTable& other, Complex shift) {
  Index n = 0;
  for (const auto& m : t.rows) {
    if (std::abs(m.kx - shift) < common_reach(t, other, m.omega) * (1.0 - 1e-6)) ++n;
  }
  return n;
}

inline RunReport run_bands(const ExperimentConfig& c) {
  validate_config(c);
  if (c.wavelengths.empty()) {
    RunReport empty = detail::start_report(c);
    empty.document["results"]["rows"] = json::array();
    return empty;
  }
  RunReport report = detail::start_report(c);
  const std::filesystem::path dir(c.output_dir);
  const MaterialMap mat = build_materials(c);
  const auto t0 = std::chrono::steady_clock::now();

  ArnoldiConfig cfg;
  cfg.shift = c.shift;
  cfg.wanted = c.wanted;
  cfg.subspace = c.subspace;
  cfg.tolerance = c.arnoldi_tolerance;
  cfg.seed = c.seed;

  std::vector<FrequencyPoint> freqs;
  for (double lam : c.wavelengths) freqs.push_back({omega_normalized(lam), omega_si(lam, c.length_unit_m)});

  const BoundaryKind backings[2] = {BoundaryKind::ModifiedDirichlet, BoundaryKind::Periodic};
  std::vector<BandTable> tables(2);
  detail::parallel_for(2, c.workers, [&](Index k) {
    tables[k] = band_scan(c.grid, mat, {BoundaryKind::Periodic, backings[k]}, freqs, cfg, c.filter);
  });

  for (int k = 0; k < 2; ++k) {
    auto path = dir / ("bands_" + std::string(to_string(backings[k])) + ".csv");
    auto out = detail::open_csv(path, "bands/1", "omega,re_kx,im_kx,residual,energy_fraction");
    for (const auto& r : tables[k].rows) {
      out << detail::fmt(r.omega) << ',' << detail::fmt(r.kx.real()) << ',' << detail::fmt(r.kx.imag()) << ','
          << detail::fmt(r.residual) << ',' << detail::fmt(r.energy_fraction) << '\n';
    }
    detail::add_artifact(report, path);
    for (const auto& f : tables[k].failures) {
      report.check("band point solved (" + std::string(to_string(backings[k])) + ", omega=" + detail::fmt(f.omega) + ")",
                   false, {{"error", f.message}});
    }
  }

  Index outside = 0;
  auto matches = match_modes(tables[0], tables[1], c.shift, &outside);
  {
    auto path = dir / "band_compare.csv";
    auto out = detail::open_csv(path, "band_compare/1",
                                "omega,re_kx_modified,im_kx_modified,re_kx_periodic,im_kx_periodic,relative_difference");
    json arr = json::array();
    double worst = 0.0;
    for (const auto& m : matches) {
      out << detail::fmt(m.omega) << ',' << detail::fmt(m.kx_modified.real()) << ','
          << detail::fmt(m.kx_modified.imag()) << ',' << detail::fmt(m.kx_periodic.real()) << ','
          << detail::fmt(m.kx_periodic.imag()) << ',' << detail::fmt(m.relative_difference) << '\n';
      arr.push_back({{"omega", m.omega},
                     {"kx_modified", {m.kx_modified.real(), m.kx_modified.imag()}},
                     {"kx_periodic", {m.kx_periodic.real(), m.kx_periodic.imag()}},
                     {"relative_difference", m.relative_difference}});
      worst = std::max(worst, std::isfinite(m.relative_difference) ? m.relative_difference
                                                                   : std::numeric_limits<double>::infinity());
    }
    detail::add_artifact(report, path);
    report.document["results"]["matches"] = arr;
    report.document["results"]["modes_beyond_common_reach"] = outside;
    const Index inside_periodic = modes_inside(tables[1], tables[0], c.shift);
    report.check("same mode count inside the common reach", inside_periodic == static_cast<Index>(matches.size()),
                 {{"modified", matches.size()}, {"periodic", inside_periodic}});
    report.check("guided modes found under both backings", !matches.empty(), {{"count", matches.size()}});
    report.check("matched k_x agree between backings", !matches.empty() && worst <= c.tolerance,
                 {{"worst_relative_difference", worst}, {"tolerance", c.tolerance}});
  }

  // Pencil fill at each requested shift, using the first wavelength.
  {
    std::vector<FillReport> fills;
    json arr = json::array();
    const FrequencyPoint f0 = freqs.front();
    for (double sigma : c.pencil_shifts) {
      FillReport fr[2];
      for (int k = 0; k < 2; ++k) {
        QepMatrices q = assemble_qep(c.grid, mat, {BoundaryKind::Periodic, backings[k]}, f0.omega, f0.omega_si);
        Pencil p = linearize(q);
        FactorOptions opt;
        opt.ordering = c.ordering;
        opt.row_prepermutation = p.row_prepermutation;
        fr[k] = fill_report(shifted(p, sigma), opt, std::string(to_string(backings[k])) + "@sigma=" + detail::fmt(sigma),
                            c.grid.nx, c.grid.ny);
        if (c.dump_matrices) {
          auto mpath = dir / ("pencil_" + std::string(to_string(backings[k])) + "_sigma" + std::to_string(&sigma - c.pencil_shifts.data()) + ".mtx");
          write_matrix_market(shifted(p, sigma), mpath.string());
          detail::add_artifact(report, mpath);
        }
        detail::add_fill(report, fr[k]);
        fills.push_back(fr[k]);
      }
      const double red = reduction_percent(fr[1], fr[0]);
      arr.push_back({{"sigma", sigma},
                     {"nnz_L_periodic", fr[1].nnz_l},
                     {"nnz_L_modified", fr[0].nnz_l},
                     {"reduction_percent", red}});
      report.check("pencil nnz(L) reduction >= " + detail::fmt(c.min_pencil_reduction) + "% at sigma=" + detail::fmt(sigma),
                   red >= c.min_pencil_reduction, {{"reduction_percent", red}});
    }
    detail::write_fill_csv(dir / "pencil_fill.csv", fills);
    detail::add_artifact(report, dir / "pencil_fill.csv");
    report.document["results"]["pencil_fill"] = arr;
  }

  {
    json spectra = json::object();
    for (int k = 0; k < 2; ++k) {
      json rows = json::array();
      for (const auto& r : tables[k].rows) {
        rows.push_back({{"omega", r.omega},
                        {"kx", {r.kx.real(), r.kx.imag()}},
                        {"residual", r.residual},
                        {"energy_fraction", r.energy_fraction}});
      }
      spectra[std::string(to_string(backings[k]))] = rows;
    }
    auto path = dir / "spectra.json";
    std::filesystem::create_directories(dir);
    std::ofstream(path) << spectra.dump(2) << '\n';
    detail::add_artifact(report, path);
  }
  report.document["timings"]["total"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline RunReport run_factor(const ExperimentConfig& c) {
  validate_config(c);
  RunReport report = detail::start_report(c);
  const std::filesystem::path dir(c.output_dir);
  SparseMatrix a = read_matrix_market(c.matrix_path);
  FactorOptions opt;
  opt.ordering = c.ordering;
  FillReport f = fill_report(a, opt, "input", a.rows(), a.cols());
  LuFactors lu = factor(a, opt);
  const double rec = reconstruction_error(a, lu) / std::max(a.max_abs(), std::numeric_limits<double>::min());
  detail::add_fill(report, f);
  detail::write_fill_csv(dir / "fill.csv", {f});
  detail::add_artifact(report, dir / "fill.csv");
  report.document["results"] = {{"relative_reconstruction_error", rec}};
  report.check("P A Q = L U within 1e-10 relative", rec <= 1e-10, {{"error", rec}});
  return report;
}

inline RunReport run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "driven-compare") return run_driven_compare(c);
  if (c.experiment == "fill-scan") return run_fill_scan(c);
  if (c.experiment == "coupling-table") return run_coupling_table(c);
  if (c.experiment == "bands") return run_bands(c);
  if (c.experiment == "factor") return run_factor(c);
  throw ConfigError("unknown experiment '" + c.experiment + "'");
}

}  // namespace fdfill

#endif  // FDFILL_EXPERIMENTS_HPP_
