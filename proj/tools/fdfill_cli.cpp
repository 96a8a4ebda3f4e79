// fdfill: command-line front end for the experiment recipes.
//
//   fdfill driven-compare [--config f.json] [--set key=value ...] [--out dir]
//   fdfill fill-scan | coupling-table | bands   (same options)
//   fdfill factor --matrix A.mtx [--ordering amd]
//
// Exit status: 0 all checks passed, 1 a check failed, 2 usage/config/runtime
// error.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fdfill/experiments.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool full_scale = false;
  bool print_config = false;
  long workers = 0;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("-c,--config", o.config_path, "JSON config file (defaults to the built-in preset)")
      ->check(CLI::ExistingFile);
  sub->add_option("-s,--set", o.overrides, "Override a config key, e.g. --set grid.nx=61 (repeatable)");
  sub->add_option("-o,--out", o.out_dir, "Output directory");
  sub->add_option("-j,--workers", o.workers, "Parallel scan workers");
  sub->add_flag("--full-scale", o.full_scale, "Start from the full-scale preset instead of desk scale");
  sub->add_flag("--print-config", o.print_config, "Print the resolved config and exit");
}

fdfill::ExperimentConfig resolve(const std::string& experiment, const CommonOptions& o) {
  using fdfill::json;
  json j = fdfill::config_to_json(fdfill::preset(experiment, o.full_scale));
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw fdfill::ConfigError(o.config_path + ": " + e.what());
    }
    // Validate the file on its own first so unknown keys are reported
    // against the file, then layer it over the preset.
    fdfill::ExperimentConfig probe;
    fdfill::merge_config(probe, file);
    j.merge_patch(file);
  }
  for (const auto& kv : o.overrides) fdfill::apply_override(j, kv);
  if (!o.out_dir.empty()) j["output_dir"] = o.out_dir;
  if (o.workers > 0) j["workers"] = o.workers;
  j["experiment"] = experiment;
  return fdfill::config_from_json(j);
}

void print_summary(const fdfill::RunReport& r, const std::string& report_path) {
  const auto& doc = r.document;
  for (const auto& c : doc["checks"]) {
    std::cout << (c["passed"].get<bool>() ? "PASS  " : "FAIL  ") << c["name"].get<std::string>() << "  "
              << c["detail"].dump() << '\n';
  }
  for (const auto& f : doc["fill_reports"]) {
    std::cout << "fill  " << f["bc"].get<std::string>() << ' ' << f["nx"] << 'x' << f["ny"] << ' '
              << f["ordering"].get<std::string>() << "  nnz(A)=" << f["nnz_A"] << " nnz(L)=" << f["nnz_L"]
              << " nnz(U)=" << f["nnz_U"] << '\n';
  }
  std::cout << "report: " << report_path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDFD boundary-condition fill-in studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fdfill::kVersion);

  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"driven-compare", "Driven point source under periodic vs modified Dirichlet PML backing"},
      {"fill-scan", "nnz(L) for each boundary variant over a list of grid sizes"},
      {"coupling-table", "Grid coupling counts beside the published closed forms"},
      {"bands", "Waveguide Bloch bands under both y-backings, plus pencil fill"},
      {"factor", "Factor a Matrix Market file and report fill"}};

  CommonOptions opts;
  std::string matrix_path, ordering;
  for (const auto& [name, help] : experiments) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, opts);
    if (name == "factor") {
      sub->add_option("-m,--matrix", matrix_path, "Matrix Market file")->check(CLI::ExistingFile);
    }
    if (name != "coupling-table") {
      sub->add_option("--ordering", ordering, "natural | exact_md | amd")
          ->check(CLI::IsMember({"natural", "exact_md", "md", "amd"}));
    }
  }

  CLI11_PARSE(app, argc, argv);

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    if (!matrix_path.empty()) opts.overrides.push_back("matrix_path=\"" + matrix_path + "\"");
    if (!ordering.empty()) opts.overrides.push_back("ordering=\"" + ordering + "\"");
    const fdfill::ExperimentConfig cfg = resolve(experiment, opts);
    if (opts.print_config) {
      std::cout << fdfill::config_to_json(cfg).dump(2) << '\n';
      return 0;
    }
    const fdfill::RunReport report = fdfill::run_experiment(cfg);
    const auto path = std::filesystem::path(cfg.output_dir) / "report.json";
    fdfill::write_report(report, path);
    print_summary(report, path.string());
    return report.passed ? 0 : 1;
  } catch (const fdfill::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
