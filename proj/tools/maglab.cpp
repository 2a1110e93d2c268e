#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "maglab/errors.hpp"
#include "maglab/lab/lab.hpp"

using namespace maglab;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::validation: return kValidation;
    case ErrorCategory::numerical: return kNumerical;
    case ErrorCategory::io: return kIo;
  }
  return kNumerical;
}

SpectrumResult read_spectrum(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
  return spectrum_from_json(doc);
}

int cmd_validate(const fs::path& config_path) {
  const auto config = lab::load_config(config_path);
  lab::validate_config(config);
  const auto model = lab::config_model(config);
  const auto report = geometry::validate_assumptions(model);
  for (const auto& check : report.checks) {
    std::printf("%-24s %s\n", check.id.c_str(), geometry::to_string(check.status));
  }
  std::printf("essential-spectrum proxy %.6g, window [%.6g, %.6g]\n", lab::essential_spectrum_proxy(config),
              config.energy_window.first, config.energy_window.second);
  std::printf("config hash %s\n", lab::config_hash(config).c_str());
  if (!report.all_pass()) {
    std::fprintf(stderr, "model %s fails its assumptions\n", model.name.c_str());
    return kValidation;
  }
  return kOk;
}

int cmd_run(const fs::path& config_path, const std::string& output, bool report) {
  auto config = lab::load_config(config_path);
  if (!output.empty()) config.output_directory = output;
  const auto result = lab::run_pipeline(config);
  std::printf("run directory %s\n", result.manifest.run_directory.string().c_str());
  for (const auto& step : result.steps) {
    std::printf("h = %-8g lambda_1 = %-12.8g hausdorff_like = %.3e rank_check = %s\n", step.h,
                step.direct.eigenvalues.empty() ? NAN : step.direct.eigenvalues.front(),
                step.comparison.hausdorff_like, step.comparison.rank_check ? "true" : "false");
  }
  if (report) {
    const auto files = lab::emit_report(result.manifest);
    std::printf("report: %zu files, slope closed-form %.4g, slope hessian %.4g\n", files.files.size(),
                files.slope_closed_form, files.slope_hessian);
  }
  return kOk;
}

int cmd_compare(const fs::path& a, const fs::path& b, std::pair<double, double> window,
                std::optional<double> tol, const std::string& output) {
  const auto report = lab::compare_spectra(read_spectrum(a), read_spectrum(b), window, tol);
  const std::string text = lab::to_json(report).dump(2) + "\n";
  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output);
    if (!out || !(out << text)) throw IoError("cannot write " + output);
  }
  return kOk;
}

int cmd_report(const fs::path& manifest_path) {
  const auto files = lab::emit_report(lab::load_manifest(manifest_path));
  for (const auto& f : files.files) std::printf("%s\n", f.string().c_str());
  std::printf("slope closed-form %.4g, slope hessian %.4g\n", files.slope_closed_form, files.slope_hessian);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maglab: spectral pipeline for magnetic Laplacians with a vanishing field"};
  app.require_subcommand(1);

  std::string config_path, output, file_a, file_b, manifest_path, compare_output;
  bool no_report = false;
  std::vector<double> window;
  std::optional<double> cluster_tol;

  auto* validate = app.add_subcommand("validate", "Parse a config and check the model assumptions");
  validate->add_option("config", config_path, "Config file")->required();

  auto* run = app.add_subcommand("run", "Run the pipeline and write the report");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("-o,--output-dir", output, "Override [outputs] directory");
  run->add_flag("--no-report", no_report, "Skip the report stage");

  auto* compare = app.add_subcommand("compare", "Compare two spectrum JSON files");
  compare->add_option("a", file_a, "First spectrum")->required();
  compare->add_option("b", file_b, "Second spectrum")->required();
  compare->add_option("-w,--window", window, "Energy window E1 E2")->required()->expected(2);
  compare->add_option("-t,--cluster-tol", cluster_tol, "Clustering tolerance");
  compare->add_option("-o,--output", compare_output, "Write the report here instead of stdout");

  auto* report = app.add_subcommand("report", "Emit tables and plots for a finished run");
  report->add_option("manifest", manifest_path, "manifest.json of a run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*validate) return cmd_validate(config_path);
    if (*run) return cmd_run(config_path, output, !no_report);
    if (*compare) return cmd_compare(file_a, file_b, {window[0], window[1]}, cluster_tol, compare_output);
    if (*report) return cmd_report(manifest_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
