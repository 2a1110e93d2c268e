#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/effective/effective.hpp"
#include "maglab/linalg/eigensolvers.hpp"
#include "maglab/magnetic2d/magnetic2d.hpp"
#include "maglab/spectrum.hpp"

namespace maglab::lab {

/// Declarative experiment. Parsed from an INI document with the sections
/// [model], [discretization], [solver] and [outputs]; see README for keys.
struct ExperimentConfig {
  std::string model_family = "A";
  std::map<std::string, double> model_parameters;
  std::vector<double> h_list{0.05, 0.02, 0.01};
  int bands = 1;
  /// Rescaled energy window (E1, E2).
  std::pair<double, double> energy_window{0.58, 0.6698};
  /// E2 must stay below delta_*^(2/3) mu_c - margin.
  double margin = 0.05;

  // 2D grid
  double x_half_width = 6.0;
  int x_points = 301;
  double t_half_width = 8.0;
  int t_points = 121;
  // dispersive curve table on nu in [-3, 6]
  int dispersive_samples = 121;
  // effective symbols and quantization
  double symbol_x_half_width = 4.0;
  int symbol_x_points = 81;
  int quantize_modes = 64;
  int action_samples = 41;

  // solver
  int eigen_count = 4;
  double tolerance = 1e-8;
  linalg::Preconditioner preconditioner = linalg::Preconditioner::band_cholesky;
  /// Tangential-mass cut for the localization diagnostics (default E2 + 0.1).
  std::optional<double> localization_cut;
  /// Clustering tolerance for comparisons (default 10x the larger residual tolerance).
  std::optional<double> cluster_tol;

  std::filesystem::path output_directory = "runs";
  bool emit_plots = true;
};

/// Strict parse: unknown sections or keys, malformed numbers and missing
/// required keys are ConfigError. Does not run the physics checks.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Physics-facing validation (h_list strictly decreasing and positive, window
/// ordering, E2 below the essential-spectrum proxy, grid sizes). Throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// delta_*^(2/3) mu_c for the configured model.
double essential_spectrum_proxy(const ExperimentConfig& config);

geometry::ModelCatalogEntry config_model(const ExperimentConfig& config);

/// Canonical JSON of the configuration (input to the run hash).
nlohmann::json to_json(const ExperimentConfig& config);
/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string config_hash(const ExperimentConfig& config);

struct SpectralCluster {
  double center = 0.0;
  int multiplicity = 0;
};

struct ComparisonReport {
  std::pair<double, double> window{0.0, 0.0};
  std::string label_a;
  std::string label_b;
  std::vector<double> values_a;  // in window
  std::vector<double> values_b;
  std::vector<SpectralCluster> clusters_a;
  std::vector<SpectralCluster> clusters_b;
  std::vector<std::pair<int, int>> pairing;  // cluster indices, order preserving
  /// Max distance over paired clusters; unpaired clusters add their distance to
  /// the nearest eigenvalue of the other list (or the nearest window edge).
  double hausdorff_like = 0.0;
  double cluster_tol = 0.0;
  bool rank_check = true;
  /// First interval violating a rank inequality, when rank_check is false.
  std::optional<std::pair<double, double>> offending_interval;
};

/// Rank surrogate: for every interval I = [e_i - tol, e_j + tol] with e_i <= e_j
/// taken from either list inside the window, the count of each list in I is at
/// most the count of the other list in I inflated by tol.
ComparisonReport compare_spectra(const SpectrumResult& a, const SpectrumResult& b,
                                 std::pair<double, double> window,
                                 std::optional<double> cluster_tol = std::nullopt);

nlohmann::json to_json(const ComparisonReport& report);

struct ArtifactRecord {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::string stage;
  std::optional<double> h;
};

struct RunManifest {
  std::filesystem::path run_directory;
  std::string config_hash;
  std::vector<ArtifactRecord> artifacts;
  std::map<std::string, double> timings;  // seconds per stage
  int bands_in_window = 0;
  std::string status = "complete";  // or "failed"
  std::string failed_stage;
  std::string error;

  const ArtifactRecord& artifact(const std::string& path) const;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& doc, const std::filesystem::path& run_directory);
RunManifest load_manifest(const std::filesystem::path& manifest_path);

/// In-memory results for one h.
struct StepResult {
  double h = 0.0;
  SpectrumResult direct;  // 2D, eigenvectors dropped
  std::vector<magnetic2d::LocalizationReport> localization;
  SpectrumResult quantized_order0;
  SpectrumResult quantized_order1;
  SpectrumResult bohr_sommerfeld;
  ComparisonReport comparison;  // 2D vs quantized order 1
};

struct RunResult {
  RunManifest manifest;
  montgomery::CriticalPointData critical;
  effective::HarmonicPrediction prediction;
  std::vector<StepResult> steps;  // in h_list order
};

/// Validates, then runs every stage; h values run concurrently. On a stage
/// failure the partial manifest is written and the error is rethrown with the
/// stage name prefixed.
RunResult run_pipeline(const ExperimentConfig& config);

struct ReportFiles {
  std::vector<std::filesystem::path> files;
  /// Least-squares slope of log |lambda_1 / h^(4/3) - prediction| against log h
  /// for each c1 candidate (NaN with fewer than two h values).
  double slope_closed_form = 0.0;
  double slope_hessian = 0.0;
};

/// CSV tables, a JSON summary and (if enabled) SVG plots under
/// <run>/report. Reads only the artifacts listed in the manifest.
ReportFiles emit_report(const RunManifest& manifest);

}  // namespace maglab::lab
