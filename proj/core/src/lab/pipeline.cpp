#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <future>
#include <mutex>

#include "maglab/errors.hpp"
#include "maglab/lab/lab.hpp"

namespace maglab::lab {

namespace fs = std::filesystem;

namespace {

constexpr double kDispersiveLo = -3.0;
constexpr double kDispersiveHi = 6.0;

std::string h_tag(double h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "h%.6g", h);
  return buf;
}

/// Rethrows the active exception with `prefix` prepended, keeping its type.
[[noreturn]] void rethrow_prefixed(std::exception_ptr error, const std::string& prefix) {
  try {
    std::rethrow_exception(error);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what(), e.best_residuals());
  } catch (const DegeneracyError& e) {
    throw DegeneracyError(prefix + e.what());
  } catch (const BracketError& e) {
    throw BracketError(prefix + e.what());
  } catch (const ResolutionError& e) {
    throw ResolutionError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const RangeError& e) {
    throw RangeError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(prefix + e.what());
  }
}

/// Files written by one stage group; safe to use from one thread at a time.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content, const std::string& stage,
             std::optional<double> h = std::nullopt) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
    records_.push_back({name, sha256_hex(content), stage, h});
  }

  void write_json(const std::string& name, const nlohmann::json& doc, const std::string& stage,
                  std::optional<double> h = std::nullopt) {
    write(name, doc.dump(2) + "\n", stage, h);
  }

  std::vector<ArtifactRecord>& records() { return records_; }

 private:
  fs::path dir_;
  std::vector<ArtifactRecord> records_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Stage bookkeeping: the stage currently running and its timings.
struct StageLog {
  std::string current;
  std::map<std::string, double> timings;

  template <class F>
  auto run(const std::string& stage, F&& f) {
    current = stage;
    Stopwatch clock;
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings[stage] = clock.seconds();
    } else {
      auto value = f();
      timings[stage] = clock.seconds();
      return value;
    }
  }
};

struct BandData {
  int band = 1;
  effective::EffectiveSymbolGrid symbol;
  std::optional<effective::ActionProfile> action;
};

SpectrumResult merge(std::vector<SpectrumResult> parts, const std::string& source, double h) {
  if (parts.size() == 1) return parts.front();
  SpectrumResult out;
  out.source = source;
  out.h = h;
  out.band = 0;
  struct Entry { double e; int n; double r; };
  std::vector<Entry> all;
  for (const auto& p : parts) {
    out.tolerance = std::max(out.tolerance, p.tolerance);
    for (std::size_t i = 0; i < p.eigenvalues.size(); ++i) {
      all.push_back({p.eigenvalues[i], p.indices[i], p.residuals.empty() ? 0.0 : p.residuals[i]});
    }
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.e < b.e; });
  for (const auto& e : all) {
    out.eigenvalues.push_back(e.e);
    out.indices.push_back(e.n);
    out.residuals.push_back(e.r);
  }
  return out;
}

struct StepOutcome {
  StepResult result;
  std::vector<ArtifactRecord> artifacts;
  std::map<std::string, double> timings;
  std::exception_ptr error;
  std::string failed_stage;
};

struct SharedInputs {
  const ExperimentConfig* config;
  geometry::ModelCatalogEntry model;
  double mu_c;
  std::vector<BandData> bands;
  fs::path dir;
};

SpectrumResult quantize_band(const effective::EffectiveSymbolGrid& symbol, int order, double hbar,
                             double h, const ExperimentConfig& c) {
  effective::QuantizeOptions options;
  options.energy_top = c.energy_window.second;
  // The window is only a few lattice steps wide at the largest h.
  options.aliasing_threshold = 1.0;
  const auto op = effective::quantize_1d(symbol, order, hbar, c.quantize_modes, options);
  const auto below = effective::quantized_spectrum(op, 0, h, c.energy_window.second);
  const int count = std::min(static_cast<int>(op.matrix.rows()),
                             std::max(c.eigen_count, static_cast<int>(below.eigenvalues.size()) + 1));
  return effective::quantized_spectrum(op, count, h);
}

StepOutcome run_step(const SharedInputs& in, double h) {
  const ExperimentConfig& c = *in.config;
  StepOutcome out;
  out.result.h = h;
  ArtifactWriter files(in.dir);
  StageLog log;
  const std::string tag = h_tag(h);
  const double hbar = std::cbrt(h);
  try {
    magnetic2d::TubeDiscretization disc;
    disc.h = h;
    disc.x_half_width = c.x_half_width;
    disc.x_points = c.x_points;
    disc.t_half_width = c.t_half_width;
    disc.t_points = c.t_points;
    disc.energy_top = c.energy_window.second;

    auto spectrum = log.run("magnetic2d_" + tag, [&] {
      disc.validate(in.model, in.mu_c);
      const auto op = magnetic2d::assemble_2d(in.model, disc);
      magnetic2d::Solve2DOptions options;
      options.preconditioner = c.preconditioner;
      auto s = magnetic2d::solve_2d(op, c.eigen_count, c.tolerance, options);
      const double cut = c.localization_cut.value_or(c.energy_window.second + 0.1);
      out.result.localization = magnetic2d::localization_diagnostics(op, s, cut, in.mu_c);
      s.eigenvectors.reset();
      nlohmann::json doc = to_json(s);
      doc["discretization"] = magnetic2d::to_json(disc);
      doc["symmetry_defect"] = op.symmetry_defect;
      doc["lower_bound"] = op.lower_bound;
      files.write_json("magnetic2d_" + tag + ".json", doc, "magnetic2d", h);
      nlohmann::json loc = nlohmann::json::array();
      for (const auto& r : out.result.localization) loc.push_back(magnetic2d::to_json(r));
      files.write_json("localization_" + tag + ".json",
                       {{"schema", "maglab.localization"}, {"version", 1}, {"h", h},
                        {"energy_cut", cut}, {"reports", loc}},
                       "localization", h);
      return s;
    });
    out.result.direct = std::move(spectrum);

    for (int order = 0; order <= 1; ++order) {
      const std::string stage = "quantize_order" + std::to_string(order);
      auto s = log.run(stage + "_" + tag, [&] {
        std::vector<SpectrumResult> parts;
        for (const auto& b : in.bands) parts.push_back(quantize_band(b.symbol, order, hbar, h, c));
        auto merged = merge(std::move(parts), "quantize_1d", h);
        files.write_json(stage + "_" + tag + ".json", to_json(merged), stage, h);
        return merged;
      });
      (order == 0 ? out.result.quantized_order0 : out.result.quantized_order1) = std::move(s);
    }

    out.result.bohr_sommerfeld = log.run("bohr_sommerfeld_" + tag, [&] {
      std::vector<SpectrumResult> parts;
      for (const auto& b : in.bands) {
        if (b.action) parts.push_back(effective::bohr_sommerfeld_spectrum(*b.action, hbar, h));
      }
      SpectrumResult s;
      if (parts.empty()) {
        s.source = "bohr_sommerfeld";
        s.h = h;
      } else {
        s = merge(std::move(parts), "bohr_sommerfeld", h);
      }
      files.write_json("bohr_sommerfeld_" + tag + ".json", to_json(s), "bohr_sommerfeld", h);
      return s;
    });

    out.result.comparison = log.run("comparison_" + tag, [&] {
      auto r = compare_spectra(out.result.direct, out.result.quantized_order1, c.energy_window,
                               c.cluster_tol);
      files.write_json("comparison_" + tag + ".json", to_json(r), "comparison", h);
      return r;
    });
  } catch (...) {
    out.error = std::current_exception();
    out.failed_stage = log.current;
  }
  out.artifacts = std::move(files.records());
  out.timings = std::move(log.timings);
  return out;
}

void sort_artifacts(std::vector<ArtifactRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const ArtifactRecord& a, const ArtifactRecord& b) { return a.path < b.path; });
}

void write_manifest(const RunManifest& manifest) {
  const fs::path path = manifest.run_directory / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(manifest).dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

const ArtifactRecord& RunManifest::artifact(const std::string& path) const {
  for (const auto& a : artifacts) {
    if (a.path == path) return a;
  }
  throw IoError("manifest has no artifact " + path);
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : m.artifacts) {
    artifacts.push_back({{"path", a.path},
                         {"sha256", a.sha256},
                         {"stage", a.stage},
                         {"h", a.h ? nlohmann::json(*a.h) : nlohmann::json()}});
  }
  return {{"schema", "maglab.manifest"},
          {"version", 1},
          {"config_hash", m.config_hash},
          {"status", m.status},
          {"failed_stage", m.failed_stage},
          {"error", m.error},
          {"bands_in_window", m.bands_in_window},
          {"artifacts", artifacts},
          {"timings", m.timings}};
}

RunManifest manifest_from_json(const nlohmann::json& doc, const fs::path& run_directory) {
  if (doc.value("schema", std::string{}) != "maglab.manifest") {
    throw ConfigError("expected a 'maglab.manifest' document");
  }
  try {
    RunManifest m;
    m.run_directory = run_directory;
    m.config_hash = doc.at("config_hash").get<std::string>();
    m.status = doc.at("status").get<std::string>();
    m.failed_stage = doc.at("failed_stage").get<std::string>();
    m.error = doc.at("error").get<std::string>();
    m.bands_in_window = doc.at("bands_in_window").get<int>();
    for (const auto& a : doc.at("artifacts")) {
      ArtifactRecord r;
      r.path = a.at("path").get<std::string>();
      r.sha256 = a.at("sha256").get<std::string>();
      r.stage = a.at("stage").get<std::string>();
      if (!a.at("h").is_null()) r.h = a.at("h").get<double>();
      m.artifacts.push_back(std::move(r));
    }
    m.timings = doc.at("timings").get<std::map<std::string, double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

RunManifest load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read manifest " + manifest_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse manifest " + manifest_path.string() + ": " + e.what());
  }
  return manifest_from_json(doc, manifest_path.parent_path());
}

RunResult run_pipeline(const ExperimentConfig& config) {
  validate_config(config);
  const auto model = config_model(config);
  const auto assumptions = geometry::validate_assumptions(model);
  if (!assumptions.all_pass()) {
    std::string failed;
    for (const auto& check : assumptions.checks) {
      if (check.status == geometry::CheckStatus::fail) failed += (failed.empty() ? "" : ", ") + check.id;
    }
    throw PreconditionError("run_pipeline: model " + model.name + " fails assumptions: " + failed);
  }

  RunResult result;
  RunManifest& manifest = result.manifest;
  manifest.config_hash = config_hash(config);
  manifest.run_directory = config.output_directory / manifest.config_hash.substr(0, 16);
  try {
    fs::create_directories(manifest.run_directory);
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create run directory " + manifest.run_directory.string() + ": " + e.what());
  }

  ArtifactWriter files(manifest.run_directory);
  StageLog log;
  const double e2 = config.energy_window.second;

  auto fail = [&](std::exception_ptr error, const std::string& stage,
                  std::vector<ArtifactRecord> extra) -> void {
    manifest.artifacts = files.records();
    manifest.artifacts.insert(manifest.artifacts.end(), extra.begin(), extra.end());
    sort_artifacts(manifest.artifacts);
    for (const auto& [k, v] : log.timings) manifest.timings[k] = v;
    manifest.status = "failed";
    manifest.failed_stage = stage;
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      manifest.error = e.what();
    }
    write_manifest(manifest);
    rethrow_prefixed(error, "stage " + stage + ": ");
  };

  SharedInputs shared{&config, model, 0.0, {}, manifest.run_directory};
  try {
    log.run("setup", [&] {
      files.write_json("config.json", to_json(config), "setup");
      files.write_json("assumptions.json", geometry::to_json(assumptions), "setup");
    });
    result.critical = log.run("critical_point", [&] {
      const auto cp = montgomery::ground_band_critical_point();
      files.write_json("critical_point.json", montgomery::to_json(cp), "critical_point");
      return cp;
    });
    shared.mu_c = result.critical.mu_c;

    // k_E: bands whose effective symbol reaches below E2, i.e. delta_min^(2/3) min mu_k <= E2.
    const double scale = std::pow(model.field.delta_min, 2.0 / 3.0);
    int k_e = 0;
    log.run("dispersive_curves", [&] {
      for (int k = 1;; ++k) {
        const auto table = montgomery::dispersive_curve(k, kDispersiveLo, kDispersiveHi,
                                                        config.dispersive_samples);
        const double lowest = *std::min_element(table.values.begin(), table.values.end());
        const bool reaches = scale * lowest <= e2;
        if (k <= config.bands || reaches) {
          nlohmann::json doc = montgomery::to_json(table);
          doc["effective_minimum"] = scale * lowest;
          doc["in_window"] = reaches;
          files.write_json("dispersive_curve_band" + std::to_string(k) + ".json", doc,
                           "dispersive_curves");
        }
        if (reaches) k_e = k;
        if (!reaches && k >= config.bands) break;
      }
    });
    if (k_e < 1) throw PreconditionError("no band reaches below E2; the window holds no spectrum");
    manifest.bands_in_window = k_e;

    result.prediction = log.run("harmonic_prediction", [&] {
      auto p = effective::harmonic_prediction(model, result.critical, config.h_list, config.eigen_count);
      files.write_json("harmonic_prediction.json", effective::to_json(p), "harmonic_prediction");
      files.write("lambda_table.csv", effective::lambda_table_csv(p), "harmonic_prediction");
      return p;
    });

    log.run("effective_symbols", [&] {
      const double largest_hbar = std::cbrt(config.h_list.front());
      const double xs = config.symbol_x_half_width;
      const double extent =
          effective::lattice_xi_extent(-xs, xs, largest_hbar, config.quantize_modes) + 0.1;
      const int xi_points = 2 * static_cast<int>(std::ceil(extent / 0.1)) + 1;
      const double xi_half = 0.1 * (xi_points - 1) / 2;
      const auto x_grid = effective::linspace(-xs, xs, config.symbol_x_points);
      const auto xi_grid = effective::linspace(-xi_half, xi_half, xi_points);
      for (int k = 1; k <= k_e; ++k) {
        BandData b;
        b.band = k;
        b.symbol = effective::effective_subprincipal(
            model, effective::effective_principal(model, k, x_grid, xi_grid));
        files.write_json("effective_symbol_band" + std::to_string(k) + ".json",
                         effective::to_json(b.symbol), "effective_symbols");
        shared.bands.push_back(std::move(b));
      }
    });

    log.run("action_profile", [&] {
      for (auto& b : shared.bands) {
        const double lowest = b.symbol.principal.minCoeff();
        const double lo = std::max(config.energy_window.first, lowest + 1e-3 * (e2 - lowest));
        if (!(lo < e2)) continue;
        b.action = effective::action_profile(b.symbol, {lo, e2}, config.action_samples);
        files.write_json("action_profile_band" + std::to_string(b.band) + ".json",
                         effective::to_json(*b.action), "action_profile");
      }
    });
  } catch (...) {
    fail(std::current_exception(), log.current, {});
  }

  std::vector<std::future<StepOutcome>> futures;
  for (double h : config.h_list) {
    futures.push_back(std::async(std::launch::async, run_step, std::cref(shared), h));
  }
  std::vector<StepOutcome> outcomes;
  for (auto& f : futures) outcomes.push_back(f.get());

  std::vector<ArtifactRecord> step_records;
  for (auto& o : outcomes) {
    step_records.insert(step_records.end(), o.artifacts.begin(), o.artifacts.end());
    for (const auto& [k, v] : o.timings) manifest.timings[k] = v;
  }
  for (auto& o : outcomes) {
    if (o.error) fail(o.error, o.failed_stage, step_records);
  }
  for (auto& o : outcomes) result.steps.push_back(std::move(o.result));

  manifest.artifacts = files.records();
  manifest.artifacts.insert(manifest.artifacts.end(), step_records.begin(), step_records.end());
  sort_artifacts(manifest.artifacts);
  for (const auto& [k, v] : log.timings) manifest.timings[k] = v;
  write_manifest(manifest);
  return result;
}

}  // namespace maglab::lab
