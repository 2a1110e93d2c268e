#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "maglab/errors.hpp"
#include "maglab/lab/lab.hpp"

namespace maglab::lab {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& where, const std::string& raw) {
  const std::string text = trim(raw);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError(where + ": '" + raw + "' is not a finite number");
  }
  return value;
}

int parse_int(const std::string& where, const std::string& raw) {
  const std::string text = trim(raw);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(where + ": '" + raw + "' is not an integer");
  }
  return value;
}

std::vector<double> parse_list(const std::string& where, const std::string& raw) {
  std::vector<double> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_double(where, item));
  if (out.empty()) throw ConfigError(where + ": empty list");
  return out;
}

bool parse_bool(const std::string& where, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(where + ": expected true or false, got '" + raw + "'");
}

linalg::Preconditioner parse_preconditioner(const std::string& where, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "none") return linalg::Preconditioner::none;
  if (text == "jacobi") return linalg::Preconditioner::jacobi;
  if (text == "band_cholesky") return linalg::Preconditioner::band_cholesky;
  throw ConfigError(where + ": unknown preconditioner '" + raw + "'");
}

const char* preconditioner_name(linalg::Preconditioner p) {
  switch (p) {
    case linalg::Preconditioner::none: return "none";
    case linalg::Preconditioner::jacobi: return "jacobi";
    case linalg::Preconditioner::band_cholesky: return "band_cholesky";
  }
  return "?";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  bool have_family = false, have_h = false, have_window = false;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string where = section + "." + key;
      const std::string& v = node.data();
      if (section == "model") {
        if (key == "family") {
          c.model_family = trim(v);
          have_family = true;
        } else {
          c.model_parameters[key] = parse_double(where, v);
        }
      } else if (section == "discretization") {
        if (key == "h_list") { c.h_list = parse_list(where, v); have_h = true; }
        else if (key == "bands") c.bands = parse_int(where, v);
        else if (key == "energy_window") {
          const auto w = parse_list(where, v);
          if (w.size() != 2) throw ConfigError(where + ": expected two values");
          c.energy_window = {w[0], w[1]};
          have_window = true;
        }
        else if (key == "margin") c.margin = parse_double(where, v);
        else if (key == "x_half_width") c.x_half_width = parse_double(where, v);
        else if (key == "x_points") c.x_points = parse_int(where, v);
        else if (key == "t_half_width") c.t_half_width = parse_double(where, v);
        else if (key == "t_points") c.t_points = parse_int(where, v);
        else if (key == "dispersive_samples") c.dispersive_samples = parse_int(where, v);
        else if (key == "symbol_x_half_width") c.symbol_x_half_width = parse_double(where, v);
        else if (key == "symbol_x_points") c.symbol_x_points = parse_int(where, v);
        else if (key == "quantize_modes") c.quantize_modes = parse_int(where, v);
        else if (key == "action_samples") c.action_samples = parse_int(where, v);
        else throw ConfigError("config: unknown key " + where);
      } else if (section == "solver") {
        if (key == "eigen_count") c.eigen_count = parse_int(where, v);
        else if (key == "tolerance") c.tolerance = parse_double(where, v);
        else if (key == "preconditioner") c.preconditioner = parse_preconditioner(where, v);
        else if (key == "localization_cut") c.localization_cut = parse_double(where, v);
        else if (key == "cluster_tol") c.cluster_tol = parse_double(where, v);
        else throw ConfigError("config: unknown key " + where);
      } else if (section == "outputs") {
        if (key == "directory") c.output_directory = trim(v);
        else if (key == "emit_plots") c.emit_plots = parse_bool(where, v);
        else throw ConfigError("config: unknown key " + where);
      } else {
        throw ConfigError("config: unknown section [" + section + "]");
      }
    }
  }
  if (!have_family) throw ConfigError("config: missing model.family");
  if (!have_h) throw ConfigError("config: missing discretization.h_list");
  if (!have_window) throw ConfigError("config: missing discretization.energy_window");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

geometry::ModelCatalogEntry config_model(const ExperimentConfig& config) {
  try {
    return geometry::make_model(config.model_family, config.model_parameters);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: model rejected: ") + e.what());
  }
}

double essential_spectrum_proxy(const ExperimentConfig& config) {
  const auto model = config_model(config);
  return std::pow(model.field.delta_star, 2.0 / 3.0) * montgomery::ground_band_critical_point().mu_c;
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (c.h_list.empty()) fail("h_list is empty");
  for (std::size_t i = 0; i < c.h_list.size(); ++i) {
    if (!(c.h_list[i] > 0.0)) fail("h_list entries must be positive");
    if (i > 0 && !(c.h_list[i] < c.h_list[i - 1])) fail("h_list must be strictly decreasing");
  }
  if (c.bands < 1) fail("bands must be >= 1");
  const auto [e1, e2] = c.energy_window;
  if (!(e1 < e2)) fail("energy_window must satisfy E1 < E2");
  if (!(c.margin >= 0.0)) fail("margin must be non-negative");
  if (c.x_points < 3 || c.t_points < 3) fail("2D grids need at least 3 points per axis");
  if (!(c.x_half_width > 0.0 && c.t_half_width > 0.0)) fail("2D half widths must be positive");
  if (c.dispersive_samples < 9) fail("dispersive_samples must be >= 9");
  if (!(c.symbol_x_half_width > 0.0) || c.symbol_x_points < 5) fail("symbol window too small");
  if (c.quantize_modes < 8 || c.quantize_modes % 2 != 0) fail("quantize_modes must be even and >= 8");
  if (c.action_samples < 5) fail("action_samples must be >= 5");
  if (c.eigen_count < 1) fail("eigen_count must be >= 1");
  if (!(c.tolerance > 0.0)) fail("tolerance must be positive");
  if (c.cluster_tol && !(*c.cluster_tol > 0.0)) fail("cluster_tol must be positive");
  const double proxy = essential_spectrum_proxy(c);
  if (!(e2 < proxy - c.margin)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "energy window top E2 = %.6g is not below delta_*^(2/3) mu_c - margin = %.6g",
                  e2, proxy - c.margin);
    fail(buf);
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json doc = {
      {"schema", "maglab.config"},
      {"version", 1},
      {"model", {{"family", c.model_family}, {"parameters", c.model_parameters}}},
      {"discretization",
       {{"h_list", c.h_list},
        {"bands", c.bands},
        {"energy_window", {c.energy_window.first, c.energy_window.second}},
        {"margin", c.margin},
        {"x_half_width", c.x_half_width},
        {"x_points", c.x_points},
        {"t_half_width", c.t_half_width},
        {"t_points", c.t_points},
        {"dispersive_samples", c.dispersive_samples},
        {"symbol_x_half_width", c.symbol_x_half_width},
        {"symbol_x_points", c.symbol_x_points},
        {"quantize_modes", c.quantize_modes},
        {"action_samples", c.action_samples}}},
      {"solver",
       {{"eigen_count", c.eigen_count},
        {"tolerance", c.tolerance},
        {"preconditioner", preconditioner_name(c.preconditioner)},
        {"localization_cut", c.localization_cut ? nlohmann::json(*c.localization_cut) : nlohmann::json()},
        {"cluster_tol", c.cluster_tol ? nlohmann::json(*c.cluster_tol) : nlohmann::json()}}},
      {"outputs", {{"emit_plots", c.emit_plots}}}};
  return doc;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256: OpenSSL digest failed");
  }
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(to_json(config).dump()); }

}  // namespace maglab::lab
