#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace maglab {

/// Eigenvalue list shared by the 2D solver, 1D quantization and
/// Bohr-Sommerfeld. Values are in rescaled units (physical = value * h^(4/3)).
struct SpectrumResult {
  std::string source;  // "magnetic2d", "quantize_1d", "bohr_sommerfeld", ...
  double h = 0.0;
  int band = 1;
  std::vector<double> eigenvalues;  // ascending
  std::vector<int> indices;         // quantum number n per eigenvalue
  std::vector<double> residuals;    // empty when not applicable
  double tolerance = 0.0;
  int iterations = 0;
  std::optional<Eigen::MatrixXcd> eigenvectors;

  double physical(std::size_t i) const;
};

/// Eigenvectors are not serialized.
nlohmann::json to_json(const SpectrumResult& spectrum);
SpectrumResult spectrum_from_json(const nlohmann::json& doc);
/// Columns: index, eigenvalue_rescaled, eigenvalue_physical, residual.
std::string to_csv(const SpectrumResult& spectrum);

}  // namespace maglab
