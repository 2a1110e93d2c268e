#include "maglab/spectrum.hpp"

#include <cmath>
#include <cstdio>

#include "maglab/errors.hpp"

namespace maglab {

double SpectrumResult::physical(std::size_t i) const {
  return eigenvalues.at(i) * std::pow(h, 4.0 / 3.0);
}

nlohmann::json to_json(const SpectrumResult& s) {
  return {{"schema", "maglab.spectrum"}, {"version", 1},          {"source", s.source},
          {"h", s.h},                    {"band", s.band},        {"eigenvalues", s.eigenvalues},
          {"indices", s.indices},        {"residuals", s.residuals}, {"tolerance", s.tolerance},
          {"iterations", s.iterations}};
}

SpectrumResult spectrum_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", std::string{}) != "maglab.spectrum") {
    throw ConfigError("expected a 'maglab.spectrum' document");
  }
  try {
    SpectrumResult s;
    s.source = doc.at("source").get<std::string>();
    s.h = doc.at("h").get<double>();
    s.band = doc.at("band").get<int>();
    s.eigenvalues = doc.at("eigenvalues").get<std::vector<double>>();
    s.indices = doc.at("indices").get<std::vector<int>>();
    s.residuals = doc.at("residuals").get<std::vector<double>>();
    s.tolerance = doc.at("tolerance").get<double>();
    s.iterations = doc.at("iterations").get<int>();
    if (s.indices.size() != s.eigenvalues.size() ||
        (!s.residuals.empty() && s.residuals.size() != s.eigenvalues.size())) {
      throw ConfigError("spectrum arrays have inconsistent lengths");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed spectrum document: ") + e.what());
  }
}

std::string to_csv(const SpectrumResult& s) {
  std::string out = "index,eigenvalue_rescaled,eigenvalue_physical,residual\n";
  char line[160];
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    const double r = i < s.residuals.size() ? s.residuals[i] : 0.0;
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", s.indices.at(i), s.eigenvalues[i],
                  s.physical(i), r);
    out += line;
  }
  return out;
}

}  // namespace maglab
