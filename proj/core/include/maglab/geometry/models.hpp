#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace maglab::geometry {

using Profile = std::function<double(double)>;
using TubeField = std::function<double(double, double)>;

enum class CurveKind { straight, parametrized };

struct CurveGeometry {
  CurveKind kind = CurveKind::straight;
  Profile curvature = [](double) { return 0.0; };
  double d0 = 1.0;               // tubular radius
  double curvature_bound = 0.0;  // K with |k| <= K

  /// m(x, t) = 1 - t k(x)
  double jacobian(double x, double t) const { return 1.0 - t * curvature(x); }
};

/// Field in tubular coordinates, with the derived transverse profile.
struct FieldProfile {
  TubeField field;          // B(x, t)
  TubeField dt_field;       // d/dt B(x, t)
  Profile delta;            // d/dt B(x, 0)
  Profile delta_prime;      // d/dx delta
  Profile dtt_field_at_zero;  // d^2/dt^2 B(x, 0)
  double delta_min = 0.0;
  double delta_star = 0.0;  // strictly below liminf delta at infinity
  double outside_bound = 0.0;
};

struct GaugeData {
  TubeField potential;  // A(x, t) = -int_0^t (1 - s k(x)) B(x, s) ds
  Profile kappa;        // d^2_t B(x,0)/6 - k(x) delta(x)/3
  double remainder_bound = 0.0;
};

struct ModelCatalogEntry {
  std::string name;
  std::string family;  // "A", "B", "C" or "custom"
  CurveGeometry geometry;
  FieldProfile field;
  std::map<std::string, double> parameters;
};

/// Sampling used by the gauge remainder estimate and by validation.
struct SampleSpec {
  double x_min = -6.0;
  double x_max = 6.0;
  int x_samples = 2001;
  int t_samples = 101;
};

/// Adaptive Gauss-Kronrod gauge integral (tolerance 1e-12) and closed-form kappa.
/// The remainder constant is estimated on `samples` as
/// max |A + delta t^2/2 + kappa t^3| / t^4 over the tube.
GaugeData tubular_gauge(const FieldProfile& field, const CurveGeometry& geometry,
                        const SampleSpec& samples = {-6.0, 6.0, 41, 41});

/// Parametrized catalog families:
///   A: straight curve, B = delta(x) t, delta = 1 + a x^2/(1+x^2)   (a; d0 = 10)
///   B: A plus c t^2 sigma(x) with a smooth bump sigma              (a, c; d0 = 1)
///   C: curvature k0/(1+x^2), field as A                            (a, k0, d0)
/// delta_star defaults to liminf delta - 0.05. Unknown parameters are errors.
ModelCatalogEntry make_model(const std::string& family,
                             const std::map<std::string, double>& parameters = {});

/// Registers an arbitrary entry; throws PreconditionError when the tubular
/// chart is not a diffeomorphism (d0 * K >= 1) or the curvature exceeds K.
ModelCatalogEntry register_model(ModelCatalogEntry entry, const SampleSpec& samples = {});

std::vector<ModelCatalogEntry> builtin_models();

/// Smooth bump: 1 on |x| <= 1, 0 on |x| >= 3, C-infinity in between.
double smooth_bump(double x);

enum class CheckStatus { pass, fail, not_applicable };

struct AssumptionCheck {
  std::string id;
  std::string statement;
  CheckStatus status = CheckStatus::pass;
  std::vector<std::pair<double, double>> witnesses;  // (x, t) where it fails
  std::map<std::string, double> constants;
  std::string note;
};

struct AssumptionReport {
  std::string model;
  std::vector<AssumptionCheck> checks;

  bool all_pass() const;
  const AssumptionCheck& check(const std::string& id) const;
};

/// Evaluates every standing hypothesis on the sample grid. Failures are report
/// content, never exceptions.
AssumptionReport validate_assumptions(const ModelCatalogEntry& entry, const SampleSpec& samples = {});

nlohmann::json to_json(const ModelCatalogEntry& entry);
ModelCatalogEntry model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AssumptionReport& report);
const char* to_string(CheckStatus status);

}  // namespace maglab::geometry
