#include "maglab/geometry/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "maglab/errors.hpp"

namespace maglab::geometry {
namespace {

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double f = std::exp(-1.0 / s);
  const double g = std::exp(-1.0 / (1.0 - s));
  return f / (f + g);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double sample(double lo, double hi, int count, int i) {
  return count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1);
}

double take(const std::map<std::string, double>& p, const char* key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& p, std::set<std::string> allowed,
                    const std::string& family) {
  for (const auto& [key, value] : p) {
    if (!allowed.count(key)) {
      throw ConfigError("model family " + family + ": unknown parameter '" + key + "'");
    }
    if (!std::isfinite(value)) throw ConfigError("model parameter '" + key + "' is not finite");
  }
}

// delta(x) = 1 + a x^2 / (1 + x^2) and its first derivative.
FieldProfile linear_field(double a, double delta_star) {
  FieldProfile f;
  auto delta = [a](double x) { return 1.0 + a * x * x / (1.0 + x * x); };
  f.delta = delta;
  f.delta_prime = [a](double x) {
    const double q = 1.0 + x * x;
    return 2.0 * a * x / (q * q);
  };
  f.field = [delta](double x, double t) { return delta(x) * t; };
  f.dt_field = [delta](double x, double) { return delta(x); };
  f.dtt_field_at_zero = [](double) { return 0.0; };
  f.delta_min = std::min(1.0, 1.0 + a);
  f.delta_star = delta_star;
  f.outside_bound = 0.0;
  return f;
}

AssumptionCheck make_check(std::string id, std::string statement) {
  AssumptionCheck c;
  c.id = std::move(id);
  c.statement = std::move(statement);
  return c;
}

}  // namespace

double smooth_bump(double x) { return smooth_step((3.0 - std::abs(x)) / 2.0); }

GaugeData tubular_gauge(const FieldProfile& field, const CurveGeometry& geometry,
                        const SampleSpec& samples) {
  GaugeData g;
  const auto b = field.field;
  const auto k = geometry.curvature;
  g.potential = [b, k](double x, double t) {
    if (t == 0.0) return 0.0;
    const double kx = k(x);
    auto integrand = [&](double s) { return (1.0 - s * kx) * b(x, s); };
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, 0.0, t, 15, 1e-12, &error, &l1);
    if (!(error <= 1e-12 * std::max(l1, 1.0) * 10.0) || !std::isfinite(value)) {
      throw NumericalError("gauge quadrature did not converge at (x, t) = (" + fmt(x) + ", " +
                           fmt(t) + "), error estimate " + fmt(error));
    }
    return -value;
  };
  const auto d2 = field.dtt_field_at_zero;
  const auto delta = field.delta;
  g.kappa = [d2, k, delta](double x) { return d2(x) / 6.0 - k(x) * delta(x) / 3.0; };

  double bound = 0.0;
  for (int i = 0; i < samples.x_samples; ++i) {
    const double x = sample(samples.x_min, samples.x_max, samples.x_samples, i);
    const double dx = delta(x);
    const double kap = g.kappa(x);
    for (int j = 0; j < samples.t_samples; ++j) {
      const double t = sample(-geometry.d0, geometry.d0, samples.t_samples, j);
      if (t == 0.0) continue;
      const double rest = g.potential(x, t) + dx * t * t / 2.0 + kap * t * t * t;
      bound = std::max(bound, std::abs(rest) / std::pow(t, 4));
    }
  }
  g.remainder_bound = bound;
  return g;
}

ModelCatalogEntry register_model(ModelCatalogEntry entry, const SampleSpec& samples) {
  const auto& geo = entry.geometry;
  if (!(geo.d0 > 0.0)) throw PreconditionError("model " + entry.name + ": d0 must be positive");
  if (!(geo.d0 * geo.curvature_bound < 1.0)) {
    throw PreconditionError("model " + entry.name + ": tubular_chart fails, d0 * K = " +
                            fmt(geo.d0 * geo.curvature_bound) + " >= 1");
  }
  for (int i = 0; i < samples.x_samples; ++i) {
    const double x = sample(samples.x_min, samples.x_max, samples.x_samples, i);
    const double kx = geo.curvature(x);
    if (!std::isfinite(kx) || std::abs(kx) > geo.curvature_bound + 1e-12) {
      throw PreconditionError("model " + entry.name + ": |k(" + fmt(x) + ")| = " +
                              fmt(std::abs(kx)) + " exceeds the declared bound");
    }
    if (!std::isfinite(entry.field.delta(x))) {
      throw PreconditionError("model " + entry.name + ": delta not finite at x = " + fmt(x));
    }
  }
  return entry;
}

ModelCatalogEntry make_model(const std::string& family,
                             const std::map<std::string, double>& parameters) {
  ModelCatalogEntry e;
  e.family = family;
  if (family == "A") {
    reject_unknown(parameters, {"a", "delta_star"}, family);
    const double a = take(parameters, "a", 1.0);
    const double star = take(parameters, "delta_star", 1.0 + a - 0.05);
    e.name = "A";
    e.geometry.d0 = 10.0;
    e.field = linear_field(a, star);
    e.parameters = {{"a", a}, {"delta_star", star}};
  } else if (family == "B") {
    reject_unknown(parameters, {"a", "c", "delta_star"}, family);
    const double a = take(parameters, "a", 1.0);
    const double c = take(parameters, "c", 0.3);
    const double star = take(parameters, "delta_star", 1.0 + a - 0.05);
    e.name = "B";
    e.geometry.d0 = 1.0;
    e.field = linear_field(a, star);
    auto base = e.field.field;
    auto base_dt = e.field.dt_field;
    e.field.field = [base, c](double x, double t) { return base(x, t) + c * t * t * smooth_bump(x); };
    e.field.dt_field = [base_dt, c](double x, double t) {
      return base_dt(x, t) + 2.0 * c * t * smooth_bump(x);
    };
    e.field.dtt_field_at_zero = [c](double x) { return 2.0 * c * smooth_bump(x); };
    e.parameters = {{"a", a}, {"c", c}, {"delta_star", star}};
  } else if (family == "C") {
    reject_unknown(parameters, {"a", "k0", "d0", "delta_star"}, family);
    const double a = take(parameters, "a", 1.0);
    const double k0 = take(parameters, "k0", 0.2);
    const double d0 = take(parameters, "d0", 1.0);
    const double star = take(parameters, "delta_star", 1.0 + a - 0.05);
    e.name = "C";
    e.geometry.kind = CurveKind::parametrized;
    e.geometry.curvature = [k0](double x) { return k0 / (1.0 + x * x); };
    e.geometry.curvature_bound = std::abs(k0);
    e.geometry.d0 = d0;
    e.field = linear_field(a, star);
    e.parameters = {{"a", a}, {"k0", k0}, {"d0", d0}, {"delta_star", star}};
  } else {
    throw ConfigError("unknown model family '" + family + "' (expected A, B or C)");
  }
  return register_model(std::move(e));
}

std::vector<ModelCatalogEntry> builtin_models() {
  return {make_model("A"), make_model("B"), make_model("C")};
}

bool AssumptionReport::all_pass() const {
  return std::none_of(checks.begin(), checks.end(),
                      [](const AssumptionCheck& c) { return c.status == CheckStatus::fail; });
}

const AssumptionCheck& AssumptionReport::check(const std::string& id) const {
  for (const auto& c : checks) {
    if (c.id == id) return c;
  }
  throw PreconditionError("no assumption check with id '" + id + "'");
}

AssumptionReport validate_assumptions(const ModelCatalogEntry& entry, const SampleSpec& samples) {
  AssumptionReport report;
  report.model = entry.name;
  const auto& geo = entry.geometry;
  const auto& field = entry.field;
  const int nx = std::max(samples.x_samples, 3);
  const int nt = std::max(samples.t_samples, 2);
  std::vector<double> xs(nx);
  std::vector<double> delta(nx);
  for (int i = 0; i < nx; ++i) {
    xs[i] = sample(samples.x_min, samples.x_max, nx, i);
    delta[i] = field.delta(xs[i]);
  }

  {
    auto c = make_check("tubular_chart", "d0 * sup|k| < 1, so m = 1 - t k stays positive on the tube");
    double k_max = 0.0;
    for (double x : xs) {
      const double k = std::abs(geo.curvature(x));
      k_max = std::max(k_max, k);
      if (geo.d0 * k >= 1.0) c.witnesses.emplace_back(x, geo.d0);
    }
    const double k_used = std::max(k_max, geo.curvature_bound);
    c.constants = {{"K", k_used}, {"m0", 1.0 - geo.d0 * k_used}, {"d0", geo.d0}};
    if (geo.d0 * k_used >= 1.0 || !c.witnesses.empty()) c.status = CheckStatus::fail;
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("field_vanishes_on_curve", "B(x, 0) = 0 on the sampled curve");
    double worst = 0.0;
    for (double x : xs) {
      const double b = std::abs(field.field(x, 0.0));
      worst = std::max(worst, b);
      if (b > 1e-12) c.witnesses.emplace_back(x, 0.0);
    }
    c.constants = {{"max_abs_B_on_curve", worst}};
    if (!c.witnesses.empty()) c.status = CheckStatus::fail;
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("exterior_confinement", "|B| >= b0 outside the tube");
    c.status = CheckStatus::not_applicable;
    c.note = "not applicable: Dirichlet truncation substitutes for confinement outside the tube";
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("transverse_nondegeneracy", "d/dt B(x, t) > delta0 > 0 on the tube");
    double lowest = std::numeric_limits<double>::infinity();
    std::pair<double, double> where{0.0, 0.0};
    for (double x : xs) {
      for (int j = 0; j < nt; ++j) {
        const double t = sample(-geo.d0, geo.d0, nt, j);
        const double v = field.dt_field(x, t);
        if (v < lowest) {
          lowest = v;
          where = {x, t};
        }
      }
    }
    if (!(lowest > 0.0)) {
      c.status = CheckStatus::fail;
      c.witnesses.push_back(where);
      // where delta itself vanishes on the curve, report the sample closest to the zero
      int zero_arg = -1;
      for (int i = 0; i < nx; ++i) {
        if (delta[i] <= 0.0 && (zero_arg < 0 || std::abs(delta[i]) < std::abs(delta[zero_arg]))) {
          zero_arg = i;
        }
      }
      if (zero_arg >= 0 && xs[zero_arg] != where.first) c.witnesses.emplace_back(xs[zero_arg], 0.0);
    }
    c.constants = {{"delta0", lowest}};
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("controlled_oscillation", "|delta'| <= C_delta delta^(2/3), and delta > delta_star near the window ends");
    double c_delta = 0.0;
    bool positive = true;
    for (int i = 0; i < nx; ++i) {
      if (!(delta[i] > 0.0)) {
        positive = false;
        c.witnesses.emplace_back(xs[i], 0.0);
        continue;
      }
      c_delta = std::max(c_delta, std::abs(field.delta_prime(xs[i])) / std::cbrt(delta[i] * delta[i]));
    }
    double outer_min = std::numeric_limits<double>::infinity();
    const int edge = std::min(10, nx / 2);
    for (int i = 0; i < edge; ++i) {
      for (int idx : {i, nx - 1 - i}) {
        outer_min = std::min(outer_min, delta[idx]);
        if (!(delta[idx] > field.delta_star)) c.witnesses.emplace_back(xs[idx], 0.0);
      }
    }
    c.constants = {{"C_delta", positive ? c_delta : std::numeric_limits<double>::infinity()},
                   {"delta_star", field.delta_star},
                   {"outer_delta_min", outer_min}};
    if (!c.witnesses.empty()) c.status = CheckStatus::fail;
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("gauge_remainder", "|kappa| <= C_kappa delta, gauge Taylor remainder O(t^4)");
    const auto gauge = tubular_gauge(field, geo, {samples.x_min, samples.x_max, 41, 21});
    double c_kappa = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double kap = std::abs(gauge.kappa(xs[i]));
      if (!(delta[i] > 0.0)) {
        if (kap > 0.0) c.witnesses.emplace_back(xs[i], 0.0);
        continue;
      }
      c_kappa = std::max(c_kappa, kap / delta[i]);
    }
    c.constants = {{"C_kappa", c_kappa}, {"C_rmd", gauge.remainder_bound}};
    if (!c.witnesses.empty() || !std::isfinite(gauge.remainder_bound)) c.status = CheckStatus::fail;
    report.checks.push_back(std::move(c));
  }
  {
    auto c = make_check("unique_well", "delta has a unique global nondegenerate minimum");
    int arg = 0;
    for (int i = 1; i < nx; ++i) {
      if (delta[i] < delta[arg]) arg = i;
    }
    int strict_minima = 0;
    for (int i = 1; i + 1 < nx; ++i) {
      if (delta[i] < delta[i - 1] && delta[i] < delta[i + 1]) ++strict_minima;
    }
    const double x_c = xs[arg];
    const double h = 1e-3;
    const auto d = field.delta;
    const double second = (-d(x_c + 2 * h) + 16 * d(x_c + h) - 30 * d(x_c) + 16 * d(x_c - h) -
                           d(x_c - 2 * h)) /
                          (12 * h * h);
    c.constants = {{"x_c", x_c},
                   {"delta_c", delta[arg]},
                   {"delta_second", second},
                   {"strict_local_minima", static_cast<double>(strict_minima)}};
    const bool interior = arg > 0 && arg + 1 < nx;
    if (!(strict_minima == 1 && interior && second > 1e-8)) {
      c.status = CheckStatus::fail;
      c.witnesses.emplace_back(x_c, 0.0);
    }
    report.checks.push_back(std::move(c));
  }
  return report;
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::not_applicable: return "not_applicable";
  }
  return "unknown";
}

nlohmann::json to_json(const ModelCatalogEntry& entry) {
  return {{"schema", "maglab.model"},
          {"version", 1},
          {"name", entry.name},
          {"family", entry.family},
          {"parameters", entry.parameters}};
}

ModelCatalogEntry model_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", std::string{}) != "maglab.model") {
    throw ConfigError("expected a 'maglab.model' document");
  }
  auto entry = make_model(doc.at("family").get<std::string>(),
                          doc.at("parameters").get<std::map<std::string, double>>());
  entry.name = doc.value("name", entry.name);
  return entry;
}

nlohmann::json to_json(const AssumptionReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& [x, t] : c.witnesses) w.push_back({x, t});
    checks.push_back({{"id", c.id},
                      {"statement", c.statement},
                      {"status", to_string(c.status)},
                      {"witnesses", w},
                      {"constants", c.constants},
                      {"note", c.note}});
  }
  return {{"schema", "maglab.assumption_report"},
          {"version", 1},
          {"model", report.model},
          {"all_pass", report.all_pass()},
          {"checks", checks}};
}

}  // namespace maglab::geometry
