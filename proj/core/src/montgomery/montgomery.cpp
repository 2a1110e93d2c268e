#include "maglab/montgomery/montgomery.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maglab/errors.hpp"
#include "maglab/linalg/eigensolvers.hpp"

namespace maglab::montgomery {
namespace {

constexpr double kGapFloor = 1e-6;
constexpr double kTailRatio = 1e-8;
constexpr double kGolden = 0.6180339887498949;

struct RawPairs {
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // unit l2 columns
};

// Rayleigh quotient with the kinetic part summed as squared differences.
// The LAPACK eigenvalue carries absolute error ~eps*||T|| ~ 1e-11, which
// swamps second differences in nu; this form has no cancellation and is
// stationary, so it is smooth in nu to near machine precision.
double difference_form_quotient(double nu, const MontgomeryGrid& grid, const double* z) {
  const int n = grid.points;
  const double h = grid.spacing();
  double kinetic = z[0] * z[0] + z[n - 1] * z[n - 1];
  double potential = 0.0;
  double norm = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) {
      const double d = z[i + 1] - z[i];
      kinetic += d * d;
    }
    const double t = grid.node(i);
    const double v = nu - 0.5 * t * t;
    potential += v * v * z[i] * z[i];
    norm += z[i] * z[i];
  }
  return (kinetic / (h * h) + potential) / norm;
}

RawPairs raw_pairs(double nu, int count, const MontgomeryGrid& grid) {
  const auto a = assemble_montgomery(nu, grid);
  auto report = linalg::dense_band_eigensolve(a, count, true);
  RawPairs out;
  out.vectors = std::move(*report.eigenvectors);
  out.values.resize(count);
  for (int k = 0; k < count; ++k) {
    out.values[k] = difference_form_quotient(nu, grid, out.vectors.col(k).data());
  }
  return out;
}

double richardson(double fine, double coarse) { return (4.0 * fine - coarse) / 3.0; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

MontgomeryGrid MontgomeryGrid::coarsened() const {
  MontgomeryGrid g = *this;
  g.points = (points + 1) / 2;
  return g;
}

MontgomeryGrid MontgomeryGrid::refined() const {
  MontgomeryGrid g = *this;
  g.points = 2 * points - 1;
  return g;
}

void MontgomeryGrid::validate() const {
  if (!(half_width > 0.0)) throw PreconditionError("MontgomeryGrid: half_width must be positive");
  if (points < 5 || points % 2 == 0) {
    throw PreconditionError("MontgomeryGrid: points must be odd and >= 5, got " +
                            std::to_string(points));
  }
  if (!(barrier_margin >= 0.0)) throw PreconditionError("MontgomeryGrid: negative barrier margin");
}

void MontgomeryGrid::check_barrier(double nu, double target_energy) const {
  const double need = target_energy + barrier_margin;
  const double wall = nu - 0.5 * half_width * half_width;
  if (wall * wall >= need) return;
  // smallest T with (T^2/2 - nu)^2 >= need on the outer side of the well
  const double required = std::sqrt(2.0 * (nu + std::sqrt(std::max(need, 0.0))));
  throw PreconditionError("Montgomery barrier too low at nu = " + fmt(nu) + ": need T >= " +
                          fmt(required) + " (have " + fmt(half_width) + ")");
}

linalg::SymmetricBandMatrix assemble_montgomery(double nu, const MontgomeryGrid& grid,
                                                double target_energy) {
  grid.validate();
  grid.check_barrier(nu, target_energy);
  const int n = grid.points;
  const double h = grid.spacing();
  const double kinetic = 1.0 / (h * h);
  linalg::SymmetricBandMatrix a(n, 1);
  auto diag = a.band(0);
  auto off = a.band(1);
  for (int i = 0; i < n; ++i) {
    const double t = grid.node(i);
    const double v = nu - 0.5 * t * t;
    diag[i] = 2.0 * kinetic + v * v;
    if (i + 1 < n) off[i] = -kinetic;
  }
  return a;
}

std::vector<MontgomeryEigenpair> montgomery_spectrum(double nu, int bands,
                                                     const MontgomeryGrid& grid) {
  if (bands < 1) throw PreconditionError("montgomery_spectrum: bands must be >= 1");
  grid.validate();
  const int n = grid.points;
  const double h = grid.spacing();
  const auto fine = raw_pairs(nu, bands + 1, grid);
  const auto coarse = raw_pairs(nu, bands, grid.coarsened());

  for (int k = 0; k < bands; ++k) {
    if (fine.values[k + 1] - fine.values[k] <= kGapFloor) {
      throw DegeneracyError("Montgomery bands " + std::to_string(k + 1) + " and " +
                            std::to_string(k + 2) + " nearly degenerate at nu = " + fmt(nu));
    }
  }
  grid.check_barrier(nu, fine.values[bands - 1]);

  const int tail = std::max(1, static_cast<int>(std::ceil(0.05 * n)));
  const int mid = (n - 1) / 2;
  std::vector<MontgomeryEigenpair> out;
  out.reserve(bands);
  for (int k = 0; k < bands; ++k) {
    MontgomeryEigenpair p;
    p.nu = nu;
    p.band = k + 1;
    p.grid = grid;
    p.grid_value = fine.values[k];
    p.value = richardson(fine.values[k], coarse.values[k]);
    p.function.resize(n);
    const double scale = 1.0 / std::sqrt(h);
    for (int i = 0; i < n; ++i) p.function[i] = fine.vectors(i, k) * scale;

    double anchor = 0.0;
    for (int i = mid; i < n; ++i) {
      const double w = (i == mid || i == n - 1) ? 0.5 : 1.0;
      anchor += w * h * p.function[i];
    }
    double sign = anchor < 0.0 ? -1.0 : 1.0;
    if (std::abs(anchor) < 1e-10) {
      // anchor carries no sign information; fall back to the largest lobe on t >= 0
      int arg = mid;
      for (int i = mid; i < n; ++i) {
        if (std::abs(p.function[i]) > std::abs(p.function[arg])) arg = i;
      }
      sign = p.function[arg] < 0.0 ? -1.0 : 1.0;
    }
    if (sign < 0.0) {
      for (double& v : p.function) v = -v;
    }
    p.sign_anchor = sign * anchor;

    double peak = 0.0;
    double edge = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = std::abs(p.function[i]);
      peak = std::max(peak, v);
      if (i < tail || i >= n - tail) edge = std::max(edge, v);
    }
    if (edge > kTailRatio * peak) {
      throw ResolutionError("Montgomery band " + std::to_string(k + 1) + " at nu = " + fmt(nu) +
                            " not decayed at the grid edge (ratio " + fmt(edge / peak) +
                            "); increase T beyond " + fmt(grid.half_width));
    }
    out.push_back(std::move(p));
  }
  return out;
}

double montgomery_eigenvalue(double nu, int band, const MontgomeryGrid& grid) {
  if (band < 1) throw PreconditionError("montgomery_eigenvalue: band must be >= 1");
  grid.validate();
  const auto fine = raw_pairs(nu, band, grid);
  const auto coarse = raw_pairs(nu, band, grid.coarsened());
  grid.check_barrier(nu, fine.values[band - 1]);
  return richardson(fine.values[band - 1], coarse.values[band - 1]);
}

bool DispersiveCurveTable::ends_increasing() const {
  const std::size_t n = values.size();
  if (n < 11) return false;
  for (std::size_t i = 0; i < 10; ++i) {
    if (!(values[i] > values[i + 1])) return false;
    if (!(values[n - 1 - i] > values[n - 2 - i])) return false;
  }
  return true;
}

std::vector<int> DispersiveCurveTable::interior_minima() const {
  std::vector<int> out;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (values[i] < values[i - 1] && values[i] <= values[i + 1]) out.push_back(static_cast<int>(i));
  }
  return out;
}

DispersiveCurveTable dispersive_curve(int band, double nu_lo, double nu_hi, int samples,
                                      const MontgomeryGrid& grid) {
  if (!(nu_lo < nu_hi)) throw PreconditionError("dispersive_curve: need nu_lo < nu_hi");
  if (samples < 9) throw PreconditionError("dispersive_curve: samples must be >= 9");
  if (band < 1) throw PreconditionError("dispersive_curve: band must be >= 1");
  DispersiveCurveTable table;
  table.band = band;
  table.grid = grid;
  table.nu_grid.resize(samples);
  table.values.resize(samples);
  const double step = (nu_hi - nu_lo) / (samples - 1);
  for (int i = 0; i < samples; ++i) {
    const double nu = i + 1 == samples ? nu_hi : nu_lo + i * step;
    table.nu_grid[i] = nu;
    table.values[i] = montgomery_eigenvalue(nu, band, grid);
    if (!std::isfinite(table.values[i]) || table.values[i] <= 0.0) {
      throw NumericalError("dispersive_curve: non-positive eigenvalue at nu = " + fmt(nu));
    }
  }
  table.second_differences.resize(samples - 2);
  for (int i = 1; i + 1 < samples; ++i) {
    table.second_differences[i - 1] =
        (table.values[i + 1] - 2.0 * table.values[i] + table.values[i - 1]) / (step * step);
  }
  return table;
}

double dispersive_derivative(double nu, int band, const MontgomeryGrid& grid) {
  auto derivative_on = [&](const MontgomeryGrid& g) {
    const auto pairs = raw_pairs(nu, band, g);
    const auto z = pairs.vectors.col(band - 1);
    double sum = 0.0;
    for (int i = 0; i < g.points; ++i) {
      const double t = g.node(i);
      sum += z[i] * z[i] * 2.0 * (nu - 0.5 * t * t);
    }
    return sum;
  };
  return richardson(derivative_on(grid), derivative_on(grid.coarsened()));
}

const CriticalPointData& ground_band_critical_point() {
  static const CriticalPointData point = find_critical_point(1, {0.0, 1.0});
  return point;
}

CriticalPointData find_critical_point(int band, std::pair<double, double> bracket,
                                      const MontgomeryGrid& grid) {
  if (band < 1) throw PreconditionError("find_critical_point: band must be >= 1");
  double lo = std::min(bracket.first, bracket.second);
  double hi = std::max(bracket.first, bracket.second);
  if (!(lo < hi)) throw BracketError("find_critical_point: empty bracket");
  const double d_lo = dispersive_derivative(lo, band, grid);
  const double d_hi = dispersive_derivative(hi, band, grid);
  if (!(d_lo < 0.0 && d_hi > 0.0)) {
    throw BracketError("find_critical_point: no minimum in [" + fmt(lo) + ", " + fmt(hi) +
                       "] (derivative " + fmt(d_lo) + " .. " + fmt(d_hi) + ")");
  }

  auto f = [&](double nu) { return montgomery_eigenvalue(nu, band, grid); };
  double a = lo;
  double b = hi;
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a >= 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  double nu = 0.5 * (a + b);

  // Golden section resolves nu only to ~sqrt(eps); polish on the derivative.
  for (int it = 0; it < 3; ++it) {
    const double slope = dispersive_derivative(nu, band, grid);
    const double dh = 1e-4;
    const double second = (dispersive_derivative(nu + dh, band, grid) -
                           dispersive_derivative(nu - dh, band, grid)) /
                          (2 * dh);
    if (!(second > 0.0)) break;
    const double next = nu - slope / second;
    if (!(next > lo && next < hi)) break;
    const bool done = std::abs(next - nu) < 1e-13;
    nu = next;
    if (done) break;
  }

  CriticalPointData out;
  out.band = band;
  out.grid = grid;
  out.nu_c = nu;
  out.mu_c = f(nu);
  const double s = 1e-3;
  out.curvature = (-f(nu + 2 * s) + 16 * f(nu + s) - 30 * out.mu_c + 16 * f(nu - s) -
                   f(nu - 2 * s)) /
                  (12 * s * s);
  const double dh = 1e-4;
  out.derivative_check = (f(nu + dh) - f(nu - dh)) / (2 * dh);
  if (!(out.curvature > 0.0)) {
    throw DegeneracyError("find_critical_point: non-positive curvature " + fmt(out.curvature) +
                          " at nu = " + fmt(nu));
  }
  if (std::abs(out.derivative_check) > 1e-8) {
    throw NumericalError("find_critical_point: derivative " + fmt(out.derivative_check) +
                         " at nu_c exceeds 1e-8");
  }
  return out;
}

LocalMinimaScan find_local_minima(int band, double nu_lo, double nu_hi, int samples,
                                  const MontgomeryGrid& grid) {
  const auto table = dispersive_curve(band, nu_lo, nu_hi, samples, grid);
  LocalMinimaScan scan;
  for (int i : table.interior_minima()) {
    scan.minima.push_back(
        find_critical_point(band, {table.nu_grid[i - 1], table.nu_grid[i + 1]}, grid));
  }
  scan.multiple = scan.minima.size() > 1;
  return scan;
}

Polynomial::Polynomial(std::initializer_list<double> coefficients)
    : Polynomial(std::vector<double>(coefficients)) {}

Polynomial::Polynomial(std::vector<double> coefficients) : coefficients_(std::move(coefficients)) {
  while (!coefficients_.empty() && coefficients_.back() == 0.0) coefficients_.pop_back();
}

Polynomial Polynomial::monomial(int power, double scale) {
  if (power < 0) throw PreconditionError("Polynomial::monomial: negative power");
  std::vector<double> c(power + 1, 0.0);
  c[power] = scale;
  return Polynomial(std::move(c));
}

int Polynomial::degree() const { return static_cast<int>(coefficients_.size()) - 1; }

double Polynomial::operator()(double t) const {
  double v = 0.0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) v = v * t + *it;
  return v;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  std::vector<double> c(std::max(a.coefficients_.size(), b.coefficients_.size()), 0.0);
  for (std::size_t i = 0; i < a.coefficients_.size(); ++i) c[i] += a.coefficients_[i];
  for (std::size_t i = 0; i < b.coefficients_.size(); ++i) c[i] += b.coefficients_[i];
  return Polynomial(std::move(c));
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.coefficients_.empty() || b.coefficients_.empty()) return {};
  std::vector<double> c(a.coefficients_.size() + b.coefficients_.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.coefficients_.size(); ++i)
    for (std::size_t j = 0; j < b.coefficients_.size(); ++j)
      c[i + j] += a.coefficients_[i] * b.coefficients_[j];
  return Polynomial(std::move(c));
}

Polynomial operator*(double s, const Polynomial& a) {
  std::vector<double> c = a.coefficients_;
  for (double& v : c) v *= s;
  return Polynomial(std::move(c));
}

double grid_inner(const MontgomeryGrid& grid, const std::vector<double>& a,
                  const std::vector<double>& b) {
  const auto n = static_cast<std::size_t>(grid.points);
  if (a.size() != n || b.size() != n) throw PreconditionError("grid_inner: size mismatch");
  double sum = 0.5 * (a.front() * b.front() + a.back() * b.back());
  for (std::size_t i = 1; i + 1 < n; ++i) sum += a[i] * b[i];
  return sum * grid.spacing();
}

double eigenfunction_moment(const MontgomeryEigenpair& pair, const Polynomial& weight,
                            int derivative_order) {
  if (weight.degree() > 6) {
    throw PreconditionError("eigenfunction_moment: weight degree " +
                            std::to_string(weight.degree()) + " exceeds 6");
  }
  if (derivative_order != 0 && derivative_order != 1) {
    throw PreconditionError("eigenfunction_moment: derivative order must be 0 or 1");
  }
  const auto& u = pair.function;
  const int n = pair.grid.points;
  const double h = pair.grid.spacing();
  std::vector<double> right(n);
  for (int i = 0; i < n; ++i) {
    double r = u[i];
    if (derivative_order == 1) {
      if (i == 0) {
        r = (u[1] - u[0]) / h;
      } else if (i == n - 1) {
        r = (u[n - 1] - u[n - 2]) / h;
      } else {
        r = (u[i + 1] - u[i - 1]) / (2 * h);
      }
    }
    right[i] = weight(pair.grid.node(i)) * r;
  }
  return grid_inner(pair.grid, u, right);
}

std::vector<double> eigenpair_nu_derivative(int band, double nu, double step,
                                            const MontgomeryGrid& grid) {
  if (!(step >= 1e-5 && step <= 1e-2)) {
    throw PreconditionError("eigenpair_nu_derivative: step must lie in [1e-5, 1e-2]");
  }
  const auto centre = montgomery_spectrum(nu, band, grid).back().function;
  auto plus = montgomery_spectrum(nu + step, band, grid).back().function;
  auto minus = montgomery_spectrum(nu - step, band, grid).back().function;
  if (grid_inner(grid, centre, plus) < 0.0) {
    for (double& v : plus) v = -v;
  }
  if (grid_inner(grid, centre, minus) < 0.0) {
    for (double& v : minus) v = -v;
  }
  std::vector<double> out(centre.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (plus[i] - minus[i]) / (2 * step);
  return out;
}

double hellmann_feynman_derivative(const MontgomeryEigenpair& pair) {
  return eigenfunction_moment(pair, Polynomial{2.0 * pair.nu, 0.0, -1.0});
}

nlohmann::json to_json(const MontgomeryGrid& grid) {
  return {{"half_width", grid.half_width},
          {"points", grid.points},
          {"barrier_margin", grid.barrier_margin}};
}

namespace {

MontgomeryGrid grid_from_json(const nlohmann::json& j) {
  MontgomeryGrid g;
  g.half_width = j.at("half_width").get<double>();
  g.points = j.at("points").get<int>();
  g.barrier_margin = j.at("barrier_margin").get<double>();
  return g;
}

void expect_schema(const nlohmann::json& doc, const char* schema) {
  if (doc.value("schema", std::string{}) != schema || doc.value("version", 0) != 1) {
    throw ConfigError(std::string("expected a version-1 '") + schema + "' document");
  }
}

}  // namespace

nlohmann::json to_json(const DispersiveCurveTable& table) {
  return {{"schema", "maglab.dispersive_curve"},
          {"version", 1},
          {"band", table.band},
          {"nu_grid", table.nu_grid},
          {"values", table.values},
          {"second_differences", table.second_differences},
          {"grid", to_json(table.grid)}};
}

nlohmann::json to_json(const CriticalPointData& point) {
  return {{"schema", "maglab.critical_point"},
          {"version", 1},
          {"band", point.band},
          {"nu_c", point.nu_c},
          {"mu_c", point.mu_c},
          {"curvature", point.curvature},
          {"derivative_check", point.derivative_check},
          {"grid", to_json(point.grid)}};
}

DispersiveCurveTable dispersive_curve_from_json(const nlohmann::json& doc) {
  expect_schema(doc, "maglab.dispersive_curve");
  DispersiveCurveTable t;
  t.band = doc.at("band").get<int>();
  t.nu_grid = doc.at("nu_grid").get<std::vector<double>>();
  t.values = doc.at("values").get<std::vector<double>>();
  t.second_differences = doc.at("second_differences").get<std::vector<double>>();
  t.grid = grid_from_json(doc.at("grid"));
  return t;
}

CriticalPointData critical_point_from_json(const nlohmann::json& doc) {
  expect_schema(doc, "maglab.critical_point");
  CriticalPointData p;
  p.band = doc.at("band").get<int>();
  p.nu_c = doc.at("nu_c").get<double>();
  p.mu_c = doc.at("mu_c").get<double>();
  p.curvature = doc.at("curvature").get<double>();
  p.derivative_check = doc.at("derivative_check").get<double>();
  p.grid = grid_from_json(doc.at("grid"));
  return p;
}

}  // namespace maglab::montgomery
