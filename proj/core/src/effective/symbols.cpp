#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "maglab/effective/effective.hpp"
#include "maglab/errors.hpp"

namespace maglab::effective {

namespace {

using boost::math::interpolators::cardinal_cubic_b_spline;
using montgomery::MontgomeryGrid;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

constexpr int kMaxHalvings = 8;

/// nu range of xi * delta(x)^(-1/3) over the grid, widened by 10% and rounded
/// outward to multiples of 0.5 so nearby grids share cached tables.
std::pair<double, double> nu_range(const geometry::ModelCatalogEntry& model,
                                   const std::vector<double>& x_grid,
                                   const std::vector<double>& xi_grid) {
  double d_lo = INFINITY, d_hi = -INFINITY;
  for (double x : x_grid) {
    const double d = model.field.delta(x);
    if (!(d > 0.0)) {
      throw PreconditionError("effective symbol: delta(" + fmt(x) + ") = " + fmt(d) +
                              " is not positive");
    }
    d_lo = std::min(d_lo, d);
    d_hi = std::max(d_hi, d);
  }
  double lo = INFINITY, hi = -INFINITY;
  for (double xi : {xi_grid.front(), xi_grid.back()}) {
    for (double d : {d_lo, d_hi}) {
      const double nu = xi * std::cbrt(1.0 / d);
      lo = std::min(lo, nu);
      hi = std::max(hi, nu);
    }
  }
  const double slack = std::max(0.1 * (hi - lo), 0.1);
  return {std::floor(2.0 * (lo - slack)) / 2.0, std::ceil(2.0 * (hi + slack)) / 2.0};
}

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.size() < 2) throw PreconditionError(std::string("symbol grid: ") + name + " needs >= 2 nodes");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw PreconditionError(std::string("symbol grid: ") + name + " must be strictly increasing");
    }
  }
}

/// I u = u/2 + t u' with central differences (one-sided at the ends).
std::vector<double> dilation(const MontgomeryGrid& g, const std::vector<double>& u) {
  const int n = g.points;
  const double dt = g.spacing();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double du;
    if (i == 0) du = (u[1] - u[0]) / dt;
    else if (i == n - 1) du = (u[n - 1] - u[n - 2]) / dt;
    else du = (u[i + 1] - u[i - 1]) / (2 * dt);
    out[i] = 0.5 * u[i] + g.node(i) * du;
  }
  return out;
}

/// Im of the trapezoid inner product <a, b>, accumulated in complex arithmetic.
double im_inner(const MontgomeryGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
  std::complex<double> sum = 0.0;
  for (int i = 0; i < g.points; ++i) {
    const double w = (i == 0 || i == g.points - 1) ? 0.5 : 1.0;
    sum += w * std::conj(std::complex<double>(a[i])) * std::complex<double>(b[i]);
  }
  return (sum * g.spacing()).imag();
}

struct LocalGeometry {
  double delta, delta_prime, curvature, kappa;
};

LocalGeometry local_geometry(const geometry::ModelCatalogEntry& model,
                             const geometry::GaugeData& gauge, double x) {
  return {model.field.delta(x), model.field.delta_prime(x), model.geometry.curvature(x),
          gauge.kappa(x)};
}

SubprincipalTerms combine(const LocalGeometry& g, double xi, const MontgomeryMoments& m,
                          double principal) {
  SubprincipalTerms out;
  const double c = std::cbrt(g.delta);
  const double nu_x = -xi * g.delta_prime / (3.0 * g.delta * c);
  const double dil = g.delta_prime / (3.0 * g.delta);
  out.curvature_term = 2.0 * g.curvature * c * m.curvature_moment;
  out.kappa_term = -2.0 * g.kappa / (c * c) * m.kappa_moment;
  out.im_bracket = 2.0 * c * (dil * m.im_p_dilation + nu_x * m.im_p_dnu) +
                   g.delta_prime / (c * c) * m.im_t2p_dnu;
  out.im_cross = (dil * m.im_dilation_dnu + nu_x * m.im_dnu_dnu) / c;
  out.principal = principal;
  return out;
}

/// Moments on a uniform nu table with one cubic spline per field. Where band k
/// meets band k+1 numerically (double-well tunnelling at large nu) the table
/// stops and evaluation clamps to its last node.
struct MomentTable {
  static constexpr int kFields = 7;
  std::vector<cardinal_cubic_b_spline<double>> splines;
  double lo, hi;
  bool clamped = false;

  MomentTable(int band, double nu_lo, double nu_hi, double step) : lo(nu_lo), hi(nu_hi) {
    const int n = static_cast<int>(std::lround((nu_hi - nu_lo) / step));
    const double h = (nu_hi - nu_lo) / n;
    std::vector<std::vector<double>> columns(kFields);
    for (int i = 0; i <= n; ++i) {
      MontgomeryMoments m;
      try {
        m = montgomery_moments(band, nu_lo + i * h);
      } catch (const DegeneracyError&) {
        if (i < 4) throw;
        hi = nu_lo + (i - 1) * h;
        clamped = true;
        break;
      }
      const double row[kFields] = {m.curvature_moment, m.kappa_moment, m.im_p_dilation,
                                   m.im_p_dnu,         m.im_t2p_dnu,   m.im_dilation_dnu,
                                   m.im_dnu_dnu};
      for (int f = 0; f < kFields; ++f) columns[f].push_back(row[f]);
    }
    for (auto& col : columns) splines.emplace_back(col.begin(), col.end(), nu_lo, h);
  }

  MontgomeryMoments at(double nu) const {
    if (nu < lo - 1e-12 || (!clamped && nu > hi + 1e-12)) {
      throw RangeError("moment table covers nu in [" + fmt(lo) + ", " + fmt(hi) + "]; nu = " +
                       fmt(nu) + " requested");
    }
    nu = std::min(std::max(nu, lo), hi);
    MontgomeryMoments m;
    m.nu = nu;
    m.curvature_moment = splines[0](nu);
    m.kappa_moment = splines[1](nu);
    m.im_p_dilation = splines[2](nu);
    m.im_p_dnu = splines[3](nu);
    m.im_t2p_dnu = splines[4](nu);
    m.im_dilation_dnu = splines[5](nu);
    m.im_dnu_dnu = splines[6](nu);
    return m;
  }
};

std::shared_ptr<const MomentTable> moment_table(int band, double lo, double hi) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const MomentTable>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{band, lo, hi}];
  if (!slot) slot = std::make_shared<const MomentTable>(band, lo, hi, 0.1);
  return slot;
}

double fd2(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

}  // namespace

// ---------------------------------------------------------------------------

struct DispersiveInterpolant::Impl {
  cardinal_cubic_b_spline<double> spline;
};

DispersiveInterpolant::DispersiveInterpolant(int band, double nu_lo, double nu_hi, double tolerance,
                                             const MontgomeryGrid& grid)
    : band_(band), lo_(nu_lo), hi_(nu_hi) {
  if (band < 1) throw PreconditionError("DispersiveInterpolant: band must be >= 1");
  if (!(nu_hi > nu_lo)) throw PreconditionError("DispersiveInterpolant: empty nu range");
  if (!(tolerance > 0.0)) throw PreconditionError("DispersiveInterpolant: tolerance must be positive");
  int n = std::max(4, static_cast<int>(std::ceil((nu_hi - nu_lo) / 0.05)));
  double h = (nu_hi - nu_lo) / n;
  std::vector<double> values(n + 1);
  for (int i = 0; i <= n; ++i) values[i] = montgomery::montgomery_eigenvalue(nu_lo + i * h, band, grid);
  const double d_lo = montgomery::dispersive_derivative(nu_lo, band, grid);
  const double d_hi = montgomery::dispersive_derivative(nu_hi, band, grid);
  auto build = [&](const std::vector<double>& v, double step) {
    return cardinal_cubic_b_spline<double>(v.begin(), v.end(), nu_lo, step, d_lo, d_hi);
  };
  auto spline = build(values, h);
  for (int level = 0;; ++level) {
    if (level == kMaxHalvings) {
      throw NumericalError("DispersiveInterpolant: midpoint shift " + fmt(shift_) +
                           " still above tolerance " + fmt(tolerance) + " after " +
                           std::to_string(kMaxHalvings) + " halvings");
    }
    std::vector<double> finer(2 * n + 1);
    double shift = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mid = nu_lo + (i + 0.5) * h;
      const double exact = montgomery::montgomery_eigenvalue(mid, band, grid);
      shift = std::max(shift, std::abs(spline(mid) - exact));
      finer[2 * i] = values[i];
      finer[2 * i + 1] = exact;
    }
    finer[2 * n] = values[n];
    values = std::move(finer);
    n *= 2;
    h /= 2;
    spline = build(values, h);
    shift_ = shift;
    if (shift < tolerance) break;
  }
  step_ = h;
  samples_ = n + 1;
  impl_ = std::make_unique<Impl>(Impl{std::move(spline)});
}

DispersiveInterpolant::~DispersiveInterpolant() = default;
DispersiveInterpolant::DispersiveInterpolant(DispersiveInterpolant&&) noexcept = default;
DispersiveInterpolant& DispersiveInterpolant::operator=(DispersiveInterpolant&&) noexcept = default;

void DispersiveInterpolant::check(double nu) const {
  if (!(nu >= lo_ - 1e-12 && nu <= hi_ + 1e-12)) {
    throw RangeError("dispersive curve of band " + std::to_string(band_) + " is tabulated on [" +
                     fmt(lo_) + ", " + fmt(hi_) + "]; extend the table to include nu = " + fmt(nu));
  }
}

double DispersiveInterpolant::operator()(double nu) const {
  check(nu);
  return impl_->spline(std::clamp(nu, lo_, hi_));
}

double DispersiveInterpolant::derivative(double nu) const {
  check(nu);
  return impl_->spline.prime(std::clamp(nu, lo_, hi_));
}

double DispersiveInterpolant::second_derivative(double nu) const {
  check(nu);
  return impl_->spline.double_prime(std::clamp(nu, lo_, hi_));
}

std::shared_ptr<const DispersiveInterpolant> dispersive_interpolant(int band, double nu_lo,
                                                                    double nu_hi) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const DispersiveInterpolant>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{band, nu_lo, nu_hi}];
  if (!slot) slot = std::make_shared<const DispersiveInterpolant>(band, nu_lo, nu_hi);
  return slot;
}

// ---------------------------------------------------------------------------

MontgomeryMoments montgomery_moments(int band, double nu) {
  const auto pair = montgomery::montgomery_spectrum(nu, band).back();
  const auto& g = pair.grid;
  const auto& u = pair.function;
  const auto du = montgomery::eigenpair_nu_derivative(band, nu, 1e-4, g);
  const auto iu = dilation(g, u);

  MontgomeryMoments m;
  m.nu = nu;
  m.curvature_moment = montgomery::eigenfunction_moment(pair, {0.0, nu * nu, 0.0, -nu, 0.0, 0.25});
  m.kappa_moment = montgomery::eigenfunction_moment(pair, {0.0, 0.0, 0.0, nu, 0.0, -0.5});

  std::vector<double> p_iu(g.points), p_du(g.points), t2p_du(g.points);
  for (int i = 0; i < g.points; ++i) {
    const double t = g.node(i);
    const double p = nu - 0.5 * t * t;
    p_iu[i] = p * iu[i];
    p_du[i] = p * du[i];
    t2p_du[i] = t * t * p * du[i];
  }
  m.im_p_dilation = im_inner(g, u, p_iu);
  m.im_p_dnu = im_inner(g, u, p_du);
  m.im_t2p_dnu = im_inner(g, u, t2p_du);
  m.im_dilation_dnu = im_inner(g, iu, du);
  m.im_dnu_dnu = im_inner(g, du, du);
  return m;
}

SubprincipalTerms subprincipal_terms(const geometry::ModelCatalogEntry& model, int band, double x,
                                     double xi) {
  const auto gauge = geometry::tubular_gauge(model.field, model.geometry);
  const auto g = local_geometry(model, gauge, x);
  if (!(g.delta > 0.0)) throw PreconditionError("subprincipal_terms: delta must be positive");
  const double nu = xi / std::cbrt(g.delta);
  const double principal =
      std::pow(g.delta, 2.0 / 3.0) * montgomery::montgomery_eigenvalue(nu, band);
  return combine(g, xi, montgomery_moments(band, nu), principal);
}

// ---------------------------------------------------------------------------

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 2) throw PreconditionError("linspace: count must be >= 2");
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  out.back() = hi;
  return out;
}

double lattice_xi_extent(double x_min, double x_max, double hbar, int modes, double padding) {
  const double period_half = 0.5 * (x_max - x_min) * (1.0 + padding);
  return hbar * M_PI * modes / (2.0 * period_half);
}

EffectiveSymbolGrid effective_principal(const geometry::ModelCatalogEntry& model, int band,
                                        std::vector<double> x_grid, std::vector<double> xi_grid) {
  check_axis(x_grid, "x_grid");
  check_axis(xi_grid, "xi_grid");
  const auto [lo, hi] = nu_range(model, x_grid, xi_grid);
  const auto curve = dispersive_interpolant(band, lo, hi);
  const auto delta = model.field.delta;

  EffectiveSymbolGrid out;
  out.band = band;
  out.x_grid = std::move(x_grid);
  out.xi_grid = std::move(xi_grid);
  out.truncation_note =
      "identity truncation: xi and delta are used unmodified on the window x in [" +
      fmt(out.x_grid.front()) + ", " + fmt(out.x_grid.back()) + "], xi in [" +
      fmt(out.xi_grid.front()) + ", " + fmt(out.xi_grid.back()) + "]; dispersive table nu in [" +
      fmt(lo) + ", " + fmt(hi) + "] with spacing " + fmt(curve->spacing());
  out.principal_fn = [curve, delta](double x, double xi) {
    const double d = delta(x);
    return std::pow(d, 2.0 / 3.0) * (*curve)(xi / std::cbrt(d));
  };
  const int nx = static_cast<int>(out.x_grid.size());
  const int nxi = static_cast<int>(out.xi_grid.size());
  out.principal.resize(nx, nxi);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) out.principal(i, j) = out.principal_fn(out.x_grid[i], out.xi_grid[j]);
  }
  if (!(out.principal.minCoeff() > 0.0)) {
    throw NumericalError("effective_principal: non-positive symbol value " +
                         fmt(out.principal.minCoeff()));
  }
  return out;
}

EffectiveSymbolGrid effective_subprincipal(const geometry::ModelCatalogEntry& model,
                                           EffectiveSymbolGrid grid) {
  if (grid.principal.size() == 0 || !grid.principal_fn) {
    throw PreconditionError("effective_subprincipal: principal symbol not filled");
  }
  const auto [lo, hi] = nu_range(model, grid.x_grid, grid.xi_grid);
  const auto table = moment_table(grid.band, lo, hi);
  const auto gauge = std::make_shared<const geometry::GaugeData>(
      geometry::tubular_gauge(model.field, model.geometry));
  const auto principal = grid.principal_fn;
  const auto terms = [model, gauge, table, principal](double x, double xi) {
    const auto g = local_geometry(model, *gauge, x);
    return combine(g, xi, table->at(xi / std::cbrt(g.delta)), principal(x, xi));
  };
  grid.subprincipal_fn = [terms](double x, double xi) { return terms(x, xi).value(); };
  const int nx = static_cast<int>(grid.x_grid.size());
  const int nxi = static_cast<int>(grid.xi_grid.size());
  grid.subprincipal.resize(nx, nxi);
  grid.im_bracket.resize(nx, nxi);
  grid.im_cross.resize(nx, nxi);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) {
      const auto t = terms(grid.x_grid[i], grid.xi_grid[j]);
      grid.subprincipal(i, j) = t.value();
      grid.im_bracket(i, j) = t.im_bracket;
      grid.im_cross(i, j) = t.im_cross;
    }
  }
  grid.truncation_note += "; n1 cutoff dropped (moments use the full Montgomery grid)";
  if (table->clamped) {
    grid.truncation_note += "; subprincipal moments held constant for nu > " + fmt(table->hi) +
                            " where bands " + std::to_string(grid.band) + " and " +
                            std::to_string(grid.band + 1) + " are numerically degenerate";
  }
  return grid;
}

EffectiveSymbolGrid symbol_from_function(Symbol principal, std::vector<double> x_grid,
                                         std::vector<double> xi_grid, Symbol subprincipal) {
  check_axis(x_grid, "x_grid");
  check_axis(xi_grid, "xi_grid");
  if (!principal) throw PreconditionError("symbol_from_function: empty principal symbol");
  EffectiveSymbolGrid out;
  out.x_grid = std::move(x_grid);
  out.xi_grid = std::move(xi_grid);
  out.principal_fn = std::move(principal);
  out.subprincipal_fn = std::move(subprincipal);
  out.truncation_note = "analytic symbol";
  const int nx = static_cast<int>(out.x_grid.size());
  const int nxi = static_cast<int>(out.xi_grid.size());
  out.principal.resize(nx, nxi);
  if (out.subprincipal_fn) out.subprincipal.resize(nx, nxi);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nxi; ++j) {
      out.principal(i, j) = out.principal_fn(out.x_grid[i], out.xi_grid[j]);
      if (out.subprincipal_fn) out.subprincipal(i, j) = out.subprincipal_fn(out.x_grid[i], out.xi_grid[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double HarmonicPrediction::predicted(double c1, double hbar, int n) const {
  return std::pow(delta_c, 2.0 / 3.0) * (mu_c + hbar * (L_expectation + (2 * n + 1) * c1));
}

HarmonicPrediction harmonic_prediction(const geometry::ModelCatalogEntry& model,
                                       const montgomery::CriticalPointData& critical,
                                       const std::vector<double>& h_list, int levels) {
  const auto report = geometry::validate_assumptions(model);
  const auto& well = report.check("unique_well");
  if (well.status != geometry::CheckStatus::pass) {
    throw PreconditionError("harmonic_prediction: delta has no unique nondegenerate well");
  }
  const auto delta = model.field.delta;
  // Golden section on delta around the sampled argmin.
  const double spacing = 12.0 / 2000.0;
  double a = well.constants.at("x_c") - spacing, b = well.constants.at("x_c") + spacing;
  const double r = (std::sqrt(5.0) - 1) / 2;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = delta(c), fd = delta(d);
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d; d = c; fd = fc; c = b - r * (b - a); fc = delta(c);
    } else {
      a = c; c = d; fc = fd; d = a + r * (b - a); fd = delta(d);
    }
  }
  HarmonicPrediction out;
  out.x_c = 0.5 * (a + b);
  // Golden section only resolves a flat minimum to ~sqrt(eps); polish on delta'.
  for (int it = 0; it < 3; ++it) {
    const double curvature = fd2(delta, out.x_c, 1e-3);
    if (!(curvature > 0.0)) break;
    out.x_c -= model.field.delta_prime(out.x_c) / curvature;
  }
  out.delta_c = delta(out.x_c);
  out.delta_second = fd2(delta, out.x_c, 1e-3);
  out.alpha = out.delta_second / (2 * out.delta_c);
  out.mu_c = critical.mu_c;
  out.nu_c = critical.nu_c;
  out.curvature = critical.curvature;
  out.xi_c = critical.nu_c * std::cbrt(out.delta_c);

  const int band = critical.band;
  const auto& mgrid = critical.grid;
  auto symbol = [&](double x, double xi) {
    const double dx = delta(x);
    return std::pow(dx, 2.0 / 3.0) * montgomery::montgomery_eigenvalue(xi / std::cbrt(dx), band, mgrid);
  };
  const double step = 1e-3;
  out.hxx = fd2([&](double x) { return symbol(x, out.xi_c); }, out.x_c, step);
  out.hxixi = fd2([&](double xi) { return symbol(out.x_c, xi); }, out.xi_c, step);
  out.hxxi = (symbol(out.x_c + step, out.xi_c + step) - symbol(out.x_c + step, out.xi_c - step) -
              symbol(out.x_c - step, out.xi_c + step) + symbol(out.x_c - step, out.xi_c - step)) /
             (4 * step * step);
  if (!(out.hxx > 0.0 && out.hxixi > 0.0 && out.hxx * out.hxixi - out.hxxi * out.hxxi > 0.0)) {
    throw PreconditionError("harmonic_prediction: Hessian at the well bottom is not positive definite "
                            "(Hxx = " + fmt(out.hxx) + ", Hxixi = " + fmt(out.hxixi) +
                            ", Hxxi = " + fmt(out.hxxi) + ")");
  }
  if (!(out.alpha > 0.0)) throw PreconditionError("harmonic_prediction: alpha must be positive");
  out.c1_closed_form = std::sqrt(out.alpha * out.mu_c * out.curvature / 2.0);
  out.c1_hessian = 0.5 * std::sqrt(out.hxx * out.hxixi) / std::pow(out.delta_c, 2.0 / 3.0);

  const auto gauge = geometry::tubular_gauge(model.field, model.geometry);
  const double nu = out.nu_c;
  const double dc13 = std::cbrt(out.delta_c);
  const double kappa = gauge.kappa(out.x_c);
  const double k = model.geometry.curvature(out.x_c);
  const auto pair = montgomery::montgomery_spectrum(nu, band, mgrid).back();
  // 2 delta_c^(-4/3) kappa (t^2/2 - nu) t^3 + 2 delta_c^(-1/3) k (nu - t^2/2)^2 t
  const double kappa_part = montgomery::eigenfunction_moment(pair, {0.0, 0.0, 0.0, -nu, 0.0, 0.5});
  const double curv_part = montgomery::eigenfunction_moment(pair, {0.0, nu * nu, 0.0, -nu, 0.0, 0.25});
  out.L_expectation = 2.0 * kappa / (out.delta_c * dc13) * kappa_part + 2.0 * k / dc13 * curv_part;

  for (double h : h_list) {
    if (!(h > 0.0)) throw PreconditionError("harmonic_prediction: h must be positive");
    const double hbar = std::cbrt(h);
    auto& closed_form = out.lambda_closed_form[h];
    auto& hess = out.lambda_hessian[h];
    for (int n = 0; n < levels; ++n) {
      closed_form.push_back(out.predicted(out.c1_closed_form, hbar, n));
      hess.push_back(out.predicted(out.c1_hessian, hbar, n));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const EffectiveSymbolGrid& grid) {
  nlohmann::json doc = {{"schema", "maglab.effective_symbol"},
                        {"version", 1},
                        {"band", grid.band},
                        {"x_grid", grid.x_grid},
                        {"xi_grid", grid.xi_grid},
                        {"principal", matrix_json(grid.principal)},
                        {"truncation_note", grid.truncation_note}};
  if (grid.subprincipal.size() > 0) {
    doc["subprincipal"] = matrix_json(grid.subprincipal);
    if (grid.im_bracket.size() > 0) {
      doc["im_bracket_max"] = grid.im_bracket.cwiseAbs().maxCoeff();
      doc["im_cross_max"] = grid.im_cross.cwiseAbs().maxCoeff();
    }
  }
  return doc;
}

nlohmann::json to_json(const HarmonicPrediction& p) {
  nlohmann::json closed_form = nlohmann::json::object(), hess = nlohmann::json::object();
  for (const auto& [h, v] : p.lambda_closed_form) closed_form[fmt(h)] = v;
  for (const auto& [h, v] : p.lambda_hessian) hess[fmt(h)] = v;
  return {{"schema", "maglab.harmonic_prediction"},
          {"version", 1},
          {"x_c", p.x_c},
          {"xi_c", p.xi_c},
          {"delta_c", p.delta_c},
          {"delta_second", p.delta_second},
          {"alpha", p.alpha},
          {"mu_c", p.mu_c},
          {"nu_c", p.nu_c},
          {"curvature", p.curvature},
          {"hessian", {{"xx", p.hxx}, {"xixi", p.hxixi}, {"xxi", p.hxxi}}},
          {"c1_closed_form", p.c1_closed_form},
          {"c1_hessian", p.c1_hessian},
          {"c1_ratio", p.c1_closed_form / p.c1_hessian},
          {"L_expectation", p.L_expectation},
          {"lambda_closed_form", closed_form},
          {"lambda_hessian", hess}};
}

std::string lambda_table_csv(const HarmonicPrediction& p) {
  std::ostringstream out;
  out << "h,n,lambda_closed_form,lambda_hessian\n";
  char buf[128];
  for (auto it = p.lambda_closed_form.rbegin(); it != p.lambda_closed_form.rend(); ++it) {
    const auto& hess = p.lambda_hessian.at(it->first);
    for (std::size_t n = 0; n < it->second.size(); ++n) {
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", it->first, n, it->second[n], hess[n]);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace maglab::effective
