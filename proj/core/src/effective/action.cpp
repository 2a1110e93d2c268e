#include <algorithm>
#include <cmath>
#include <cstdio>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/roots.hpp>

#include "maglab/effective/effective.hpp"
#include "maglab/errors.hpp"

namespace maglab::effective {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

constexpr int kRays = 512;
constexpr int kMarch = 400;

struct Center {
  double x, xi, value;
};

Center symbol_minimum(const EffectiveSymbolGrid& grid) {
  Eigen::Index i, j;
  const double v = grid.principal.minCoeff(&i, &j);
  return {grid.x_grid[i], grid.xi_grid[j], v};
}

/// Fraction of a triangle where the linear interpolant of (a, b, c) is <= 0.
double triangle_fraction(double a, double b, double c) {
  double v[3] = {a, b, c};
  std::sort(v, v + 3);
  if (v[2] <= 0.0) return 1.0;
  if (v[0] >= 0.0) return 0.0;
  if (v[1] >= 0.0) return v[0] * v[0] / ((v[0] - v[1]) * (v[0] - v[2]));
  return 1.0 - v[2] * v[2] / ((v[2] - v[0]) * (v[2] - v[1]));
}

double grid_area(const EffectiveSymbolGrid& grid, double energy) {
  const auto& p = grid.principal;
  double area = 0.0;
  for (Eigen::Index i = 0; i + 1 < p.rows(); ++i) {
    const double dx = grid.x_grid[i + 1] - grid.x_grid[i];
    for (Eigen::Index j = 0; j + 1 < p.cols(); ++j) {
      const double dxi = grid.xi_grid[j + 1] - grid.xi_grid[j];
      const double a = p(i, j) - energy, b = p(i + 1, j) - energy;
      const double c = p(i, j + 1) - energy, d = p(i + 1, j + 1) - energy;
      area += 0.5 * dx * dxi * (triangle_fraction(a, b, d) + triangle_fraction(a, c, d));
    }
  }
  return area;
}

}  // namespace

double sublevel_area(const EffectiveSymbolGrid& grid, double energy, double* period) {
  if (!grid.principal_fn) throw PreconditionError("sublevel_area: principal symbol not filled");
  const auto center = symbol_minimum(grid);
  if (energy <= center.value) {
    if (period) *period = 0.0;
    return 0.0;
  }
  const double sx = 0.5 * (grid.x_max() - grid.x_min());
  const double sxi = 0.5 * (grid.xi_grid.back() - grid.xi_grid.front());
  const auto& a = grid.principal_fn;

  std::vector<double> radius(kRays), px(kRays), pxi(kRays), grad(kRays);
  for (int q = 0; q < kRays; ++q) {
    const double phi = 2.0 * M_PI * q / kRays;
    const double cx = std::cos(phi) * sx, cxi = std::sin(phi) * sxi;
    // Largest r that keeps the ray inside the node grid.
    double r_max = INFINITY;
    if (cx > 0) r_max = std::min(r_max, (grid.x_max() - center.x) / cx);
    if (cx < 0) r_max = std::min(r_max, (grid.x_min() - center.x) / cx);
    if (cxi > 0) r_max = std::min(r_max, (grid.xi_grid.back() - center.xi) / cxi);
    if (cxi < 0) r_max = std::min(r_max, (grid.xi_grid.front() - center.xi) / cxi);
    auto f = [&](double r) { return a(center.x + r * cx, center.xi + r * cxi) - energy; };
    double lo = 0.0, hi = -1.0;
    for (int s = 1; s <= kMarch; ++s) {
      const double r = r_max * s / kMarch;
      if (f(r) > 0.0) {
        hi = r;
        break;
      }
      lo = r;
    }
    if (hi < 0.0) {
      throw RangeError("sublevel_area: level set {a = " + fmt(energy) +
                       "} reaches the symbol grid boundary in direction (" + fmt(cx) + ", " +
                       fmt(cxi) + ")");
    }
    boost::uintmax_t iterations = 100;
    const auto root = boost::math::tools::toms748_solve(
        f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iterations);
    const double r = 0.5 * (root.first + root.second);
    radius[q] = r;
    px[q] = center.x + r * cx;
    pxi[q] = center.xi + r * cxi;
    const double ex = 1e-6 * sx, exi = 1e-6 * sxi;
    const double gx = (a(px[q] + ex, pxi[q]) - a(px[q] - ex, pxi[q])) / (2 * ex);
    const double gxi = (a(px[q], pxi[q] + exi) - a(px[q], pxi[q] - exi)) / (2 * exi);
    grad[q] = std::hypot(gx, gxi);
    const double reach = std::hypot(px[q] - center.x, pxi[q] - center.xi);
    if (!(grad[q] * reach > 1e-3 * (energy - center.value))) {
      throw NumericalError("sublevel_area: regularity fails, the gradient nearly vanishes on {a = " +
                           fmt(energy) + "} at (x, xi) = (" + fmt(px[q]) + ", " + fmt(pxi[q]) + ")");
    }
  }

  double area = 0.0;
  for (double r : radius) area += r * r;
  area *= 0.5 * (2.0 * M_PI / kRays) * sx * sxi;

  if (period) {
    // Contour integral of dl / |grad a| with periodic 4th-order differences of r(phi).
    const double dphi = 2.0 * M_PI / kRays;
    double sum = 0.0;
    for (int q = 0; q < kRays; ++q) {
      auto at = [&](int k) { return radius[((q + k) % kRays + kRays) % kRays]; };
      const double dr = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * dphi);
      const double phi = dphi * q;
      const double dxdphi = sx * (dr * std::cos(phi) - radius[q] * std::sin(phi));
      const double dxidphi = sxi * (dr * std::sin(phi) + radius[q] * std::cos(phi));
      sum += std::hypot(dxdphi, dxidphi) / grad[q];
    }
    *period = sum * dphi;
  }
  return area;
}

ActionProfile action_profile(const EffectiveSymbolGrid& grid, std::pair<double, double> window,
                             int samples) {
  if (samples < 3) throw PreconditionError("action_profile: need at least 3 energy samples");
  const auto [e1, e2] = window;
  if (!(e2 > e1)) throw PreconditionError("action_profile: empty energy window");
  const auto center = symbol_minimum(grid);
  if (!(e1 > center.value)) {
    throw PreconditionError("action_profile: window starts at " + fmt(e1) +
                            ", not above the symbol minimum " + fmt(center.value));
  }
  ActionProfile out;
  out.band = grid.band;
  out.x_center = center.x;
  out.xi_center = center.xi;
  out.energy_grid = linspace(e1, e2, samples);
  for (double e : out.energy_grid) {
    double period = 0.0;
    out.J_values.push_back(sublevel_area(grid, e, &period));
    out.periods.push_back(period);
    out.J_grid_values.push_back(grid_area(grid, e));
  }
  out.monotone = true;
  for (int i = 1; i < samples; ++i) out.monotone = out.monotone && out.J_values[i] > out.J_values[i - 1];
  return out;
}

namespace {

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

/// Cubic spline of J on the uniform energy grid.
Spline interpolate(const ActionProfile& p) {
  if (p.energy_grid.size() < 3 || p.J_values.size() != p.energy_grid.size()) {
    throw PreconditionError("ActionProfile: need at least 3 samples of J");
  }
  const std::size_t n = p.J_values.size();
  const double step = (p.energy_grid.back() - p.energy_grid.front()) / (n - 1);
  // One-sided endpoint slopes (Boost's own estimate is unreliable at the right end).
  const auto& j = p.J_values;
  double left, right;
  if (n >= 5) {
    left = (-25 * j[0] + 48 * j[1] - 36 * j[2] + 16 * j[3] - 3 * j[4]) / (12 * step);
    right = (25 * j[n - 1] - 48 * j[n - 2] + 36 * j[n - 3] - 16 * j[n - 4] + 3 * j[n - 5]) / (12 * step);
  } else {
    left = (-3 * j[0] + 4 * j[1] - j[2]) / (2 * step);
    right = (3 * j[n - 1] - 4 * j[n - 2] + j[n - 3]) / (2 * step);
  }
  return Spline(j.begin(), j.end(), p.energy_grid.front(), step, left, right);
}

Spline interpolate(const ActionProfile& p, double e) {
  if (!(e >= p.energy_grid.front() && e <= p.energy_grid.back())) {
    throw RangeError("ActionProfile: energy " + fmt(e) + " outside [" + fmt(p.energy_grid.front()) +
                     ", " + fmt(p.energy_grid.back()) + "]");
  }
  return interpolate(p);
}

}  // namespace

double ActionProfile::J(double energy) const { return interpolate(*this, energy)(energy); }

double ActionProfile::dJ(double energy) const { return interpolate(*this, energy).prime(energy); }

SpectrumResult bohr_sommerfeld_spectrum(const ActionProfile& profile, double hbar, double h) {
  if (!profile.monotone) throw PreconditionError("bohr_sommerfeld_spectrum: action is not monotone");
  if (!(hbar > 0.0)) throw PreconditionError("bohr_sommerfeld_spectrum: hbar must be positive");
  SpectrumResult out;
  out.source = "bohr_sommerfeld";
  out.h = h;
  out.band = profile.band;
  out.tolerance = 1e-13;
  const double e1 = profile.energy_grid.front(), e2 = profile.energy_grid.back();
  const auto spline = interpolate(profile);
  const double quantum = 2.0 * M_PI * hbar;
  const double j1 = profile.J_values.front(), j2 = profile.J_values.back();
  const int first = std::max(0, static_cast<int>(std::ceil(j1 / quantum - 0.5)));
  for (int n = first; quantum * (n + 0.5) <= j2; ++n) {
    const double target = quantum * (n + 0.5);
    double lo = e1, hi = e2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (spline(mid) < target ? lo : hi) = mid;
    }
    const double e = 0.5 * (lo + hi);
    out.eigenvalues.push_back(e);
    out.indices.push_back(n);
    out.residuals.push_back(std::abs(spline(e) - target));
  }
  return out;
}

nlohmann::json to_json(const ActionProfile& p) {
  return {{"schema", "maglab.action_profile"},
          {"version", 1},
          {"band", p.band},
          {"x_center", p.x_center},
          {"xi_center", p.xi_center},
          {"energy_grid", p.energy_grid},
          {"J_values", p.J_values},
          {"J_grid_values", p.J_grid_values},
          {"periods", p.periods},
          {"monotone", p.monotone}};
}

}  // namespace maglab::effective
