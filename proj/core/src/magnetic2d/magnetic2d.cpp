#include "maglab/magnetic2d/magnetic2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/SparseCore>

#include "maglab/errors.hpp"
#include "maglab/montgomery/montgomery.hpp"

namespace maglab::magnetic2d {
namespace {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Everything that differs between the dilated and the physical assembly.
struct Scaling {
  double q;             // semiclassical constant in front of D_x (hbar or h)
  double transverse;    // coefficient of D_t^2 on the chosen t grid (1 or h^2)
  double t_scale;       // physical t per grid t (hbar or 1)
  double gauge_scale;   // potential = gauge_scale * A(x, t_scale * t_grid)
  double t_spacing;     // grid spacing in t
};

MagneticOperator2D assemble(const geometry::ModelCatalogEntry& model,
                            const TubeDiscretization& disc, Variant variant,
                            TangentialScheme scheme, const Scaling& s) {
  const int nx = disc.x_points;
  const int nt = disc.t_points;
  const double dx = disc.dx();
  const bool curved = variant == Variant::curved;
  const auto& geo = model.geometry;
  const auto gauge =
      geometry::tubular_gauge(model.field, geo, {disc.x_center - 1.0, disc.x_center + 1.0, 3, 3});

  auto x_at = [&](double offset) { return disc.x_center - disc.x_half_width + offset * dx; };
  auto m_at = [&](double x, double t_phys) { return curved ? 1.0 - t_phys * geo.curvature(x) : 1.0; };

  MagneticOperator2D op;
  op.discretization = disc;
  op.model = model;
  op.variant = variant;
  op.scheme = scheme;
  op.matrix = linalg::SparseComplexHermitianMatrix(disc.dimension());
  op.matrix.reserve(disc.dimension() * 5);

  const cplx minus_i_q(0.0, -s.q);  // (q / i)
  std::vector<Eigen::Triplet<cplx>> entries;
  double defect = 0.0;

  for (int j = 0; j < nt; ++j) {
    const double t_phys = s.t_scale * disc.t_node(j);
    auto potential = [&](double x) { return s.gauge_scale * gauge.potential(x, t_phys); };

    // node weights g = m^(-1/2)
    SpMat g(nx, nx);
    entries.clear();
    for (int i = 0; i < nx; ++i) {
      entries.emplace_back(i, i, 1.0 / std::sqrt(m_at(x_at(i + 1), t_phys)));
    }
    g.setFromTriplets(entries.begin(), entries.end());

    SpMat factor;
    SpMat w;
    if (scheme == TangentialScheme::peierls) {
      // link l joins nodes l-1 and l (positions l and l+1 in units of dx from the left wall)
      factor.resize(nx + 1, nx);
      w.resize(nx + 1, nx + 1);
      entries.clear();
      std::vector<Eigen::Triplet<cplx>> w_entries;
      double a_left = potential(x_at(0));
      for (int l = 0; l <= nx; ++l) {
        const double a_mid = potential(x_at(l + 0.5));
        const double a_right = potential(x_at(l + 1));
        const double theta = dx / (6.0 * s.q) * (a_left + 4.0 * a_mid + a_right);
        a_left = a_right;
        if (l < nx) entries.emplace_back(l, l, minus_i_q * std::polar(1.0, -theta) / dx);
        if (l >= 1) entries.emplace_back(l, l - 1, -minus_i_q / dx);
        w_entries.emplace_back(l, l, 1.0 / m_at(x_at(l + 0.5), t_phys));
      }
      factor.setFromTriplets(entries.begin(), entries.end());
      w.setFromTriplets(w_entries.begin(), w_entries.end());
    } else {
      factor.resize(nx, nx);
      w.resize(nx, nx);
      entries.clear();
      std::vector<Eigen::Triplet<cplx>> w_entries;
      for (int i = 0; i < nx; ++i) {
        const double x = x_at(i + 1);
        entries.emplace_back(i, i, -potential(x));
        if (i + 1 < nx) entries.emplace_back(i, i + 1, minus_i_q / (2.0 * dx));
        if (i >= 1) entries.emplace_back(i, i - 1, -minus_i_q / (2.0 * dx));
        w_entries.emplace_back(i, i, 1.0 / m_at(x, t_phys));
      }
      factor.setFromTriplets(entries.begin(), entries.end());
      w.setFromTriplets(w_entries.begin(), w_entries.end());
    }

    const SpMat fg = factor * g;
    const SpMat line = SpMat(fg.adjoint()) * w * fg;
    const SpMat line_adj = line.adjoint();
    const SpMat sym = 0.5 * (line + line_adj);
    defect = std::max(defect, SpMat(line - line_adj).coeffs().cwiseAbs().maxCoeff());

    for (int col = 0; col < sym.outerSize(); ++col) {
      for (SpMat::InnerIterator it(sym, col); it; ++it) {
        if (it.row() > it.col()) continue;
        op.matrix.add(static_cast<std::size_t>(it.row()) * nt + j,
                      static_cast<std::size_t>(it.col()) * nt + j, it.value());
      }
    }

    for (int i = 0; i < nx; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * nt + j;
      double diag = 2.0 * s.transverse / (s.t_spacing * s.t_spacing);
      if (curved) {
        const double x = x_at(i + 1);
        const double k = geo.curvature(x);
        const double m = m_at(x, t_phys);
        diag -= s.q * s.q * k * k / (4.0 * m * m);
      }
      op.matrix.add(row, row, diag);
      if (j + 1 < nt) op.matrix.add(row, row + 1, -s.transverse / (s.t_spacing * s.t_spacing));
    }
  }
  op.matrix.finalize();
  op.symmetry_defect = defect;

  if (curved && geo.curvature_bound > 0.0) {
    const double k = geo.curvature_bound;
    const double m_min = 1.0 - s.t_scale * disc.t_half_width * k;
    op.lower_bound = -s.q * s.q * k * k / (4.0 * m_min * m_min);
  }
  return op;
}

void validate_for(const geometry::ModelCatalogEntry& model, const TubeDiscretization& disc) {
  disc.validate(model, disc.energy_top ? montgomery::ground_band_critical_point().mu_c : 0.0);
}

}  // namespace

double TubeDiscretization::hbar() const { return std::cbrt(h); }

void TubeDiscretization::validate(const geometry::ModelCatalogEntry& model, double mu_c) const {
  if (!(h > 0.0) || !std::isfinite(h)) throw PreconditionError("discretization: h must be positive");
  if (x_points < 3 || t_points < 3) throw PreconditionError("discretization: need at least 3 points per axis");
  if (!(x_half_width > 0.0) || !(t_half_width > 0.0)) {
    throw PreconditionError("discretization: window half widths must be positive");
  }
  if (!(hbar() * t_half_width < model.geometry.d0)) {
    throw PreconditionError("discretization: hbar * T = " + fmt(hbar() * t_half_width) +
                            " leaves the tube of radius d0 = " + fmt(model.geometry.d0));
  }
  if (energy_top) {
    for (double x : {x_center - x_half_width, x_center + x_half_width}) {
      const double wall = std::cbrt(std::pow(model.field.delta(x), 2.0)) * mu_c;
      if (!(wall >= 1.2 * *energy_top)) {
        throw PreconditionError("discretization: delta(" + fmt(x) + ")^(2/3) mu_c = " + fmt(wall) +
                                " does not exceed 1.2 * energy_top = " + fmt(1.2 * *energy_top) +
                                "; widen the x window");
      }
    }
  }
}

MagneticOperator2D assemble_2d(const geometry::ModelCatalogEntry& model,
                               const TubeDiscretization& disc, Variant variant,
                               TangentialScheme scheme) {
  validate_for(model, disc);
  const double hb = disc.hbar();
  return assemble(model, disc, variant, scheme, {hb, 1.0, hb, 1.0 / (hb * hb), disc.dt()});
}

MagneticOperator2D assemble_2d_physical(const geometry::ModelCatalogEntry& model,
                                        const TubeDiscretization& disc, Variant variant) {
  validate_for(model, disc);
  const double hb = disc.hbar();
  auto op = assemble(model, disc, variant, TangentialScheme::peierls,
                     {disc.h, disc.h * disc.h, hb, 1.0, hb * disc.dt()});
  op.eigenvalue_scale = std::pow(disc.h, 4.0 / 3.0);
  return op;
}

SpectrumResult solve_2d(const MagneticOperator2D& op, int count, double tol,
                        const Solve2DOptions& options) {
  if (count < 1) throw PreconditionError("solve_2d: count must be >= 1");
  auto solver = options.solver;
  solver.want_vectors = true;
  solver.lower_bound = op.lower_bound;
  auto report = linalg::sparse_eigensolve_smallest(op.matrix, count, tol, options.preconditioner, solver);
  SpectrumResult out;
  out.source = "magnetic2d";
  out.h = op.discretization.h;
  out.tolerance = tol / op.eigenvalue_scale;
  out.iterations = report.iterations;
  for (int n = 0; n < count; ++n) {
    out.eigenvalues.push_back(report.eigenvalues[n] / op.eigenvalue_scale);
    out.residuals.push_back(report.residual_norms[n] / op.eigenvalue_scale);
    out.indices.push_back(n);
  }
  out.eigenvectors = std::move(report.eigenvectors);
  return out;
}

std::vector<LocalizationReport> localization_diagnostics(const MagneticOperator2D& op,
                                                         const SpectrumResult& spectrum,
                                                         double energy_cut, double mu_c) {
  if (!spectrum.eigenvectors) {
    throw PreconditionError("localization_diagnostics: spectrum carries no eigenvectors");
  }
  const auto& disc = op.discretization;
  const auto& vectors = *spectrum.eigenvectors;
  if (static_cast<std::size_t>(vectors.rows()) != disc.dimension()) {
    throw PreconditionError("localization_diagnostics: eigenvectors do not match the grid");
  }
  const int nx = disc.x_points;
  const int nt = disc.t_points;
  std::vector<bool> outside(nx);
  for (int i = 0; i < nx; ++i) {
    const double d = op.model.field.delta(disc.x_node(i));
    outside[i] = std::cbrt(d * d) * mu_c > energy_cut;
  }

  std::vector<LocalizationReport> reports;
  for (std::size_t n = 0; n < spectrum.eigenvalues.size(); ++n) {
    if (!(spectrum.eigenvalues[n] < energy_cut)) continue;
    LocalizationReport r;
    r.index = spectrum.indices.empty() ? static_cast<int>(n) : spectrum.indices[n];
    r.energy = spectrum.eigenvalues[n];
    std::vector<double> rho(nt, 0.0);
    double total = 0.0;
    double out_mass = 0.0;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nt; ++j) {
        const double p = std::norm(vectors(static_cast<Eigen::Index>(i) * nt + j,
                                           static_cast<Eigen::Index>(n)));
        rho[j] += p;
        total += p;
        if (outside[i]) out_mass += p;
      }
    }
    for (double& v : rho) v = std::sqrt(v);
    const double peak = *std::max_element(rho.begin(), rho.end());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int j = 0; j < nt; ++j) {
      if (rho[j] >= 1e-10 * peak && rho[j] <= 1e-2 * peak) {
        const double x = std::abs(disc.t_node(j));
        const double y = std::log(rho[j]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
      }
    }
    const double denom = count * sxx - sx * sx;
    if (count < 3 || !(denom > 0.0)) {
      throw NumericalError("localization_diagnostics: transverse fit region for eigenpair " +
                           std::to_string(r.index) + " has " + std::to_string(count) +
                           " points (under-resolved)");
    }
    r.fit_points = count;
    r.transverse_decay_rate = -(count * sxy - sx * sy) / denom;
    r.tangential_mass_outside = out_mass / total;
    reports.push_back(r);
  }
  return reports;
}

nlohmann::json to_json(const TubeDiscretization& d) {
  nlohmann::json j = {{"x_half_width", d.x_half_width}, {"x_center", d.x_center},
                      {"x_points", d.x_points},         {"t_half_width", d.t_half_width},
                      {"t_points", d.t_points},         {"h", d.h},
                      {"hbar", d.hbar()}};
  j["energy_top"] = d.energy_top ? nlohmann::json(*d.energy_top) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const LocalizationReport& r) {
  return {{"index", r.index},
          {"energy", r.energy},
          {"transverse_decay_rate", r.transverse_decay_rate},
          {"fit_points", r.fit_points},
          {"tangential_mass_outside", r.tangential_mass_outside}};
}

}  // namespace maglab::magnetic2d
