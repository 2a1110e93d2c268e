#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "maglab/geometry/models.hpp"
#include "maglab/linalg/eigensolvers.hpp"
#include "maglab/linalg/sparse_matrix.hpp"
#include "maglab/spectrum.hpp"

namespace maglab::magnetic2d {

/// Dirichlet tensor grid in (x, dilated t). Interior nodes only:
/// x_i = c - X + (i + 1) dx with dx = 2X / (x_points + 1), likewise in t.
/// Unknowns are ordered t-fastest: index = i * t_points + j.
struct TubeDiscretization {
  double x_half_width = 6.0;
  double x_center = 0.0;
  int x_points = 301;
  double t_half_width = 8.0;
  int t_points = 121;
  double h = 0.02;
  /// Top of the energy window (rescaled units). When set, the window edges
  /// must satisfy delta(c +- X)^(2/3) mu_c >= 1.2 * energy_top.
  std::optional<double> energy_top;

  double hbar() const;
  double dx() const { return 2.0 * x_half_width / (x_points + 1); }
  double dt() const { return 2.0 * t_half_width / (t_points + 1); }
  double x_node(int i) const { return x_center - x_half_width + (i + 1) * dx(); }
  double t_node(int j) const { return -t_half_width + (j + 1) * dt(); }
  std::size_t dimension() const {
    return static_cast<std::size_t>(x_points) * static_cast<std::size_t>(t_points);
  }

  /// Throws PreconditionError when hbar * T >= d0, when the grid is too small
  /// or when the energy_top confinement proxy fails.
  void validate(const geometry::ModelCatalogEntry& model, double mu_c) const;
};

enum class Variant { flat, curved };

/// Discretization of the first-order factor hbar D_x - A.
/// peierls: forward differences on links with the gauge as a phase.
/// central: central differences at nodes (has a doubled spectrum, kept for comparison).
enum class TangentialScheme { peierls, central };

struct MagneticOperator2D {
  linalg::SparseComplexHermitianMatrix matrix{1};
  TubeDiscretization discretization;
  geometry::ModelCatalogEntry model;
  Variant variant = Variant::curved;
  TangentialScheme scheme = TangentialScheme::peierls;
  /// max |M - M^H| of the factor product before averaging with its adjoint.
  double symmetry_defect = 0.0;
  /// Explicit lower bound -hbar^2 K^2 / (4 m_min^2) of the operator.
  double lower_bound = 0.0;
  /// 1 for the rescaled operator, h^(4/3) for the physical one.
  double eigenvalue_scale = 1.0;
};

/// Rescaled operator whose eigenvalues compare to lambda(h) / h^(4/3).
MagneticOperator2D assemble_2d(const geometry::ModelCatalogEntry& model,
                               const TubeDiscretization& disc, Variant variant = Variant::curved,
                               TangentialScheme scheme = TangentialScheme::peierls);

/// The same operator in undilated coordinates (t = hbar * t_check, h instead
/// of hbar), assembled independently. Eigenvalues are physical.
MagneticOperator2D assemble_2d_physical(const geometry::ModelCatalogEntry& model,
                                        const TubeDiscretization& disc,
                                        Variant variant = Variant::curved);

struct Solve2DOptions {
  linalg::SparseSolveOptions solver;
  linalg::Preconditioner preconditioner = linalg::Preconditioner::band_cholesky;
};

/// Lowest `count` eigenpairs by LOBPCG (eigenvectors kept). The operator's
/// lower bound is passed to the solver as a checked promise.
SpectrumResult solve_2d(const MagneticOperator2D& op, int count, double tol = 1e-8,
                        const Solve2DOptions& options = {});

struct LocalizationReport {
  int index = 0;
  double energy = 0.0;
  /// alpha of the least-squares fit log rho(t) ~ c - alpha |t| on the
  /// transverse profile rho(t_j) = (sum_i |psi_ij|^2)^(1/2).
  double transverse_decay_rate = 0.0;
  int fit_points = 0;
  /// Fraction of |psi|^2 at nodes with delta(x)^(2/3) mu_c > energy_cut.
  double tangential_mass_outside = 0.0;
};

/// One report per eigenpair with energy below energy_cut.
std::vector<LocalizationReport> localization_diagnostics(const MagneticOperator2D& op,
                                                         const SpectrumResult& spectrum,
                                                         double energy_cut, double mu_c);

nlohmann::json to_json(const TubeDiscretization& disc);
nlohmann::json to_json(const LocalizationReport& report);

}  // namespace maglab::magnetic2d
