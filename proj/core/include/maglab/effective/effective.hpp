#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maglab/geometry/models.hpp"
#include "maglab/montgomery/montgomery.hpp"
#include "maglab/spectrum.hpp"

namespace maglab::effective {

using Symbol = std::function<double(double, double)>;

/// Cubic B-spline of a band dispersive curve on a uniform nu grid. The grid is
/// halved until spline values at the new midpoints are within `tolerance` of
/// the Montgomery values there.
class DispersiveInterpolant {
 public:
  DispersiveInterpolant(int band, double nu_lo, double nu_hi, double tolerance = 1e-8,
                        const montgomery::MontgomeryGrid& grid = {});
  ~DispersiveInterpolant();
  DispersiveInterpolant(DispersiveInterpolant&&) noexcept;
  DispersiveInterpolant& operator=(DispersiveInterpolant&&) noexcept;

  /// RangeError outside [nu_lo, nu_hi], naming the required extension.
  double operator()(double nu) const;
  double derivative(double nu) const;
  double second_derivative(double nu) const;

  int band() const { return band_; }
  double nu_lo() const { return lo_; }
  double nu_hi() const { return hi_; }
  double spacing() const { return step_; }
  int samples() const { return samples_; }
  /// Largest midpoint shift of the accepted refinement.
  double refinement_shift() const { return shift_; }

 private:
  void check(double nu) const;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int band_;
  double lo_;
  double hi_;
  double step_ = 0.0;
  int samples_ = 0;
  double shift_ = 0.0;
};

/// Process-wide cache keyed by (band, range). Thread safe.
std::shared_ptr<const DispersiveInterpolant> dispersive_interpolant(int band, double nu_lo,
                                                                    double nu_hi);

/// Montgomery-side ingredients of the subprincipal symbol at one nu, with
/// t the Montgomery variable and I = 1/2 + t d/dt:
///   curvature_moment = <u, (nu - t^2/2)^2 t u>
///   kappa_moment     = <u, (nu - t^2/2) t^3 u>
/// and the imaginary parts of the inner products entering the Poisson
/// bracket and cross terms (all computed in complex arithmetic).
struct MontgomeryMoments {
  double nu = 0.0;
  double curvature_moment = 0.0;
  double kappa_moment = 0.0;
  double im_p_dilation = 0.0;    // Im <u, (nu - t^2/2) I u>
  double im_p_dnu = 0.0;         // Im <u, (nu - t^2/2) d_nu u>
  double im_t2p_dnu = 0.0;       // Im <u, t^2 (nu - t^2/2) d_nu u>
  double im_dilation_dnu = 0.0;  // Im <I u, d_nu u>
  double im_dnu_dnu = 0.0;       // Im <d_nu u, d_nu u>
};

MontgomeryMoments montgomery_moments(int band, double nu);

struct SubprincipalTerms {
  double curvature_term = 0.0;  // 2 k <u, p0^2 t u>
  double kappa_term = 0.0;      // -2 kappa <u, p0 t^3 u>
  double im_bracket = 0.0;      // Im <u, {n0, u}>
  double im_cross = 0.0;        // Im <d_x u, d_xi u>
  double principal = 0.0;
  double value() const { return curvature_term + kappa_term + im_bracket + principal * im_cross; }
};

/// Direct evaluation at one phase-space point (fresh Montgomery solves).
SubprincipalTerms subprincipal_terms(const geometry::ModelCatalogEntry& model, int band, double x,
                                     double xi);

struct EffectiveSymbolGrid {
  int band = 1;
  std::vector<double> x_grid;
  std::vector<double> xi_grid;
  Eigen::MatrixXd principal;     // rows x, columns xi
  Eigen::MatrixXd subprincipal;  // empty until filled
  Eigen::MatrixXd im_bracket;
  Eigen::MatrixXd im_cross;
  std::string truncation_note;
  /// Continuous evaluators behind the node values.
  Symbol principal_fn;
  Symbol subprincipal_fn;

  bool has_subprincipal() const { return static_cast<bool>(subprincipal_fn); }
  double x_min() const { return x_grid.front(); }
  double x_max() const { return x_grid.back(); }
};

/// delta(x)^(2/3) mu_k(xi delta(x)^(-1/3)) on the node grid, through the
/// cached interpolant; the nu range is taken from the grid with 10% slack.
EffectiveSymbolGrid effective_principal(const geometry::ModelCatalogEntry& model, int band,
                                        std::vector<double> x_grid, std::vector<double> xi_grid);

/// Fills the subprincipal from a nu table of Montgomery moments (spline,
/// spacing 0.1) spanning the nu range of the grid.
EffectiveSymbolGrid effective_subprincipal(const geometry::ModelCatalogEntry& model,
                                           EffectiveSymbolGrid grid);

/// Arbitrary test symbols sampled on a grid (subprincipal optional).
EffectiveSymbolGrid symbol_from_function(Symbol principal, std::vector<double> x_grid,
                                         std::vector<double> xi_grid, Symbol subprincipal = {});

std::vector<double> linspace(double lo, double hi, int count);

/// Largest |xi| on the Weyl lattice of quantize_1d for this window.
double lattice_xi_extent(double x_min, double x_max, double hbar, int modes, double padding = 0.3);

struct HarmonicPrediction {
  double x_c = 0.0;
  double xi_c = 0.0;
  double delta_c = 0.0;
  double delta_second = 0.0;
  double alpha = 0.0;
  double mu_c = 0.0;
  double nu_c = 0.0;
  double curvature = 0.0;  // second nu-derivative of the dispersive curve
  /// Finite-difference Hessian of the principal symbol at (x_c, xi_c).
  double hxx = 0.0;
  double hxixi = 0.0;
  double hxxi = 0.0;
  double c1_closed_form = 0.0;
  double c1_hessian = 0.0;
  double L_expectation = 0.0;
  /// h -> predicted lambda_n(h) / h^(4/3) for n = 0..levels-1.
  std::map<double, std::vector<double>> lambda_closed_form;
  std::map<double, std::vector<double>> lambda_hessian;

  /// Rescaled prediction delta_c^(2/3) (mu_c + hbar (L + (2n+1) c1)).
  double predicted(double c1, double hbar, int n) const;
};

/// Well-bottom quantities and two-term predictions for the listed h.
/// Throws PreconditionError when the Hessian is not positive definite.
HarmonicPrediction harmonic_prediction(const geometry::ModelCatalogEntry& model,
                                       const montgomery::CriticalPointData& critical,
                                       const std::vector<double>& h_list = {0.05, 0.02, 0.01},
                                       int levels = 4);

struct QuantizeOptions {
  /// When set, coverage (20% margin) and aliasing checks run for this energy.
  std::optional<double> energy_top;
  double padding = 0.3;
  /// Largest symbol change between neighbouring lattice points inside the
  /// window, as a fraction of energy_top - min(symbol).
  double aliasing_threshold = 0.5;
};

struct QuantizedOperator1D {
  Eigen::MatrixXcd matrix;
  double hbar = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  double period_half_width = 0.0;
  int modes = 0;
  int band = 1;
  int order = 0;
  double symmetry_defect = 0.0;
};

/// Weyl quantization of principal + order * hbar * subprincipal in the
/// Fourier basis of the padded periodic window.
QuantizedOperator1D quantize_1d(const EffectiveSymbolGrid& grid, int order, double hbar, int modes,
                                const QuantizeOptions& options = {});

/// Lowest `count` eigenvalues (or all below `energy_max` when count <= 0).
SpectrumResult quantized_spectrum(const QuantizedOperator1D& op, int count, double h = 0.0,
                                  double energy_max = 0.0);

struct ActionProfile {
  int band = 1;
  double x_center = 0.0;
  double xi_center = 0.0;
  std::vector<double> energy_grid;
  std::vector<double> J_values;      // ray quadrature of the sublevel area
  std::vector<double> J_grid_values; // composite quadrature on the node grid
  std::vector<double> periods;       // closed-orbit period, contour integral of dl / |grad a|
  bool monotone = false;

  /// Cubic spline of J on the uniform energy grid; RangeError outside the window.
  double J(double energy) const;
  double dJ(double energy) const;
};

/// Phase-space area J(E) of {a <= E} on a uniform energy grid in the window.
/// J_values come from polar rays; J_grid_values from linear interpolation on
/// the triangulated node grid, kept as a cross-check.
ActionProfile action_profile(const EffectiveSymbolGrid& grid, std::pair<double, double> window,
                             int samples);

/// Area of {a <= E} by polar rays from the symbol minimum. Throws RangeError
/// when the level set reaches the grid boundary and NumericalError when the
/// gradient vanishes on it.
double sublevel_area(const EffectiveSymbolGrid& grid, double energy, double* period = nullptr);

/// Solutions of J(E_n) = 2 pi hbar (n + 1/2) inside the profile window.
SpectrumResult bohr_sommerfeld_spectrum(const ActionProfile& profile, double hbar, double h = 0.0);

nlohmann::json to_json(const EffectiveSymbolGrid& grid);
nlohmann::json to_json(const HarmonicPrediction& prediction);
nlohmann::json to_json(const ActionProfile& profile);
/// Columns: h, n, lambda_closed_form, lambda_hessian (rescaled units).
std::string lambda_table_csv(const HarmonicPrediction& prediction);

}  // namespace maglab::effective
