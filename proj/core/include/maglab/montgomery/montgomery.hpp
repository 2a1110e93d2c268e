#pragma once

#include <initializer_list>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/linalg/band_matrix.hpp"

namespace maglab::montgomery {

/// Uniform grid on [-T, T] with an odd number of nodes, so t = 0 is a node.
struct MontgomeryGrid {
  double half_width = 10.0;
  int points = 2001;
  /// Energy headroom the potential wall must keep above the requested band.
  double barrier_margin = 50.0;

  double spacing() const { return 2.0 * half_width / (points - 1); }
  double node(int i) const { return -half_width + i * spacing(); }
  /// Every other node of this grid: (points + 1) / 2 nodes, same window.
  MontgomeryGrid coarsened() const;
  /// Bisected cells: 2 * points - 1 nodes, same window.
  MontgomeryGrid refined() const;
  /// Throws PreconditionError unless points is odd and >= 5 and T > 0.
  void validate() const;
  /// Throws PreconditionError naming the required T when the wall
  /// (nu - T^2/2)^2 does not exceed target_energy + barrier_margin.
  void check_barrier(double nu, double target_energy) const;
};

/// Second-order finite differences of D_t^2 + (nu - t^2/2)^2, Dirichlet ends.
linalg::SymmetricBandMatrix assemble_montgomery(double nu, const MontgomeryGrid& grid,
                                                double target_energy = 0.0);

struct MontgomeryEigenpair {
  double nu = 0.0;
  int band = 1;
  /// Richardson-extrapolated eigenvalue from this grid and its coarsening.
  double value = 0.0;
  /// Eigenvalue of the finite-difference matrix on this grid.
  double grid_value = 0.0;
  /// Trapezoid-normalized eigenfunction on the grid nodes.
  std::vector<double> function;
  /// Trapezoid integral of the function over [0, T]; >= 0 after sign fixing.
  double sign_anchor = 0.0;
  MontgomeryGrid grid;
};

/// Lowest `bands` eigenpairs, normalized, sign-fixed and sorted.
/// Throws DegeneracyError when neighbouring eigenvalues are within 1e-6 and
/// ResolutionError when the outer 5% of the grid carries more than 1e-8 of
/// the peak amplitude.
std::vector<MontgomeryEigenpair> montgomery_spectrum(double nu, int bands,
                                                     const MontgomeryGrid& grid = {});

/// Band k eigenvalue (Richardson value) only.
double montgomery_eigenvalue(double nu, int band, const MontgomeryGrid& grid = {});

struct DispersiveCurveTable {
  int band = 1;
  std::vector<double> nu_grid;
  std::vector<double> values;
  /// (v[i+1] - 2 v[i] + v[i-1]) / dnu^2 at interior samples (size samples - 2).
  std::vector<double> second_differences;
  MontgomeryGrid grid;

  /// Values increase strictly over the last ten samples on each side
  /// (moving outward), the tabulated form of divergence at infinity.
  bool ends_increasing() const;
  /// Indices i where the first difference changes sign from - to +.
  std::vector<int> interior_minima() const;
};

DispersiveCurveTable dispersive_curve(int band, double nu_lo, double nu_hi, int samples,
                                      const MontgomeryGrid& grid = {});

struct CriticalPointData {
  int band = 1;
  double nu_c = 0.0;
  double mu_c = 0.0;
  double curvature = 0.0;
  /// Central difference of the eigenvalue at nu_c (step 1e-4).
  double derivative_check = 0.0;
  MontgomeryGrid grid;
};

/// Minimum of the band-k dispersive curve inside a bracket (either order).
/// Golden section to width 1e-10, a Newton polish on the Hellmann-Feynman
/// derivative, then a 5-point second difference with step 1e-3.
CriticalPointData find_critical_point(int band, std::pair<double, double> bracket,
                                      const MontgomeryGrid& grid = {});

/// Band-1 critical point on the default grid, computed once per process.
const CriticalPointData& ground_band_critical_point();

struct LocalMinimaScan {
  std::vector<CriticalPointData> minima;
  bool multiple = false;
};

/// Every interior local minimum of the band-k curve seen on a coarse scan.
LocalMinimaScan find_local_minima(int band, double nu_lo, double nu_hi, int samples,
                                  const MontgomeryGrid& grid = {});

/// Real polynomial in t with at most seven coefficients (degree <= 6).
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::initializer_list<double> coefficients);
  explicit Polynomial(std::vector<double> coefficients);

  static Polynomial monomial(int power, double scale = 1.0);

  int degree() const;
  double operator()(double t) const;
  const std::vector<double>& coefficients() const { return coefficients_; }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& a);

 private:
  std::vector<double> coefficients_;
};

/// Trapezoid rule for the integral of u * w(t) * (d/dt)^order u.
/// Degree above 6 is a precondition error.
double eigenfunction_moment(const MontgomeryEigenpair& pair, const Polynomial& weight,
                            int derivative_order = 0);

/// Trapezoid inner product of two grid functions on the pair's grid.
double grid_inner(const MontgomeryGrid& grid, const std::vector<double>& a,
                  const std::vector<double>& b);

/// Central difference in nu of the band-k eigenfunction, neighbours sign-aligned
/// with u_k(nu). step must lie in [1e-5, 1e-2].
std::vector<double> eigenpair_nu_derivative(int band, double nu, double step,
                                            const MontgomeryGrid& grid = {});

/// d/dnu of the Richardson eigenvalue: Hellmann-Feynman on both grids,
/// combined with the same weights as the eigenvalues.
double dispersive_derivative(double nu, int band, const MontgomeryGrid& grid = {});

/// Hellmann-Feynman derivative <u, 2(nu - t^2/2) u> on the pair's grid.
double hellmann_feynman_derivative(const MontgomeryEigenpair& pair);

nlohmann::json to_json(const MontgomeryGrid& grid);
nlohmann::json to_json(const DispersiveCurveTable& table);
nlohmann::json to_json(const CriticalPointData& point);
DispersiveCurveTable dispersive_curve_from_json(const nlohmann::json& doc);
CriticalPointData critical_point_from_json(const nlohmann::json& doc);

}  // namespace maglab::montgomery
