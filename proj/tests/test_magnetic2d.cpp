#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "maglab/errors.hpp"
#include "maglab/magnetic2d/magnetic2d.hpp"
#include "maglab/montgomery/montgomery.hpp"

using namespace maglab;
using namespace maglab::magnetic2d;
using cplx = std::complex<double>;

namespace {

double mu_c() { return montgomery::ground_band_critical_point().mu_c; }

TubeDiscretization grid(double h, int nx, int nt, double x_half = 6.0, double t_half = 8.0) {
  TubeDiscretization d;
  d.h = h;
  d.x_points = nx;
  d.t_points = nt;
  d.x_half_width = x_half;
  d.t_half_width = t_half;
  return d;
}

// Antiderivative of 1 + a x^2 / (1 + x^2).
double delta_integral(double a, double x) { return (1 + a) * x - a * std::atan(x); }

// D_t^2 + (hbar D_x + delta t^2 / 2)^2 on the same grid, link phases from the
// exact integral of the potential.
Eigen::MatrixXcd model_a_reference(const TubeDiscretization& d, double a) {
  const int nx = d.x_points;
  const int nt = d.t_points;
  const double hb = d.hbar();
  const double dx = d.dx();
  const double dt = d.dt();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(nx * nt, nx * nt);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nt; ++j) {
      const int r = i * nt + j;
      m(r, r) += 2.0 / (dt * dt) + 2.0 * hb * hb / (dx * dx);
      if (j + 1 < nt) {
        m(r, r + 1) = -1.0 / (dt * dt);
        m(r + 1, r) = -1.0 / (dt * dt);
      }
      if (i + 1 < nx) {
        const double t = d.t_node(j);
        const double x0 = d.x_node(i);
        const double x1 = d.x_node(i + 1);
        const double theta = -t * t / 2 * (delta_integral(a, x1) - delta_integral(a, x0)) / hb;
        const cplx v = -hb * hb / (dx * dx) * std::polar(1.0, -theta);
        m(r, r + nt) = v;
        m(r + nt, r) = std::conj(v);
      }
    }
  }
  return m;
}

double max_entry_difference(const linalg::SparseComplexHermitianMatrix& a, const Eigen::MatrixXcd& b) {
  return (a.to_dense() - b).cwiseAbs().maxCoeff();
}

geometry::ModelCatalogEntry wide_model_c() { return geometry::make_model("C", {{"d0", 4.0}}); }

std::vector<double> x_marginal(const TubeDiscretization& d, const Eigen::VectorXcd& v) {
  std::vector<double> out(d.x_points, 0.0);
  for (int i = 0; i < d.x_points; ++i) {
    for (int j = 0; j < d.t_points; ++j) out[i] += std::norm(v[i * d.t_points + j]);
  }
  return out;
}

}  // namespace

TEST_SUITE("assemble_2d") {
  TEST_CASE("Model A flat variant is the leading operator") {
    // Simpson phases against exact ones: entry error scales like dx^3
    const auto model = geometry::make_model("A");
    const auto coarse = grid(0.05, 24, 16, 1.5);
    const auto fine = grid(0.05, 49, 16, 1.5);
    const auto op = assemble_2d(model, coarse, Variant::flat);
    CHECK(op.matrix.dimension() == 24u * 16u);
    const double e_coarse = max_entry_difference(op.matrix, model_a_reference(coarse, 1.0));
    const double e_fine =
        max_entry_difference(assemble_2d(model, fine, Variant::flat).matrix, model_a_reference(fine, 1.0));
    MESSAGE("entry errors " << e_coarse << " " << e_fine);
    CHECK(e_coarse < 5e-4);
    CHECK(e_coarse / e_fine == doctest::Approx(8.0).epsilon(0.15));
  }

  TEST_CASE("curved variant with zero curvature equals the flat variant entry by entry") {
    const auto model = geometry::make_model("A");
    const auto d = grid(0.05, 30, 20);
    const auto flat = assemble_2d(model, d, Variant::flat);
    const auto curved = assemble_2d(model, d, Variant::curved);
    const auto& a = flat.matrix.triplets();
    const auto& b = curved.matrix.triplets();
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t k = 0; k < a.size(); ++k) {
      same = same && a[k].row == b[k].row && a[k].col == b[k].col && a[k].value == b[k].value;
    }
    CHECK(same);
  }

  TEST_CASE("Model C at 120x60 is Hermitian to rounding") {
    const auto op = assemble_2d(wide_model_c(), grid(0.05, 120, 60));
    CHECK(op.matrix.symmetry_defect() <= 1e-13);
    CHECK(op.symmetry_defect <= 1e-12 * op.matrix.norm_bound());
    CHECK(op.lower_bound < 0.0);
  }

  TEST_CASE("discretization preconditions") {
    const auto a = geometry::make_model("A");
    CHECK_THROWS_AS(assemble_2d(geometry::make_model("C"), grid(0.05, 20, 20)), PreconditionError);
    auto d = grid(0.05, 20, 20);
    d.energy_top = 0.8;
    CHECK_THROWS_AS(assemble_2d(a, d), PreconditionError);
    d.energy_top = 0.7;
    CHECK_NOTHROW(assemble_2d(a, d));
    CHECK_THROWS_AS(assemble_2d(a, grid(0.05, 2, 20)), PreconditionError);
    CHECK_THROWS_AS(assemble_2d(a, grid(-1.0, 20, 20)), PreconditionError);
  }
}

TEST_SUITE("solve_2d") {
  TEST_CASE("toy grid against dense diagonalization") {
    const auto op = assemble_2d(geometry::make_model("A"), grid(0.05, 20, 20));
    const auto s = solve_2d(op, 1, 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> dense(op.matrix.to_dense());
    CHECK(std::abs(s.eigenvalues[0] - dense.eigenvalues()[0]) < 1e-9);
  }

  TEST_CASE("Model A 120x60 LOBPCG matches the band solver") {
    const auto op = assemble_2d(geometry::make_model("A"), grid(0.05, 120, 60));
    const auto band = linalg::dense_band_eigensolve(linalg::to_band(op.matrix), 6, false);
    for (auto pre : {linalg::Preconditioner::band_cholesky, linalg::Preconditioner::jacobi}) {
      Solve2DOptions options;
      options.preconditioner = pre;
      const auto s = solve_2d(op, 6, 1e-8, options);
      for (int n = 0; n < 6; ++n) {
        CHECK(std::abs(s.eigenvalues[n] - band.eigenvalues[n]) < 1e-8);
        CHECK(s.residuals[n] <= 1e-8);
      }
    }
  }

  TEST_CASE("rescaled and physical assemblies agree") {
    const auto model = wide_model_c();
    const auto d = grid(0.05, 40, 30);
    const auto rescaled = solve_2d(assemble_2d(model, d), 3, 1e-10);
    const auto physical_op = assemble_2d_physical(model, d);
    const auto direct = linalg::sparse_eigensolve_smallest(physical_op.matrix, 3, 1e-13,
                                                           linalg::Preconditioner::band_cholesky);
    for (int n = 0; n < 3; ++n) {
      CHECK(rescaled.physical(n) == doctest::Approx(direct.eigenvalues[n]).epsilon(1e-9));
    }
    const auto via_solve = solve_2d(physical_op, 3, 1e-13);
    CHECK(via_solve.eigenvalues[0] == doctest::Approx(rescaled.eigenvalues[0]).epsilon(1e-9));
  }

  TEST_CASE("flat spectrum is covariant under a one-cell shift") {
    const double a = 1.0;
    auto d = grid(0.05, 60, 40);
    const double s = d.dx();
    auto shifted = geometry::make_model("A");
    shifted.field.delta = [a, s](double x) { return 1 + a * (x - s) * (x - s) / (1 + (x - s) * (x - s)); };
    shifted.field.field = [f = shifted.field.delta](double x, double t) { return f(x) * t; };
    const auto base = solve_2d(assemble_2d(geometry::make_model("A"), d, Variant::flat), 4, 1e-10);
    d.x_center = s;
    const auto moved = solve_2d(assemble_2d(shifted, d, Variant::flat), 4, 1e-10);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(base.eigenvalues[n] - moved.eigenvalues[n]) < 1e-9);
  }

  TEST_CASE("eigenvalues respect the explicit lower bound") {
    const auto op = assemble_2d(wide_model_c(), grid(0.1, 50, 40));
    const auto s = solve_2d(op, 4, 1e-9);
    for (double v : s.eigenvalues) CHECK(v >= op.lower_bound - 1e-10);
    CHECK(s.eigenvalues.front() > 0.0);
  }

  TEST_CASE("constant delta: ground energy decreases to the band bottom as X grows") {
    const auto flat_model = geometry::make_model("A", {{"a", 0.0}});
    std::vector<double> ground;
    for (double x_half : {4.0, 8.0, 16.0}) {
      const int nx = static_cast<int>(std::lround(2 * x_half / 0.15)) - 1;
      const auto s = solve_2d(assemble_2d(flat_model, grid(0.1, nx, 81, x_half)), 1, 1e-9);
      ground.push_back(s.eigenvalues[0]);
    }
    CHECK(ground[0] > ground[1]);
    CHECK(ground[1] > ground[2]);
    CHECK(std::abs(ground[2] - mu_c()) < 5e-3);
    CHECK(std::abs(ground[2] - mu_c()) < std::abs(ground[0] - mu_c()));
  }

  TEST_CASE("central differences double the spectrum") {
    const auto model = geometry::make_model("A");
    const auto d = grid(0.05, 60, 40);
    const auto peierls = solve_2d(assemble_2d(model, d), 2, 1e-9);
    const auto central = solve_2d(assemble_2d(model, d, Variant::curved, TangentialScheme::central), 2, 1e-9);
    const double peierls_gap = peierls.eigenvalues[1] - peierls.eigenvalues[0];
    const double central_gap = central.eigenvalues[1] - central.eigenvalues[0];
    CHECK(central_gap < 1e-3 * peierls_gap);
  }

  TEST_CASE("argument errors and serialization") {
    const auto op = assemble_2d(geometry::make_model("A"), grid(0.05, 20, 20));
    CHECK_THROWS_AS(solve_2d(op, 0), PreconditionError);
    const auto s = solve_2d(op, 3, 1e-9);
    const auto back = spectrum_from_json(nlohmann::json::parse(to_json(s).dump()));
    CHECK(back.eigenvalues == s.eigenvalues);
    CHECK(back.residuals == s.residuals);
    const auto csv = to_csv(s);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("index,eigenvalue_rescaled,eigenvalue_physical,residual\n", 0) == 0);
    CHECK_THROWS_AS(spectrum_from_json({{"schema", "maglab.spectrum"}}), ConfigError);
  }
}

TEST_SUITE("localization_diagnostics") {
  TEST_CASE("Model A ground state decays transversally and sharpens tangentially") {
    const auto model = geometry::make_model("A");
    const double cut = mu_c() + 0.2;
    std::vector<double> outside;
    for (double h : {0.05, 0.01}) {
      const auto op = assemble_2d(model, grid(h, 151, 81));
      const auto s = solve_2d(op, 1, 1e-10);
      const auto reports = localization_diagnostics(op, s, cut, mu_c());
      REQUIRE(reports.size() == 1);
      CHECK(reports[0].transverse_decay_rate > 0.0);
      CHECK(reports[0].fit_points >= 3);
      outside.push_back(reports[0].tangential_mass_outside);
    }
    CHECK(outside[1] <= outside[0]);
  }

  TEST_CASE("constant delta spreads along the whole window") {
    const double x_half = 6.0;
    const auto d = grid(0.1, 79, 81, x_half);
    const auto op = assemble_2d(geometry::make_model("A", {{"a", 0.0}}), d);
    const auto s = solve_2d(op, 1, 1e-10);
    const auto marginal = x_marginal(d, s.eigenvectors->col(0));
    double inner = 0.0;
    double total = 0.0;
    for (int i = 0; i < d.x_points; ++i) {
      total += marginal[i];
      if (std::abs(d.x_node(i)) < x_half / 2) inner += marginal[i];
    }
    // cos^2(pi x / 2X) puts 1/2 + 1/pi of its mass in the middle half
    CHECK(inner / total == doctest::Approx(0.5 + 1 / M_PI).epsilon(0.03));
    const auto reports = localization_diagnostics(op, s, mu_c() + 0.5, mu_c());
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].tangential_mass_outside == 0.0);
  }

  TEST_CASE("errors") {
    const auto model = geometry::make_model("A");
    const auto op = assemble_2d(model, grid(0.05, 20, 20));
    auto s = solve_2d(op, 1, 1e-9);
    const auto narrow = assemble_2d(model, grid(0.05, 20, 20, 6.0, 1.0));
    const auto sn = solve_2d(narrow, 1, 1e-9);
    CHECK_THROWS_AS(localization_diagnostics(narrow, sn, 10.0, mu_c()), NumericalError);
    s.eigenvectors.reset();
    CHECK_THROWS_AS(localization_diagnostics(op, s, 10.0, mu_c()), PreconditionError);
    CHECK(localization_diagnostics(op, solve_2d(op, 1, 1e-9), 0.1, mu_c()).empty());
  }
}
