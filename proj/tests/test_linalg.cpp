#include <doctest.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "maglab/errors.hpp"
#include "maglab/linalg/band_matrix.hpp"
#include "maglab/linalg/eigensolvers.hpp"
#include "maglab/linalg/sparse_matrix.hpp"

using namespace maglab;
using namespace maglab::linalg;
using cplx = std::complex<double>;

namespace {

// -d^2/dt^2 + t^2 on n points of [-L, L], three-point stencil.
SymmetricBandMatrix oscillator3(int n, double half_width) {
  const double h = 2 * half_width / (n - 1);
  SymmetricBandMatrix a(n, 1);
  for (int i = 0; i < n; ++i) {
    const double t = -half_width + i * h;
    a.set(i, i, 2 / (h * h) + t * t);
    if (i + 1 < n) a.set(i + 1, i, -1 / (h * h));
  }
  return a;
}

// Same operator, five-point fourth-order stencil.
SymmetricBandMatrix oscillator5(int n, double half_width) {
  const double h = 2 * half_width / (n - 1);
  const double s = 1 / (12 * h * h);
  SymmetricBandMatrix a(n, 2);
  for (int i = 0; i < n; ++i) {
    const double t = -half_width + i * h;
    a.set(i, i, 30 * s + t * t);
    if (i + 1 < n) a.set(i + 1, i, -16 * s);
    if (i + 2 < n) a.set(i + 2, i, s);
  }
  return a;
}

SparseSymmetricMatrix dirichlet_laplacian(int m) {
  const double h = 1.0 / (m + 1);
  SparseSymmetricMatrix a(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * m + j;
      a.add(k, k, 4 / (h * h));
      if (j + 1 < m) a.add(k, k + 1, -1 / (h * h));
      if (i + 1 < m) a.add(k, k + m, -1 / (h * h));
    }
  }
  a.finalize();
  return a;
}

// Hermitian test operator with genuinely complex couplings: a discrete
// magnetic Laplacian on a small torus-free grid with a constant field.
SparseComplexHermitianMatrix peierls_grid(int nx, int ny, double flux) {
  SparseComplexHermitianMatrix a(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * ny + j;
      a.add(k, k, 4.0 + 0.01 * ((i - nx / 2) * (i - nx / 2) + (j - ny / 2) * (j - ny / 2)));
      if (j + 1 < ny) a.add(k, k + 1, -1.0);
      if (i + 1 < nx) a.add(k, k + ny, -std::polar(1.0, flux * j));
    }
  }
  a.finalize();
  return a;
}

template <class Scalar>
double max_orthonormality_defect(const Eigen::Matrix<Scalar, -1, -1>& v) {
  const Eigen::Matrix<Scalar, -1, -1> g = v.adjoint() * v;
  return (g - Eigen::Matrix<Scalar, -1, -1>::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("band matrix") {
  TEST_CASE("storage is Hermitian by construction") {
    HermitianBandMatrix a(4, 2);
    a.set(0, 2, cplx(1, 2));
    CHECK(a(0, 2) == cplx(1, 2));
    CHECK(a(2, 0) == cplx(1, -2));
    CHECK(a(3, 0) == cplx(0, 0));
    a.set(1, 1, cplx(3, 5));
    CHECK(a(1, 1) == cplx(3, 0));
    CHECK_THROWS_AS(a.set(3, 0, 1.0), PreconditionError);
  }

  TEST_CASE("multiply matches dense product") {
    HermitianBandMatrix a(6, 2);
    std::minstd_rand gen(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 6; ++i) {
      for (int d = 0; d <= 2 && i + d < 6; ++d) a.set(i + d, i, cplx(u(gen), d ? u(gen) : 0.0));
    }
    Eigen::MatrixXcd dense(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) dense(i, j) = a(i, j);
    Eigen::VectorXcd x = Eigen::VectorXcd::Random(6);
    std::vector<cplx> y(6);
    a.multiply({x.data(), 6}, y);
    const Eigen::VectorXcd expect = dense * x;
    for (int i = 0; i < 6; ++i) CHECK(std::abs(y[i] - expect[i]) < 1e-14);
  }

  TEST_CASE("Gershgorin encloses the spectrum") {
    const auto a = oscillator3(201, 6.0);
    const auto r = dense_band_eigensolve(a, 201, false);
    CHECK(a.gershgorin_lower() <= r.eigenvalues.front());
    CHECK(a.gershgorin_upper() >= r.eigenvalues.back());
  }
}

TEST_SUITE("dense_band_eigensolve") {
  TEST_CASE("identity gives unit eigenvalues with zero residual") {
    SymmetricBandMatrix a(5, 0);
    for (int i = 0; i < 5; ++i) a.set(i, i, 1.0);
    const auto r = dense_band_eigensolve(a, 3, true);
    REQUIRE(r.eigenvalues.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(r.eigenvalues[k] == 1.0);
      CHECK(r.residual_norms[k] == 0.0);
    }
    CHECK(max_orthonormality_defect(*r.eigenvectors) == 0.0);
  }

  TEST_CASE("diagonal matrix returns sorted smallest entries") {
    SymmetricBandMatrix a(3, 0);
    a.set(0, 0, 5);
    a.set(1, 1, 1);
    a.set(2, 2, 3);
    const auto r = dense_band_eigensolve(a, 2, false);
    CHECK(r.eigenvalues == std::vector<double>{1, 3});
    CHECK_FALSE(r.eigenvectors.has_value());
  }

  TEST_CASE("count outside range is a precondition error") {
    SymmetricBandMatrix a(3, 0);
    CHECK_THROWS_AS(dense_band_eigensolve(a, 4, false), PreconditionError);
    CHECK_THROWS_AS(dense_band_eigensolve(a, 0, false), PreconditionError);
  }

  TEST_CASE("harmonic oscillator, three-point stencil with Richardson step") {
    const auto start = std::chrono::steady_clock::now();
    const auto fine = dense_band_eigensolve(oscillator3(4001, 12.0), 10, true);
    const auto coarse = dense_band_eigensolve(oscillator3(2001, 12.0), 10, false);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double norm = oscillator3(4001, 12.0).norm_bound();
    for (int k = 0; k < 10; ++k) {
      const double exact = 2 * k + 1;
      CAPTURE(k);
      // plain second-order error is ~1e-5 relative at this spacing
      CHECK(std::abs(fine.eigenvalues[k] - exact) / exact < 5e-5);
      const double extrapolated = (4 * fine.eigenvalues[k] - coarse.eigenvalues[k]) / 3;
      CHECK(std::abs(extrapolated - exact) / exact < 1e-6);
      CHECK(fine.residual_norms[k] <= 1e-10 * norm);
    }
    CHECK(max_orthonormality_defect(*fine.eigenvectors) < 1e-10);
    CHECK(seconds < 5.0);
  }

  TEST_CASE("harmonic oscillator, five-point stencil through the band path") {
    const auto a = oscillator5(4001, 12.0);
    const auto r = dense_band_eigensolve(a, 10, true);
    for (int k = 0; k < 10; ++k) {
      const double exact = 2 * k + 1;
      CAPTURE(k);
      CHECK(std::abs(r.eigenvalues[k] - exact) / exact < 1e-6);
      CHECK(r.residual_norms[k] <= 1e-10 * a.norm_bound());
    }
    CHECK(max_orthonormality_defect(*r.eigenvectors) < 1e-10);
  }

  TEST_CASE("complex tridiagonal matches Eigen dense solve") {
    const int n = 60;
    HermitianBandMatrix a(n, 1);
    for (int i = 0; i < n; ++i) {
      a.set(i, i, 2.0 + std::sin(i));
      if (i + 1 < n) a.set(i + 1, i, std::polar(1.0, 0.3 * i));
    }
    Eigen::MatrixXcd dense(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dense(i, j) = a(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> oracle(dense);
    const auto r = dense_band_eigensolve(a, 8, true);
    for (int k = 0; k < 8; ++k) CHECK(r.eigenvalues[k] == doctest::Approx(oracle.eigenvalues()[k]).epsilon(1e-12));
    CHECK(max_orthonormality_defect(*r.eigenvectors) < 1e-12);
    for (double res : r.residual_norms) CHECK(res < 1e-12);
  }

  TEST_CASE("complex band with degenerate cluster stays orthonormal") {
    // block diagonal with two identical blocks: every eigenvalue is double
    const int half = 30;
    HermitianBandMatrix a(2 * half, 3);
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < half; ++i) {
        const int r = b * half + i;
        a.set(r, r, 1.0 + 0.1 * i);
        if (i + 3 < half) a.set(r + 3, r, cplx(0.2, 0.1));
        if (i + 1 < half) a.set(r + 1, r, cplx(-0.3, 0.05));
      }
    }
    const auto r = dense_band_eigensolve(a, 6, true);
    CHECK(r.eigenvalues[0] == doctest::Approx(r.eigenvalues[1]).epsilon(1e-12));
    CHECK(max_orthonormality_defect(*r.eigenvectors) < 1e-10);
  }
}

TEST_SUITE("sparse_eigensolve_smallest") {
  TEST_CASE("Dirichlet Laplacian on the unit square") {
    const auto a = dirichlet_laplacian(50);
    const auto r = sparse_eigensolve_smallest(a, 1, 1e-6, Preconditioner::jacobi);
    const double exact = 2 * M_PI * M_PI;
    CHECK(std::abs(r.eigenvalues[0] - exact) / exact < 2e-3);
    CHECK(r.converged);
  }

  TEST_CASE("band Cholesky preconditioner agrees with Jacobi and needs fewer iterations") {
    const auto a = dirichlet_laplacian(50);
    const auto j = sparse_eigensolve_smallest(a, 4, 1e-8, Preconditioner::jacobi);
    const auto c = sparse_eigensolve_smallest(a, 4, 1e-8, Preconditioner::band_cholesky);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(j.eigenvalues[k] - c.eigenvalues[k]) < 1e-9);
      CHECK(c.residual_norms[k] <= 1e-8);
    }
    CHECK(c.iterations < j.iterations);
  }

  TEST_CASE("band Cholesky preconditioner shifts an indefinite matrix") {
    auto shifted = SparseSymmetricMatrix(600);
    for (int i = 0; i < 600; ++i) {
      shifted.add(i, i, i - 2.5);
      if (i + 1 < 600) shifted.add(i, i + 1, 0.1);
    }
    shifted.finalize();
    const auto r = sparse_eigensolve_smallest(shifted, 3, 1e-9, Preconditioner::band_cholesky);
    const auto band = dense_band_eigensolve(to_band(shifted), 3, false);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(r.eigenvalues[k] - band.eigenvalues[k]) < 1e-9);
  }

  TEST_CASE("diagonal matrix diag(1..n)") {
    const int n = 400;
    SparseSymmetricMatrix a(n);
    for (int i = 0; i < n; ++i) a.add(i, i, i + 1.0);
    a.finalize();
    const auto r = sparse_eigensolve_smallest(a, 4, 1e-8, Preconditioner::jacobi);
    for (int k = 0; k < 4; ++k) CHECK(r.eigenvalues[k] == doctest::Approx(k + 1.0).epsilon(1e-12));
  }

  TEST_CASE("reported residuals match an independent recomputation") {
    const auto a = dirichlet_laplacian(30);
    const double tol = 1e-7;
    const auto r = sparse_eigensolve_smallest(a, 5, tol, Preconditioner::jacobi);
    REQUIRE(r.eigenvectors);
    const Eigen::MatrixXd& v = *r.eigenvectors;
    const Eigen::MatrixXd dense = a.to_dense();
    for (int k = 0; k < 5; ++k) {
      const double res = (dense * v.col(k) - r.eigenvalues[k] * v.col(k)).norm();
      CHECK(res <= tol);
      CHECK(res == doctest::Approx(r.residual_norms[k]).epsilon(1e-6));
    }
    CHECK(max_orthonormality_defect(v) < 1e-10);
  }

  TEST_CASE("agrees with dense_band_eigensolve on the same matrix") {
    const auto band = oscillator5(1500, 8.0);
    const auto sparse = to_sparse(band);
    const auto dense_r = dense_band_eigensolve(band, 4, false);
    const auto sparse_r = sparse_eigensolve_smallest(sparse, 4, 1e-6, Preconditioner::jacobi);
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(dense_r.eigenvalues[k] - sparse_r.eigenvalues[k]) < 1e-8);
    }
  }

  TEST_CASE("complex Hermitian operator against dense band oracle") {
    const auto a = peierls_grid(24, 20, 0.35);
    const auto dense_r = dense_band_eigensolve(to_band(a), 6, false);
    const auto r = sparse_eigensolve_smallest(a, 6, 1e-7, Preconditioner::jacobi);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(r.eigenvalues[k] - dense_r.eigenvalues[k]) < 1e-8);
    CHECK(max_orthonormality_defect(*r.eigenvectors) < 1e-10);
  }

  TEST_CASE("eigenvalues invariant under symmetric permutation") {
    const auto a = peierls_grid(20, 18, 0.2);
    std::vector<std::size_t> perm(a.dimension());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937(3));
    const auto b = permuted(a, perm);
    const auto ra = sparse_eigensolve_smallest(a, 4, 1e-8, Preconditioner::jacobi);
    const auto rb = sparse_eigensolve_smallest(b, 4, 1e-8, Preconditioner::jacobi);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(ra.eigenvalues[k] - rb.eigenvalues[k]) < 1e-10);
  }

  TEST_CASE("deterministic across repeated runs") {
    const auto a = dirichlet_laplacian(25);
    const auto r1 = sparse_eigensolve_smallest(a, 3, 1e-8, Preconditioner::jacobi);
    const auto r2 = sparse_eigensolve_smallest(a, 3, 1e-8, Preconditioner::jacobi);
    CHECK(r1.eigenvalues == r2.eigenvalues);
    CHECK(r1.iterations == r2.iterations);
  }

  TEST_CASE("indefinite operator below the promised bound is rejected") {
    auto a = dirichlet_laplacian(25);
    SparseSymmetricMatrix shifted(a.dimension());
    for (const auto& t : a.triplets()) shifted.add(t.row, t.col, t.value - (t.row == t.col ? 30.0 : 0.0));
    shifted.finalize();
    SparseSolveOptions options;
    options.lower_bound = 0.0;
    CHECK_THROWS_AS(sparse_eigensolve_smallest(shifted, 2, 1e-8, Preconditioner::jacobi, options),
                    PreconditionError);
  }

  TEST_CASE("unreachable tolerance ends in a convergence error with residuals") {
    const auto a = dirichlet_laplacian(30);
    SparseSolveOptions options;
    options.max_iterations = 3;
    try {
      sparse_eigensolve_smallest(a, 2, 1e-14, Preconditioner::none, options);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.best_residuals().size() == 2);
      CHECK(e.category() == ErrorCategory::numerical);
    }
  }

  TEST_CASE("sparse assembly merges duplicates and keeps the upper half") {
    SparseSymmetricMatrix a(3);
    a.add(2, 0, 1.0);
    a.add(0, 2, 0.5);
    a.add(1, 1, 2.0);
    a.finalize();
    REQUIRE(a.triplets().size() == 2);
    for (const auto& t : a.triplets()) CHECK(t.row <= t.col);
    CHECK(a(2, 0) == 1.5);
    CHECK(a.symmetry_defect() == 0.0);
  }
}
