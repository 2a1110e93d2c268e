#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "maglab/linalg/band_matrix.hpp"
#include "maglab/linalg/sparse_matrix.hpp"

namespace maglab::linalg {

template <class Scalar>
struct EigenSolveReport {
  std::vector<double> eigenvalues;  // ascending
  std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> eigenvectors;
  std::vector<double> residual_norms;  // ||A v - lambda v||_2, unit v
  int iterations = 0;
  bool converged = false;
};

/// Smallest `count` eigenpairs of a Hermitian band matrix via LAPACK.
///
/// Bandwidth 0 sorts the diagonal, bandwidth 1 uses the MRRR tridiagonal
/// driver, wider bands compute eigenvalues by bisection on the reduced
/// tridiagonal form and eigenvectors by inverse iteration on the band LU.
/// Residuals are always computed and must reach 1e-10 * ||A||.
template <class Scalar>
EigenSolveReport<Scalar> dense_band_eigensolve(const BandMatrix<Scalar>& matrix, int count,
                                               bool want_vectors);

/// jacobi: 1 / (diag + shift). band_cholesky: exact solve with the band
/// Cholesky factor of A (or A + shift when A is not positive definite).
enum class Preconditioner { none, jacobi, band_cholesky };

struct SparseSolveOptions {
  int max_iterations = 5000;
  int block_padding = 5;
  /// Operator is promised to satisfy A >= lower_bound; a Ritz value below it
  /// (by more than rounding) is reported as a precondition error.
  std::optional<double> lower_bound;
  /// Dimensions at or below this are solved densely.
  int dense_threshold = 256;
  std::uint32_t seed = 20240607u;
  bool want_vectors = true;
  int stagnation_window = 50;
  double stagnation_factor = 0.99;
};

/// Smallest `count` eigenpairs of a sparse Hermitian matrix by LOBPCG.
template <class Scalar>
EigenSolveReport<Scalar> sparse_eigensolve_smallest(const SparseHermitianMatrix<Scalar>& matrix,
                                                    int count, double tol,
                                                    Preconditioner preconditioner,
                                                    const SparseSolveOptions& options = {});

/// ||A v_i - lambda_i v_i||_2 for each column, recomputed from scratch.
template <class Scalar>
std::vector<double> residual_norms(const SparseHermitianMatrix<Scalar>& matrix,
                                   const std::vector<double>& eigenvalues,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& v);

}  // namespace maglab::linalg
