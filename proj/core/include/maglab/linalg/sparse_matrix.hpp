#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "maglab/linalg/band_matrix.hpp"

namespace maglab::linalg {

template <class Scalar>
struct Triplet {
  std::size_t row;
  std::size_t col;
  Scalar value;
};

/// Hermitian sparse matrix assembled from upper-triangle triplets.
///
/// add() accepts entries anywhere; lower entries are conjugated into the upper
/// half. Duplicates are summed by finalize(), after which the matrix is
/// immutable and a full CSR copy is available for products.
template <class Scalar>
class SparseHermitianMatrix {
 public:
  using value_type = Scalar;
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Csr = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, std::ptrdiff_t>;

  explicit SparseHermitianMatrix(std::size_t dimension);

  std::size_t dimension() const noexcept { return dimension_; }
  bool finalized() const noexcept { return finalized_; }

  void reserve(std::size_t entries) { triplets_.reserve(entries); }
  /// Accumulates value into A(row, col) and conj(value) into A(col, row).
  void add(std::size_t row, std::size_t col, Scalar value);
  void finalize();

  /// Sorted, duplicate-free upper triplets (row <= col). Requires finalize().
  const std::vector<Triplet<Scalar>>& triplets() const;
  const Csr& full() const;
  Scalar operator()(std::size_t row, std::size_t col) const;

  Eigen::VectorXd diagonal() const;
  double gershgorin_lower() const;
  double gershgorin_upper() const;
  double norm_bound() const;
  /// max |A(i,j) - conj(A(j,i))| over the assembled full matrix.
  double symmetry_defect() const;
  /// Largest |i - j| over stored entries.
  std::size_t bandwidth() const;

  void multiply(const Block& x, Block& y) const;
  Block to_dense() const;

 private:
  void require_finalized(const char* where) const;

  std::size_t dimension_;
  bool finalized_ = false;
  std::vector<Triplet<Scalar>> triplets_;
  Csr full_;
};

using SparseSymmetricMatrix = SparseHermitianMatrix<double>;
using SparseComplexHermitianMatrix = SparseHermitianMatrix<std::complex<double>>;

/// Copies a band matrix into finalized sparse storage.
template <class Scalar>
SparseHermitianMatrix<Scalar> to_sparse(const BandMatrix<Scalar>& band);

/// Copies a finalized sparse matrix into band storage of its own bandwidth.
template <class Scalar>
BandMatrix<Scalar> to_band(const SparseHermitianMatrix<Scalar>& sparse);

/// B(p[i], p[j]) = A(i, j).
template <class Scalar>
SparseHermitianMatrix<Scalar> permuted(const SparseHermitianMatrix<Scalar>& matrix,
                                       const std::vector<std::size_t>& permutation);

extern template class SparseHermitianMatrix<double>;
extern template class SparseHermitianMatrix<std::complex<double>>;

}  // namespace maglab::linalg
