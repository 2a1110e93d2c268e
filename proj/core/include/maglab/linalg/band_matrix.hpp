#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace maglab::linalg {

/// Hermitian (real symmetric when Scalar = double) band matrix.
///
/// Only the diagonal and the `bandwidth` sub-diagonals are stored, so the
/// matrix is Hermitian by construction. Sub-diagonal d is stored contiguously
/// at offset d * dimension; element i of that band is A(i + d, i).
template <class Scalar>
class BandMatrix {
 public:
  using value_type = Scalar;

  BandMatrix(std::size_t dimension, std::size_t bandwidth);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t bandwidth() const noexcept { return bandwidth_; }

  /// Sets A(row, col) and, implicitly, A(col, row) = conj(value).
  void set(std::size_t row, std::size_t col, Scalar value);
  Scalar operator()(std::size_t row, std::size_t col) const;

  std::span<const Scalar> band(std::size_t offset) const;
  std::span<Scalar> band(std::size_t offset);

  /// y = A x
  void multiply(std::span<const Scalar> x, std::span<Scalar> y) const;

  /// Gershgorin enclosure of the spectrum.
  double gershgorin_lower() const;
  double gershgorin_upper() const;
  /// max(|lower|, |upper|): upper bound of the spectral norm.
  double norm_bound() const;

  bool all_finite() const;

 private:
  std::size_t dimension_;
  std::size_t bandwidth_;
  std::vector<Scalar> bands_;
};

using SymmetricBandMatrix = BandMatrix<double>;
using HermitianBandMatrix = BandMatrix<std::complex<double>>;

extern template class BandMatrix<double>;
extern template class BandMatrix<std::complex<double>>;

}  // namespace maglab::linalg
