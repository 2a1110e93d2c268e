#include "maglab/linalg/band_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maglab/errors.hpp"
#include "scalar_traits.hpp"

namespace maglab::linalg {

template <class Scalar>
BandMatrix<Scalar>::BandMatrix(std::size_t dimension, std::size_t bandwidth)
    : dimension_(dimension), bandwidth_(bandwidth) {
  if (dimension == 0) {
    throw PreconditionError("BandMatrix: dimension must be positive");
  }
  if (bandwidth >= dimension) {
    throw PreconditionError("BandMatrix: bandwidth " + std::to_string(bandwidth) +
                            " must be below dimension " + std::to_string(dimension));
  }
  bands_.assign((bandwidth + 1) * dimension, Scalar{});
}

template <class Scalar>
void BandMatrix<Scalar>::set(std::size_t row, std::size_t col, Scalar value) {
  if (row >= dimension_ || col >= dimension_) {
    throw PreconditionError("BandMatrix::set: index out of range");
  }
  if (row < col) {
    std::swap(row, col);
    value = detail::conj(value);
  }
  const std::size_t offset = row - col;
  if (offset > bandwidth_) {
    throw PreconditionError("BandMatrix::set: entry outside the band");
  }
  if (offset == 0) value = Scalar(detail::real(value));
  bands_[offset * dimension_ + col] = value;
}

template <class Scalar>
Scalar BandMatrix<Scalar>::operator()(std::size_t row, std::size_t col) const {
  if (row >= dimension_ || col >= dimension_) {
    throw PreconditionError("BandMatrix: index out of range");
  }
  if (row >= col) {
    const std::size_t offset = row - col;
    return offset > bandwidth_ ? Scalar{} : bands_[offset * dimension_ + col];
  }
  const std::size_t offset = col - row;
  return offset > bandwidth_ ? Scalar{} : detail::conj(bands_[offset * dimension_ + row]);
}

template <class Scalar>
std::span<const Scalar> BandMatrix<Scalar>::band(std::size_t offset) const {
  if (offset > bandwidth_) throw PreconditionError("BandMatrix::band: offset outside band");
  return {bands_.data() + offset * dimension_, dimension_ - offset};
}

template <class Scalar>
std::span<Scalar> BandMatrix<Scalar>::band(std::size_t offset) {
  if (offset > bandwidth_) throw PreconditionError("BandMatrix::band: offset outside band");
  return {bands_.data() + offset * dimension_, dimension_ - offset};
}

template <class Scalar>
void BandMatrix<Scalar>::multiply(std::span<const Scalar> x, std::span<Scalar> y) const {
  if (x.size() != dimension_ || y.size() != dimension_) {
    throw PreconditionError("BandMatrix::multiply: size mismatch");
  }
  const auto diag = band(0);
  for (std::size_t i = 0; i < dimension_; ++i) y[i] = diag[i] * x[i];
  for (std::size_t d = 1; d <= bandwidth_; ++d) {
    const auto sub = band(d);
    for (std::size_t i = 0; i < sub.size(); ++i) {
      y[i + d] += sub[i] * x[i];
      y[i] += detail::conj(sub[i]) * x[i + d];
    }
  }
}

template <class Scalar>
double BandMatrix<Scalar>::gershgorin_lower() const {
  std::vector<double> radius(dimension_, 0.0);
  for (std::size_t d = 1; d <= bandwidth_; ++d) {
    const auto sub = band(d);
    for (std::size_t i = 0; i < sub.size(); ++i) {
      radius[i] += std::abs(sub[i]);
      radius[i + d] += std::abs(sub[i]);
    }
  }
  const auto diag = band(0);
  double lower = detail::real(diag[0]) - radius[0];
  for (std::size_t i = 1; i < dimension_; ++i) {
    lower = std::min(lower, detail::real(diag[i]) - radius[i]);
  }
  return lower;
}

template <class Scalar>
double BandMatrix<Scalar>::gershgorin_upper() const {
  std::vector<double> radius(dimension_, 0.0);
  for (std::size_t d = 1; d <= bandwidth_; ++d) {
    const auto sub = band(d);
    for (std::size_t i = 0; i < sub.size(); ++i) {
      radius[i] += std::abs(sub[i]);
      radius[i + d] += std::abs(sub[i]);
    }
  }
  const auto diag = band(0);
  double upper = detail::real(diag[0]) + radius[0];
  for (std::size_t i = 1; i < dimension_; ++i) {
    upper = std::max(upper, detail::real(diag[i]) + radius[i]);
  }
  return upper;
}

template <class Scalar>
double BandMatrix<Scalar>::norm_bound() const {
  return std::max(std::abs(gershgorin_lower()), std::abs(gershgorin_upper()));
}

template <class Scalar>
bool BandMatrix<Scalar>::all_finite() const {
  return std::all_of(bands_.begin(), bands_.end(),
                     [](const Scalar& v) { return detail::is_finite(v); });
}

template class BandMatrix<double>;
template class BandMatrix<std::complex<double>>;

}  // namespace maglab::linalg
