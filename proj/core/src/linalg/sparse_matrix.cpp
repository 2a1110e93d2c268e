#include "maglab/linalg/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "maglab/errors.hpp"
#include "scalar_traits.hpp"

namespace maglab::linalg {

template <class Scalar>
SparseHermitianMatrix<Scalar>::SparseHermitianMatrix(std::size_t dimension)
    : dimension_(dimension) {
  if (dimension == 0) throw PreconditionError("SparseHermitianMatrix: dimension must be positive");
}

template <class Scalar>
void SparseHermitianMatrix<Scalar>::add(std::size_t row, std::size_t col, Scalar value) {
  if (finalized_) throw PreconditionError("SparseHermitianMatrix::add after finalize");
  if (row >= dimension_ || col >= dimension_) {
    throw PreconditionError("SparseHermitianMatrix::add: index (" + std::to_string(row) + ", " +
                            std::to_string(col) + ") out of range");
  }
  if (!detail::is_finite(value)) {
    throw PreconditionError("SparseHermitianMatrix::add: non-finite entry");
  }
  if (row > col) {
    std::swap(row, col);
    value = detail::conj(value);
  }
  // A diagonal entry of a Hermitian matrix is real; the caller's imaginary
  // part would otherwise be silently doubled into a skew part.
  if (row == col) value = Scalar(detail::real(value));
  triplets_.push_back({row, col, value});
}

template <class Scalar>
void SparseHermitianMatrix<Scalar>::finalize() {
  if (finalized_) return;
  std::sort(triplets_.begin(), triplets_.end(), [](const auto& a, const auto& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Triplet<Scalar>> merged;
  merged.reserve(triplets_.size());
  for (const auto& t : triplets_) {
    if (!merged.empty() && merged.back().row == t.row && merged.back().col == t.col) {
      merged.back().value += t.value;
    } else {
      merged.push_back(t);
    }
  }
  triplets_ = std::move(merged);
  triplets_.shrink_to_fit();

  std::vector<Eigen::Triplet<Scalar, std::ptrdiff_t>> entries;
  entries.reserve(2 * triplets_.size());
  for (const auto& t : triplets_) {
    const auto r = static_cast<std::ptrdiff_t>(t.row);
    const auto c = static_cast<std::ptrdiff_t>(t.col);
    entries.emplace_back(r, c, t.value);
    if (r != c) entries.emplace_back(c, r, detail::conj(t.value));
  }
  const auto n = static_cast<std::ptrdiff_t>(dimension_);
  full_.resize(n, n);
  full_.setFromTriplets(entries.begin(), entries.end());
  full_.makeCompressed();
  finalized_ = true;
}

template <class Scalar>
void SparseHermitianMatrix<Scalar>::require_finalized(const char* where) const {
  if (!finalized_) {
    throw PreconditionError(std::string("SparseHermitianMatrix::") + where +
                            " requires finalize()");
  }
}

template <class Scalar>
const std::vector<Triplet<Scalar>>& SparseHermitianMatrix<Scalar>::triplets() const {
  require_finalized("triplets");
  return triplets_;
}

template <class Scalar>
const typename SparseHermitianMatrix<Scalar>::Csr& SparseHermitianMatrix<Scalar>::full() const {
  require_finalized("full");
  return full_;
}

template <class Scalar>
Scalar SparseHermitianMatrix<Scalar>::operator()(std::size_t row, std::size_t col) const {
  require_finalized("operator()");
  if (row >= dimension_ || col >= dimension_) {
    throw PreconditionError("SparseHermitianMatrix: index out of range");
  }
  return full_.coeff(static_cast<std::ptrdiff_t>(row), static_cast<std::ptrdiff_t>(col));
}

template <class Scalar>
Eigen::VectorXd SparseHermitianMatrix<Scalar>::diagonal() const {
  require_finalized("diagonal");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension_));
  for (const auto& t : triplets_) {
    if (t.row == t.col) d[static_cast<Eigen::Index>(t.row)] = detail::real(t.value);
  }
  return d;
}

template <class Scalar>
double SparseHermitianMatrix<Scalar>::gershgorin_lower() const {
  require_finalized("gershgorin_lower");
  double lower = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < full_.outerSize(); ++r) {
    double centre = 0.0;
    double radius = 0.0;
    for (typename Csr::InnerIterator it(full_, r); it; ++it) {
      if (it.col() == r) {
        centre = detail::real(it.value());
      } else {
        radius += std::abs(it.value());
      }
    }
    lower = std::min(lower, centre - radius);
  }
  return lower;
}

template <class Scalar>
double SparseHermitianMatrix<Scalar>::gershgorin_upper() const {
  require_finalized("gershgorin_upper");
  double upper = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < full_.outerSize(); ++r) {
    double centre = 0.0;
    double radius = 0.0;
    for (typename Csr::InnerIterator it(full_, r); it; ++it) {
      if (it.col() == r) {
        centre = detail::real(it.value());
      } else {
        radius += std::abs(it.value());
      }
    }
    upper = std::max(upper, centre + radius);
  }
  return upper;
}

template <class Scalar>
double SparseHermitianMatrix<Scalar>::norm_bound() const {
  return std::max(std::abs(gershgorin_lower()), std::abs(gershgorin_upper()));
}

template <class Scalar>
double SparseHermitianMatrix<Scalar>::symmetry_defect() const {
  require_finalized("symmetry_defect");
  double defect = 0.0;
  for (Eigen::Index r = 0; r < full_.outerSize(); ++r) {
    for (typename Csr::InnerIterator it(full_, r); it; ++it) {
      const Scalar mirror = full_.coeff(it.col(), r);
      defect = std::max(defect, std::abs(it.value() - detail::conj(mirror)));
    }
  }
  return defect;
}

template <class Scalar>
std::size_t SparseHermitianMatrix<Scalar>::bandwidth() const {
  require_finalized("bandwidth");
  std::size_t width = 0;
  for (const auto& t : triplets_) width = std::max(width, t.col - t.row);
  return width;
}

template <class Scalar>
void SparseHermitianMatrix<Scalar>::multiply(const Block& x, Block& y) const {
  require_finalized("multiply");
  if (x.rows() != static_cast<Eigen::Index>(dimension_)) {
    throw PreconditionError("SparseHermitianMatrix::multiply: size mismatch");
  }
  y.noalias() = full_ * x;
}

template <class Scalar>
typename SparseHermitianMatrix<Scalar>::Block SparseHermitianMatrix<Scalar>::to_dense() const {
  require_finalized("to_dense");
  return Block(full_);
}

template <class Scalar>
SparseHermitianMatrix<Scalar> to_sparse(const BandMatrix<Scalar>& band) {
  SparseHermitianMatrix<Scalar> out(band.dimension());
  for (std::size_t d = 0; d <= band.bandwidth(); ++d) {
    const auto values = band.band(d);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] != Scalar{}) out.add(i + d, i, values[i]);
    }
  }
  out.finalize();
  return out;
}

template <class Scalar>
BandMatrix<Scalar> to_band(const SparseHermitianMatrix<Scalar>& sparse) {
  BandMatrix<Scalar> out(sparse.dimension(),
                         std::min(sparse.bandwidth(), sparse.dimension() - 1));
  for (const auto& t : sparse.triplets()) out.set(t.col, t.row, detail::conj(t.value));
  return out;
}

template <class Scalar>
SparseHermitianMatrix<Scalar> permuted(const SparseHermitianMatrix<Scalar>& matrix,
                                       const std::vector<std::size_t>& permutation) {
  const std::size_t n = matrix.dimension();
  if (permutation.size() != n) throw PreconditionError("permuted: permutation size mismatch");
  std::vector<char> seen(n, 0);
  for (auto p : permutation) {
    if (p >= n || seen[p]) throw PreconditionError("permuted: not a permutation");
    seen[p] = 1;
  }
  SparseHermitianMatrix<Scalar> out(n);
  out.reserve(matrix.triplets().size());
  for (const auto& t : matrix.triplets()) {
    out.add(permutation[t.row], permutation[t.col], t.value);
  }
  out.finalize();
  return out;
}

template class SparseHermitianMatrix<double>;
template class SparseHermitianMatrix<std::complex<double>>;

template SparseHermitianMatrix<double> to_sparse(const BandMatrix<double>&);
template SparseHermitianMatrix<std::complex<double>> to_sparse(
    const BandMatrix<std::complex<double>>&);
template BandMatrix<double> to_band(const SparseHermitianMatrix<double>&);
template BandMatrix<std::complex<double>> to_band(
    const SparseHermitianMatrix<std::complex<double>>&);
template SparseHermitianMatrix<double> permuted(const SparseHermitianMatrix<double>&,
                                                const std::vector<std::size_t>&);
template SparseHermitianMatrix<std::complex<double>> permuted(
    const SparseHermitianMatrix<std::complex<double>>&, const std::vector<std::size_t>&);

}  // namespace maglab::linalg
