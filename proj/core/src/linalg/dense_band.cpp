#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "maglab/errors.hpp"
#include "maglab/linalg/eigensolvers.hpp"
#include "scalar_traits.hpp"

namespace maglab::linalg {
namespace {

using cplx = std::complex<double>;

template <class Scalar>
using DenseBlock = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
double residual_of(const BandMatrix<Scalar>& a, const Scalar* v, double lambda,
                   std::vector<Scalar>& work) {
  const std::size_t n = a.dimension();
  a.multiply({v, n}, work);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::norm(work[i] - lambda * v[i]);
  return std::sqrt(sum);
}

// Eigenvalues only, through the LAPACK band drivers.
std::vector<double> band_eigenvalues(const BandMatrix<double>& a, int count) {
  const auto n = static_cast<lapack_int>(a.dimension());
  const auto kd = static_cast<lapack_int>(a.bandwidth());
  const lapack_int ldab = kd + 1;
  std::vector<double> ab(static_cast<std::size_t>(ldab) * n, 0.0);
  for (lapack_int d = 0; d <= kd; ++d) {
    const auto values = a.band(static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < values.size(); ++j) ab[d + j * ldab] = values[j];
  }
  std::vector<double> w(n);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  double q = 0.0;
  double z = 0.0;
  const lapack_int info =
      LAPACKE_dsbevx(LAPACK_COL_MAJOR, 'N', 'I', 'L', n, kd, ab.data(), ldab, &q, 1, 0.0, 0.0, 1,
                     count, 2 * LAPACKE_dlamch('S'), &found, w.data(), &z, 1, ifail.data());
  if (info != 0 || found != count) {
    throw ConvergenceError("dsbevx failed (info " + std::to_string(info) + ")", {});
  }
  w.resize(count);
  return w;
}

std::vector<double> band_eigenvalues(const BandMatrix<cplx>& a, int count) {
  const auto n = static_cast<lapack_int>(a.dimension());
  const auto kd = static_cast<lapack_int>(a.bandwidth());
  const lapack_int ldab = kd + 1;
  std::vector<cplx> ab(static_cast<std::size_t>(ldab) * n);
  for (lapack_int d = 0; d <= kd; ++d) {
    const auto values = a.band(static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < values.size(); ++j) ab[d + j * ldab] = values[j];
  }
  std::vector<double> w(n);
  std::vector<lapack_int> ifail(n);
  lapack_int found = 0;
  cplx q;
  cplx z;
  const lapack_int info =
      LAPACKE_zhbevx(LAPACK_COL_MAJOR, 'N', 'I', 'L', n, kd, ab.data(), ldab, &q, 1, 0.0, 0.0, 1,
                     count, 2 * LAPACKE_dlamch('S'), &found, w.data(), &z, 1, ifail.data());
  if (info != 0 || found != count) {
    throw ConvergenceError("zhbevx failed (info " + std::to_string(info) + ")", {});
  }
  w.resize(count);
  return w;
}

lapack_int band_lu(lapack_int n, lapack_int kd, std::vector<double>& ab, std::vector<lapack_int>& ipiv) {
  return LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, ab.data(), 3 * kd + 1, ipiv.data());
}
lapack_int band_lu(lapack_int n, lapack_int kd, std::vector<cplx>& ab, std::vector<lapack_int>& ipiv) {
  return LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n, n, kd, kd, ab.data(), 3 * kd + 1, ipiv.data());
}
lapack_int band_solve(lapack_int n, lapack_int kd, const std::vector<double>& ab,
                      const std::vector<lapack_int>& ipiv, double* rhs) {
  return LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, ab.data(), 3 * kd + 1, ipiv.data(),
                        rhs, n);
}
lapack_int band_solve(lapack_int n, lapack_int kd, const std::vector<cplx>& ab,
                      const std::vector<lapack_int>& ipiv, cplx* rhs) {
  return LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', n, kd, kd, 1, ab.data(), 3 * kd + 1, ipiv.data(),
                        rhs, n);
}

template <class Scalar>
Scalar start_entry(std::minstd_rand& gen) {
  const double scale = 2.0 / static_cast<double>(std::minstd_rand::max());
  if constexpr (std::is_same_v<Scalar, double>) {
    return static_cast<double>(gen()) * scale - 1.0;
  } else {
    const double re = static_cast<double>(gen()) * scale - 1.0;
    const double im = static_cast<double>(gen()) * scale - 1.0;
    return {re, im};
  }
}

// Inverse iteration on the band LU of (A - sigma I), with Gram-Schmidt against
// previously accepted vectors of nearby eigenvalues.
template <class Scalar>
void inverse_iteration(const BandMatrix<Scalar>& a, const std::vector<double>& values,
                       double norm, DenseBlock<Scalar>& vectors, std::vector<double>& residuals) {
  const auto n = static_cast<lapack_int>(a.dimension());
  const auto kd = static_cast<lapack_int>(a.bandwidth());
  const lapack_int ldab = 3 * kd + 1;
  const double target = 1e-10 * norm;
  const double cluster = 1e-3 * norm;
  std::vector<Scalar> ab(static_cast<std::size_t>(ldab) * n);
  std::vector<lapack_int> ipiv(n);
  std::vector<Scalar> work(n);
  vectors.resize(n, static_cast<Eigen::Index>(values.size()));

  for (std::size_t k = 0; k < values.size(); ++k) {
    double sigma = values[k];
    lapack_int info = 1;
    for (int attempt = 0; attempt < 4 && info != 0; ++attempt) {
      std::fill(ab.begin(), ab.end(), Scalar{});
      for (lapack_int d = 0; d <= kd; ++d) {
        const auto sub = a.band(static_cast<std::size_t>(d));
        for (std::size_t j = 0; j < sub.size(); ++j) {
          const auto col = static_cast<lapack_int>(j);
          const lapack_int row = col + d;
          Scalar value = sub[j];
          if (d == 0) value -= sigma;
          ab[2 * kd + row - col + col * ldab] = value;
          if (d > 0) ab[2 * kd + col - row + row * ldab] = detail::conj(sub[j]);
        }
      }
      info = band_lu(n, kd, ab, ipiv);
      if (info > 0) sigma += (attempt + 1) * 1e-14 * norm;
    }
    if (info != 0) throw ConvergenceError("band LU failed during inverse iteration", {});

    std::minstd_rand gen(static_cast<std::uint32_t>(12345 + k));
    auto col = vectors.col(static_cast<Eigen::Index>(k));
    for (lapack_int i = 0; i < n; ++i) col[i] = start_entry<Scalar>(gen);
    col.normalize();

    double best = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 8; ++iter) {
      if (band_solve(n, kd, ab, ipiv, col.data()) != 0) {
        throw ConvergenceError("band solve failed during inverse iteration", {});
      }
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
          if (std::abs(values[j] - values[k]) > cluster) continue;
          const auto other = vectors.col(static_cast<Eigen::Index>(j));
          col -= other * other.dot(col);
        }
      }
      col.normalize();
      best = std::min(best, residual_of(a, col.data(), values[k], work));
      if (best <= target && iter >= 1) break;
    }
    residuals[k] = best;
  }
}

template <class Scalar>
EigenSolveReport<Scalar> diagonal_solve(const BandMatrix<Scalar>& matrix, int count,
                                        bool want_vectors) {
  const std::size_t n = matrix.dimension();
  const auto diag = matrix.band(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return detail::real(diag[i]) < detail::real(diag[j]);
  });
  EigenSolveReport<Scalar> report;
  report.converged = true;
  report.residual_norms.assign(count, 0.0);
  for (int k = 0; k < count; ++k) report.eigenvalues.push_back(detail::real(diag[order[k]]));
  if (want_vectors) {
    DenseBlock<Scalar> v = DenseBlock<Scalar>::Zero(static_cast<Eigen::Index>(n), count);
    for (int k = 0; k < count; ++k) v(static_cast<Eigen::Index>(order[k]), k) = Scalar(1);
    report.eigenvectors = std::move(v);
  }
  return report;
}

template <class Scalar>
EigenSolveReport<Scalar> tridiagonal_solve(const BandMatrix<Scalar>& matrix, int count) {
  const auto n = static_cast<lapack_int>(matrix.dimension());
  const auto diag = matrix.band(0);
  const auto sub = matrix.band(1);
  std::vector<double> d(n);
  std::vector<double> e(n, 0.0);
  // Diagonal unitary that makes the off-diagonal real and nonnegative.
  std::vector<Scalar> phase(n, Scalar(1));
  for (lapack_int i = 0; i < n; ++i) d[i] = detail::real(diag[i]);
  for (lapack_int i = 0; i + 1 < n; ++i) {
    const double mag = std::abs(sub[i]);
    e[i] = mag;
    phase[i + 1] = mag > 0.0 ? phase[i] * (sub[i] / mag) : phase[i];
  }
  std::vector<double> w(n);
  std::vector<double> z(static_cast<std::size_t>(n) * count);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0, 0.0, 1, count,
                     LAPACKE_dlamch('S'), &found, w.data(), z.data(), n, isuppz.data());
  if (info != 0 || found != count) {
    throw ConvergenceError("dstevr failed (info " + std::to_string(info) + ")", {});
  }
  EigenSolveReport<Scalar> report;
  report.eigenvalues.assign(w.begin(), w.begin() + count);
  DenseBlock<Scalar> v(n, count);
  for (int k = 0; k < count; ++k) {
    for (lapack_int i = 0; i < n; ++i) v(i, k) = phase[i] * z[i + static_cast<std::size_t>(k) * n];
  }
  report.eigenvectors = std::move(v);
  return report;
}

}  // namespace

template <class Scalar>
EigenSolveReport<Scalar> dense_band_eigensolve(const BandMatrix<Scalar>& matrix, int count,
                                               bool want_vectors) {
  const std::size_t n = matrix.dimension();
  if (count < 1 || static_cast<std::size_t>(count) > n) {
    throw PreconditionError("dense_band_eigensolve: count " + std::to_string(count) +
                            " outside [1, " + std::to_string(n) + "]");
  }
  if (!matrix.all_finite()) throw PreconditionError("dense_band_eigensolve: non-finite entries");
  if (matrix.bandwidth() == 0) return diagonal_solve(matrix, count, want_vectors);

  const double norm = std::max(matrix.norm_bound(), std::numeric_limits<double>::min());
  EigenSolveReport<Scalar> report;
  report.residual_norms.assign(count, 0.0);
  if (matrix.bandwidth() == 1) {
    report = tridiagonal_solve(matrix, count);
    report.residual_norms.resize(count);
    std::vector<Scalar> work(n);
    for (int k = 0; k < count; ++k) {
      report.residual_norms[k] =
          residual_of(matrix, report.eigenvectors->col(k).data(), report.eigenvalues[k], work);
    }
  } else {
    report.eigenvalues = band_eigenvalues(matrix, count);
    DenseBlock<Scalar> v;
    inverse_iteration(matrix, report.eigenvalues, norm, v, report.residual_norms);
    report.eigenvectors = std::move(v);
  }
  report.iterations = 1;
  const double target = 1e-10 * norm;
  report.converged = std::all_of(report.residual_norms.begin(), report.residual_norms.end(),
                                 [&](double r) { return r <= target; });
  if (!report.converged) {
    throw ConvergenceError("dense_band_eigensolve: residuals above 1e-10*||A||",
                           report.residual_norms);
  }
  if (!want_vectors) report.eigenvectors.reset();
  return report;
}

template EigenSolveReport<double> dense_band_eigensolve(const BandMatrix<double>&, int, bool);
template EigenSolveReport<cplx> dense_band_eigensolve(const BandMatrix<cplx>&, int, bool);

}  // namespace maglab::linalg
