#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <type_traits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "maglab/errors.hpp"
#include "maglab/linalg/eigensolvers.hpp"

namespace maglab::linalg {
namespace {

using cplx = std::complex<double>;

template <class Scalar>
using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
Block<Scalar> start_block(Eigen::Index n, Eigen::Index m, std::uint32_t seed) {
  std::minstd_rand gen(seed);
  const double scale = 2.0 / static_cast<double>(std::minstd_rand::max());
  auto draw = [&] { return static_cast<double>(gen()) * scale - 1.0; };
  Block<Scalar> x(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        x(i, j) = draw();
      } else {
        const double re = draw();
        x(i, j) = cplx(re, draw());
      }
    }
  }
  return x;
}

// Orthonormalizes the columns of u in place (SVQB); nearly dependent
// directions are dropped, so u may lose columns.
template <class Scalar>
void svqb(Block<Scalar>& u) {
  if (u.cols() == 0) return;
  Block<Scalar> gram = u.adjoint() * u;
  Eigen::VectorXd scale(gram.rows());
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    const double d = std::real(gram(i, i));
    scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  gram = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Block<Scalar>> eig(gram);
  const Eigen::VectorXd theta = eig.eigenvalues();
  const double cutoff = std::max(theta.maxCoeff(), 0.0) * 1e-13;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (theta[i] > cutoff) keep.push_back(i);
  }
  Block<Scalar> transform(u.cols(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    transform.col(static_cast<Eigen::Index>(c)) =
        eig.eigenvectors().col(keep[c]) / std::sqrt(theta[keep[c]]);
  }
  u = u * (scale.asDiagonal() * transform);
}

template <class Scalar>
void project_out(const Block<Scalar>& basis, Block<Scalar>& u) {
  if (basis.cols() == 0 || u.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) u -= basis * (basis.adjoint() * u);
}

// Cholesky factor of A + shift I in LAPACK upper band storage.
template <class Scalar>
class BandCholesky {
 public:
  BandCholesky(const SparseHermitianMatrix<Scalar>& a, double fallback_shift)
      : n_(static_cast<lapack_int>(a.dimension())),
        kd_(static_cast<lapack_int>(a.bandwidth())) {
    const double entries = static_cast<double>(kd_ + 1) * static_cast<double>(n_);
    if (entries > 4e8) {
      throw PreconditionError("band Cholesky preconditioner: band storage of " +
                              std::to_string(entries) + " entries is too large");
    }
    if (!factor(a, 0.0) && !factor(a, fallback_shift)) {
      throw NumericalError("band Cholesky preconditioner: matrix not positive definite after shift");
    }
  }

  void apply(Block<Scalar>& v) const {
    if (v.cols() == 0) return;
    const auto nrhs = static_cast<lapack_int>(v.cols());
    lapack_int info;
    if constexpr (std::is_same_v<Scalar, double>) {
      info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'U', n_, kd_, nrhs, ab_.data(), kd_ + 1, v.data(), n_);
    } else {
      info = LAPACKE_zpbtrs(LAPACK_COL_MAJOR, 'U', n_, kd_, nrhs, ab_.data(), kd_ + 1, v.data(), n_);
    }
    if (info != 0) throw NumericalError("band Cholesky preconditioner: ?pbtrs failed");
  }

 private:
  bool factor(const SparseHermitianMatrix<Scalar>& a, double shift) {
    const lapack_int ldab = kd_ + 1;
    ab_.assign(static_cast<std::size_t>(ldab) * static_cast<std::size_t>(n_), Scalar(0));
    for (const auto& t : a.triplets()) {
      const auto i = static_cast<lapack_int>(t.row);
      const auto j = static_cast<lapack_int>(t.col);
      ab_[static_cast<std::size_t>(kd_ + i - j) + static_cast<std::size_t>(j) * ldab] += t.value;
    }
    for (lapack_int j = 0; j < n_; ++j) {
      ab_[static_cast<std::size_t>(kd_) + static_cast<std::size_t>(j) * ldab] += shift;
    }
    lapack_int info;
    if constexpr (std::is_same_v<Scalar, double>) {
      info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'U', n_, kd_, ab_.data(), ldab);
    } else {
      info = LAPACKE_zpbtrf(LAPACK_COL_MAJOR, 'U', n_, kd_, ab_.data(), ldab);
    }
    return info == 0;
  }

  lapack_int n_;
  lapack_int kd_;
  std::vector<Scalar> ab_;
};

template <class Scalar>
EigenSolveReport<Scalar> dense_fallback(const SparseHermitianMatrix<Scalar>& a, int count,
                                        double tol, const SparseSolveOptions& options) {
  Eigen::SelfAdjointEigenSolver<Block<Scalar>> eig(a.to_dense());
  if (eig.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", {});
  EigenSolveReport<Scalar> report;
  report.eigenvalues.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + count);
  Block<Scalar> v = eig.eigenvectors().leftCols(count);
  report.residual_norms = residual_norms(a, report.eigenvalues, v);
  report.iterations = 0;
  if (options.lower_bound &&
      report.eigenvalues.front() < *options.lower_bound - 1e-10 * std::max(1.0, a.norm_bound())) {
    throw PreconditionError("sparse_eigensolve_smallest: eigenvalue " +
                            std::to_string(report.eigenvalues.front()) +
                            " below the supplied lower bound");
  }
  report.converged = std::all_of(report.residual_norms.begin(), report.residual_norms.end(),
                                 [&](double r) { return r <= tol; });
  if (!report.converged) {
    throw ConvergenceError("dense fallback residuals exceed the requested tolerance",
                           report.residual_norms);
  }
  if (options.want_vectors) report.eigenvectors = std::move(v);
  return report;
}

}  // namespace

template <class Scalar>
std::vector<double> residual_norms(const SparseHermitianMatrix<Scalar>& matrix,
                                   const std::vector<double>& eigenvalues,
                                   const Block<Scalar>& v) {
  if (v.cols() != static_cast<Eigen::Index>(eigenvalues.size())) {
    throw PreconditionError("residual_norms: column count mismatch");
  }
  Block<Scalar> av;
  matrix.multiply(v, av);
  std::vector<double> out(eigenvalues.size());
  for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    out[k] = (av.col(j) - eigenvalues[k] * v.col(j)).norm() / v.col(j).norm();
  }
  return out;
}

template <class Scalar>
EigenSolveReport<Scalar> sparse_eigensolve_smallest(const SparseHermitianMatrix<Scalar>& a,
                                                    int count, double tol,
                                                    Preconditioner preconditioner,
                                                    const SparseSolveOptions& options) {
  if (!a.finalized()) throw PreconditionError("sparse_eigensolve_smallest: matrix not finalized");
  const auto n = static_cast<Eigen::Index>(a.dimension());
  if (count < 1 || count > n) {
    throw PreconditionError("sparse_eigensolve_smallest: count " + std::to_string(count) +
                            " outside [1, " + std::to_string(n) + "]");
  }
  if (!(tol > 0.0)) throw PreconditionError("sparse_eigensolve_smallest: tol must be positive");

  const Eigen::Index m = std::min<Eigen::Index>(count + std::max(options.block_padding, 0), n);
  if (n <= options.dense_threshold || 3 * m >= n) return dense_fallback(a, count, tol, options);

  const double gl = a.gershgorin_lower();
  const double shift = gl < 0.0 ? 1.0 + std::abs(gl) : 0.0;
  const double bound_slack = 1e-10 * std::max(1.0, a.norm_bound());
  Eigen::VectorXd inv_diag = Eigen::VectorXd::Ones(n);
  std::optional<BandCholesky<Scalar>> cholesky;
  if (preconditioner == Preconditioner::band_cholesky) cholesky.emplace(a, 1.0 + std::abs(gl));
  if (preconditioner == Preconditioner::jacobi) {
    const Eigen::VectorXd d = a.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = d[i] + shift;
      inv_diag[i] = s > 0.0 ? 1.0 / s : 1.0;
    }
  }

  Block<Scalar> x = start_block<Scalar>(n, m, options.seed);
  svqb(x);
  svqb(x);
  if (x.cols() < m) throw NumericalError("sparse_eigensolve_smallest: degenerate start block");

  Block<Scalar> ax;
  Block<Scalar> aw;
  Block<Scalar> ap;
  Block<Scalar> p(n, 0);
  Eigen::VectorXd theta;

  auto rayleigh_ritz = [&](Block<Scalar>& basis, const Block<Scalar>& abasis, Eigen::Index keep,
                           Block<Scalar>& coeffs) {
    Block<Scalar> g = basis.adjoint() * abasis;
    g = (0.5 * (g + g.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Block<Scalar>> eig(g);
    if (eig.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolve failed");
    theta = eig.eigenvalues().head(keep);
    coeffs = eig.eigenvectors().leftCols(keep);
  };

  a.multiply(x, ax);
  {
    Block<Scalar> c;
    rayleigh_ritz(x, ax, m, c);
    x = x * c;
    a.multiply(x, ax);
  }

  std::vector<double> best(count, std::numeric_limits<double>::infinity());
  std::vector<double> history;
  EigenSolveReport<Scalar> report;

  int iteration = 0;
  bool converged = false;
  for (; iteration < options.max_iterations; ++iteration) {
    Block<Scalar> r = ax - x * theta.asDiagonal();
    Eigen::VectorXd res(m);
    for (Eigen::Index j = 0; j < m; ++j) res[j] = r.col(j).norm();

    if (options.lower_bound && theta[0] < *options.lower_bound - bound_slack) {
      throw PreconditionError("sparse_eigensolve_smallest: Rayleigh quotient " +
                              std::to_string(theta[0]) + " below the supplied lower bound " +
                              std::to_string(*options.lower_bound));
    }

    double worst = 0.0;
    for (int j = 0; j < count; ++j) {
      best[j] = std::min(best[j], res[j]);
      worst = std::max(worst, res[j]);
    }
    if (worst <= tol) {
      converged = true;
      break;
    }
    history.push_back(worst);
    const auto window = static_cast<std::size_t>(std::max(options.stagnation_window, 1));
    if (history.size() > window) {
      const auto split = history.end() - static_cast<std::ptrdiff_t>(window);
      const double before = *std::min_element(history.begin(), split);
      const double recent = *std::min_element(split, history.end());
      if (recent > options.stagnation_factor * before) {
        throw ConvergenceError("sparse_eigensolve_smallest: stagnated at iteration " +
                                   std::to_string(iteration) + " (residual " +
                                   std::to_string(recent) + ")",
                               best);
      }
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j >= count || res[j] > tol) active.push_back(j);
    }
    Block<Scalar> w(n, static_cast<Eigen::Index>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c) {
      w.col(static_cast<Eigen::Index>(c)) = inv_diag.asDiagonal() * r.col(active[c]);
    }
    if (cholesky) cholesky->apply(w);
    project_out(x, w);
    svqb(w);
    project_out(x, w);
    svqb(w);
    a.multiply(w, aw);

    if (p.cols() > 0) {
      project_out(x, p);
      project_out(w, p);
      svqb(p);
      a.multiply(p, ap);
    }

    const Eigen::Index sw = w.cols();
    const Eigen::Index sp = p.cols();
    Block<Scalar> s(n, m + sw + sp);
    Block<Scalar> as(n, m + sw + sp);
    s << x, w, p;
    as << ax, aw, (sp > 0 ? ap : Block<Scalar>(n, 0));

    Block<Scalar> c;
    rayleigh_ritz(s, as, m, c);
    Block<Scalar> x_next = s * c;
    p = s.rightCols(sw + sp) * c.bottomRows(sw + sp);
    x = std::move(x_next);
    // The basis is orthonormal only up to rounding; re-orthonormalize X so the
    // Ritz vectors stay an orthonormal set over thousands of iterations.
    if (iteration % 10 == 9) {
      svqb(x);
      if (x.cols() < m) throw NumericalError("sparse_eigensolve_smallest: Ritz block collapsed");
    }
    a.multiply(x, ax);
    if (iteration % 10 == 9) {
      Block<Scalar> c2;
      rayleigh_ritz(x, ax, m, c2);
      x = x * c2;
      a.multiply(x, ax);
    }
  }

  report.iterations = iteration;
  if (!converged) {
    throw ConvergenceError("sparse_eigensolve_smallest: iteration cap " +
                               std::to_string(options.max_iterations) + " reached",
                           best);
  }
  report.converged = true;
  report.eigenvalues.assign(theta.data(), theta.data() + count);
  Block<Scalar> v = x.leftCols(count);
  report.residual_norms = residual_norms(a, report.eigenvalues, v);
  if (options.want_vectors) report.eigenvectors = std::move(v);
  return report;
}

template EigenSolveReport<double> sparse_eigensolve_smallest(const SparseHermitianMatrix<double>&,
                                                             int, double, Preconditioner,
                                                             const SparseSolveOptions&);
template EigenSolveReport<cplx> sparse_eigensolve_smallest(const SparseHermitianMatrix<cplx>&, int,
                                                           double, Preconditioner,
                                                           const SparseSolveOptions&);
template std::vector<double> residual_norms(const SparseHermitianMatrix<double>&,
                                            const std::vector<double>&, const Block<double>&);
template std::vector<double> residual_norms(const SparseHermitianMatrix<cplx>&,
                                            const std::vector<double>&, const Block<cplx>&);

}  // namespace maglab::linalg
