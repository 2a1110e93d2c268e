#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>

#include <fftw3.h>

#include "maglab/effective/effective.hpp"
#include "maglab/errors.hpp"

namespace maglab::effective {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double smooth_step(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

/// FFTW planning is not thread safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

QuantizedOperator1D quantize_1d(const EffectiveSymbolGrid& grid, int order, double hbar, int modes,
                                const QuantizeOptions& options) {
  if (order != 0 && order != 1) throw PreconditionError("quantize_1d: order must be 0 or 1");
  if (!(hbar > 0.0)) throw PreconditionError("quantize_1d: hbar must be positive");
  if (modes < 4 || modes % 2 != 0) throw PreconditionError("quantize_1d: modes must be even and >= 4");
  if (!(options.padding > 0.0)) throw PreconditionError("quantize_1d: padding must be positive");
  if (!grid.principal_fn) throw PreconditionError("quantize_1d: principal symbol not filled");
  if (order == 1 && !grid.has_subprincipal()) {
    throw PreconditionError("quantize_1d: order 1 needs the subprincipal symbol");
  }

  const int n_modes = modes;
  const int samples = 4 * n_modes;
  const double c = 0.5 * (grid.x_min() + grid.x_max());
  const double half = 0.5 * (grid.x_max() - grid.x_min());
  const double period_half = half * (1.0 + options.padding);
  const double dxi = hbar * M_PI / (2.0 * period_half);
  const double xi_extent = dxi * n_modes;
  if (-xi_extent < grid.xi_grid.front() - 1e-12 || dxi * (n_modes - 2) > grid.xi_grid.back() + 1e-12) {
    throw RangeError("quantize_1d: the Weyl lattice reaches |xi| = " + fmt(xi_extent) +
                     " but the symbol grid covers xi in [" + fmt(grid.xi_grid.front()) + ", " +
                     fmt(grid.xi_grid.back()) + "]");
  }

  const auto symbol = [&](double x, double xi) {
    double a = grid.principal_fn(x, xi);
    if (order == 1) a += hbar * grid.subprincipal_fn(x, xi);
    return a;
  };

  // Sample points x_j = c - L + 2L j / M; inside the window the symbol itself,
  // in the padding a smooth blend from the right edge value to the left one.
  std::vector<double> xs(samples);
  std::vector<int> inside(samples);
  std::vector<double> blend(samples);
  for (int j = 0; j < samples; ++j) {
    const double x = c - period_half + 2.0 * period_half * j / samples;
    xs[j] = x;
    inside[j] = std::abs(x - c) <= half;
    double s = x > c ? x - (c + half) : x + 2.0 * period_half - (c + half);
    blend[j] = smooth_step(s / (2.0 * (period_half - half)));
  }

  const int shifts = 2 * n_modes - 1;  // s = m + n in [-N, N - 2]
  const int spectrum_len = samples / 2 + 1;
  std::vector<std::complex<double>> transforms(static_cast<std::size_t>(shifts) * spectrum_len);
  Eigen::MatrixXd values(shifts, samples);

  double* in = fftw_alloc_real(samples);
  fftw_complex* out = fftw_alloc_complex(spectrum_len);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_dft_r2c_1d(samples, in, out, FFTW_ESTIMATE);
  }
  for (int si = 0; si < shifts; ++si) {
    const double xi = dxi * (si - n_modes);
    const double left = symbol(c - half, xi);
    const double right = symbol(c + half, xi);
    for (int j = 0; j < samples; ++j) {
      in[j] = inside[j] ? symbol(xs[j], xi) : (1.0 - blend[j]) * right + blend[j] * left;
      values(si, j) = in[j];
    }
    fftw_execute(plan);
    for (int k = 0; k < spectrum_len; ++k) {
      transforms[static_cast<std::size_t>(si) * spectrum_len + k] = {out[k][0], out[k][1]};
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  if (options.energy_top) {
    const double top = *options.energy_top;
    double a_min = INFINITY;
    for (int si = 0; si < shifts; ++si) {
      for (int j = 0; j < samples; ++j) {
        if (inside[j]) a_min = std::min(a_min, values(si, j));
      }
    }
    if (!(top > a_min)) {
      throw PreconditionError("quantize_1d: energy_top " + fmt(top) + " is below the symbol minimum " +
                              fmt(a_min));
    }
    const double limit = options.aliasing_threshold * (top - a_min);
    for (int si = 0; si < shifts; ++si) {
      const double xi = dxi * (si - n_modes);
      for (int j = 0; j < samples; ++j) {
        if (!inside[j]) continue;
        const double a = values(si, j);
        if (a <= top && (std::abs(xs[j] - c) > half / 1.2 || std::abs(xi) > xi_extent / 1.2)) {
          throw RangeError("quantize_1d: allowed region {a <= " + fmt(top) + "} reaches (x, xi) = (" +
                           fmt(xs[j]) + ", " + fmt(xi) + "), outside the 20% coverage margin");
        }
        auto check = [&](double b, const char* axis) {
          if (std::min(a, b) <= top && std::abs(b - a) > limit) {
            throw ResolutionError(std::string("quantize_1d: symbol changes by ") + fmt(std::abs(b - a)) +
                                  " between neighbouring " + axis + " samples at (x, xi) = (" +
                                  fmt(xs[j]) + ", " + fmt(xi) + "); increase the modes");
          }
        };
        if (si + 1 < shifts) check(values(si + 1, j), "xi");
        if (j + 1 < samples && inside[j + 1]) check(values(si, j + 1), "x");
      }
    }
  }

  QuantizedOperator1D op;
  op.hbar = hbar;
  op.x_min = grid.x_min();
  op.x_max = grid.x_max();
  op.period_half_width = period_half;
  op.modes = n_modes;
  op.band = grid.band;
  op.order = order;
  op.matrix.resize(n_modes, n_modes);
  for (int m = 0; m < n_modes; ++m) {
    for (int n = 0; n < n_modes; ++n) {
      const int diff = m - n;
      const int si = m + n;  // (m - N/2) + (n - N/2) + N
      auto f = transforms[static_cast<std::size_t>(si) * spectrum_len + std::abs(diff)];
      if (diff < 0) f = std::conj(f);
      op.matrix(m, n) = (diff % 2 == 0 ? 1.0 : -1.0) * f / static_cast<double>(samples);
    }
  }
  op.symmetry_defect = (op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff();
  op.matrix = 0.5 * (op.matrix + op.matrix.adjoint()).eval();
  return op;
}

SpectrumResult quantized_spectrum(const QuantizedOperator1D& op, int count, double h,
                                  double energy_max) {
  if (op.matrix.rows() == 0) throw PreconditionError("quantized_spectrum: empty operator");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(op.matrix);
  if (solver.info() != Eigen::Success) throw NumericalError("quantized_spectrum: eigensolver failed");
  const auto& values = solver.eigenvalues();
  const int total = static_cast<int>(values.size());
  int keep = 0;
  if (count > 0) {
    keep = std::min(count, total);
  } else {
    while (keep < total && values[keep] <= energy_max) ++keep;
  }
  SpectrumResult out;
  out.source = "quantize_1d";
  out.h = h;
  out.band = op.band;
  out.tolerance = 1e-10;
  for (int i = 0; i < keep; ++i) {
    out.eigenvalues.push_back(values[i]);
    out.indices.push_back(i);
    const auto v = solver.eigenvectors().col(i);
    out.residuals.push_back((op.matrix * v - values[i] * v).norm());
  }
  return out;
}

}  // namespace maglab::effective
