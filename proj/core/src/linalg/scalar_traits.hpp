#pragma once

#include <cmath>
#include <complex>

namespace maglab::linalg::detail {

inline double conj(double v) { return v; }
inline std::complex<double> conj(std::complex<double> v) { return std::conj(v); }

inline double real(double v) { return v; }
inline double real(std::complex<double> v) { return v.real(); }

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(std::complex<double> v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}

}  // namespace maglab::linalg::detail
