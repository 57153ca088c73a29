#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_complex.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace qpulse {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// 113-bit significand float used wherever high-order numerical derivatives
/// of the dispersion relation are taken.
using quad = boost::multiprecision::cpp_bin_float_quad;

template <class Real>
struct complex_of {
  using type = std::complex<Real>;
};
template <>
struct complex_of<quad> {
  using type = boost::multiprecision::cpp_complex_quad;
};
template <class Real>
using complex_t = typename complex_of<Real>::type;

template <class Z>
cplx to_cplx(const Z& z) {
  return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Pairwise (cascade) summation of term(i) for i in [first, last).
/// Evaluation order depends only on the index range, so results are
/// reproducible and the rounding error grows as O(log n).
template <class T, class Term>
T pairwise_sum(std::size_t first, std::size_t last, const Term& term) {
  const std::size_t n = last - first;
  if (n == 0) return T{};
  if (n <= 8) {
    T acc = term(first);
    for (std::size_t i = first + 1; i < last; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = first + n / 2;
  return pairwise_sum<T>(first, mid, term) + pairwise_sum<T>(mid, last, term);
}

/// (exp(z) - 1) / z without cancellation near z = 0.
inline cplx expm1_over(cplx z) {
  if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  return (std::exp(z) - 1.0) / z;
}

inline double l2_norm(std::span<const cplx> a) {
  return std::sqrt(pairwise_sum<double>(0, a.size(), [&](std::size_t i) { return std::norm(a[i]); }));
}

}  // namespace qpulse
