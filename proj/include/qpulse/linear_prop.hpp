#pragma once

// Frequency-domain linear fields: Green function, forward/backward components
// from the spatial Langevin equations, electric field and polarization.

#include "qpulse/medium.hpp"
#include "qpulse/numeric.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpulse {

enum class Direction { forward, backward };

/// One frequency component on a uniform x grid. f is one c-number
/// realization of the Langevin force; the field arrays follow from it.
struct FrequencySlice {
  double omega = 0.0;
  double x_min = 0.0;
  double h_x = 0.0;
  cvec f;
  cvec a_fwd;
  cvec a_bwd;
  cvec e;
  cvec x_pol;

  static FrequencySlice make(double omega, double x_min, double x_max, std::size_t points) {
    if (points < 2) throw std::invalid_argument("FrequencySlice: need at least 2 grid points");
    if (!(x_max > x_min)) throw std::invalid_argument("FrequencySlice: x_max must exceed x_min");
    FrequencySlice s;
    s.omega = omega;
    s.x_min = x_min;
    s.h_x = (x_max - x_min) / static_cast<double>(points - 1);
    s.f.assign(points, cplx{});
    s.a_fwd.assign(points, cplx{});
    s.a_bwd.assign(points, cplx{});
    s.e.assign(points, cplx{});
    s.x_pol.assign(points, cplx{});
    return s;
  }

  std::size_t points() const { return f.size(); }
  double x(std::size_t j) const { return x_min + h_x * static_cast<double>(j); }
};

/// G_A(x, x', omega) = -i alpha sqrt(eps_i/eps) exp(i k |x - x'|), with the
/// omega-dependent factors evaluated once.
class GreenFunction {
 public:
  GreenFunction(const MediumModel& model, double omega)
      : k_(wavenumber(model, omega).k),
        prefactor_(-I * model.constants.alpha() * std::sqrt(cplx(permittivity(model, omega).imag()) / permittivity(model, omega))) {}

  cplx operator()(double x, double x_prime) const { return prefactor_ * std::exp(I * k_ * std::abs(x - x_prime)); }
  cplx k() const { return k_; }
  cplx prefactor() const { return prefactor_; }

 private:
  cplx k_;
  cplx prefactor_;
};

inline cplx green_A(const MediumModel& model, double x, double x_prime, double omega) {
  return GreenFunction(model, omega)(x, x_prime);
}

/// (eps0/rho) [ (eps - 1) E - 2 i alpha c sqrt(eps_i) f ]
inline cplx polarization(const MediumModel& model, cplx e_field, cplx f, double omega) {
  const cplx eps = permittivity(model, omega);
  const auto& pc = model.constants;
  return (pc.eps0 / model.rho) * ((eps - 1.0) * e_field - 2.0 * I * pc.alpha() * pc.c * std::sqrt(eps.imag()) * f);
}

/// Recomputes E = i omega (A_fwd + A_bwd) and the polarization from f.
inline void update_derived_fields(const MediumModel& model, FrequencySlice& slice) {
  const cplx eps = permittivity(model, slice.omega);
  const auto& pc = model.constants;
  const cplx noise_coeff = -2.0 * I * pc.alpha() * pc.c * std::sqrt(eps.imag());
  const double scale = pc.eps0 / model.rho;
  for (std::size_t j = 0; j < slice.points(); ++j) {
    slice.e[j] = I * slice.omega * (slice.a_fwd[j] + slice.a_bwd[j]);
    slice.x_pol[j] = scale * ((eps - 1.0) * slice.e[j] + noise_coeff * slice.f[j]);
  }
}

/// Integrates dA/dx = i k A - i alpha sqrt(eps_i/eps) f (forward) or its mirror
/// image (backward) cell by cell with an exact integrating factor, f being
/// constant on each cell and equal to its upstream node value. The upstream
/// boundary value defaults to zero (no incoming field).
inline void integrate_langevin(const MediumModel& model, FrequencySlice& slice, Direction direction,
                               cplx boundary = {}) {
  const std::size_t n = slice.points();
  if (n < 2) throw std::invalid_argument("integrate_langevin: grid needs at least 2 points");
  if (slice.a_fwd.size() != n || slice.a_bwd.size() != n || slice.e.size() != n || slice.x_pol.size() != n)
    throw std::invalid_argument("integrate_langevin: slice arrays are inconsistent");
  const GreenFunction green(model, slice.omega);
  const cplx k = green.k();
  const double h = slice.h_x;
  if (k.imag() * h > 1.0)
    throw std::invalid_argument("integrate_langevin: k_i h_x = " + std::to_string(k.imag() * h) +
                                " > 1, decay is under-resolved; use a finer x grid");
  const cplx step = std::exp(I * k * h);
  const cplx source = green.prefactor() * h * expm1_over(I * k * h);

  if (direction == Direction::forward) {
    auto& a = slice.a_fwd;
    a[0] = boundary;
    for (std::size_t j = 0; j + 1 < n; ++j) a[j + 1] = step * a[j] + source * slice.f[j];
  } else {
    auto& a = slice.a_bwd;
    a[n - 1] = boundary;
    for (std::size_t j = n - 1; j > 0; --j) a[j - 1] = step * a[j] + source * slice.f[j];
  }
  update_derived_fields(model, slice);
}

/// Per-omega contribution A(x, omega) + conj(A(x, omega)) at a grid node x.
inline std::vector<double> assemble_real_field(std::span<const FrequencySlice> slices, double x) {
  if (slices.empty()) return {};
  if (slices.size() > 2) {
    const double dw = slices[1].omega - slices[0].omega;
    for (std::size_t i = 2; i < slices.size(); ++i) {
      const double d = slices[i].omega - slices[i - 1].omega;
      if (std::abs(d - dw) > 1e-9 * std::abs(dw)) throw std::invalid_argument("assemble_real_field: non-uniform omega grid");
    }
  }
  std::vector<double> out;
  out.reserve(slices.size());
  for (const auto& s : slices) {
    const double pos = (x - s.x_min) / s.h_x;
    const double j = std::round(pos);
    if (std::abs(pos - j) > 1e-9 || j < 0 || j >= static_cast<double>(s.points()))
      throw std::invalid_argument("assemble_real_field: x is not a node of the slice grid");
    const auto idx = static_cast<std::size_t>(j);
    const cplx a = s.a_fwd[idx] + s.a_bwd[idx];
    out.push_back((a + std::conj(a)).real());
  }
  return out;
}

}  // namespace qpulse
