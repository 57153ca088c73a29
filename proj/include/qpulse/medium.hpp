#pragma once

// Linear matter description: Lorentz-oscillator permittivity, complex
// wavenumber, narrow-band Taylor expansion and Kramers-Kronig validation.

#include "qpulse/fft.hpp"
#include "qpulse/numeric.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpulse {

struct PhysicalConstants {
  double c = 299792458.0;           // m/s
  double eps0 = 8.8541878128e-12;   // F/m
  double hbar = 1.054571817e-34;    // J s
  double area = 1e-12;              // transverse normalization area, m^2

  /// Field normalization constant, sqrt(hbar / (4 pi c^2 eps0 area)).
  double alpha() const { return std::sqrt(hbar / (4.0 * pi * c * c * eps0 * area)); }

  void validate() const {
    if (!(c > 0 && eps0 > 0 && hbar > 0 && area > 0))
      throw std::invalid_argument("physical constants must be strictly positive");
  }
};

/// One Lorentz term plasma_sq / (omega_r^2 - omega^2 - i gamma omega).
struct Resonance {
  double plasma_sq = 0.0;  // rad^2/s^2
  double omega_r = 0.0;    // rad/s
  double gamma = 0.0;      // rad/s
};

struct MediumModel {
  std::vector<Resonance> resonances;
  double eps_background = 1.0;
  double rho = 1.0;
  PhysicalConstants constants;

  /// Lorentz sum evaluated in arithmetic of type Real. No domain checks.
  template <class Real = double>
  complex_t<Real> eps(const Real& omega) const {
    complex_t<Real> value(Real(eps_background), Real(0));
    for (const auto& r : resonances) {
      const Real wr(r.omega_r);
      complex_t<Real> denom(wr * wr - omega * omega, -Real(r.gamma) * omega);
      value += complex_t<Real>(Real(r.plasma_sq), Real(0)) / denom;
    }
    return value;
  }

  /// Principal-branch wavenumber (omega/c) sqrt(eps); throws on real-negative eps.
  template <class Real = double>
  complex_t<Real> k(const Real& omega) const {
    using std::sqrt;
    const auto e = eps<Real>(omega);
    if (e.imag() == 0 && e.real() < 0)
      throw std::domain_error("wavenumber: permittivity is real and negative (metallic band), "
                              "no decaying forward branch");
    return sqrt(e) * (omega / Real(constants.c));
  }

  /// sqrt(eps_i / eps), the noise-coupling factor of the Langevin equations.
  template <class Real = double>
  complex_t<Real> loss_factor(const Real& omega) const {
    using std::sqrt;
    const auto e = eps<Real>(omega);
    return sqrt(complex_t<Real>(e.imag(), Real(0)) / e);
  }

  bool has_undamped_resonance() const {
    return std::any_of(resonances.begin(), resonances.end(),
                       [](const Resonance& r) { return !(r.gamma > 0); });
  }

  void validate() const {
    constants.validate();
    if (!(eps_background >= 1.0)) throw std::invalid_argument("medium: eps_background must be >= 1");
    if (!(rho > 0)) throw std::invalid_argument("medium: rho must be positive");
    for (const auto& r : resonances) {
      if (!(r.plasma_sq >= 0)) throw std::invalid_argument("medium: plasma strength must be >= 0 (gain media unsupported)");
      if (!(r.omega_r > 0)) throw std::invalid_argument("medium: resonance frequency must be positive");
      if (!(r.gamma >= 0)) throw std::invalid_argument("medium: damping must be >= 0 (gain media unsupported)");
    }
  }
};

inline cplx permittivity(const MediumModel& model, double omega) {
  if (!(omega > 0)) throw std::domain_error("permittivity: omega must be positive");
  const cplx e = model.eps(omega);
  if (!std::isfinite(e.real()) || !std::isfinite(e.imag()))
    throw std::domain_error("permittivity: evaluated on an undamped resonance");
  return e;
}

struct Wavenumber {
  cplx k;  // k_r + i k_i, 1/m
  cplx n;  // n_r + i n_i
};

inline Wavenumber wavenumber(const MediumModel& model, double omega) {
  const cplx e = permittivity(model, omega);
  if (e.imag() == 0 && e.real() < 0)
    throw std::domain_error("wavenumber: permittivity is real and negative (metallic band), "
                            "no decaying forward branch");
  const cplx n = std::sqrt(e);
  return {n * (omega / model.constants.c), n};
}

/// Narrow-band expansion state around the carrier omega0:
/// k(omega0 + W) = sum_m k[m] W^m / m!, sqrt(eps_i/eps) = sum_m p[m] W^m / m!.
struct DispersionExpansion {
  double omega0 = 0.0;
  double delta_omega = 0.0;
  std::vector<cplx> k;
  std::vector<cplx> p;
  double k_phi = 0.0;
  double group_velocity = std::numeric_limits<double>::infinity();

  int order() const { return static_cast<int>(k.size()) - 1; }
  cplx k_coeff(int m) const { return m < static_cast<int>(k.size()) ? k[m] : cplx{}; }
  cplx p_coeff(int m) const { return m < static_cast<int>(p.size()) ? p[m] : cplx{}; }

  /// Builds an expansion from given coefficients; k_phi and group velocity follow k.
  static DispersionExpansion from_coefficients(double omega0, double delta_omega, std::vector<cplx> k,
                                               std::vector<cplx> p = {}) {
    DispersionExpansion e;
    e.omega0 = omega0;
    e.delta_omega = delta_omega;
    e.k = std::move(k);
    e.p = std::move(p);
    e.refresh();
    return e;
  }

  void refresh() {
    k_phi = k.empty() ? 0.0 : k[0].real();
    const double k1r = k.size() > 1 ? k[1].real() : 0.0;
    group_velocity = k1r != 0.0 ? 1.0 / k1r : std::numeric_limits<double>::infinity();
  }
};

namespace detail {

inline double binomial(int n, int r) {
  double b = 1.0;
  for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
  return b;
}

/// Second-order central difference h^-m delta^m f(x0); error is a series in h^2.
template <class Real, class Fn>
auto central_difference(const Fn& f, const Real& x0, const Real& h, int m, Real& fmax) {
  using std::abs;
  using C = complex_t<Real>;
  C acc(Real(0), Real(0));
  for (int j = 0; j <= m; ++j) {
    const Real x = x0 + Real(m - 2 * j) * h / Real(2);
    const C v = f(x);
    fmax = std::max<Real>(fmax, Real(abs(v)));
    const double w = (j % 2 == 0 ? 1.0 : -1.0) * binomial(m, j);
    acc += v * Real(w);
  }
  Real hm(1);
  for (int i = 0; i < m; ++i) hm *= h;
  return C(acc / hm);
}

/// Derivatives 0..order of f at x0 by Richardson-extrapolated central differences
/// starting from step h0 and halving four times.
template <class Real, class Fn>
std::vector<cplx> richardson_derivatives(const Fn& f, double x0, double h0, int order, const std::string& name) {
  using std::abs;
  using C = complex_t<Real>;
  constexpr int levels = 5;
  std::vector<cplx> out(order + 1);
  const Real xq(x0);
  for (int m = 0; m <= order; ++m) {
    if (m == 0) {
      out[0] = to_cplx(f(xq));
      continue;
    }
    std::array<std::array<C, levels>, levels> table{};
    Real fmax(0);
    Real h(h0);
    for (int j = 0; j < levels; ++j) {
      table[j][0] = central_difference<Real>(f, xq, h, m, fmax);
      Real factor(4);
      for (int l = 1; l <= j; ++l) {
        table[j][l] = table[j][l - 1] + (table[j][l - 1] - table[j - 1][l - 1]) / (factor - Real(1));
        factor *= Real(4);
      }
      if (j + 1 < levels) h /= Real(2);
    }
    const C best = table[levels - 1][levels - 1];
    const C prev = table[levels - 2][levels - 2];
    const Real change = abs(C(best - prev));
    Real hm(1);
    for (int i = 0; i < m; ++i) hm *= h;
    const Real roundoff = std::numeric_limits<Real>::epsilon() * Real(std::ldexp(1.0, m)) * fmax / hm;
    if (change > Real(1e-6) * Real(abs(best)) && change > Real(1e3) * roundoff) {
      throw std::runtime_error("taylor_expand: Richardson extrapolation for " + name + "_" + std::to_string(m) +
                               " did not converge (relative change " +
                               std::to_string(static_cast<double>(change / Real(abs(best)))) + ")");
    }
    out[m] = to_cplx(best);
  }
  return out;
}

}  // namespace detail

/// Taylor coefficients of arbitrary callables Real -> complex_t<Real>. Lets
/// tabulated or user-defined models share the same differentiation path.
template <class Real = double, class KFn, class PFn>
DispersionExpansion taylor_expand(const KFn& k_of, const PFn& p_of, double omega0, double delta_omega, int order) {
  if (!(delta_omega > 0)) throw std::invalid_argument("taylor_expand: delta_omega must be positive");
  if (!(omega0 - delta_omega / 2 > 0)) throw std::invalid_argument("taylor_expand: omega0 - delta_omega/2 must be positive");
  if (order < 2) throw std::invalid_argument("taylor_expand: order must be >= 2");
  const double h0 = delta_omega / 64.0;
  DispersionExpansion e;
  e.omega0 = omega0;
  e.delta_omega = delta_omega;
  e.k = detail::richardson_derivatives<Real>(k_of, omega0, h0, order, "k");
  e.p = detail::richardson_derivatives<Real>(p_of, omega0, h0, order, "p");
  e.refresh();
  return e;
}

/// Expansion of a Lorentz medium; derivatives are taken in quad precision.
inline DispersionExpansion taylor_expand(const MediumModel& model, double omega0, double delta_omega, int order = 4) {
  model.validate();
  const double lo = omega0 - delta_omega / 2;
  const double hi = omega0 + delta_omega / 2;
  for (const auto& r : model.resonances) {
    if (r.omega_r >= lo && r.omega_r <= hi)
      throw std::invalid_argument("taylor_expand: resonance at " + std::to_string(r.omega_r) +
                                  " rad/s lies inside the expansion interval");
  }
  return taylor_expand<quad>([&](const quad& w) { return model.k<quad>(w); },
                             [&](const quad& w) { return model.loss_factor<quad>(w); }, omega0, delta_omega, order);
}

/// Normalized Kramers-Kronig residual of an arbitrary permittivity callable.
///
/// KK[eps_i](w) = (1/pi) PV int eps_i(w') / (w' - w) dw' over the odd extension of
/// eps_i, evaluated by an FFT Hilbert transform on a uniform internal grid of the
/// given spacing over [0, 2 max(grid)] and interpolated (4-point Lagrange) onto
/// the evaluation grid. Returns max|eps_r - bg - KK| / max|eps_r - bg|.
template <class PermittivityFn>
double kk_residual(const PermittivityFn& eps, double eps_background, std::span<const double> grid, double spacing) {
  if (grid.size() < 4096) throw std::invalid_argument("kk_residual: evaluation grid needs at least 4096 points");
  if (!(spacing > 0)) throw std::invalid_argument("kk_residual: internal spacing must be positive");
  const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
  if (!(*gmin > 0)) throw std::invalid_argument("kk_residual: grid frequencies must be positive");

  const double w_end = 2.0 * *gmax;
  const auto n_half = static_cast<std::size_t>(std::ceil(w_end / spacing));
  std::size_t m = 1;
  while (m < 4 * n_half) m <<= 1;
  if (m > (std::size_t{1} << 24))
    throw std::runtime_error("kk_residual: resolving the narrowest line needs more than 2^24 samples");

  cvec g(m);
  for (std::size_t j = 1; j <= n_half; ++j) {
    const double ei = eps(spacing * static_cast<double>(j)).imag();
    g[j] = ei;
    g[m - j] = -ei;
  }
  Fft fft(m);
  fft.forward(g);
  for (std::size_t q = 1; q < m; ++q) {
    if (q == m / 2) {
      g[q] = 0.0;
      continue;
    }
    g[q] *= q < m / 2 ? I : -I;
  }
  g[0] = 0.0;
  fft.backward(g);
  const double inv_m = 1.0 / static_cast<double>(m);

  auto node = [&](std::ptrdiff_t j) {
    const auto idx = static_cast<std::size_t>((j % static_cast<std::ptrdiff_t>(m) + static_cast<std::ptrdiff_t>(m)) %
                                              static_cast<std::ptrdiff_t>(m));
    return g[idx].real() * inv_m;
  };
  auto kk_at = [&](double w) {
    const double s = w / spacing;
    const auto j = static_cast<std::ptrdiff_t>(std::floor(s));
    const double t = s - static_cast<double>(j);
    // Lagrange weights for nodes j-1, j, j+1, j+2 at offset t in [0, 1).
    const double w0 = -t * (t - 1) * (t - 2) / 6.0;
    const double w1 = (t + 1) * (t - 1) * (t - 2) / 2.0;
    const double w2 = -(t + 1) * t * (t - 2) / 2.0;
    const double w3 = (t + 1) * t * (t - 1) / 6.0;
    return w0 * node(j - 1) + w1 * node(j) + w2 * node(j + 1) + w3 * node(j + 2);
  };

  double scale = 0.0;
  double worst = 0.0;
  for (double w : grid) {
    const double er = eps(w).real() - eps_background;
    scale = std::max(scale, std::abs(er));
    worst = std::max(worst, std::abs(er - kk_at(w)));
  }
  if (scale == 0.0) return worst == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  const double tail = 0.5 * std::abs(eps(w_end).imag()) / scale;
  if (tail > 1e-3)
    throw std::runtime_error("kk_residual: grid too narrow, absorption beyond the transform window contributes ~" +
                             std::to_string(tail));
  return worst / scale;
}

inline double kk_residual(const MediumModel& model, std::span<const double> grid) {
  model.validate();
  if (model.has_undamped_resonance())
    throw std::domain_error("kk_residual: undamped resonance, Kramers-Kronig validation skipped");
  if (grid.empty()) throw std::invalid_argument("kk_residual: empty grid");
  const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
  double spacing = *gmax / 4096.0;
  for (const auto& r : model.resonances) {
    if (*gmin > r.omega_r / 10.0 * (1 + 1e-12) || *gmax < 10.0 * r.omega_r * (1 - 1e-12))
      throw std::invalid_argument("kk_residual: grid too narrow, must span [omega_r/10, 10 omega_r] for every resonance");
    spacing = std::min(spacing, r.gamma / 32.0);
  }
  return kk_residual([&](double w) { return model.eps(w); }, model.eps_background, grid, spacing);
}

}  // namespace qpulse
