#pragma once

// Narrow-band envelope propagation: effective Kerr coefficient, the nonlocal
// response kernel and its local limit, and the symmetrized split-step solver
// for the damped, noise-driven nonlinear Schroedinger equation
//
//   da/dx = -k0i a - i k1i da/dtau - (i/2) k2 d2a/dtau2 + i chi |a|^2 a + noise
//
// in the retarded frame tau = t - real(k1) x.

#include "qpulse/envelope.hpp"
#include "qpulse/fft.hpp"
#include "qpulse/medium.hpp"
#include "qpulse/stochastic.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace qpulse {

struct KerrSpec {
  double lambda = 0.0;    // intrinsic quartic polarization constant
  double chi = 0.0;       // effective coefficient used by the solver
  bool nonlocal = false;  // nonlocal response is available through kernel_GH only
};

/// Largest eps_i / eps_r for which the local Kerr reduction is accepted.
inline constexpr double weak_absorption_limit = 1e-2;

/// chi = (pi alpha^2 / k_r) lambda ((eps0/rho) omega0 |eps - 1|)^4 at omega0.
inline double chi_eff(const MediumModel& medium, double lambda, double omega0) {
  const cplx eps = permittivity(medium, omega0);
  if (!(eps.real() > 0) || !(eps.imag() / eps.real() < weak_absorption_limit))
    throw std::domain_error("chi_eff: eps_i/eps_r = " + std::to_string(eps.imag() / eps.real()) +
                            " at omega0; the local Kerr coefficient requires weak absorption (eps_i/eps_r < 1e-2)");
  const double k_r = wavenumber(medium, omega0).k.real();
  const auto& pc = medium.constants;
  const double alpha = pc.alpha();
  const double bracket = pc.eps0 / medium.rho * omega0 * std::abs(eps - 1.0);
  return pi * alpha * alpha / k_r * lambda * std::pow(bracket, 4);
}

enum class KernelMode { full, leading };

/// Spatial kernel G_H(dx) of the Kerr commutator term.
///
/// leading: alpha^2 (eps0/rho) i omega0 (eps* - 1) 2 sin(dw k1r dx / 2) / (k_r dx k1r),
///          with its dx -> 0 limit alpha^2 (eps0/rho) i omega0 (eps* - 1) dw / k_r.
/// full:    Simpson quadrature over the band of
///          [i w (eps* - 1) eps_i / (2 k_i |eps|) - 2 c eps_i / sqrt(eps) U(dx)]
///          exp(-k_i |dx| + i (k_r - k0r) dx), medium evaluated exactly at w = omega0 + W.
inline cplx kernel_GH(const MediumModel& medium, const DispersionExpansion& expansion, double dx, KernelMode mode,
                      std::size_t nodes = 1025) {
  const auto& pc = medium.constants;
  const double scale = pc.alpha() * pc.alpha() * pc.eps0 / medium.rho;
  const double w0 = expansion.omega0;
  const double dw = expansion.delta_omega;
  const double k0r = expansion.k_phi;

  if (mode == KernelMode::leading) {
    const cplx eps = permittivity(medium, w0);
    const double k1r = expansion.k_coeff(1).real();
    const cplx pref = scale * I * w0 * (std::conj(eps) - 1.0);
    if (dx == 0.0) return pref * dw / k0r;
    return pref * 2.0 / (k0r * dx * k1r) * std::sin(dw * k1r * dx / 2.0);
  }

  if (nodes < 1024) throw std::invalid_argument("kernel_GH: full mode needs at least 1024 quadrature nodes");
  if (nodes % 2 == 0) ++nodes;
  const double step = dw / static_cast<double>(nodes - 1);
  const double step_fn = dx > 0 ? 1.0 : (dx < 0 ? 0.0 : 0.5);
  auto integrand = [&](double detuning) {
    const double w = w0 + detuning;
    const cplx eps = permittivity(medium, w);
    const cplx k = wavenumber(medium, w).k;
    const double ratio = k.imag() > 0 ? eps.imag() / (2.0 * k.imag() * std::abs(eps)) : 1.0 / k.real();
    const cplx amp = I * w * (std::conj(eps) - 1.0) * ratio - 2.0 * pc.c * eps.imag() / std::sqrt(eps) * step_fn;
    return amp * std::exp(-k.imag() * std::abs(dx) + I * (k.real() - k0r) * dx);
  };
  cplx acc = integrand(-dw / 2) + integrand(dw / 2);
  for (std::size_t j = 1; j + 1 < nodes; ++j)
    acc += (j % 2 == 1 ? 4.0 : 2.0) * integrand(-dw / 2 + step * static_cast<double>(j));
  return scale * acc * step / 3.0;
}

/// Local Kerr term chi conj(a) a a, elementwise.
inline cvec nonlinear_term(std::span<const cplx> a, const KerrSpec& kerr) {
  if (kerr.nonlocal)
    throw std::logic_error("nonlinear_term: the nonlocal response is diagnostic-only, evaluate it with kernel_GH");
  cvec out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = kerr.chi * std::conj(a[j]) * a[j] * a[j];
  return out;
}

/// Default x step: keeps the dispersive phase at the grid Nyquist frequency,
/// the peak nonlinear phase and the loss per step well below one.
inline double default_step(double h_t, cplx k2, double chi, double peak_power, double k0i) {
  double h = std::numeric_limits<double>::infinity();
  if (std::abs(k2) > 0) h = std::min(h, 0.01 * h_t * h_t / std::abs(k2));
  if (chi != 0 && peak_power > 0) h = std::min(h, 0.05 / (std::abs(chi) * peak_power));
  if (k0i > 0) h = std::min(h, 0.1 / k0i);
  return h;
}

/// Symmetrized split-step propagator for one grid layout and step size.
///
/// One step: half linear step (exact spectral propagator of the second-order
/// Taylor symbol), full Kerr phase rotation, half linear step, then an additive
/// force increment. The increment variance is the exact Ornstein-Uhlenbeck
/// transition variance (nbar + 1/2) v0 (1 - exp(-2 k0i h)) per temporal mode.
class SplitStepPropagator {
 public:
  static constexpr double max_nonlinear_phase = 0.05;

  SplitStepPropagator(std::size_t n, double window, const DispersionExpansion& expansion, const KerrSpec& kerr,
                      double h_x)
      : fft_(n), chi_(kerr.chi), h_(h_x), h_t_(window / static_cast<double>(n)) {
    if (!is_power_of_two(n)) throw std::invalid_argument("split_step: sample count must be a power of two");
    if (!(h_x > 0)) throw std::invalid_argument("split_step: h_x must be positive");
    if (kerr.nonlocal)
      throw std::logic_error("split_step: nonlocal Kerr propagation is not supported (local limit only)");
    const cplx k0 = expansion.k_coeff(0);
    const cplx k1 = expansion.k_coeff(1);
    const cplx k2 = expansion.k_coeff(2);
    k0i_ = k0.imag();
    uniform_ = k1.imag() == 0.0 && k2 == cplx{};
    uniform_factor_ = std::exp(-k0i_ * h_x / 2.0);
    half_.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double w = spectral_detuning(m, n, window);
      const cplx symbol = -k0i_ - k1.imag() * w + 0.5 * I * k2 * w * w;
      half_[m] = std::exp(symbol * (h_x / 2.0)) * inv_n;
    }
  }

  double h_x() const { return h_; }

  void step(EnvelopeGrid& g, NoiseProcess* noise = nullptr) const {
    if (g.size() != half_.size()) throw std::invalid_argument("split_step: grid size does not match propagator");
    linear_half(g.a);

    if (chi_ != 0.0) {
      double peak = 0.0;
      for (const auto& v : g.a) peak = std::max(peak, std::norm(v));
      const double phase = std::abs(chi_) * peak * h_;
      if (phase > max_nonlinear_phase * (1 + 1e-9))
        throw std::runtime_error("split_step: nonlinear phase " + std::to_string(phase) +
                                 " rad per step exceeds 0.05 rad at the peak; reduce h_x below " +
                                 std::to_string(max_nonlinear_phase / (std::abs(chi_) * peak)) + " m");
      for (auto& v : g.a) v *= std::polar(1.0, chi_ * std::norm(v) * h_);
    }

    linear_half(g.a);

    if (noise != nullptr && k0i_ > 0.0) {
      const double s = std::sqrt(-std::expm1(-2.0 * k0i_ * h_) * h_);
      const cvec f = sample_force(*noise, g.size(), h_, h_t_);
      for (std::size_t j = 0; j < g.size(); ++j) g.a[j] += s * f[j];
    }
    g.x += h_;
  }

 private:
  void linear_half(cvec& a) const {
    if (uniform_) {
      if (uniform_factor_ != 1.0)
        for (auto& v : a) v *= uniform_factor_;
      return;
    }
    fft_.forward(a);
    for (std::size_t m = 0; m < a.size(); ++m) a[m] *= half_[m];
    fft_.backward(a);
  }

  Fft fft_;
  cvec half_;
  bool uniform_ = false;
  double uniform_factor_ = 1.0;
  double chi_;
  double h_;
  double h_t_;
  double k0i_ = 0.0;
};

/// Single step convenience wrapper; builds the propagator for this call.
inline EnvelopeGrid split_step(const EnvelopeGrid& state, const KerrSpec& kerr, const DispersionExpansion& expansion,
                               NoiseProcess* noise, double h_x) {
  EnvelopeGrid next = state;
  SplitStepPropagator(state.size(), state.window, expansion, kerr, h_x).step(next, noise);
  return next;
}

}  // namespace qpulse
