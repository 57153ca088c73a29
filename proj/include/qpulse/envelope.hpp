#pragma once

#include "qpulse/fft.hpp"
#include "qpulse/numeric.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace qpulse {

/// Slowly-varying envelope samples on a periodic retarded-time grid
/// tau_j = -T/2 + j h_t at one propagation position x. The carrier phase
/// k_phi x - omega0 t has been removed.
///
/// Spectral convention: a(tau) = sum_W A(W) exp(-i W tau), i.e. the detuning W
/// belongs to the absolute frequency omega0 + W. With FFTW's forward kernel,
/// bin m carries W = -2 pi m_signed / T (see spectral_detuning).
struct EnvelopeGrid {
  double x = 0.0;
  double window = 0.0;  // T, s
  cvec a;
  double omega0 = 0.0;
  double k_phi = 0.0;

  static EnvelopeGrid make(std::size_t n, double window, double omega0 = 0.0, double k_phi = 0.0) {
    if (!is_power_of_two(n)) throw std::invalid_argument("EnvelopeGrid: sample count must be a power of two");
    if (!(window > 0)) throw std::invalid_argument("EnvelopeGrid: window must be positive");
    EnvelopeGrid g;
    g.window = window;
    g.a.assign(n, cplx{});
    g.omega0 = omega0;
    g.k_phi = k_phi;
    return g;
  }

  std::size_t size() const { return a.size(); }
  double h_t() const { return window / static_cast<double>(a.size()); }
  double tau(std::size_t j) const { return -window / 2 + h_t() * static_cast<double>(j); }
};

/// Detuning W carried by FFTW forward-transform bin m of an n-sample window T.
inline double spectral_detuning(std::size_t m, std::size_t n, double window) {
  const auto ms = m < n / 2 ? static_cast<double>(m) : static_cast<double>(m) - static_cast<double>(n);
  return -2.0 * pi * ms / window;
}

inline std::vector<double> spectral_detunings(std::size_t n, double window) {
  std::vector<double> w(n);
  for (std::size_t m = 0; m < n; ++m) w[m] = spectral_detuning(m, n, window);
  return w;
}

/// Photon number (normalized units) or energy: h_t sum |a|^2.
inline double pulse_energy(const EnvelopeGrid& g) {
  return g.h_t() * pairwise_sum<double>(0, g.size(), [&](std::size_t j) { return std::norm(g.a[j]); });
}

/// Temporal-mode amplitudes b_m = sqrt(h_t / n) * FFT(a)_m. White noise of
/// per-sample variance v / h_t maps to per-mode variance v.
inline cvec temporal_modes(const EnvelopeGrid& g, const Fft& fft) {
  cvec b = g.a;
  fft.forward(b);
  const double s = std::sqrt(g.h_t() / static_cast<double>(g.size()));
  for (auto& v : b) v *= s;
  return b;
}

inline cvec temporal_modes(const EnvelopeGrid& g) { return temporal_modes(g, Fft(g.size())); }

/// Fraction of spectral power at |W| > cutoff.
inline double spectral_leakage(const EnvelopeGrid& g, double cutoff, const Fft& fft) {
  cvec b = g.a;
  fft.forward(b);
  double total = 0.0, outside = 0.0;
  for (std::size_t m = 0; m < b.size(); ++m) {
    const double p = std::norm(b[m]);
    total += p;
    if (std::abs(spectral_detuning(m, b.size(), g.window)) > cutoff) outside += p;
  }
  return total > 0 ? outside / total : 0.0;
}

/// Intensity-weighted RMS width about the intensity centroid.
inline double rms_width(const EnvelopeGrid& g) {
  double w0 = 0, w1 = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double p = std::norm(g.a[j]);
    w0 += p;
    w1 += p * g.tau(j);
  }
  const double c = w1 / w0;
  double w2 = 0;
  for (std::size_t j = 0; j < g.size(); ++j) w2 += std::norm(g.a[j]) * (g.tau(j) - c) * (g.tau(j) - c);
  return std::sqrt(w2 / w0);
}

/// Conserved functional of the lossless envelope equation
/// i a_x = (k2/2) a_tt - chi |a|^2 a:  H = int [ -(k2/2)|a_t|^2 - (chi/2)|a|^4 ] dtau,
/// with the derivative taken spectrally.
inline double nlse_hamiltonian(const EnvelopeGrid& g, double k2, double chi) {
  const std::size_t n = g.size();
  Fft fft(n);
  cvec d = g.a;
  fft.forward(d);
  for (std::size_t m = 0; m < n; ++m) {
    // d/dtau exp(-i W tau) = -i W exp(-i W tau)
    d[m] *= -I * spectral_detuning(m, n, g.window) / static_cast<double>(n);
  }
  fft.backward(d);
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double i2 = std::norm(g.a[j]);
    h += -0.5 * k2 * std::norm(d[j]) - 0.5 * chi * i2 * i2;
  }
  return h * g.h_t();
}

}  // namespace qpulse
