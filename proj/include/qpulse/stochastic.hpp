#pragma once

// Symmetric-ordering (Wigner-type) c-number noise: seeded Langevin forces,
// vacuum input fluctuations, and ensemble moment estimators.

#include "qpulse/envelope.hpp"
#include "qpulse/numeric.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace qpulse {

/// Philox4x64-10 counter-based generator (Salmon et al., SC'11).
/// Output block = bijection(counter; key); no internal state beyond the counter.
class Philox4x64 {
 public:
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const auto p0 = static_cast<unsigned __int128>(kM0) * ctr[0];
      const auto p1 = static_cast<unsigned __int128>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64), lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64), lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;
};

/// Seeded source of delta-correlated complex Gaussian increments.
///
/// The Philox key is (seed, stream); the counter is the block index, so a
/// substream is fully determined by (seed, stream) and the number of draws.
/// Each block yields two complex samples (Box-Muller on four uniforms).
struct NoiseProcess {
  std::uint64_t seed = 0;
  double nbar = 0.0;  // thermal occupation at omega0
  double v0 = 0.5;    // vacuum mode variance, field units^2
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;  // complex samples drawn so far

  NoiseProcess substream(std::uint64_t index) const {
    NoiseProcess p = *this;
    p.stream = index;
    p.counter = 0;
    return p;
  }

  /// Zero-mean complex Gaussian with E|z|^2 = variance (each quadrature variance/2).
  cplx gaussian(double variance) {
    const std::uint64_t block = counter / 2;
    const auto out = Philox4x64::generate({block, 0, 0, 0}, {seed, stream});
    const std::size_t half = (counter % 2) * 2;
    ++counter;
    // (0, 1] so the logarithm is finite.
    const double u1 = (static_cast<double>(out[half] >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(out[half + 1] >> 11) * 0x1.0p-53;
    return std::polar(std::sqrt(-std::log(u1) * variance), 2.0 * pi * u2);
  }
};

/// Discrete Langevin force on cells of size h_x x h_t:
/// per-sample complex variance (nbar + 1/2) v0 / (h_x h_t).
inline cvec sample_force(NoiseProcess& process, std::size_t cells, double h_x, double h_t) {
  if (!(h_x > 0) || !(h_t > 0)) throw std::invalid_argument("sample_force: cell sizes must be positive");
  const double variance = (process.nbar + 0.5) * process.v0 / (h_x * h_t);
  cvec f(cells);
  for (auto& v : f) v = process.gaussian(variance);
  return f;
}

/// White-noise strength per unit x per temporal mode that holds the damped
/// mode equation da/dx = -k0i a + eta at stationary variance (nbar + 1/2) v0.
inline double fd_noise_amplitude(double k0i, double nbar, double v0) {
  if (!(k0i >= 0)) throw std::invalid_argument("fd_noise_amplitude: k0i must be non-negative");
  return 2.0 * k0i * (nbar + 0.5) * v0;
}

/// Coherent envelope plus half-quantum vacuum noise of variance v0 / h_t per sample.
inline EnvelopeGrid sample_input_pulse(NoiseProcess& process, const EnvelopeGrid& coherent) {
  EnvelopeGrid out = coherent;
  const double variance = process.v0 / coherent.h_t();
  for (auto& v : out.a) v += process.gaussian(variance);
  return out;
}

/// Moments over an ensemble of equally sized complex arrays (time samples or
/// temporal modes). Variances use divisor n; standard errors are jackknife.
struct EnsembleMoments {
  std::size_t n_traj = 0;
  cvec mean_field;
  std::vector<double> symmetric_variance;
  std::vector<double> intensity_mean;
  std::vector<double> mean_stderr;
  std::vector<double> variance_stderr;
  std::vector<double> intensity_stderr;
};

inline EnsembleMoments reduce_moments(std::span<const cvec> trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("reduce_moments: empty ensemble");
  const std::size_t n = trajectories.size();
  const std::size_t len = trajectories.front().size();
  for (const auto& t : trajectories)
    if (t.size() != len) throw std::invalid_argument("reduce_moments: trajectories do not share one grid");

  EnsembleMoments m;
  m.n_traj = n;
  m.mean_field.resize(len);
  m.symmetric_variance.resize(len);
  m.intensity_mean.resize(len);
  m.mean_stderr.assign(len, 0.0);
  m.variance_stderr.assign(len, 0.0);
  m.intensity_stderr.assign(len, 0.0);
  const double dn = static_cast<double>(n);
  std::vector<double> var_loo(n);

  for (std::size_t j = 0; j < len; ++j) {
    const cplx mean = pairwise_sum<cplx>(0, n, [&](std::size_t i) { return trajectories[i][j]; }) / dn;
    const double ss = pairwise_sum<double>(0, n, [&](std::size_t i) { return std::norm(trajectories[i][j] - mean); });
    const double intensity = pairwise_sum<double>(0, n, [&](std::size_t i) { return std::norm(trajectories[i][j]); }) / dn;
    m.mean_field[j] = mean;
    m.symmetric_variance[j] = ss / dn;
    m.intensity_mean[j] = intensity;
    if (n < 2) continue;

    // Leave-one-out replicates in closed form.
    const double jk = (dn - 1.0) / dn;
    for (std::size_t i = 0; i < n; ++i)
      var_loo[i] = (ss - dn / (dn - 1.0) * std::norm(trajectories[i][j] - mean)) / (dn - 1.0);
    const double var_loo_mean = pairwise_sum<double>(0, n, [&](std::size_t i) { return var_loo[i]; }) / dn;
    double s_mean = 0.0, s_var = 0.0, s_int = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx z = trajectories[i][j];
      const cplx mean_i = (dn * mean - z) / (dn - 1.0);
      const double int_i = (dn * intensity - std::norm(z)) / (dn - 1.0);
      s_mean += std::norm(mean_i - mean);
      s_var += (var_loo[i] - var_loo_mean) * (var_loo[i] - var_loo_mean);
      s_int += (int_i - intensity) * (int_i - intensity);
    }
    m.mean_stderr[j] = std::sqrt(jk * s_mean);
    m.variance_stderr[j] = std::sqrt(jk * s_var);
    m.intensity_stderr[j] = std::sqrt(jk * s_int);
  }
  return m;
}

inline EnsembleMoments reduce_moments(std::span<const EnvelopeGrid> trajectories) {
  std::vector<cvec> arrays;
  arrays.reserve(trajectories.size());
  for (const auto& t : trajectories) arrays.push_back(t.a);
  return reduce_moments(std::span<const cvec>(arrays));
}

}  // namespace qpulse
