#pragma once

// Analytic-oracle regression suite. Each check measures one quantity, compares
// it with a threshold and with a runtime limit, and reports both.

#include "qpulse/linear_prop.hpp"
#include "qpulse/medium.hpp"
#include "qpulse/nlse.hpp"
#include "qpulse/run.hpp"
#include "qpulse/scenario.hpp"
#include "qpulse/stochastic.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

namespace qpulse {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

struct VerifyOptions {
  bool quick = false;
  unsigned threads = 0;
};

/// The Lorentz medium shipped as scenarios/lorentz.medium.
inline MediumModel shipped_lorentz() {
  MediumModel m;
  m.resonances.push_back({1e30, 2e15, 1e13});
  return m;
}

namespace verify_detail {

using Clock = std::chrono::steady_clock;

/// Runs body, which fills measured/pass/detail, and applies the time limit.
inline CheckResult timed(int id, std::string name, double threshold, double limit,
                         const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  r.threshold = threshold;
  r.time_limit = limit;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (r.seconds > limit) {
    r.pass = false;
    r.detail += (r.detail.empty() ? "" : "; ") + std::string("runtime over limit");
  }
  return r;
}

inline DispersionExpansion normalized_expansion(double k0i, cplx k2, double k1i = 0.0) {
  return DispersionExpansion::from_coefficients(1.0, 1.0, {cplx(1.0, k0i), cplx(1.0, k1i), k2});
}

inline EnvelopeGrid gaussian(std::size_t n, double window, double amp, double t0) {
  auto g = EnvelopeGrid::make(n, window);
  for (std::size_t j = 0; j < n; ++j) g.a[j] = amp * std::exp(-g.tau(j) * g.tau(j) / (2 * t0 * t0));
  return g;
}

inline void add_sech(EnvelopeGrid& g, double amp, double width, double center, double detuning) {
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double s = g.tau(j) - center;
    g.a[j] += amp / std::cosh(s / width) * std::polar(1.0, -detuning * s);
  }
}

inline double relative_l2(const cvec& a, const cvec& b) {
  double num = 0, den = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    num += std::norm(a[j] - b[j]);
    den += std::norm(b[j]);
  }
  return std::sqrt(num / den);
}

inline EnvelopeGrid run_steps(EnvelopeGrid g, const DispersionExpansion& e, double chi, double h, std::size_t steps) {
  const SplitStepPropagator prop(g.size(), g.window, e, KerrSpec{0.0, chi, false}, h);
  for (std::size_t i = 0; i < steps; ++i) prop.step(g);
  return g;
}

/// Fourth-order central stencils for derivatives 1..4, evaluated in quad.
template <class Fn>
cplx stencil_derivative(const Fn& f, double x0, double h, int m) {
  static const std::vector<std::vector<double>> weights = {
      {},
      {1, -8, 0, 8, -1},
      {-1, 16, -30, 16, -1},
      {1, -8, 13, 0, -13, 8, -1},
      {-1, 12, -39, 56, -39, 12, -1}};
  static const double denom[] = {1, 12, 12, 8, 6};
  const auto& w = weights[m];
  const int half = static_cast<int>(w.size()) / 2;
  using C = complex_t<quad>;
  C acc(quad(0), quad(0));
  const quad xq(x0), hq(h);
  for (int i = 0; i < static_cast<int>(w.size()); ++i)
    if (w[i] != 0) acc += f(xq + quad(i - half) * hq) * quad(w[i]);
  quad hm(1);
  for (int i = 0; i < m; ++i) hm *= hq;
  return to_cplx(C(acc / (quad(denom[m]) * hm)));
}

}  // namespace verify_detail

inline CheckResult check_langevin_green() {
  using namespace verify_detail;
  return timed(1, "Langevin integration vs Green-function quadrature", 1e-6, 5.0, [](CheckResult& r) {
    const MediumModel medium = shipped_lorentz();
    const double omega = 1e15;
    const std::size_t cells = 2048;
    const GreenFunction green(medium, omega);
    const cplx k = green.k();
    const double h = 0.02 / std::abs(k);
    auto slice = FrequencySlice::make(omega, 0.0, h * cells, cells + 1);

    // Two-point Gauss-Legendre integral of G_A over one cell at lattice offset m >= 1.
    std::vector<cplx> table(cells + 1);
    const double g = 0.5 / std::sqrt(3.0);
    for (std::size_t m = 1; m <= cells; ++m) {
      const double dm = static_cast<double>(m);
      table[m] = green.prefactor() * (slice.h_x / 2) *
                 (std::exp(I * k * (slice.h_x * (dm - 0.5 + g))) + std::exp(I * k * (slice.h_x * (dm - 0.5 - g))));
    }

    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      NoiseProcess p;
      p.seed = seed;
      p.v0 = 1.0;
      slice.f = sample_force(p, cells + 1, slice.h_x, 1.0);
      integrate_langevin(medium, slice, Direction::forward);
      integrate_langevin(medium, slice, Direction::backward);
      for (std::size_t j = 1; j <= cells; ++j) {
        cplx ref{};
        for (std::size_t i = 0; i < j; ++i) ref += table[j - i] * slice.f[i];
        worst = std::max(worst, std::abs(slice.a_fwd[j] - ref) / std::abs(ref));
      }
      for (std::size_t j = 0; j < cells; ++j) {
        cplx ref{};
        for (std::size_t i = j + 1; i <= cells; ++i) ref += table[i - j] * slice.f[i];
        worst = std::max(worst, std::abs(slice.a_bwd[j] - ref) / std::abs(ref));
      }
    }
    r.measured = worst;
    r.pass = worst < r.threshold;
    r.detail = "max pointwise relative error, 20 seeds, both directions";
  });
}

inline CheckResult check_beer_decay() {
  using namespace verify_detail;
  return timed(2, "Beer-law energy decay", 1e-10, 1.0, [](CheckResult& r) {
    const double k0i = 0.5, length = 3.0;
    const auto e = normalized_expansion(k0i, cplx(0.3, 0.0));
    const auto in = gaussian(512, 40.0, 1.0, 1.0);
    const auto out = run_steps(in, e, 0.0, length / 30, 30);
    const double expect = pulse_energy(in) * std::exp(-2 * k0i * length);
    r.measured = std::abs(pulse_energy(out) - expect) / expect;
    r.pass = r.measured < r.threshold;
    r.detail = "relative energy error at k0i L = 1.5";
  });
}

inline CheckResult check_gaussian_broadening() {
  using namespace verify_detail;
  return timed(3, "Gaussian dispersive broadening", 1e-4, 10.0, [](CheckResult& r) {
    const double t0 = 1.0, k2 = -1.0;
    const auto e = normalized_expansion(0.0, cplx(k2, 0.0));
    auto g = gaussian(1024, 80.0, 1.0, t0);
    const std::size_t per_ld = 20;
    double worst = 0.0;
    for (int ld = 1; ld <= 5; ++ld) {
      g = run_steps(g, e, 0.0, 1.0 / per_ld, per_ld);
      const double x = ld * t0 * t0 / std::abs(k2);
      const double expect = t0 * std::sqrt(1 + std::pow(k2 * x / (t0 * t0), 2));
      worst = std::max(worst, std::abs(std::sqrt(2.0) * rms_width(g) - expect) / expect);
    }
    r.measured = worst;
    r.pass = worst < r.threshold;
    r.detail = "max relative 1/e-width error over 1..5 dispersion lengths";
  });
}

inline CheckResult check_soliton() {
  using namespace verify_detail;
  return timed(4, "fundamental soliton and split-step order", 1e-3, 60.0, [](CheckResult& r) {
    // Fundamental soliton in normalized units: k2 = -1, chi = 1, tau0 = 1, L_D = 1.
    const auto e = normalized_expansion(0.0, cplx(-1.0, 0.0));
    auto in = EnvelopeGrid::make(256, 32.0);
    add_sech(in, 1.0, 1.0, 0.0, 0.0);
    const double h_budget = default_step(in.h_t(), cplx(-1.0, 0.0), 1.0, 1.0, 0.0);
    const double length = 10.0;
    const auto steps = static_cast<std::size_t>(std::ceil(length / h_budget));
    const auto out = run_steps(in, e, 1.0, length / static_cast<double>(steps), steps);
    cvec mag_in(in.size()), mag_out(in.size());
    for (std::size_t j = 0; j < in.size(); ++j) {
      mag_in[j] = std::abs(in.a[j]);
      mag_out[j] = std::abs(out.a[j]);
    }
    const double deviation = relative_l2(mag_out, mag_in);

    // Order: two-soliton collision, each step size against its own h/4 reference.
    auto pair = EnvelopeGrid::make(512, 40.0);
    add_sech(pair, 1.0, 1.0, 5.0, 2.0);
    add_sech(pair, 1.0, 1.0, -5.0, -2.0);
    const double span = 5.0;
    auto error_at = [&](double h) {
      const auto n = static_cast<std::size_t>(std::llround(span / h));
      const auto coarse = run_steps(pair, e, 1.0, h, n);
      const auto fine = run_steps(pair, e, 1.0, h / 4, 4 * n);
      return relative_l2(coarse.a, fine.a);
    };
    const double e1 = error_at(0.01), e2 = error_at(0.005);
    const double order = std::log2(e1 / e2);

    r.measured = deviation;
    r.pass = deviation < r.threshold && std::abs(order - 2.0) <= 0.1;
    char buf[200];
    std::snprintf(buf, sizeof buf, "shape deviation after 10 L_D (%zu steps); measured order %.4f (need 2.0 +- 0.1)",
                  steps, order);
    r.detail = buf;
  });
}

inline CheckResult check_fluctuation_dissipation(bool quick, unsigned threads) {
  using namespace verify_detail;
  return timed(5, "fluctuation-dissipation stationary variance", 5.0, 300.0, [&](CheckResult& r) {
    const std::size_t n_traj = quick ? 2000 : 10000;
    const nlohmann::json j = {
        {"medium", nlohmann::json::object()},
        {"carrier", {{"omega0_rad_per_s", 1e15}, {"delta_omega_rad_per_s", 1e14}}},
        {"dispersion_override", {{"k0_imag_per_m", 1.0}, {"k1_imag_s_per_m", 0.0}, {"k2_real_s2_per_m", 0.0},
                                 {"k2_imag_s2_per_m", 0.0}}},
        {"grid", {{"points", 64}, {"window_s", 64.0}, {"distance_m", 5.0}}},
        {"pulse", {{"shape", "zero"}}},
        {"noise", {{"enabled", true}, {"nbar", 0.0}, {"v0", 0.5}, {"seed", 2024}}},
        {"ensemble", {{"trajectories", n_traj}}},
        {"output", {{"trajectory_files", false}}}};
    const Scenario s = parse_scenario(j);
    const auto res = propagate(s, threads);
    const auto& m = res.mode_moments.back();
    const double expect = (s.noise.nbar + 0.5) * s.noise.v0;
    double worst = 0.0;
    for (std::size_t q = 0; q < m.symmetric_variance.size(); ++q)
      worst = std::max(worst, std::abs(m.symmetric_variance[q] - expect) / m.variance_stderr[q]);
    r.measured = worst;
    r.pass = worst < r.threshold;
    r.detail = "max |var - (nbar+1/2) v0| / stderr over 64 modes, " + std::to_string(n_traj) +
               " trajectories, x = 5/k0i";
  });
}

inline CheckResult check_kernel_delta_limit() {
  using namespace verify_detail;
  return timed(6, "kernel delta limit and full-mode convergence", 1e-2, 5.0, [](CheckResult& r) {
    const double w0 = 1e15, dw = 1e12;
    MediumModel m = shipped_lorentz();
    const auto e = taylor_expand(m, w0, dw);
    const double k1r = e.k[1].real();
    const double a = dw * k1r / 2;

    // Integral of the leading kernel over dx in [-X, X], a X = 2000.
    const double span = 2000.0 / a;
    const std::size_t nodes = 80001;
    const double step = 2 * span / static_cast<double>(nodes - 1);
    cplx acc{};
    for (std::size_t i = 0; i < nodes; ++i) {
      const double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * kernel_GH(m, e, -span + step * static_cast<double>(i), KernelMode::leading);
    }
    acc *= step / 3.0;
    const auto& pc = m.constants;
    const cplx eps = permittivity(m, w0);
    const cplx coeff = pc.alpha() * pc.alpha() * pc.eps0 / m.rho * I * w0 * (std::conj(eps) - 1.0) * 2.0 * pi /
                       (e.k_phi * k1r);
    const double integral_err = std::abs(acc - coeff) / std::abs(coeff);

    // Full vs leading as the damping (and with it eps_i) goes to zero.
    std::string trail;
    double prev = std::numeric_limits<double>::infinity(), last = 0.0;
    bool monotone = true;
    for (double gamma : {1e12, 1e11, 1e10, 1e9}) {
      m.resonances[0].gamma = gamma;
      const auto eg = taylor_expand(m, w0, dw);
      const double reach = 10.0 / (dw * eg.k[1].real());
      const double peak = std::abs(kernel_GH(m, eg, 0.0, KernelMode::leading));
      double worst = 0.0;
      for (int i = -20; i <= 20; ++i) {
        const double dx = reach * i / 20.5;
        const cplx full = kernel_GH(m, eg, dx, KernelMode::full);
        const cplx lead = kernel_GH(m, eg, dx, KernelMode::leading);
        worst = std::max(worst, std::abs(full - lead) / peak);
      }
      monotone = monotone && worst <= prev;
      prev = worst;
      last = worst;
      char buf[48];
      std::snprintf(buf, sizeof buf, "%s%.1e", trail.empty() ? "" : ", ", worst);
      trail += buf;
    }
    r.measured = std::max(integral_err, last);
    r.pass = integral_err < r.threshold && last < r.threshold && monotone;
    char buf[160];
    std::snprintf(buf, sizeof buf, "integral rel err %.2e; full-vs-leading (peak-normalized) for gamma 1e12..1e9: ",
                  integral_err);
    r.detail = buf + trail;
  });
}

inline CheckResult check_kk_residual() {
  using namespace verify_detail;
  return timed(7, "Kramers-Kronig residual of the shipped Lorentz medium", 1e-3, 5.0, [](CheckResult& r) {
    const MediumModel m = shipped_lorentz();
    const double wr = m.resonances[0].omega_r;
    std::vector<double> grid(4096);
    for (std::size_t i = 0; i < grid.size(); ++i)
      grid[i] = wr / 10 + (10 * wr - wr / 10) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    r.measured = kk_residual(m, grid);
    r.pass = r.measured < r.threshold;
    r.detail = "4096 points on [omega_r/10, 10 omega_r]";
  });
}

inline CheckResult check_taylor_coefficients() {
  using namespace verify_detail;
  return timed(8, "Taylor coefficients vs independent finite differences", 1e-6, 1.0, [](CheckResult& r) {
    const MediumModel m = shipped_lorentz();
    const double w0 = 1e15, dw = 1e14;
    const auto e = taylor_expand(m, w0, dw, 4);
    auto k_of = [&](const quad& w) { return m.k<quad>(w); };
    double worst = std::abs(e.k[0] - wavenumber(m, w0).k) / std::abs(e.k[0]);
    for (int order = 1; order <= 4; ++order) {
      const cplx ref = stencil_derivative(k_of, w0, dw / 200, order);
      worst = std::max(worst, std::abs(e.k[order] - ref) / std::abs(ref));
    }
    r.measured = worst;
    r.pass = worst < r.threshold;
    r.detail = "max relative deviation of k[0..4], 4th-order stencils in quad precision";
  });
}

inline CheckResult check_self_phase_modulation() {
  using namespace verify_detail;
  return timed(9, "self-phase modulation phase", 1e-6, 1.0, [](CheckResult& r) {
    const double chi = 1.0, length = 2.0, amp = 2.0;
    const auto e = normalized_expansion(0.0, cplx{});
    const auto in = gaussian(256, 20.0, amp, 1.0);
    const double h = default_step(in.h_t(), cplx{}, chi, amp * amp, 0.0);
    const auto steps = static_cast<std::size_t>(std::ceil(length / h));
    const auto out = run_steps(in, e, chi, length / static_cast<double>(steps), steps);
    double worst = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (std::abs(in.a[j]) < 1e-150) continue;
      const cplx rot = out.a[j] * std::conj(in.a[j]) * std::polar(1.0, -chi * std::norm(in.a[j]) * length);
      worst = std::max(worst, std::abs(std::arg(rot)));
    }
    r.measured = worst;
    r.pass = worst < r.threshold;
    r.detail = "max phase error (rad), peak phase 8 rad";
  });
}

namespace verify_detail {

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Makes a fresh directory under the system temp dir.
inline std::filesystem::path make_temp_dir() {
  auto tmpl = (std::filesystem::temp_directory_path() / "qpulse-verify-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("cannot create a temporary directory");
  return tmpl;
}

}  // namespace verify_detail

/// Runs the scenario twice into separate directories and compares every
/// numeric output byte for byte; the second run uses a different thread count.
inline CheckResult check_determinism(unsigned threads) {
  using namespace verify_detail;
  return timed(10, "byte-identical outputs for identical manifests", 0.0, 10.0, [&](CheckResult& r) {
    const nlohmann::json j = {
        {"medium", nlohmann::json::object()},
        {"carrier", {{"omega0_rad_per_s", 1e15}, {"delta_omega_rad_per_s", 1e14}}},
        {"dispersion_override", {{"k0_imag_per_m", 0.2}, {"k1_imag_s_per_m", 0.01}, {"k2_real_s2_per_m", -1.0},
                                 {"k2_imag_s2_per_m", 0.0}}},
        {"kerr", {{"chi_per_m_per_photon_flux", 1.0}}},
        {"grid", {{"points", 64}, {"window_s", 32.0}, {"distance_m", 1.0}, {"steps", 400}}},
        {"pulse", {{"shape", "sech"}, {"amplitude_sqrt_photons_per_s", 1.0}, {"width_s", 1.0}}},
        {"noise", {{"enabled", true}, {"nbar", 0.1}, {"v0", 0.5}, {"seed", 7}}},
        {"ensemble", {{"trajectories", 6}}},
        {"output", {{"snapshots_m", {0.5, 1.0}}}}};
    const auto root = make_temp_dir();
    std::size_t compared = 0, differing = 0;
    for (const char* format : {"csv", "binary"}) {
      for (std::size_t n_traj : {std::size_t{1}, std::size_t{6}}) {
        Scenario s = parse_scenario(j);
        apply_overrides(s, {std::nullopt, n_traj, std::string(format)});
        const auto dir_a = root / (std::string(format) + std::to_string(n_traj) + "a");
        const auto dir_b = root / (std::string(format) + std::to_string(n_traj) + "b");
        write_propagation(s, propagate(s, 1), dir_a);
        write_propagation(s, propagate(s, std::max(2u, resolve_threads(threads))), dir_b);
        for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
          if (entry.path().filename() == "manifest.json") continue;
          ++compared;
          if (read_bytes(entry.path()) != read_bytes(dir_b / entry.path().filename())) ++differing;
        }
      }
    }
    std::filesystem::remove_all(root);
    r.measured = static_cast<double>(differing);
    r.pass = differing == 0 && compared > 0;
    r.detail = std::to_string(differing) + " of " + std::to_string(compared) +
               " output files differ (csv and binary, 1 and 6 trajectories, 1 vs many threads)";
  });
}

inline std::vector<CheckResult> run_verification(const VerifyOptions& opt) {
  return {check_langevin_green(),
          check_beer_decay(),
          check_gaussian_broadening(),
          check_soliton(),
          check_fluctuation_dissipation(opt.quick, opt.threads),
          check_kernel_delta_limit(),
          check_kk_residual(),
          check_taylor_coefficients(),
          check_self_phase_modulation(),
          check_determinism(opt.threads)};
}

inline std::string format_check(const CheckResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "[%s] %2d  %-52s measured %.3e  threshold %.1e  %.2f s (limit %.0f s)  %s",
                r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.measured, r.threshold, r.seconds, r.time_limit,
                r.detail.c_str());
  return buf;
}

}  // namespace qpulse
