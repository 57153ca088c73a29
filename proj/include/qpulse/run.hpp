#pragma once

// Run orchestration: ensemble propagation over a worker pool, moment
// reduction, deterministic output files and the run manifest.

#include "qpulse/linear_prop.hpp"
#include "qpulse/nlse.hpp"
#include "qpulse/scenario.hpp"
#include "qpulse/stochastic.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace qpulse {

inline constexpr const char* tool_version = "0.1.0";

/// Leakage beyond delta_omega/2 tolerated during propagation before it is flagged.
inline constexpr double propagation_leakage_limit = 1e-4;

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::optional<std::string> format;
};

/// Applies command-line overrides to a loaded scenario and its recorded source.
inline void apply_overrides(Scenario& s, const RunOverrides& o) {
  if (o.seed) {
    s.noise.seed = *o.seed;
    s.source["noise"]["seed"] = *o.seed;
  }
  if (o.trajectories) {
    if (*o.trajectories == 0) throw ScenarioError("--trajectories must be positive");
    s.trajectories = *o.trajectories;
    s.source["ensemble"]["trajectories"] = *o.trajectories;
  }
  if (o.format) {
    if (*o.format != "csv" && *o.format != "binary") throw ScenarioError("--format: expected csv or binary");
    s.output.format = *o.format;
    s.source["output"]["format"] = *o.format;
  }
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs body(i) for i in [0, n) on `threads` workers. The exception of the
/// lowest failing index is rethrown, so failures are reported deterministically.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
}

struct PropagationResult {
  std::size_t steps = 0;
  double h_x = 0.0;
  std::vector<std::size_t> snapshot_steps;
  std::vector<double> snapshot_x;
  std::vector<std::vector<EnvelopeGrid>> snapshots;  // [snapshot][trajectory]
  std::vector<EnsembleMoments> moments;              // per snapshot, time samples
  std::vector<EnsembleMoments> mode_moments;         // per snapshot, temporal modes
  std::vector<double> leakage;                       // per snapshot, noiseless reference
  unsigned threads = 1;
  double wall_clock_s = 0.0;
};

namespace detail {

/// Marches one trajectory, storing the envelope at each requested step index.
inline void march(const SplitStepPropagator& prop, EnvelopeGrid g, NoiseProcess* noise,
                  const std::vector<std::size_t>& snap_steps, std::vector<EnvelopeGrid*> sinks, std::size_t steps) {
  auto record = [&](std::size_t step) {
    for (std::size_t k = 0; k < snap_steps.size(); ++k)
      if (snap_steps[k] == step) *sinks[k] = g;
  };
  record(0);
  for (std::size_t step = 1; step <= steps; ++step) {
    try {
      prop.step(g, noise);
    } catch (const std::exception& e) {
      throw std::runtime_error("at x = " + std::to_string(g.x) + " m: " + e.what());
    }
    record(step);
  }
}

}  // namespace detail

/// Runs the ensemble described by the scenario. Trajectory i draws from
/// substream i of the scenario seed, so results do not depend on threads.
inline PropagationResult propagate(const Scenario& s, unsigned threads = 1) {
  const auto start = std::chrono::steady_clock::now();
  PropagationResult r;
  r.threads = resolve_threads(threads);
  r.steps = s.steps();
  r.h_x = s.h_x();
  r.snapshot_steps = s.snapshot_steps();
  for (auto st : r.snapshot_steps) r.snapshot_x.push_back(static_cast<double>(st) * r.h_x);

  const SplitStepPropagator prop(s.grid.points, s.grid.window, s.expansion, s.kerr, r.h_x);
  const EnvelopeGrid coherent = s.coherent_input();
  const std::size_t n_snap = r.snapshot_steps.size();
  r.snapshots.assign(n_snap, std::vector<EnvelopeGrid>(s.trajectories));

  NoiseProcess base;
  base.seed = s.noise.seed;
  base.nbar = s.noise.nbar;
  base.v0 = s.noise.v0;

  parallel_for(s.trajectories, r.threads, [&](std::size_t i) {
    std::vector<EnvelopeGrid*> sinks;
    for (std::size_t k = 0; k < n_snap; ++k) sinks.push_back(&r.snapshots[k][i]);
    try {
      if (s.noise.enabled) {
        NoiseProcess p = base.substream(i);
        detail::march(prop, sample_input_pulse(p, coherent), &p, r.snapshot_steps, sinks, r.steps);
      } else {
        detail::march(prop, coherent, nullptr, r.snapshot_steps, sinks, r.steps);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory " + std::to_string(i) + " " + e.what());
    }
  });

  // Leakage of the coherent part, measured on a noiseless reference run.
  std::vector<EnvelopeGrid> reference(n_snap);
  if (s.noise.enabled) {
    std::vector<EnvelopeGrid*> sinks;
    for (auto& g : reference) sinks.push_back(&g);
    detail::march(prop, coherent, nullptr, r.snapshot_steps, sinks, r.steps);
  } else {
    for (std::size_t k = 0; k < n_snap; ++k) reference[k] = r.snapshots[k][0];
  }

  const Fft fft(s.grid.points);
  for (std::size_t k = 0; k < n_snap; ++k) {
    r.moments.push_back(reduce_moments(std::span<const EnvelopeGrid>(r.snapshots[k])));
    std::vector<cvec> modes;
    modes.reserve(s.trajectories);
    for (const auto& g : r.snapshots[k]) modes.push_back(temporal_modes(g, fft));
    r.mode_moments.push_back(reduce_moments(std::span<const cvec>(modes)));
    r.leakage.push_back(spectral_leakage(reference[k], s.expansion.delta_omega / 2, fft));
  }
  r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Output writing

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string indexed(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline std::string trajectory_csv(const EnvelopeGrid& g) {
  std::string s = "tau_s,re,im,abs2\n";
  for (std::size_t j = 0; j < g.size(); ++j)
    s += fmt17(g.tau(j)) + ',' + fmt17(g.a[j].real()) + ',' + fmt17(g.a[j].imag()) + ',' + fmt17(std::norm(g.a[j])) +
         '\n';
  return s;
}

/// Little-endian float64 interleaved (re, im).
inline std::string trajectory_binary(const EnvelopeGrid& g) {
  std::string s;
  s.reserve(g.size() * 16);
  auto put = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) s.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  };
  for (const auto& v : g.a) {
    put(v.real());
    put(v.imag());
  }
  return s;
}

inline std::string moments_csv(const EnvelopeGrid& layout, const EnsembleMoments& m) {
  std::string s = "tau_s,mean_re,mean_im,sym_var,intensity,stderr,stderr_mean,stderr_intensity\n";
  for (std::size_t j = 0; j < layout.size(); ++j)
    s += fmt17(layout.tau(j)) + ',' + fmt17(m.mean_field[j].real()) + ',' + fmt17(m.mean_field[j].imag()) + ',' +
         fmt17(m.symmetric_variance[j]) + ',' + fmt17(m.intensity_mean[j]) + ',' + fmt17(m.variance_stderr[j]) + ',' +
         fmt17(m.mean_stderr[j]) + ',' + fmt17(m.intensity_stderr[j]) + '\n';
  return s;
}

inline std::string mode_moments_csv(std::size_t n, double window, const EnsembleMoments& m) {
  std::string s = "mode,detuning_rad_per_s,mean_re,mean_im,sym_var,intensity,stderr\n";
  for (std::size_t j = 0; j < n; ++j)
    s += std::to_string(j) + ',' + fmt17(spectral_detuning(j, n, window)) + ',' + fmt17(m.mean_field[j].real()) + ',' +
         fmt17(m.mean_field[j].imag()) + ',' + fmt17(m.symmetric_variance[j]) + ',' + fmt17(m.intensity_mean[j]) +
         ',' + fmt17(m.variance_stderr[j]) + '\n';
  return s;
}

inline nlohmann::json expansion_json(const DispersionExpansion& e) {
  nlohmann::json k = nlohmann::json::array(), p = nlohmann::json::array();
  for (const auto& v : e.k) k.push_back({v.real(), v.imag()});
  for (const auto& v : e.p) p.push_back({v.real(), v.imag()});
  return {{"omega0_rad_per_s", e.omega0}, {"delta_omega_rad_per_s", e.delta_omega}, {"k_re_im", k},
          {"p_re_im", p},                 {"k_phi_per_m", e.k_phi},                 {"group_velocity_m_per_s", e.group_velocity}};
}

inline nlohmann::json truncation_json() {
  return {{"dispersion_order", 2},
          {"kerr", "local (delta-function kernel)"},
          {"frame", "retarded, tau = t - Re(k1) x; Im(k1) kept in the spectral symbol"},
          {"backward_envelope", "assumed zero"},
          {"neglected", {"dispersion terms W^m with m > 2", "Taylor terms p_m with m >= 1 in the noise coefficient",
                         "counter-propagating nonlinear coupling", "third-order Wigner noise corrections"}},
          {"noise_prefactor", "frequency independent, fixed at the carrier"}};
}

/// Writes trajectory snapshots, moment tables and manifest.json into out_dir.
inline nlohmann::json write_propagation(const Scenario& s, const PropagationResult& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const EnvelopeGrid layout = EnvelopeGrid::make(s.grid.points, s.grid.window, s.expansion.omega0, s.expansion.k_phi);
  const bool binary = s.output.format == "binary";
  nlohmann::json files = nlohmann::json::array();

  for (std::size_t k = 0; k < r.snapshot_x.size(); ++k) {
    const std::string tag = indexed("_s", k, 2);
    if (s.output.trajectory_files) {
      for (std::size_t i = 0; i < s.trajectories; ++i) {
        const std::string stem = indexed("traj_", i, 5) + tag;
        const auto& g = r.snapshots[k][i];
        if (binary) {
          write_text(out_dir / (stem + ".bin"), trajectory_binary(g));
          const nlohmann::json side = {{"file", stem + ".bin"},
                                       {"dtype", "float64 little-endian, interleaved (re, im)"},
                                       {"shape", {g.size(), 2}},
                                       {"trajectory", i},
                                       {"x_m", r.snapshot_x[k]},
                                       {"tau0_s", layout.tau(0)},
                                       {"h_t_s", layout.h_t()},
                                       {"seed", s.noise.seed},
                                       {"field_units", "sqrt(photons/s)"},
                                       {"photons_per_s_per_SI_A2", s.conversion_factor}};
          write_text(out_dir / (stem + ".json"), side.dump(2) + "\n");
          files.push_back(stem + ".bin");
          files.push_back(stem + ".json");
        } else {
          write_text(out_dir / (stem + ".csv"), trajectory_csv(g));
          files.push_back(stem + ".csv");
        }
      }
    }
    write_text(out_dir / ("moments" + tag + ".csv"), moments_csv(layout, r.moments[k]));
    write_text(out_dir / ("modes" + tag + ".csv"), mode_moments_csv(s.grid.points, s.grid.window, r.mode_moments[k]));
    files.push_back("moments" + tag + ".csv");
    files.push_back("modes" + tag + ".csv");
  }

  double max_leak = 0.0;
  for (double l : r.leakage) max_leak = std::max(max_leak, l);
  nlohmann::json manifest = {
      {"tool", "qpulse"},
      {"version", tool_version},
      {"scenario_digest_fnv1a64", fnv1a_hex(s.source.dump())},
      {"scenario", s.source},
      {"seed", s.noise.seed},
      {"trajectories", s.trajectories},
      {"threads", r.threads},
      {"wall_clock_s", r.wall_clock_s},
      {"steps", r.steps},
      {"h_x_m", r.h_x},
      {"snapshot_x_m", r.snapshot_x},
      {"expansion", expansion_json(s.expansion)},
      {"dispersion_override", s.dispersion_override},
      {"chi_per_m_per_photon_flux", s.kerr.chi},
      {"field_units", "sqrt(photons/s)"},
      {"photons_per_s_per_SI_A2", s.conversion_factor},
      {"truncation", truncation_json()},
      {"leakage", {{"per_snapshot", r.leakage}, {"max", max_leak}, {"limit", propagation_leakage_limit},
                   {"ok", max_leak <= propagation_leakage_limit}}},
      {"files", files}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Linear solver run

/// Integrates every configured frequency slice in both directions. The force
/// uses the bosonic delta normalization: per-cell variance (nbar + 1/2) / h_x.
inline std::vector<FrequencySlice> run_linear(const Scenario& s) {
  if (!s.linear) throw ScenarioError("scenario has no 'linear' block");
  const auto& ls = *s.linear;
  std::vector<FrequencySlice> slices;
  for (std::size_t i = 0; i < ls.omegas.size(); ++i) {
    auto slice = FrequencySlice::make(ls.omegas[i], ls.x_min, ls.x_max, ls.points);
    if (s.noise.enabled) {
      NoiseProcess p;
      p.seed = s.noise.seed;
      p.nbar = s.noise.nbar;
      p.v0 = 1.0;
      p.stream = i;
      slice.f = sample_force(p, ls.points, slice.h_x, 1.0);
    }
    integrate_langevin(s.medium, slice, Direction::forward);
    integrate_langevin(s.medium, slice, Direction::backward);
    slices.push_back(std::move(slice));
  }
  return slices;
}

inline void write_linear(const Scenario& s, const std::vector<FrequencySlice>& slices, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto& sl = slices[i];
    std::string csv = "x_m,re_a_fwd,im_a_fwd,re_a_bwd,im_a_bwd\n";
    for (std::size_t j = 0; j < sl.points(); ++j)
      csv += fmt17(sl.x(j)) + ',' + fmt17(sl.a_fwd[j].real()) + ',' + fmt17(sl.a_fwd[j].imag()) + ',' +
             fmt17(sl.a_bwd[j].real()) + ',' + fmt17(sl.a_bwd[j].imag()) + '\n';
    const std::string stem = indexed("linear_w", i, 3);
    write_text(out_dir / (stem + ".csv"), csv);
    const cplx k = wavenumber(s.medium, sl.omega).k;
    const nlohmann::json meta = {{"omega_rad_per_s", sl.omega}, {"k_per_m", {k.real(), k.imag()}},
                                 {"seed", s.noise.seed},         {"stream", i},
                                 {"noise", s.noise.enabled},     {"nbar", s.noise.nbar},
                                 {"x_min_m", sl.x_min},          {"h_x_m", sl.h_x},
                                 {"points", sl.points()}};
    write_text(out_dir / (stem + ".json"), meta.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// Tables

/// CSV of (omega, eps_r, eps_i, k_r, k_i, n_r, n_i) on a uniform grid.
inline void medium_table(std::ostream& out, const MediumModel& m, double w0, double w1, std::size_t n) {
  if (n < 1 || !(w0 > 0) || !(w1 >= w0)) throw std::invalid_argument("medium --eval: need 0 < omega0 <= omega1, N >= 1");
  out << "omega_rad_per_s,eps_r,eps_i,k_r_per_m,k_i_per_m,n_r,n_i\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double w = n == 1 ? w0 : w0 + (w1 - w0) * static_cast<double>(i) / static_cast<double>(n - 1);
    const cplx e = permittivity(m, w);
    const auto kn = wavenumber(m, w);
    out << fmt17(w) << ',' << fmt17(e.real()) << ',' << fmt17(e.imag()) << ',' << fmt17(kn.k.real()) << ','
        << fmt17(kn.k.imag()) << ',' << fmt17(kn.n.real()) << ',' << fmt17(kn.n.imag()) << '\n';
  }
}

/// CSV of G_H(dx) in both modes.
inline void kernel_table(std::ostream& out, const Scenario& s, double dx0, double dx1, std::size_t n) {
  if (n < 1 || !(dx1 >= dx0)) throw std::invalid_argument("kernel --dx-range: need dx0 <= dx1 and N >= 1");
  out << "dx_m,re_full,im_full,re_leading,im_leading\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = n == 1 ? dx0 : dx0 + (dx1 - dx0) * static_cast<double>(i) / static_cast<double>(n - 1);
    const cplx full = kernel_GH(s.medium, s.expansion, dx, KernelMode::full);
    const cplx lead = kernel_GH(s.medium, s.expansion, dx, KernelMode::leading);
    out << fmt17(dx) << ',' << fmt17(full.real()) << ',' << fmt17(full.imag()) << ',' << fmt17(lead.real()) << ','
        << fmt17(lead.imag()) << '\n';
  }
}

}  // namespace qpulse
