#pragma once

// Run description loaded from a JSON file. Every physical field carries its
// unit in the key name; unknown keys are rejected.

#include "qpulse/envelope.hpp"
#include "qpulse/medium.hpp"
#include "qpulse/nlse.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpulse {

/// Malformed or physically inadmissible run description.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Strict accessor for one JSON object: records consumed keys and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T required(const std::string& key) {
    if (!j_.contains(key)) throw ScenarioError(path_ + ": missing required key '" + key + "'");
    return get<T>(key);
  }

  template <class T>
  T optional(const std::string& key, T fallback) {
    return j_.contains(key) ? get<T>(key) : fallback;
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    return get<T>(key);
  }

  ObjectReader child(const std::string& key) {
    used_.insert(key);
    return ObjectReader(j_.at(key), path_ + "." + key);
  }

  const nlohmann::json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ScenarioError(path_ + ": unknown key '" + item.key() + "'");
  }

 private:
  template <class T>
  T get(const std::string& key) {
    used_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ScenarioError(path_ + "." + key + ": wrong value type");
    }
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

enum class PulseShape { zero, gaussian, sech };

struct PulseSpec {
  PulseShape shape = PulseShape::zero;
  double amplitude = 0.0;  // sqrt(photons/s)
  std::optional<double> soliton_order;
  double width = 0.0;   // s; gaussian exp(-t^2/(2 T0^2)), sech(t/tau0)
  double center = 0.0;  // s
  double frequency_offset = 0.0;  // rad/s
  std::optional<double> bandwidth;  // rad/s, declared
};

struct GridSpec {
  std::size_t points = 0;
  double window = 0.0;    // s
  double distance = 0.0;  // m
  std::optional<std::size_t> steps;
};

struct NoiseSpec {
  bool enabled = false;
  double nbar = 0.0;
  double v0 = 0.5;
  std::uint64_t seed = 0;
};

struct OutputSpec {
  std::vector<double> snapshots;  // m
  bool trajectory_files = true;
  std::string format = "csv";
};

/// Frequency slices for the linear Green-function solver.
struct LinearSpec {
  std::vector<double> omegas;
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t points = 0;
};

struct Scenario {
  MediumModel medium;
  DispersionExpansion expansion;
  bool dispersion_override = false;
  KerrSpec kerr;
  double conversion_factor = 1.0;  // photons/s per unit |A|^2 (SI)
  GridSpec grid;
  PulseSpec pulse;
  NoiseSpec noise;
  std::size_t trajectories = 1;
  OutputSpec output;
  std::optional<LinearSpec> linear;
  nlohmann::json source;  // effective description (after overrides)

  double h_t() const { return grid.window / static_cast<double>(grid.points); }
  double k0i() const { return expansion.k_coeff(0).imag(); }
  cplx k2() const { return expansion.k_coeff(2); }

  EnvelopeGrid coherent_input() const {
    auto g = EnvelopeGrid::make(grid.points, grid.window, expansion.omega0, expansion.k_phi);
    if (pulse.shape == PulseShape::zero) return g;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double s = g.tau(j) - pulse.center;
      const double envelope = pulse.shape == PulseShape::gaussian ? std::exp(-s * s / (2 * pulse.width * pulse.width))
                                                                  : 1.0 / std::cosh(s / pulse.width);
      g.a[j] = pulse.amplitude * envelope * std::polar(1.0, -pulse.frequency_offset * s);
    }
    return g;
  }

  double peak_power() const {
    double p = 0.0;
    for (const auto& v : coherent_input().a) p = std::max(p, std::norm(v));
    return p;
  }

  double step_budget() const { return default_step(h_t(), k2(), kerr.chi, peak_power(), k0i()); }

  std::size_t steps() const {
    if (grid.steps) return *grid.steps;
    const double h = step_budget();
    if (!std::isfinite(h)) return 1;
    return static_cast<std::size_t>(std::max(1.0, std::ceil(grid.distance / h * (1 - 1e-12))));
  }

  double h_x() const { return grid.distance / static_cast<double>(steps()); }

  /// Step index of each requested snapshot (nearest step).
  std::vector<std::size_t> snapshot_steps() const {
    std::vector<std::size_t> out;
    for (double x : output.snapshots) out.push_back(static_cast<std::size_t>(std::llround(x / h_x())));
    return out;
  }
};

inline MediumModel parse_medium(detail::ObjectReader r) {
  MediumModel m;
  if (r.has("resonances")) {
    const auto& list = r.raw("resonances");
    if (!list.is_array()) throw ScenarioError(r.path() + ".resonances: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      detail::ObjectReader e(list[i], r.path() + ".resonances[" + std::to_string(i) + "]");
      Resonance res;
      res.plasma_sq = e.required<double>("plasma_sq_rad2_per_s2");
      res.omega_r = e.required<double>("omega_r_rad_per_s");
      res.gamma = e.required<double>("gamma_rad_per_s");
      e.finish();
      m.resonances.push_back(res);
    }
  }
  m.eps_background = r.optional("eps_background", 1.0);
  m.rho = r.optional("rho", 1.0);
  m.constants.area = r.optional("area_m2", m.constants.area);
  r.finish();
  try {
    m.validate();
    m.constants.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(r.path() + ": " + e.what());
  }
  return m;
}

inline MediumModel parse_medium(const nlohmann::json& j, const std::string& path = "medium") {
  return parse_medium(detail::ObjectReader(j, path));
}

/// Photon flux per unit |A|^2: k_r / (2 pi alpha^2) at the carrier.
inline double photon_flux_factor(const MediumModel& medium, const DispersionExpansion& e) {
  const double a = medium.constants.alpha();
  return e.k_phi / (2 * pi * a * a);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

/// Maximum declared or measured spectral leakage of the input accepted at load.
inline constexpr double input_leakage_limit = 1e-6;

/// Parses and validates; every precondition of the run is checked here.
inline Scenario parse_scenario(const nlohmann::json& j) {
  Scenario s;
  s.source = j;
  detail::ObjectReader root(j, "scenario");

  s.medium = parse_medium(root.child("medium"));

  {
    auto c = root.child("carrier");
    const double w0 = c.required<double>("omega0_rad_per_s");
    const double dw = c.required<double>("delta_omega_rad_per_s");
    const int order = c.optional("taylor_order", 4);
    c.finish();
    if (!(w0 > 0) || !(dw > 0)) throw ScenarioError("carrier: omega0 and delta_omega must be positive");
    if (dw > w0 / 5)
      throw ScenarioError("carrier: delta_omega exceeds omega0/5; the band is too wide for a slowly varying envelope");
    try {
      s.expansion = taylor_expand(s.medium, w0, dw, order);
    } catch (const std::exception& e) {
      throw ScenarioError(std::string("carrier: ") + e.what());
    }
  }

  if (root.has("dispersion_override")) {
    auto d = root.child("dispersion_override");
    auto& k = s.expansion.k;
    if (k.size() < 3) k.resize(3);
    k[0] = {k[0].real(), d.optional("k0_imag_per_m", k[0].imag())};
    k[1] = {k[1].real(), d.optional("k1_imag_s_per_m", k[1].imag())};
    k[2] = {d.optional("k2_real_s2_per_m", k[2].real()), d.optional("k2_imag_s2_per_m", k[2].imag())};
    d.finish();
    if (k[0].imag() < 0) throw ScenarioError("dispersion_override: k0_imag_per_m must be >= 0 (no gain)");
    s.dispersion_override = true;
    s.expansion.refresh();
  }

  s.conversion_factor = photon_flux_factor(s.medium, s.expansion);

  if (root.has("kerr")) {
    auto k = root.child("kerr");
    const auto chi = k.maybe<double>("chi_per_m_per_photon_flux");
    const auto lambda = k.maybe<double>("lambda");
    k.finish();
    if (chi && lambda) throw ScenarioError("kerr: give either chi_per_m_per_photon_flux or lambda, not both");
    const cplx eps = permittivity(s.medium, s.expansion.omega0);
    if ((chi && *chi != 0) || (lambda && *lambda != 0)) {
      if (!(eps.real() > 0) || !(eps.imag() / eps.real() < weak_absorption_limit))
        throw ScenarioError("kerr: eps_i/eps_r = " + std::to_string(eps.imag() / eps.real()) +
                            " at the carrier; a Kerr term requires weak absorption (eps_i/eps_r < 1e-2)");
    }
    if (chi) s.kerr.chi = *chi;
    if (lambda) {
      s.kerr.lambda = *lambda;
      s.kerr.chi = chi_eff(s.medium, *lambda, s.expansion.omega0) / s.conversion_factor;
    }
  }

  {
    auto g = root.child("grid");
    s.grid.points = g.required<std::size_t>("points");
    s.grid.window = g.required<double>("window_s");
    s.grid.distance = g.required<double>("distance_m");
    s.grid.steps = g.maybe<std::size_t>("steps");
    g.finish();
    if (!is_power_of_two(s.grid.points)) throw ScenarioError("grid: points must be a power of two");
    if (!(s.grid.window > 0) || !(s.grid.distance > 0))
      throw ScenarioError("grid: window_s and distance_m must be positive");
    if (s.grid.steps && *s.grid.steps == 0) throw ScenarioError("grid: steps must be positive");
  }

  if (root.has("pulse")) {
    auto p = root.child("pulse");
    const auto shape = p.required<std::string>("shape");
    if (shape == "zero") s.pulse.shape = PulseShape::zero;
    else if (shape == "gaussian") s.pulse.shape = PulseShape::gaussian;
    else if (shape == "sech") s.pulse.shape = PulseShape::sech;
    else throw ScenarioError("pulse.shape: expected zero, gaussian or sech");
    const auto amp = p.maybe<double>("amplitude_sqrt_photons_per_s");
    s.pulse.soliton_order = p.maybe<double>("soliton_order");
    s.pulse.width = p.optional("width_s", 0.0);
    s.pulse.center = p.optional("center_s", 0.0);
    s.pulse.frequency_offset = p.optional("frequency_offset_rad_per_s", 0.0);
    s.pulse.bandwidth = p.maybe<double>("bandwidth_rad_per_s");
    p.finish();
    if (s.pulse.shape != PulseShape::zero) {
      if (!(s.pulse.width > 0)) throw ScenarioError("pulse: width_s must be positive");
      if (amp && s.pulse.soliton_order) throw ScenarioError("pulse: give either amplitude or soliton_order, not both");
      if (s.pulse.soliton_order) {
        const double k2r = s.k2().real();
        if (s.pulse.shape != PulseShape::sech || !(k2r < 0) || !(s.kerr.chi > 0))
          throw ScenarioError("pulse: soliton_order needs a sech pulse, anomalous dispersion (k2 < 0) and chi > 0");
        s.pulse.amplitude = *s.pulse.soliton_order * std::sqrt(-k2r / (s.kerr.chi * s.pulse.width * s.pulse.width));
      } else {
        if (!amp) throw ScenarioError("pulse: missing amplitude_sqrt_photons_per_s or soliton_order");
        s.pulse.amplitude = *amp;
      }
    }
  }
  if (s.pulse.bandwidth && *s.pulse.bandwidth > s.expansion.delta_omega)
    throw ScenarioError("pulse: declared bandwidth exceeds delta_omega; the narrow-band decomposition needs B <= delta_omega");

  if (root.has("noise")) {
    auto n = root.child("noise");
    s.noise.enabled = n.optional("enabled", true);
    s.noise.nbar = n.optional("nbar", 0.0);
    s.noise.v0 = n.optional("v0", 0.5);
    s.noise.seed = n.optional<std::uint64_t>("seed", 0);
    n.finish();
    if (!(s.noise.nbar >= 0) || !(s.noise.v0 > 0)) throw ScenarioError("noise: need nbar >= 0 and v0 > 0");
  }

  if (root.has("ensemble")) {
    auto e = root.child("ensemble");
    s.trajectories = e.optional<std::size_t>("trajectories", 1);
    e.finish();
    if (s.trajectories == 0) throw ScenarioError("ensemble: trajectories must be positive");
  }

  if (root.has("output")) {
    auto o = root.child("output");
    s.output.snapshots = o.optional("snapshots_m", std::vector<double>{});
    s.output.trajectory_files = o.optional("trajectory_files", true);
    s.output.format = o.optional<std::string>("format", "csv");
    o.finish();
  }
  if (s.output.format != "csv" && s.output.format != "binary") throw ScenarioError("output.format: expected csv or binary");
  if (s.output.snapshots.empty()) s.output.snapshots.push_back(s.grid.distance);
  for (double x : s.output.snapshots)
    if (!(x >= 0) || x > s.grid.distance * (1 + 1e-12))
      throw ScenarioError("output.snapshots_m: position " + std::to_string(x) + " m lies outside [0, distance_m]");

  if (root.has("linear")) {
    auto l = root.child("linear");
    LinearSpec ls;
    ls.omegas = l.required<std::vector<double>>("omegas_rad_per_s");
    ls.x_min = l.required<double>("x_min_m");
    ls.x_max = l.required<double>("x_max_m");
    ls.points = l.required<std::size_t>("points");
    l.finish();
    if (ls.omegas.empty()) throw ScenarioError("linear: omegas_rad_per_s is empty");
    for (double w : ls.omegas)
      if (!(w > 0)) throw ScenarioError("linear: frequencies must be positive");
    if (ls.points < 2 || !(ls.x_max > ls.x_min)) throw ScenarioError("linear: need points >= 2 and x_max_m > x_min_m");
    s.linear = ls;
  }
  root.finish();

  // Narrow-band input: the coherent spectrum must sit inside |W| <= delta_omega/2.
  if (s.pulse.shape != PulseShape::zero) {
    const auto g = s.coherent_input();
    const double leak = spectral_leakage(g, s.expansion.delta_omega / 2, Fft(g.size()));
    if (leak > input_leakage_limit)
      throw ScenarioError("pulse: " + std::to_string(leak) +
                          " of the input power lies outside |W| <= delta_omega/2 (limit 1e-6); "
                          "the pulse is too short for the narrow-band envelope");
  }

  // Step budget.
  const double budget = s.step_budget();
  if (s.grid.steps && s.h_x() > budget * (1 + 1e-12))
    throw ScenarioError("grid: h_x = " + std::to_string(s.h_x()) + " m exceeds the split-step budget " +
                        std::to_string(budget) + " m; raise steps to at least " +
                        std::to_string(static_cast<std::size_t>(std::ceil(s.grid.distance / budget))));
  if (s.kerr.chi != 0 && std::abs(s.kerr.chi) * s.peak_power() * s.h_x() > SplitStepPropagator::max_nonlinear_phase)
    throw ScenarioError("grid: nonlinear phase per step exceeds 0.05 rad at the input peak");
  return s;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_json_file(path)); }

/// 64-bit FNV-1a digest, hex.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qpulse
