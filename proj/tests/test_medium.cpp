#include "qpulse/medium.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qpulse;

namespace {

MediumModel lorentz() {
  MediumModel m;
  m.resonances.push_back({1e30, 2e15, 1e13});
  return m;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

// Reference values from an independent 40-digit evaluation (mpmath) of the
// Lorentz formula and of symbolic derivatives of (w/c) sqrt(eps(w)) at w = 1e15.
const cplx eps_ref{1.3333296296707814358, 0.0011110987655692714525};
const cplx k_ref{3851661.3879519262673, 1604.8452593195431588};
const cplx dk_ref[] = {k_ref,
                       {4.172614112908143837723359e-9, 5.215695595240209532982807e-12},
                       {1.364011831148620609530844e-24, 1.701754184786757635698192e-26},
                       {4.125183948739962394245619e-39, 6.759733872957777302297933e-41},
                       {1.547566875836922412110646e-53, 3.348855539924396521448964e-55}};

}  // namespace

TEST(PhysicalConstants, AlphaFollowsItsInputs) {
  PhysicalConstants pc;
  EXPECT_NEAR(pc.alpha() / 3.2474171545616512394e-15, 1.0, 1e-14);
  pc.area *= 4;
  EXPECT_NEAR(pc.alpha() / 3.2474171545616512394e-15, 0.5, 1e-14);
}

TEST(PhysicalConstants, RejectsNonPositive) {
  PhysicalConstants pc;
  pc.hbar = 0;
  EXPECT_THROW(pc.validate(), std::invalid_argument);
}

TEST(Permittivity, VacuumIsOne) {
  const MediumModel vac;
  EXPECT_EQ(permittivity(vac, 3e15), cplx(1.0, 0.0));
}

TEST(Permittivity, AtResonanceIsPurelyAbsorptive) {
  MediumModel m = lorentz();
  m.eps_background = 2.0;
  const auto& r = m.resonances[0];
  const cplx e = permittivity(m, r.omega_r);
  EXPECT_NEAR(e.real(), 2.0, 1e-12);
  EXPECT_NEAR(e.imag() / (r.plasma_sq / (r.gamma * r.omega_r)), 1.0, 1e-14);
}

TEST(Permittivity, MatchesDirectEvaluation) { EXPECT_LT(rel(permittivity(lorentz(), 1e15), eps_ref), 1e-14); }

TEST(Permittivity, RejectsNonPositiveFrequency) {
  EXPECT_THROW(permittivity(lorentz(), 0.0), std::domain_error);
  EXPECT_THROW(permittivity(lorentz(), -1.0), std::domain_error);
}

TEST(Permittivity, PassiveEverywhere) {
  MediumModel m = lorentz();
  m.resonances.push_back({3e29, 5e14, 2e12});
  for (double lw = 12; lw < 18; lw += 0.01) {
    const double w = std::pow(10.0, lw);
    EXPECT_GE(permittivity(m, w).imag(), 0.0);
    EXPECT_GE(wavenumber(m, w).k.imag(), 0.0);
  }
}

TEST(Wavenumber, Vacuum) {
  const MediumModel vac;
  const auto kn = wavenumber(vac, 2e15);
  EXPECT_DOUBLE_EQ(kn.k.real(), 2e15 / vac.constants.c);
  EXPECT_EQ(kn.k.imag(), 0.0);
}

TEST(Wavenumber, RefractiveIndexRelation) {
  const auto kn = wavenumber(lorentz(), 1e15);
  const double c = PhysicalConstants{}.c;
  EXPECT_NEAR(kn.k.real() / (1e15 * kn.n.real() / c), 1.0, 1e-15);
  EXPECT_NEAR(kn.k.imag() / (1e15 * kn.n.imag() / c), 1.0, 1e-15);
  EXPECT_LT(rel(kn.n * kn.n, eps_ref), 1e-14);
  EXPECT_LT(rel(kn.k, k_ref), 1e-14);
}

TEST(Wavenumber, MetallicBandRejected) {
  MediumModel m;
  m.resonances.push_back({1e30, 1e15, 0.0});
  EXPECT_THROW(wavenumber(m, 1.1e15), std::domain_error);
}

TEST(Wavenumber, WeakAbsorptionIdentity) {
  MediumModel m = lorentz();
  m.resonances[0].gamma = 1e11;
  const double w = 1e15;
  const cplx e = permittivity(m, w);
  ASSERT_LT(e.imag() / e.real(), 1e-3);
  const double ki = wavenumber(m, w).k.imag();
  const double approx = w * e.imag() / (2 * m.constants.c * std::sqrt(e.real()));
  EXPECT_LT(std::abs(ki - approx) / ki, 1e-2);
}

TEST(Wavenumber, ContinuousAlongGrid) {
  const MediumModel m = lorentz();
  cplx prev = wavenumber(m, 1e14).k;
  for (double w = 1e14 + 1e12; w < 1.9e15; w += 1e12) {
    const cplx k = wavenumber(m, w).k;
    EXPECT_LT(std::abs(k - prev), 1e-2 * std::abs(k));
    prev = k;
  }
}

TEST(TaylorExpand, Vacuum) {
  const MediumModel vac;
  const double w0 = 1e15, c = vac.constants.c;
  const auto e = taylor_expand(vac, w0, 1e14);
  EXPECT_NEAR(e.k[0].real() / (w0 / c), 1.0, 1e-15);
  EXPECT_NEAR(e.k[1].real() * c, 1.0, 1e-12);
  for (int m = 2; m <= 4; ++m) EXPECT_LT(std::abs(e.k[m]) * std::pow(w0, m) / e.k[0].real(), 1e-12);
  for (const auto& p : e.p) EXPECT_EQ(std::abs(p), 0.0);
}

TEST(TaylorExpand, DispersionlessDielectric) {
  MediumModel m;
  m.eps_background = 2.25;
  const auto e = taylor_expand(m, 1e15, 1e14);
  EXPECT_NEAR(e.k[1].real() * m.constants.c, 1.5, 1e-12);
  EXPECT_LT(std::abs(e.k[2]) * 1e30 / e.k[0].real(), 1e-12);
}

TEST(TaylorExpand, LorentzMatchesSymbolicDerivatives) {
  const auto e = taylor_expand(lorentz(), 1e15, 1e14);
  for (int m = 0; m <= 4; ++m) EXPECT_LT(rel(e.k[m], dk_ref[m]), 1e-6) << "k[" << m << "]";
}

TEST(TaylorExpand, CarrierAndGroupVelocity) {
  const auto e = taylor_expand(lorentz(), 1e15, 1e14);
  EXPECT_EQ(e.k_phi, e.k[0].real());
  EXPECT_DOUBLE_EQ(e.group_velocity, 1.0 / e.k[1].real());
  EXPECT_EQ(e.order(), 4);
}

TEST(TaylorExpand, LossFactorCoefficients) {
  const MediumModel m = lorentz();
  const auto e = taylor_expand(m, 1e15, 1e14);
  const cplx eps = permittivity(m, 1e15);
  EXPECT_LT(rel(e.p[0], std::sqrt(cplx(eps.imag()) / eps)), 1e-14);
  // First derivative of sqrt(eps_i/eps) against a plain central difference.
  auto lf = [&](double w) {
    const cplx x = permittivity(m, w);
    return std::sqrt(cplx(x.imag()) / x);
  };
  const double h = 1e10;
  EXPECT_LT(rel(e.p[1], (lf(1e15 + h) - lf(1e15 - h)) / (2 * h)), 1e-6);
}

TEST(TaylorExpand, Preconditions) {
  const MediumModel m = lorentz();
  EXPECT_THROW(taylor_expand(m, 1e15, 2.5e15), std::invalid_argument);
  EXPECT_THROW(taylor_expand(m, 1e15, 1e14, 1), std::invalid_argument);
  EXPECT_THROW(taylor_expand(m, 1.99e15, 1e14), std::invalid_argument);
}

TEST(TaylorExpand, NonConvergenceNamesCoefficient) {
  const double w0 = 1e15;
  auto kink = [&](double w) { return std::complex<double>(std::abs(w - w0), 0.0); };
  auto smooth = [](double) { return std::complex<double>(0.0, 0.0); };
  try {
    taylor_expand<double>(kink, smooth, w0, 1e14, 2);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("k_2"), std::string::npos) << e.what();
  }
}

namespace {

std::vector<double> kk_grid(double wr, std::size_t n = 4096) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = wr / 10 + (10 * wr - wr / 10) * static_cast<double>(i) / (n - 1.0);
  return g;
}

}  // namespace

TEST(KramersKronig, LorentzResidualSmall) { EXPECT_LT(kk_residual(lorentz(), kk_grid(2e15)), 1e-3); }

TEST(KramersKronig, AgreesWithBruteForcePrincipalValue) {
  // KK[eps_i](w) = (2/pi) PV int_0^W w' eps_i(w') / (w'^2 - w^2) dw', singularity
  // subtracted analytically, trapezoid on a fine grid.
  const MediumModel m = lorentz();
  const double wmax = 4e16, dw = m.resonances[0].gamma / 32;
  const auto n = static_cast<std::size_t>(wmax / dw);
  auto ei = [&](double w) { return m.eps(w).imag(); };
  double worst = 0;
  for (double w0 : {3e14, 1.1e15, 1.9e15, 2.05e15, 5e15, 1.5e16}) {
    const double w = w0 + 0.5 * dw;  // off the quadrature nodes
    const double g0 = w * ei(w);
    double acc = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double wp = dw * static_cast<double>(i);
      const double term = (wp * ei(wp) - g0) / (wp * wp - w * w);
      acc += (i == n ? 0.5 : 1.0) * term;
    }
    acc *= dw;
    acc += g0 / (2 * w) * std::log((wmax - w) / (wmax + w));
    const double kk = 2 / pi * acc;
    const double er = m.eps(w).real() - 1;
    ASSERT_TRUE(std::isfinite(kk));
    worst = std::max(worst, std::abs(kk - er));
  }
  const double peak = std::abs(m.eps(2e15 - m.resonances[0].gamma / 2).real() - 1);
  EXPECT_LT(worst / peak, 1e-3);
}

TEST(KramersKronig, ZeroedAbsorptionDetected) {
  const MediumModel m = lorentz();
  auto no_loss = [&](double w) { return cplx(m.eps(w).real(), 0.0); };
  EXPECT_GT(kk_residual(no_loss, 1.0, kk_grid(2e15), m.resonances[0].gamma / 32), 0.1);
}

TEST(KramersKronig, VacuumIsZero) {
  const MediumModel vac;
  EXPECT_EQ(kk_residual(vac, kk_grid(1e15)), 0.0);
}

TEST(KramersKronig, Errors) {
  MediumModel m = lorentz();
  EXPECT_THROW(kk_residual(m, kk_grid(2e15, 1000)), std::invalid_argument);
  std::vector<double> narrow(4096);
  for (std::size_t i = 0; i < narrow.size(); ++i) narrow[i] = 1e15 + 1e11 * i;
  EXPECT_THROW(kk_residual(m, narrow), std::invalid_argument);
  m.resonances[0].gamma = 0.0;
  EXPECT_THROW(kk_residual(m, kk_grid(2e15)), std::domain_error);
}
