#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qaction/dynamics.hpp"
#include "qaction/error.hpp"

using namespace qaction;

namespace {

const ActionSpec kPE = make_action(1.0, Potential2D{0.0, 0.5, 0.05, 0.0});
const ActionSpec kOsc = make_action(1.0, Potential2D{0.0, 0.5, 0.0, 0.0});

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

PhaseState on_shell(const ActionSpec& a, double e, double x, double px) {
  const double rest = 2.0 * a.mass * (e - evaluate_potential(a.potential, Point{x, 0.0})) - px * px;
  return {x, 0.0, px, std::sqrt(rest)};
}

// Tangent-space estimate of the largest exponent for V = 0.5 r^2 + 0.05 x^2 y^2,
// m = 1: RK4 on the state and the linearized flow together, renormalizing the
// tangent vector every unit of time.
double tangent_lyapunov(PhaseState s, double t_max, double dt) {
  using V8 = std::array<double, 8>;
  const auto rhs = [](const V8& u) {
    const double x = u[0], y = u[1];
    const double hxx = 1.0 + 0.1 * y * y, hyy = 1.0 + 0.1 * x * x, hxy = 0.2 * x * y;
    return V8{u[2], u[3], -(x + 0.1 * x * y * y), -(y + 0.1 * x * x * y),
              u[6], u[7], -(hxx * u[4] + hxy * u[5]), -(hxy * u[4] + hyy * u[5])};
  };
  V8 u{s.x, s.y, s.px, s.py, 1.0, 0.0, 0.0, 0.0};
  const auto per = static_cast<int>(std::lround(1.0 / dt));
  const auto epochs = static_cast<int>(std::lround(t_max));
  double sum = 0.0;
  for (int e = 0; e < epochs; ++e) {
    for (int k = 0; k < per; ++k) {
      const V8 k1 = rhs(u);
      V8 tmp;
      for (int i = 0; i < 8; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
      const V8 k2 = rhs(tmp);
      for (int i = 0; i < 8; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
      const V8 k3 = rhs(tmp);
      for (int i = 0; i < 8; ++i) tmp[i] = u[i] + dt * k3[i];
      const V8 k4 = rhs(tmp);
      for (int i = 0; i < 8; ++i) u[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    const double n = std::sqrt(u[4] * u[4] + u[5] * u[5] + u[6] * u[6] + u[7] * u[7]);
    sum += std::log(n);
    for (int i = 4; i < 8; ++i) u[i] /= n;
  }
  return sum / t_max;
}

double distance(const PhaseState& a, const PhaseState& b) {
  return std::hypot(a.x - b.x, a.y - b.y, std::hypot(a.px - b.px, a.py - b.py));
}

}  // namespace

TEST(Rk4, FourthOrderOnTheOscillator) {
  const PhaseState s0{1.0, 0.5, 0.0, 0.3};
  const double t = 2.0 * std::numbers::pi;
  std::vector<double> errs;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) errs.push_back(distance(propagate(kOsc, s0, dt, t), s0));
  EXPECT_LT(errs.back(), 1e-6);
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double order = std::log2(errs[i - 1] / errs[i]);
    EXPECT_GT(order, 3.7);
    EXPECT_LT(order, 4.3);
  }
}

TEST(Rk4, MatchesTheAnalyticOscillator) {
  const PhaseState s0{0.7, -0.2, 0.4, 1.1};
  const auto tr = integrate_rk4(kOsc, s0, 1e-3, 3.0, 500);
  ASSERT_EQ(tr.times.size(), tr.states.size());
  EXPECT_DOUBLE_EQ(tr.times.back(), 3.0);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double t = tr.times[i];
    EXPECT_NEAR(tr.states[i].x, s0.x * std::cos(t) + s0.px * std::sin(t), 1e-10);
    EXPECT_NEAR(tr.states[i].py, s0.py * std::cos(t) - s0.y * std::sin(t), 1e-10);
  }
  // A t_max that is not a multiple of dt still lands on t_max.
  EXPECT_DOUBLE_EQ(integrate_rk4(kOsc, s0, 1e-2, 0.1234).times.back(), 0.1234);
}

TEST(Rk4, ConservesEnergyAndIsTimeReversible) {
  const PhaseState s0 = on_shell(kPE, 20.0, -2.0, 1.0);
  const auto end = propagate(kPE, s0, 1e-3, 100.0);
  EXPECT_LT(std::abs(energy_of_state(kPE, end) - 20.0) / 20.0, 1e-8);
  const PhaseState back = propagate(kPE, {end.x, end.y, -end.px, -end.py}, 1e-3, 5.0);
  const PhaseState fwd = propagate(kPE, s0, 1e-3, 95.0);
  EXPECT_LT(distance({back.x, back.y, -back.px, -back.py}, fwd), 1e-6);
}

TEST(Rk4, OverflowIsReported) {
  // A step far beyond RK4's stability limit for the quartic coupling diverges.
  EXPECT_EQ(code_of([] { integrate_rk4(kPE, PhaseState{50.0, 50.0, 0.0, 0.0}, 0.5, 100.0); }), ErrorCode::Overflow);
  EXPECT_EQ(code_of([] { propagate(make_action(1.0, Potential1D{0.0, 0.5, 0.0}), PhaseState{}, 1e-2, 1.0); }),
            ErrorCode::InvalidArgument);
}

TEST(Shell, SamplesLieOnTheShell) {
  const auto s = sample_energy_shell(kPE, 10.0, 50, 7);
  ASSERT_EQ(s.size(), 50u);
  for (const auto& p : s) {
    EXPECT_NEAR(energy_of_state(kPE, p), 10.0, 1e-12);
    EXPECT_EQ(p.y, 0.0);
    EXPECT_GT(p.py, 0.0);
  }
  EXPECT_EQ(sample_energy_shell(kPE, 10.0, 50, 7), s);
  EXPECT_NE(sample_energy_shell(kPE, 10.0, 50, 8), s);
  EXPECT_EQ(code_of([] { sample_energy_shell(kPE, -1.0, 5, 1); }), ErrorCode::EmptyShell);
}

TEST(Section, IntegrableCaseCollapsesToTheCircle) {
  // For the separable oscillator at E = 1 started at x = 1, px = 0, every
  // upward crossing of y = 0 returns to (1, 0).
  const std::vector<PhaseState> s0{on_shell(kOsc, 1.0, 1.0, 0.0)};
  SectionSettings cfg;
  cfg.max_crossings = 50;
  const auto sec = poincare_section(kOsc, s0, 1.0, cfg);
  ASSERT_EQ(sec.trajectories.size(), 1u);
  ASSERT_EQ(sec.trajectories[0].crossings.size(), 50u);
  for (const auto& c : sec.trajectories[0].crossings) {
    EXPECT_NEAR(c.x, 1.0, 1e-8);
    EXPECT_NEAR(c.px, 0.0, 1e-8);
  }
  EXPECT_LT(sec.trajectories[0].max_plane_offset, 1e-8);
  EXPECT_EQ(sec.total_crossings(), 50u);
}

TEST(Section, CrossingsStayOnTheShell) {
  const auto s0 = sample_energy_shell(kPE, 20.0, 4, 42);
  SectionSettings cfg;
  cfg.max_crossings = 200;
  const auto sec = poincare_section(kPE, s0, 20.0, cfg);
  for (const auto& tr : sec.trajectories) {
    EXPECT_LT(tr.max_energy_error, 1e-8);
    EXPECT_FALSE(tr.drift_flagged);
    for (const auto& c : tr.crossings) {
      // On y = 0 with py > 0 the section point must leave room for py^2.
      EXPECT_LT(c.px * c.px / 2.0 + 0.5 * c.x * c.x, 20.0 + 1e-8);
    }
  }
}

TEST(Section, MirrorSymmetry) {
  // V is even in x, so (x, px) -> (-x, -px) maps sections onto sections.
  const std::vector<PhaseState> a{on_shell(kPE, 10.0, 1.5, 0.7)};
  const std::vector<PhaseState> b{on_shell(kPE, 10.0, -1.5, -0.7)};
  SectionSettings cfg;
  cfg.max_crossings = 40;
  const auto sa = poincare_section(kPE, a, 10.0, cfg);
  const auto sb = poincare_section(kPE, b, 10.0, cfg);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_NEAR(sa.trajectories[0].crossings[i].x, -sb.trajectories[0].crossings[i].x, 1e-9);
    EXPECT_NEAR(sa.trajectories[0].crossings[i].px, -sb.trajectories[0].crossings[i].px, 1e-9);
  }
}

TEST(Section, RejectsBadInput) {
  const std::vector<PhaseState> off{PhaseState{0.0, 0.0, 0.0, 1.0}};
  EXPECT_EQ(code_of([&] { poincare_section(kPE, off, 20.0); }), ErrorCode::InvalidArgument);
  // A trajectory moving along the x axis never crosses y = 0 upward.
  const std::vector<PhaseState> flat{PhaseState{1.0, 0.0, std::sqrt(2.0 * (1.0 - 0.5)), 0.0}};
  SectionSettings cfg;
  cfg.time_cap = 50.0;
  EXPECT_EQ(code_of([&] { poincare_section(kPE, flat, 1.0, cfg); }), ErrorCode::TooFewCrossings);
}

TEST(Lyapunov, RegularMotionIsBelowThreshold) {
  const auto est = lyapunov_max(kOsc, on_shell(kOsc, 5.0, 1.0, 1.0));
  EXPECT_LT(est.lambda_max, 0.01);
  EXPECT_FALSE(est.chaotic());
  EXPECT_EQ(est.history.size(), 2000u);
}

TEST(Lyapunov, ChaoticOrbitAgreesWithTheTangentFlow) {
  const PhaseState s0 = on_shell(kPE, 20.0, -2.8602915058482101, -1.387975761494185);
  LyapunovSettings shortrun;
  shortrun.t_max = 50.0;
  EXPECT_NEAR(lyapunov_max(kPE, s0, shortrun).lambda_max / tangent_lyapunov(s0, 50.0, 1e-3), 1.0, 1e-3);

  const auto est = lyapunov_max(kPE, s0);
  EXPECT_TRUE(est.chaotic());
  EXPECT_NEAR(est.lambda_max / tangent_lyapunov(s0, 2000.0, 1e-3), 1.0, 0.25);
}

TEST(Lyapunov, InsensitiveToTheRenormalizationInterval) {
  const PhaseState s0 = on_shell(kPE, 20.0, -2.8602915058482101, -1.387975761494185);
  LyapunovSettings twice;
  twice.renorm_interval = 2.0;
  const double a = lyapunov_max(kPE, s0).lambda_max;
  const double b = lyapunov_max(kPE, s0, twice).lambda_max;
  EXPECT_LT(std::abs(a - b) / a, 0.2);
  LyapunovSettings bad;
  bad.t_max = 1.0;
  EXPECT_EQ(code_of([&] { lyapunov_max(kPE, s0, bad); }), ErrorCode::InvalidArgument);
}

TEST(KolmogorovSmirnov, MatchesTheDirectStatistic) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n0(0.0, 1.0);
  std::normal_distribution<double> n1(0.3, 1.0);
  std::vector<double> a(300), b(200);
  for (auto& v : a) v = n0(rng);
  for (auto& v : b) v = n1(rng);
  // D by brute force over every sample point.
  double d = 0.0;
  for (const auto& pool : {a, b}) {
    for (double t : pool) {
      const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; })) / 300.0;
      const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; })) / 200.0;
      d = std::max(d, std::abs(fa - fb));
    }
  }
  const auto r = ks_two_sample(a, b);
  EXPECT_NEAR(r.statistic, d, 1e-15);
  const double en = std::sqrt(300.0 * 200.0 / 500.0);
  EXPECT_NEAR(r.p_value, oracle::kolmogorov_tail((en + 0.12 + 0.11 / en) * d), 1e-12);
  EXPECT_LT(r.p_value, 0.05);

  const auto same = ks_two_sample(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_THROW(ks_two_sample(a, std::vector<double>{}), Error);
}
