#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qaction/error.hpp"
#include "qaction/fit.hpp"

using namespace qaction;

namespace {

const ActionSpec kHarmonic = make_action(1.0, Potential1D{0.0, 0.5, 0.0});
const ActionSpec kDoubleWell = make_action(1.0, Potential1D{0.5, -1.0, 0.5});

// Exact Mehler amplitudes on the default boundary set; for the harmonic
// oscillator the quantum action coincides with the classical one.
AmplitudeTable mehler_table(double t, double scale = 1.0) {
  AmplitudeTable table;
  table.duration = t;
  table.dim = 1;
  for (const auto& a : default_boundary_set(1)) {
    for (const auto& b : default_boundary_set(1)) {
      table.pairs.push_back({a, b, scale * oracle::mehler_kernel(1.0, 1.0, 1.0, t, a.x, b.x)});
    }
  }
  return table;
}

FlowEntry synthetic_entry(double t, double m, double v2, double v4) {
  FlowEntry e;
  e.transition_time = t;
  QuantumActionFit fit;
  fit.quantum_action = make_action(m, Potential1D{0.0, v2, v4}, ActionKind::Quantum);
  e.fit = fit;
  return e;
}

}  // namespace

TEST(Fit, HarmonicRecoversTheClassicalParameters) {
  const auto table = mehler_table(1.0);
  const auto start = make_action(1.3, Potential1D{0.0, 0.3, 0.05});
  const auto fit = fit_quantum_action(table, start, FitConfig{});
  const auto& p = fit.quantum_action.potential_1d();
  EXPECT_NEAR(fit.quantum_action.mass, 1.0, 1e-4);
  EXPECT_NEAR(p.v2, 0.5, 1e-4);
  EXPECT_NEAR(p.v4, 0.0, 1e-4);
  EXPECT_EQ(fit.quantum_action.kind, ActionKind::Quantum);
  // ln Z = ln of the Mehler prefactor.
  EXPECT_NEAR(fit.log_z, 0.5 * std::log(1.0 / (2.0 * std::numbers::pi * std::sinh(1.0))), 1e-4);
  EXPECT_LT(fit.residual_rms, 1e-6);
  EXPECT_EQ(fit.residuals.size(), table.pairs.size());
}

TEST(Fit, NormalizationOnlyShiftsLogZ) {
  const auto a = fit_quantum_action(mehler_table(1.0), kHarmonic, FitConfig{});
  const auto b = fit_quantum_action(mehler_table(1.0, 7.5), kHarmonic, FitConfig{});
  EXPECT_NEAR(b.log_z - a.log_z, std::log(7.5), 1e-9);
  EXPECT_NEAR(b.quantum_action.mass, a.quantum_action.mass, 1e-9);
  EXPECT_NEAR(b.quantum_action.potential_1d().v2, a.quantum_action.potential_1d().v2, 1e-9);
}

TEST(Fit, DeduplicationDoesNotChangeTheObjective) {
  const auto table = amplitude_table(kDoubleWell, default_grid(1), 1.0, default_boundary_set(1),
                                     EvolutionSettings{5e-4});
  FitConfig on;
  FitConfig off;
  off.deduplicate_symmetric_pairs = false;
  const auto probe = make_action(0.9, Potential1D{0.0, -0.8, 0.45}, ActionKind::Quantum);
  const double a = fit_objective(table, probe, on);
  const double b = fit_objective(table, probe, off);
  EXPECT_NEAR(a / b, 1.0, 1e-8);
}

TEST(Fit, DoubleWellFitIsALocalMinimum) {
  FitConfig cfg;
  const auto table = amplitude_table(kDoubleWell, default_grid(1), 1.0, default_boundary_set(1),
                                     EvolutionSettings{5e-4});
  const auto fit = fit_quantum_action(table, kDoubleWell, cfg);
  const double best = fit_objective(table, fit.quantum_action, cfg);
  const auto params = free_parameters(fit.quantum_action);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double f : {0.99, 1.01}) {
      auto p = params;
      p[i] *= f;
      EXPECT_GT(fit_objective(table, with_free_parameters(fit.quantum_action, p), cfg), best) << "param " << i;
    }
  }
  // Weighted cost over all rows equals rms^2 times the row count.
  EXPECT_NEAR(best, fit.residual_rms * fit.residual_rms * static_cast<double>(fit.n_points), 1e-9 + 1e-6 * best);
}

TEST(Fit, GroundStateAnchorSetsThePotentialFloor) {
  FitConfig cfg;
  cfg.offset = OffsetConvention::GroundStateAnchor;
  EXPECT_THROW(fit_quantum_action(mehler_table(1.0), kHarmonic, cfg), Error);
  cfg.ground_state_energy = 0.5;
  const auto anchored = fit_quantum_action(mehler_table(1.0), kHarmonic, cfg);
  const auto plain = fit_quantum_action(mehler_table(1.0), kHarmonic, FitConfig{});
  EXPECT_NEAR(potential_minimum_value(anchored.quantum_action.potential), 0.5, 1e-12);
  EXPECT_NEAR(anchored.log_z - plain.log_z, 0.5 * 1.0, 1e-9);
}

TEST(Fit, RejectsTinyTablesAndMismatchedDimensions) {
  AmplitudeTable t = mehler_table(1.0);
  t.pairs.resize(4);
  EXPECT_THROW(fit_quantum_action(t, kHarmonic, FitConfig{}), Error);
  const auto two_d = make_action(1.0, Potential2D{0.0, 0.5, 0.05, 0.0});
  EXPECT_THROW(fit_quantum_action(mehler_table(1.0), two_d, FitConfig{}), Error);
}

TEST(Fit, FreeParameterRoundTrip) {
  const auto a = make_action(1.2, Potential2D{0.3, -0.4, 0.1, 0.2});
  const auto p = free_parameters(a);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(with_free_parameters(a, p), a);
  EXPECT_EQ(free_parameter_names(1).size(), 3u);
  EXPECT_EQ(free_parameter_names(2)[2], "v22");
}

TEST(Flow, ConvergenceTimeOnASyntheticFlow) {
  ParameterFlow flow;
  flow.entries.push_back(synthetic_entry(1.0, 0.8, -0.7, 0.4));
  flow.entries.push_back(synthetic_entry(2.0, 0.9, -0.8, 0.45));
  flow.entries.push_back(synthetic_entry(3.0, 0.901, -0.801, 0.4505));
  flow.entries.push_back(synthetic_entry(4.0, 0.9015, -0.8012, 0.4506));
  EXPECT_DOUBLE_EQ(flow_convergence(flow, 0.01), 2.0);
  EXPECT_DOUBLE_EQ(flow_convergence(flow, 0.2), 1.0);
  try {
    flow_convergence(flow, 1e-5);
    FAIL() << "expected NotConverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConverged);
  }
  flow.entries.resize(2);
  EXPECT_THROW(flow_convergence(flow, 0.01), Error);
}

TEST(Flow, RecordsFailuresAndContinues) {
  FitConfig cfg;
  cfg.evolution.dt = 0.05;  // far too coarse for the double well at T = 0.5
  cfg.evolution.richardson_tolerance = 1e-12;
  const std::vector<double> times{0.5, 1.0};
  const auto flow = parameter_flow(kDoubleWell, times, cfg);
  ASSERT_EQ(flow.entries.size(), 2u);
  for (const auto& e : flow.entries) {
    EXPECT_FALSE(e.fit.has_value());
    EXPECT_NE(e.error.find("GridTooCoarse"), std::string::npos) << e.error;
  }
  const std::vector<double> bad{1.0, 0.5};
  EXPECT_THROW(parameter_flow(kDoubleWell, bad, cfg), Error);
}

TEST(Flow, HarmonicFlowIsFlat) {
  FitConfig cfg;
  const std::vector<double> times{0.5, 1.0, 2.0};
  const auto flow = parameter_flow(kHarmonic, times, cfg);
  for (const auto& e : flow.entries) {
    ASSERT_TRUE(e.fit.has_value()) << e.error;
    ASSERT_TRUE(e.table.has_value());
    EXPECT_NEAR(e.fit->quantum_action.mass, 1.0, 1e-4);
    EXPECT_NEAR(e.fit->quantum_action.potential_1d().v2, 0.5, 1e-4);
    EXPECT_DOUBLE_EQ(e.fit->temperature.tau, 1.0 / e.transition_time);
  }
}
