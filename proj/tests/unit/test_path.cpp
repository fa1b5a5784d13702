#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qaction/error.hpp"
#include "qaction/path.hpp"

using namespace qaction;

namespace {

const ActionSpec kHarmonic = make_action(1.0, Potential1D{0.0, 0.5, 0.0});
const ActionSpec kDoubleWell = make_action(1.0, Potential1D{0.5, -1.0, 0.5});

}  // namespace

TEST(Path, HarmonicMatchesClosedForm) {
  const auto p = solve_euclidean_path(kHarmonic, Point{0.0, 0.0}, Point{1.0, 0.0}, 1.0);
  const double dt = p.time_step();
  for (int k = 0; k <= p.intervals(); k += 40) {
    EXPECT_NEAR(p.slices[static_cast<std::size_t>(k)].x, oracle::harmonic_path(1.0, 1.0, 0.0, 1.0, k * dt), 1e-6);
  }
  // (1/2) coth(1)
  EXPECT_NEAR(euclidean_action(p), 0.5 / std::tanh(1.0), 1e-5);
  EXPECT_NEAR(oracle::harmonic_action(1.0, 1.0, 1.0, 0.0, 1.0), 0.656518, 1e-6);
}

TEST(Path, DiscretizationErrorIsSecondOrder) {
  const double exact = oracle::harmonic_action(1.0, 1.0, 2.0, -1.0, 1.5);
  PathSettings coarse;
  coarse.slices = 100;
  PathSettings fine;
  fine.slices = 200;
  const double e1 = std::abs(euclidean_action(solve_euclidean_path(kHarmonic, {-1.0, 0}, {1.5, 0}, 2.0, coarse)) - exact);
  const double e2 = std::abs(euclidean_action(solve_euclidean_path(kHarmonic, {-1.0, 0}, {1.5, 0}, 2.0, fine)) - exact);
  EXPECT_NEAR(e1 / e2, 4.0, 0.1);
}

TEST(Path, StationarityAndConservedEnergy) {
  const auto p = solve_euclidean_path(kDoubleWell, Point{-1.2, 0.0}, Point{0.9, 0.0}, 3.0);
  EXPECT_LT(euler_lagrange_residual(kDoubleWell, 3.0, p.slices), 1e-8);
  EXPECT_LT(path_energy_residual(p), 1e-3);
  EXPECT_TRUE(hessian_positive_definite(kDoubleWell, 3.0, p.slices));
  EXPECT_DOUBLE_EQ(p.slices.front().x, -1.2);
  EXPECT_DOUBLE_EQ(p.slices.back().x, 0.9);
}

TEST(Path, TimeReversalGivesTheSameAction) {
  const auto a = solve_euclidean_path(kDoubleWell, Point{-0.6, 0.0}, Point{1.5, 0.0}, 2.0);
  const auto b = solve_euclidean_path(kDoubleWell, Point{1.5, 0.0}, Point{-0.6, 0.0}, 2.0);
  EXPECT_NEAR(euclidean_action(a), euclidean_action(b), 1e-10);
  const auto n = a.slices.size();
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(a.slices[k].x, b.slices[n - 1 - k].x, 1e-8);
}

TEST(Path, MultistartFindsTheLowerMinimum) {
  // Between x = 0 and x = 0 over a long time the path through a well beats
  // sitting on the barrier top.
  const auto p = solve_euclidean_path(kDoubleWell, Point{0.0, 0.0}, Point{0.0, 0.0}, 8.0);
  EXPECT_LT(euclidean_action(p), 0.5 * 8.0);
  double peak = 0.0;
  for (const auto& q : p.slices) peak = std::max(peak, std::abs(q.x));
  EXPECT_GT(peak, 0.9);
  EXPECT_TRUE(hessian_positive_definite(kDoubleWell, 8.0, p.slices));
}

TEST(Path, SaddleWithoutMultistartIsAConjugatePoint) {
  PathSettings s;
  s.multistart = false;
  try {
    solve_euclidean_path(kDoubleWell, Point{0.0, 0.0}, Point{0.0, 0.0}, 8.0, s);
    FAIL() << "expected ConjugatePoint";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConjugatePoint);
  }
}

TEST(Path, TwoDimensional) {
  const auto pe = make_action(1.0, Potential2D{0.0, 0.5, 0.05, 0.0});
  const auto p = solve_euclidean_path(pe, Point{-2.0, 1.0}, Point{1.0, 2.0}, 4.0);
  EXPECT_LT(euler_lagrange_residual(pe, 4.0, p.slices), 1e-8);
  EXPECT_TRUE(hessian_positive_definite(pe, 4.0, p.slices));
  // Separable limit: v22 = 0 reduces to two harmonic actions.
  const auto h2 = make_action(1.0, Potential2D{0.0, 0.5, 0.0, 0.0});
  const auto q = solve_euclidean_path(h2, Point{-2.0, 1.0}, Point{1.0, 2.0}, 4.0);
  const double ref = oracle::harmonic_action(1.0, 1.0, 4.0, -2.0, 1.0) + oracle::harmonic_action(1.0, 1.0, 4.0, 1.0, 2.0);
  EXPECT_NEAR(euclidean_action(q) / ref, 1.0, 1e-4);
}

TEST(Path, SensitivityIsTheDerivativeOfTheMinimalAction) {
  const Point a{-1.5, 0.0};
  const Point b{0.6, 0.0};
  const double T = 2.0;
  const auto p = solve_euclidean_path(kDoubleWell, a, b, T);
  const auto sens = action_sensitivity(p);
  const double h = 1e-5;
  const auto s_at = [&](double m, double v2, double v4) {
    return euclidean_action(solve_euclidean_path(make_action(m, Potential1D{0.5, v2, v4}), a, b, T));
  };
  EXPECT_NEAR(sens.mass, (s_at(1 + h, -1, 0.5) - s_at(1 - h, -1, 0.5)) / (2 * h), 1e-6);
  EXPECT_NEAR(sens.potential[1], (s_at(1, -1 + h, 0.5) - s_at(1, -1 - h, 0.5)) / (2 * h), 1e-6);
  EXPECT_NEAR(sens.potential[2], (s_at(1, -1, 0.5 + h) - s_at(1, -1, 0.5 - h)) / (2 * h), 1e-6);
  EXPECT_NEAR(sens.potential[0], T, 1e-12);
}

TEST(Path, DefaultSliceCount) {
  EXPECT_EQ(default_slice_count(1.0), 400);
  EXPECT_EQ(default_slice_count(4.0), 400);
  EXPECT_EQ(default_slice_count(8.0), 800);
}
