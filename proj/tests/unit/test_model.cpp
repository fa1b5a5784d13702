#include <gtest/gtest.h>

#include <cmath>

#include "qaction/error.hpp"
#include "qaction/model.hpp"

using namespace qaction;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Potential, DoubleWellValues) {
  const Potential1D dw{0.5, -1.0, 0.5};
  EXPECT_DOUBLE_EQ(evaluate_potential(dw, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(evaluate_potential(dw, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_potential(dw, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(potential_gradient(dw, 1.0), 0.0);
}

TEST(Potential, PullenEdmondsValue) {
  const Potential2D pe{0.0, 0.5, 0.05, 0.0};
  EXPECT_NEAR(evaluate_potential(pe, 1.0, 1.0), 1.05, 1e-15);
  const Point g = potential_gradient(pe, 1.0, 2.0);
  EXPECT_NEAR(g.x, 2 * 0.5 * 1.0 + 2 * 0.05 * 1.0 * 4.0, 1e-15);
  EXPECT_NEAR(g.y, 2 * 0.5 * 2.0 + 2 * 0.05 * 1.0 * 2.0, 1e-15);
}

TEST(Potential, HessianMatchesFiniteDifferences) {
  const Potential pe = Potential2D{0.3, -0.7, 0.2, 0.4};
  const Point q{0.6, -1.1};
  const Hessian2 h = potential_hessian(pe, q);
  const double e = 1e-5;
  const auto gx = [&](double x, double y) { return potential_gradient(pe, Point{x, y}).x; };
  const auto gy = [&](double x, double y) { return potential_gradient(pe, Point{x, y}).y; };
  EXPECT_NEAR(h.xx, (gx(q.x + e, q.y) - gx(q.x - e, q.y)) / (2 * e), 1e-8);
  EXPECT_NEAR(h.xy, (gx(q.x, q.y + e) - gx(q.x, q.y - e)) / (2 * e), 1e-8);
  EXPECT_NEAR(h.yy, (gy(q.x, q.y + e) - gy(q.x, q.y - e)) / (2 * e), 1e-8);
}

TEST(Potential, MinimaOfDoubleWell) {
  const auto m = potential_minima_1d(Potential1D{0.5, -1.0, 0.5});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0], -1.0, 1e-15);
  EXPECT_NEAR(m[1], 1.0, 1e-15);
  EXPECT_EQ(potential_minima_1d(Potential1D{0.0, 0.5, 0.0}).size(), 1u);
  EXPECT_NEAR(potential_minimum_value(Potential1D{0.5, -1.0, 0.5}), 0.0, 1e-15);
}

TEST(Potential, MinimumValue2D) {
  // Minimum on the diagonal when the cross term is weaker than the quartic.
  const Potential2D p{0.0, -1.0, 0.5, 1.0};
  double brute = 1e300;
  for (int i = -300; i <= 300; ++i) {
    for (int j = -300; j <= 300; ++j) brute = std::min(brute, evaluate_potential(p, i * 0.005, j * 0.005));
  }
  EXPECT_NEAR(potential_minimum_value(p), brute, 1e-4);
  EXPECT_LE(potential_minimum_value(p), brute);
}

TEST(Validation, RejectsUnboundedPotentials) {
  EXPECT_EQ(code_of([] { validate(Potential1D{0.0, 1.0, -0.1}); }), ErrorCode::Unbounded);
  EXPECT_EQ(code_of([] { validate(Potential1D{0.0, -1.0, 0.0}); }), ErrorCode::Unbounded);
  EXPECT_EQ(code_of([] { validate(Potential2D{0.0, 0.5, -0.05, 0.0}); }), ErrorCode::Unbounded);
  EXPECT_NO_THROW(validate(Potential1D{0.0, 0.0, 0.0}));
}

TEST(Validation, RejectsNonPositiveMass) {
  EXPECT_EQ(code_of([] { make_action(0.0, Potential1D{0.0, 0.5, 0.0}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { make_action(-1.0, Potential1D{0.0, 0.5, 0.0}); }), ErrorCode::InvalidArgument);
}

TEST(ActionSpec, DimensionAndKind) {
  const auto a = make_action(1.0, Potential2D{0, 0.5, 0.05, 0}, ActionKind::Quantum);
  EXPECT_EQ(a.dim(), 2);
  EXPECT_EQ(to_string(a.kind), "quantum");
  EXPECT_EQ(action_kind_from_string("classical"), ActionKind::Classical);
  EXPECT_THROW(a.potential_1d(), Error);
}

TEST(Temperature, MapsTimeToTemperature) {
  const auto t = temperature_of_time(4.0);
  EXPECT_DOUBLE_EQ(t.beta, 4.0);
  EXPECT_DOUBLE_EQ(t.tau, 0.25);
  const auto u = temperature_of_time(2.0, Conventions{0.5, 2.0});
  EXPECT_DOUBLE_EQ(u.beta, 4.0);
  EXPECT_DOUBLE_EQ(u.tau, 0.125);
  EXPECT_EQ(code_of([] { temperature_of_time(0.0); }), ErrorCode::NonPositiveTime);
  EXPECT_EQ(code_of([] { temperature_of_time(-1.0); }), ErrorCode::NonPositiveTime);
}
