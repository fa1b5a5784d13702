#pragma once

// Closed forms used as independent references by the tests.

#include <cmath>
#include <numbers>

namespace oracle {

/// Free-particle Euclidean kernel.
inline double gaussian_kernel(double mass, double hbar, double t, double x, double y) {
  const double d = x - y;
  return std::sqrt(mass / (2.0 * std::numbers::pi * hbar * t)) * std::exp(-mass * d * d / (2.0 * hbar * t));
}

/// Euclidean kernel of V = m omega^2 x^2 / 2 (Mehler).
inline double mehler_kernel(double mass, double omega, double hbar, double t, double x, double y) {
  const double s = std::sinh(omega * t);
  const double c = std::cosh(omega * t);
  const double pref = std::sqrt(mass * omega / (2.0 * std::numbers::pi * hbar * s));
  return pref * std::exp(-mass * omega * ((x * x + y * y) * c - 2.0 * x * y) / (2.0 * hbar * s));
}

/// Classical Euclidean action of the harmonic oscillator between fixed endpoints.
inline double harmonic_action(double mass, double omega, double t, double x, double y) {
  const double s = std::sinh(omega * t);
  const double c = std::cosh(omega * t);
  return mass * omega * ((x * x + y * y) * c - 2.0 * x * y) / (2.0 * s);
}

/// Euclidean classical path of the harmonic oscillator.
inline double harmonic_path(double omega, double t_total, double x, double y, double t) {
  return (x * std::sinh(omega * (t_total - t)) + y * std::sinh(omega * t)) / std::sinh(omega * t_total);
}

/// Kink x_m tanh(omega t).
inline double kink(double x_m, double omega, double t) { return x_m * std::tanh(omega * t); }

/// Kolmogorov distribution tail Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) q += (k % 2 == 1 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return q;
}

}  // namespace oracle
