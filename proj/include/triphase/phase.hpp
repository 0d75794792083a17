#pragma once

#include <cmath>
#include <numbers>

namespace triphase {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Wrap an angle into [0, 2pi).
inline double wrap_2pi(double x) {
  double r = std::fmod(x, two_pi);
  return r < 0.0 ? r + two_pi : r;
}

/// Wrap an angle into (-pi, pi].
inline double wrap_pi(double x) {
  double r = std::fmod(x + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

/// A pair of phase differences (radians). Used for unknown phases,
/// control phases, and interferometer working points alike.
struct PhaseVector {
  double phi1 = 0.0;
  double phi2 = 0.0;

  PhaseVector wrapped() const { return {wrap_2pi(phi1), wrap_2pi(phi2)}; }

  friend PhaseVector operator+(PhaseVector a, PhaseVector b) {
    return {a.phi1 + b.phi1, a.phi2 + b.phi2};
  }
  friend PhaseVector operator-(PhaseVector a, PhaseVector b) {
    return {a.phi1 - b.phi1, a.phi2 - b.phi2};
  }
  friend bool operator==(PhaseVector a, PhaseVector b) {
    return a.phi1 == b.phi1 && a.phi2 == b.phi2;
  }
};

/// Wrapped Euclidean distance on the torus [0,2pi)^2.
inline double torus_distance(PhaseVector a, PhaseVector b) {
  double d1 = wrap_pi(a.phi1 - b.phi1);
  double d2 = wrap_pi(a.phi2 - b.phi2);
  return std::sqrt(d1 * d1 + d2 * d2);
}

}  // namespace triphase
