#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "triphase/nelder_mead.hpp"
#include "triphase/phase.hpp"

namespace triphase {

inline constexpr int kResistorCount = 6;

/// Thermo-optic response of the two relative phases to the powers dissipated
/// in the six internal resistors:
///   dphi_j = phi0_j + sum_i (alpha[j][i] P_i + sum_{k>=i} alpha_nl[j][i][k] P_i P_k).
/// The quadratic coefficients are stored upper-triangular (k >= i); the
/// shipped fixture values are demo numbers, not a characterized device.
struct ResponseCoefficients {
  std::array<double, 2> phi0{};
  std::array<std::array<double, kResistorCount>, 2> alpha{};
  std::array<std::array<std::array<double, kResistorCount>, kResistorCount>, 2>
      alpha_nl{};  // [j][i][k], used only for k >= i
};

struct PowerLimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-resistor drive state. Resistance depends on current as
/// R(I) = r0 + kappa * I; the dissipated power is R(I) * I^2.
struct ResistorState {
  std::array<double, kResistorCount> current{};
  std::array<double, kResistorCount> r0{};
  std::array<double, kResistorCount> kappa{};
  double max_power = 1.0;

  double resistance(int i) const { return r0[i] + kappa[i] * current[i]; }
  double power(int i) const { return resistance(i) * current[i] * current[i]; }

  std::array<double, kResistorCount> powers() const {
    std::array<double, kResistorCount> p{};
    for (int i = 0; i < kResistorCount; ++i) p[i] = power(i);
    return p;
  }
};

inline PhaseVector phases_from_powers(const ResponseCoefficients& coef,
                                      const std::array<double, kResistorCount>& powers,
                                      double max_power = 1.0) {
  for (double p : powers)
    if (p > max_power)
      throw PowerLimitExceeded("dissipated power exceeds the per-resistor limit");
  std::array<double, 2> phi = coef.phi0;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < kResistorCount; ++i) {
      double acc = coef.alpha[j][i];
      for (int k = i; k < kResistorCount; ++k)
        acc += coef.alpha_nl[j][i][k] * powers[k];
      phi[j] += acc * powers[i];
    }
  return {phi[0], phi[1]};
}

/// Control-phase contribution of the listed resistors only (cross terms with
/// resistors outside the set are excluded, mirroring the split of the
/// response into unknown-phase and control-phase parts).
inline PhaseVector control_phases(const ResponseCoefficients& coef,
                                  const ResistorState& state,
                                  const std::vector<int>& control_resistors) {
  auto p = state.powers();
  std::array<double, 2> phi{};
  for (int j = 0; j < 2; ++j)
    for (int i : control_resistors) {
      double acc = coef.alpha[j][i];
      for (int k : control_resistors)
        if (k >= i) acc += coef.alpha_nl[j][i][k] * p[k];
      phi[j] += acc * p[i];
    }
  return {phi[0], phi[1]};
}

struct ControlSolution {
  ResistorState state;
  PhaseVector achieved;    // control phases actually realized
  bool reachable = true;   // wrapped error < pi/2 per component
};

/// Find currents for the control resistors that realize `target` as closely
/// as possible in wrapped distance, subject to the per-resistor power limit.
/// `quantum` > 0 restricts currents to integer multiples of that step
/// (supply quantization); `quantum` = 0 allows a continuous local refinement.
/// Non-control resistors in `base` are held fixed. Exactly two control
/// resistors are supported.
inline ControlSolution controls_for_target(const ResponseCoefficients& coef,
                                           PhaseVector target,
                                           const std::vector<int>& control_resistors,
                                           double quantum,
                                           const ResistorState& base) {
  if (control_resistors.size() != 2)
    throw std::invalid_argument("controls_for_target expects two control resistors");
  const int ra = control_resistors[0];
  const int rb = control_resistors[1];

  auto max_current = [&](int i) {
    // Solve (r0 + kappa I) I^2 = max_power by bisection; monotone in I.
    double lo = 0.0, hi = 1.0;
    auto pw = [&](double cur) { return (base.r0[i] + base.kappa[i] * cur) * cur * cur; };
    while (pw(hi) < base.max_power) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (pw(mid) < base.max_power ? lo : hi) = mid;
    }
    return lo;
  };
  const double ia_max = max_current(ra);
  const double ib_max = max_current(rb);

  auto snap = [&](double cur, double cap) {
    if (quantum <= 0.0) return std::clamp(cur, 0.0, cap);
    double q = std::floor(std::clamp(cur, 0.0, cap) / quantum + 0.5) * quantum;
    while (q > cap) q -= quantum;
    return std::max(q, 0.0);
  };

  auto objective_at = [&](double ia, double ib) {
    ResistorState s = base;
    s.current[ra] = ia;
    s.current[rb] = ib;
    PhaseVector got = control_phases(coef, s, control_resistors);
    double e1 = wrap_pi(got.phi1 - target.phi1);
    double e2 = wrap_pi(got.phi2 - target.phi2);
    return e1 * e1 + e2 * e2;
  };

  // Coarse grid over the feasible current rectangle.
  const int n = 48;
  double best_ia = 0.0, best_ib = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      double ia = snap(ia_max * i / n, ia_max);
      double ib = snap(ib_max * j / n, ib_max);
      double v = objective_at(ia, ib);
      if (v < best) {
        best = v;
        best_ia = ia;
        best_ib = ib;
      }
    }

  if (quantum > 0.0) {
    // Local exhaustive walk on the quantized lattice.
    bool improved = true;
    while (improved) {
      improved = false;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          double ia = best_ia + di * quantum;
          double ib = best_ib + dj * quantum;
          if (ia < 0.0 || ib < 0.0 || ia > ia_max || ib > ib_max) continue;
          double v = objective_at(ia, ib);
          if (v < best - 1e-18) {
            best = v;
            best_ia = ia;
            best_ib = ib;
            improved = true;
          }
        }
    }
  } else {
    // Out-of-range currents are evaluated at the clamped point plus a
    // quadratic penalty; a plain clamp would flatten the objective outside
    // the box and stall the simplex on near-boundary optima.
    auto r = nelder_mead_2d(
        [&](double ia, double ib) {
          double oa = std::max({0.0, -ia, ia - ia_max});
          double ob = std::max({0.0, -ib, ib - ib_max});
          return objective_at(std::clamp(ia, 0.0, ia_max), std::clamp(ib, 0.0, ib_max)) +
                 1e3 * (oa * oa + ob * ob);
        },
        {best_ia, best_ib}, 0.25 * ia_max / n + 1e-9, 600, 1e-12, 1e-24);
    best_ia = std::clamp(r.x[0], 0.0, ia_max);
    best_ib = std::clamp(r.x[1], 0.0, ib_max);
  }

  ControlSolution out;
  out.state = base;
  out.state.current[ra] = best_ia;
  out.state.current[rb] = best_ib;
  out.achieved = control_phases(coef, out.state, control_resistors);
  double e1 = std::abs(wrap_pi(out.achieved.phi1 - target.phi1));
  double e2 = std::abs(wrap_pi(out.achieved.phi2 - target.phi2));
  out.reachable = e1 < std::numbers::pi / 2 && e2 < std::numbers::pi / 2;
  return out;
}

}  // namespace triphase
