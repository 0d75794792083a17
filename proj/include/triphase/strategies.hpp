#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "triphase/interferometer.hpp"
#include "triphase/nelder_mead.hpp"
#include "triphase/phase.hpp"
#include "triphase/rng.hpp"
#include "triphase/smc.hpp"

namespace triphase {

/// Control-phase selection strategy.
///   asymptotic — steer the interferometer to a fixed minimizer of Tr(F^-1)
///   hybrid     — random controls for the first k probes, asymptotic after
///   optimized  — minimize the expected posterior covariance trace (utility)
///   random     — uniform random controls every probe
struct ControlPolicy {
  enum class Kind { asymptotic, hybrid, optimized, random };
  Kind kind = Kind::optimized;
  int k = 20;             // hybrid only
  int utility_grid = 20;  // optimized only, lattice points per axis
  bool refine = true;     // optimized only, simplex refinement of the best cell
};

/// Predictive probabilities below this threshold contribute zero utility.
inline constexpr double kPredictiveFloor = 1e-12;

/// Expected posterior covariance trace after one more probe with controls
/// `controls`: U(Phi) = sum_d p(d|Phi) Tr[Cov(posterior | d)]. Reference
/// implementation; builds the three hypothetical posteriors explicitly.
inline double utility(PhaseVector controls, const ParticleCloud& cloud,
                      const Likelihood& lik) {
  const std::size_t m = cloud.size();
  PhaseVector center = posterior_mean(cloud);
  double value = 0.0;
  for (int d = 0; d < 3; ++d) {
    double s = 0.0, m1 = 0.0, m2 = 0.0, q1 = 0.0, q2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double p = lik.probs(cloud.particles[i] + controls)[d];
      double wp = cloud.weights[i] * p;
      double f1 = cloud.particles[i].phi1 - center.phi1;
      double f2 = cloud.particles[i].phi2 - center.phi2;
      s += wp;
      m1 += wp * f1;
      m2 += wp * f2;
      q1 += wp * f1 * f1;
      q2 += wp * f2 * f2;
    }
    if (s < kPredictiveFloor) continue;
    double e1 = m1 / s, e2 = m2 / s;
    value += s * ((q1 / s - e1 * e1) + (q2 / s - e2 * e2));
  }
  return value;
}

/// Fast utility evaluation for many candidate controls against one cloud.
///
/// The outcome probability is a trigonometric polynomial in the control
/// phasors Z_j = exp(i Phi_j):
///   p(d | phi_i, Phi) = k0_d + Re(P1_d z1i Z1) + Re(P2_d z2i Z2)
///                            + Re(P3_d z1i conj(z2i) Z1 conj(Z2)) ,
/// so every particle sum entering the utility factors into four moments per
/// weight stream, computed once per cloud. Each candidate evaluation is then
/// O(1) instead of O(M).
class UtilityEvaluator {
 public:
  UtilityEvaluator(const ParticleCloud& cloud, const Likelihood& lik) : lik_(&lik) {
    center_ = posterior_mean(cloud);
    for (int d = 0; d < 3; ++d) {
      const cplx a = lik.amp_ref(d), b = lik.amp_1(d), c = lik.amp_2(d);
      k0_[d] = lik.scale() * (std::norm(a) + std::norm(b) + std::norm(c)) + lik.offset();
      p1_[d] = lik.scale() * 2.0 * std::conj(a) * b;
      p2_[d] = lik.scale() * 2.0 * std::conj(a) * c;
      p3_[d] = lik.scale() * 2.0 * b * std::conj(c);
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const cplx z1 = std::polar(1.0, cloud.particles[i].phi1);
      const cplx z2 = std::polar(1.0, cloud.particles[i].phi2);
      const cplx z12 = z1 * std::conj(z2);
      const double f1 = cloud.particles[i].phi1 - center_.phi1;
      const double f2 = cloud.particles[i].phi2 - center_.phi2;
      const double w = cloud.weights[i];
      const std::array<double, 5> u = {w, w * f1, w * f2, w * f1 * f1, w * f2 * f2};
      for (int s = 0; s < 5; ++s) {
        sum_[s] += u[s];
        v1_[s] += u[s] * z1;
        v2_[s] += u[s] * z2;
        v12_[s] += u[s] * z12;
      }
    }
  }

  double operator()(PhaseVector controls) const {
    const cplx zc1 = std::polar(1.0, controls.phi1);
    const cplx zc2 = std::polar(1.0, controls.phi2);
    const cplx zc12 = zc1 * std::conj(zc2);
    std::array<cplx, 5> t1, t2, t12;
    for (int s = 0; s < 5; ++s) {
      t1[s] = v1_[s] * zc1;
      t2[s] = v2_[s] * zc2;
      t12[s] = v12_[s] * zc12;
    }
    double value = 0.0;
    for (int d = 0; d < 3; ++d) {
      std::array<double, 5> acc;
      for (int s = 0; s < 5; ++s)
        acc[s] = k0_[d] * sum_[s] + std::real(p1_[d] * t1[s]) +
                 std::real(p2_[d] * t2[s]) + std::real(p3_[d] * t12[s]);
      const double s0 = acc[0];
      if (s0 < kPredictiveFloor) continue;
      double e1 = acc[1] / s0, e2 = acc[2] / s0;
      value += s0 * ((acc[3] / s0 - e1 * e1) + (acc[4] / s0 - e2 * e2));
    }
    return value;
  }

 private:
  const Likelihood* lik_;
  PhaseVector center_{};
  std::array<double, 3> k0_{};
  std::array<cplx, 3> p1_{}, p2_{}, p3_{};
  std::array<double, 5> sum_{};
  std::array<cplx, 5> v1_{}, v2_{}, v12_{};
};

/// Lattice-plus-simplex minimization of the utility over [0,2pi)^2.
/// Candidates are scanned in fixed row-major order with a strict comparison,
/// so ties always break toward the lexicographically first lattice point.
inline PhaseVector minimize_utility(const ParticleCloud& cloud, const Likelihood& lik,
                                    int grid, bool refine) {
  if (grid < 2) throw std::invalid_argument("utility_grid must be >= 2");
  UtilityEvaluator eval(cloud, lik);
  PhaseVector best{};
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      PhaseVector cand{two_pi * i / grid, two_pi * j / grid};
      double v = eval(cand);
      if (v < best_value) {
        best_value = v;
        best = cand;
      }
    }
  if (refine) {
    auto r = nelder_mead_2d([&](double x, double y) { return eval({x, y}); },
                            {best.phi1, best.phi2}, 0.25 * two_pi / grid, 50, 1e-4, 0.0);
    if (r.value < best_value) best = {r.x[0], r.x[1]};
  }
  return best.wrapped();
}

/// Choose the control phases for probe `step` (1-based).
/// `delta_star` is the working point targeted by the asymptotic rule: the
/// lexicographically smallest minimizer of Tr(F^-1) for the device.
inline PhaseVector select_controls(const ControlPolicy& policy, int step,
                                   const ParticleCloud& cloud, const Likelihood& lik,
                                   PhaseVector delta_star, Rng& rng) {
  if (step < 1) throw std::invalid_argument("probe index must be >= 1");
  switch (policy.kind) {
    case ControlPolicy::Kind::asymptotic:
      return (delta_star - posterior_mean(cloud)).wrapped();
    case ControlPolicy::Kind::hybrid:
      if (step <= policy.k) return {uniform_angle(rng), uniform_angle(rng)};
      return (delta_star - posterior_mean(cloud)).wrapped();
    case ControlPolicy::Kind::random:
      return {uniform_angle(rng), uniform_angle(rng)};
    case ControlPolicy::Kind::optimized:
      return minimize_utility(cloud, lik, policy.utility_grid, policy.refine);
  }
  throw std::logic_error("unknown policy kind");
}

}  // namespace triphase
