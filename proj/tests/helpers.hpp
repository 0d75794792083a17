#pragma once

#include <random>

#include "triphase/interferometer.hpp"
#include "triphase/rng.hpp"
#include "triphase/smc.hpp"

namespace testutil {

using namespace triphase;

inline DeviceModel ideal_device() { return DeviceModel{}; }

/// Random device drawn from the full configuration space. Visibility stays
/// in [0.9, 1] so probabilities are bounded away from the Fisher floor when
/// noise is on (finite-difference oracles lose accuracy near exact nodes).
inline DeviceModel random_device(Rng& rng, bool noisy = true) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DeviceModel dev;
  dev.tritter_a.kind = u01(rng) < 0.5 ? TritterKind::fourier : TritterKind::reck_planar;
  dev.tritter_a.phi_t = uniform_angle(rng);
  dev.tritter_b.kind = u01(rng) < 0.5 ? TritterKind::fourier : TritterKind::reck_planar;
  dev.tritter_b.phi_t = uniform_angle(rng);
  if (noisy) {
    dev.noise.visibility = 0.9 + 0.1 * u01(rng);
    dev.noise.background = 0.05 * u01(rng);
  }
  dev.input_mode = 1 + static_cast<int>(u01(rng) * 3.0);
  dev.reference_mode = 1 + static_cast<int>(u01(rng) * 3.0);
  return dev;
}

inline PhaseVector random_phases(Rng& rng) {
  return {uniform_angle(rng), uniform_angle(rng)};
}

/// Cloud with particles scattered over the torus and normalized random
/// weights; exercises the generic (non-grid) code paths.
inline ParticleCloud random_cloud(Rng& rng, std::size_t m) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  ParticleCloud cloud;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    cloud.particles.push_back(random_phases(rng));
    double w = 0.01 + u01(rng);
    cloud.weights.push_back(w);
    sum += w;
  }
  for (double& w : cloud.weights) w /= sum;
  return cloud;
}

/// Central finite differences of the outcome probabilities, assembled into
/// the Fisher matrix with the same probability floor as the analytic path.
inline Sym2 finite_difference_fisher(const Likelihood& lik, PhaseVector phi,
                                     double step = 1e-5) {
  auto p0 = lik.probs(phi);
  auto p1p = lik.probs({phi.phi1 + step, phi.phi2});
  auto p1m = lik.probs({phi.phi1 - step, phi.phi2});
  auto p2p = lik.probs({phi.phi1, phi.phi2 + step});
  auto p2m = lik.probs({phi.phi1, phi.phi2 - step});
  Sym2 f;
  for (int d = 0; d < 3; ++d) {
    double g1 = (p1p[d] - p1m[d]) / (2.0 * step);
    double g2 = (p2p[d] - p2m[d]) / (2.0 * step);
    double pd = p0[d];
    if (pd < kProbFloor) pd += kProbFloor;
    f.xx += g1 * g1 / pd;
    f.xy += g1 * g2 / pd;
    f.yy += g2 * g2 / pd;
  }
  return f;
}

}  // namespace testutil
