#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "triphase/interferometer.hpp"
#include "triphase/mat2.hpp"
#include "triphase/phase.hpp"
#include "triphase/rng.hpp"

namespace triphase {

/// Weighted particle approximation of the posterior over the two phases.
/// Weights are kept normalized after every public operation. Particle
/// coordinates are continuous (not folded into [0,2pi)); the likelihood is
/// periodic, so Bayes updates are unaffected and moments stay meaningful.
struct ParticleCloud {
  std::vector<PhaseVector> particles;
  std::vector<double> weights;

  std::size_t size() const { return particles.size(); }
};

/// Liu-West parameters: shrinkage a and the ESS fraction of M below which
/// resampling triggers.
struct ResampleConfig {
  double a = 0.98;
  double trigger_fraction = 0.5;
};

struct ZeroEvidence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Particle positions jitter floor (radians) used when the cloud covariance
/// is rank-deficient.
inline constexpr double kSigmaMin = 1e-6;

namespace detail {

/// Factor m into g1 x g2 = m with the aspect ratio closest to square,
/// g1 >= g2 (g1 tiles the phi1 axis).
inline std::pair<std::size_t, std::size_t> grid_shape(std::size_t m) {
  std::size_t best = 1;
  for (std::size_t d = 1; d * d <= m; ++d)
    if (m % d == 0) best = d;  // largest divisor <= sqrt(m)
  return {m / best, best};
}

}  // namespace detail

/// Uniform prior: particles at the centers of a rectangular grid tiling
/// [0,2pi)^2, equal weights. m is factored into the most-square grid.
inline ParticleCloud init_uniform_grid(std::size_t m) {
  if (m < 4) throw std::invalid_argument("particle count must be >= 4");
  auto [g1, g2] = detail::grid_shape(m);
  ParticleCloud cloud;
  cloud.particles.reserve(m);
  cloud.weights.assign(m, 1.0 / static_cast<double>(m));
  for (std::size_t i = 0; i < g1; ++i)
    for (std::size_t j = 0; j < g2; ++j)
      cloud.particles.push_back({two_pi * (i + 0.5) / g1, two_pi * (j + 0.5) / g2});
  return cloud;
}

inline PhaseVector posterior_mean(const ParticleCloud& cloud) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    m1 += cloud.weights[i] * cloud.particles[i].phi1;
    m2 += cloud.weights[i] * cloud.particles[i].phi2;
  }
  return {m1, m2};
}

inline Sym2 posterior_covariance(const ParticleCloud& cloud) {
  PhaseVector mu = posterior_mean(cloud);
  Sym2 cov;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double d1 = cloud.particles[i].phi1 - mu.phi1;
    double d2 = cloud.particles[i].phi2 - mu.phi2;
    cov.xx += cloud.weights[i] * d1 * d1;
    cov.xy += cloud.weights[i] * d1 * d2;
    cov.yy += cloud.weights[i] * d2 * d2;
  }
  return cov;
}

inline double effective_sample_size(const ParticleCloud& cloud) {
  double s = 0.0;
  for (double w : cloud.weights) s += w * w;
  return 1.0 / s;
}

/// Bayes update for one observed outcome under control phases `controls`:
/// w_i <- w_i p(d | phi_i + Phi), renormalized. Particles are unchanged.
/// Throws ZeroEvidence (cloud untouched) if every updated weight underflows.
inline void bayes_update(ParticleCloud& cloud, int outcome, PhaseVector controls,
                         const Likelihood& lik) {
  if (outcome < 0 || outcome > 2) throw std::invalid_argument("outcome must be in {0,1,2}");
  const std::size_t m = cloud.size();
  std::vector<double> lk(m);
  double max_w = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    PhaseVector d = cloud.particles[i] + controls;
    lk[i] = lik.probs(d)[outcome];
    max_w = std::max(max_w, cloud.weights[i] * lk[i]);
  }
  if (max_w < 1e-300) throw ZeroEvidence("all posterior weights underflowed");
  if (max_w < 1e-280) {
    // Log-space rescue: rescale by the max before normalizing.
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cloud.weights[i] = cloud.weights[i] * lk[i] / max_w;
      sum += cloud.weights[i];
    }
    for (double& w : cloud.weights) w /= sum;
    return;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    cloud.weights[i] *= lk[i];
    sum += cloud.weights[i];
  }
  for (double& w : cloud.weights) w /= sum;
}

namespace detail {

/// Weighted circular mean per axis; the resampler folds particles into the
/// period centered here so that moments are taken on a connected chart.
/// Without this, the jitter covariance of a cloud that has drifted across
/// the 0/2pi seam grows without bound and the filter never concentrates.
inline PhaseVector circular_mean(const ParticleCloud& cloud) {
  double s1 = 0.0, c1 = 0.0, s2 = 0.0, c2 = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    s1 += cloud.weights[i] * std::sin(cloud.particles[i].phi1);
    c1 += cloud.weights[i] * std::cos(cloud.particles[i].phi1);
    s2 += cloud.weights[i] * std::sin(cloud.particles[i].phi2);
    c2 += cloud.weights[i] * std::cos(cloud.particles[i].phi2);
  }
  return {std::atan2(s1, c1), std::atan2(s2, c2)};
}

}  // namespace detail

/// Liu-West resampling: draw M ancestors proportionally to the weights
/// (systematic scheme, one uniform draw), shrink each toward the posterior
/// mean, and jitter with covariance (1 - a^2) Cov(cloud). Weights reset to
/// 1/M. Rank-deficient covariances are clamped to kSigmaMin^2 per axis.
inline void liu_west_resample(ParticleCloud& cloud, const ResampleConfig& cfg, Rng& rng) {
  if (cfg.a <= 0.0 || cfg.a >= 1.0) throw std::invalid_argument("resample parameter a must be in (0,1)");
  const std::size_t m = cloud.size();

  PhaseVector c = detail::circular_mean(cloud);
  for (auto& p : cloud.particles)
    p = {c.phi1 + wrap_pi(p.phi1 - c.phi1), c.phi2 + wrap_pi(p.phi2 - c.phi2)};

  PhaseVector mu = posterior_mean(cloud);
  Sym2 cov = posterior_covariance(cloud);
  if (!std::isfinite(cov.xx) || !std::isfinite(cov.xy) || !std::isfinite(cov.yy))
    throw DegenerateCovariance("cloud covariance is not finite");
  Sym2 sigma = (1.0 - cfg.a * cfg.a) * cov.clamped_eigenvalues(kSigmaMin * kSigmaMin);
  auto chol = sigma.cholesky();

  // Systematic ancestor selection.
  std::vector<PhaseVector> ancestors;
  ancestors.reserve(m);
  double u = std::uniform_real_distribution<double>(0.0, 1.0 / m)(rng);
  double cum = cloud.weights[0];
  std::size_t idx = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double pos = u + static_cast<double>(i) / m;
    while (cum < pos && idx + 1 < m) cum += cloud.weights[++idx];
    ancestors.push_back(cloud.particles[idx]);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    double n1 = normal(rng);
    double n2 = normal(rng);
    cloud.particles[i] = {
        cfg.a * ancestors[i].phi1 + (1.0 - cfg.a) * mu.phi1 + chol[0] * n1,
        cfg.a * ancestors[i].phi2 + (1.0 - cfg.a) * mu.phi2 + chol[1] * n1 + chol[2] * n2};
  }
  cloud.weights.assign(m, 1.0 / static_cast<double>(m));
}

/// True when the ESS trigger fires for the given cloud.
inline bool needs_resample(const ParticleCloud& cloud, const ResampleConfig& cfg) {
  return effective_sample_size(cloud) <
         cfg.trigger_fraction * static_cast<double>(cloud.size());
}

}  // namespace triphase
