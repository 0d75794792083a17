#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "triphase/interferometer.hpp"
#include "triphase/phase.hpp"
#include "triphase/power_model.hpp"
#include "triphase/rng.hpp"
#include "triphase/smc.hpp"
#include "triphase/strategies.hpp"

namespace triphase {

/// Everything needed to run one estimation campaign.
struct ExperimentConfig {
  int probes = 100;       // N, photons per run
  int repetitions = 50;   // N_exp, runs per phase pair
  std::vector<PhaseVector> phase_pairs;  // explicit truths; empty -> sample
  std::size_t sampled_phase_pairs = 20;  // N_ph when sampling uniformly
  std::size_t particles = 2000;          // M
  ControlPolicy policy{};
  DeviceModel device{};
  ResampleConfig resample{};
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all available cores

  // Hardware-realistic mode: selected controls are quantized through the
  // thermo-optic response before being applied.
  bool hardware_mode = false;
  double control_quantum = 0.0;  // amperes; 0 = continuous supply
  ResponseCoefficients power_coefficients{};
  ResistorState resistor_base{};
  std::vector<int> control_resistors = {0, 1};

  // CRB reference: Tr(F^-1) at the working point. Ideal devices compute it;
  // a fixture value (e.g. a reconstructed experimental Fisher matrix) can
  // override it.
  std::optional<double> crb_trace_inverse;
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.probes < 1) throw std::invalid_argument("probes must be >= 1");
  if (cfg.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (cfg.particles < 4) throw std::invalid_argument("particles must be >= 4");
  if (cfg.phase_pairs.empty() && cfg.sampled_phase_pairs == 0)
    throw std::invalid_argument("no phase pairs to estimate");
  validate(cfg.device);
}

/// Quadratic loss sum_j (phi_j - est_j)^2, optionally with each difference
/// wrapped into (-pi, pi] first.
inline double quadratic_loss(PhaseVector truth, PhaseVector estimate, bool wrapped) {
  double d1 = truth.phi1 - estimate.phi1;
  double d2 = truth.phi2 - estimate.phi2;
  if (wrapped) {
    d1 = wrap_pi(d1);
    d2 = wrap_pi(d2);
  }
  return d1 * d1 + d2 * d2;
}

/// Sample one detector outcome for a probe sent with the interferometer set
/// to true_phi + controls.
inline int simulate_outcome(const Likelihood& lik, PhaseVector true_phi,
                            PhaseVector controls, Rng& rng) {
  auto p = lik.probs(true_phi + controls);
  double total = p[0] + p[1] + p[2];
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  if (u < p[0]) return 0;
  if (u < p[0] + p[1]) return 1;
  return 2;
}

struct StepRecord {
  int step = 0;             // 1-based probe index
  PhaseVector controls{};   // controls actually applied
  int outcome = 0;
  PhaseVector mean{};       // posterior mean after the update
  Sym2 covariance{};
  double loss_unwrapped = 0.0;  // quadratic loss of the running estimate
  double loss_wrapped = 0.0;
};

struct EstimationTrace {
  std::vector<StepRecord> steps;
  PhaseVector final_estimate{};
  bool failed = false;
  int failed_at = 0;  // probe index of the ZeroEvidence failure
};

namespace detail {

struct RunContext {
  Likelihood lik;
  PhaseVector delta_star{};  // asymptotic working point (wrapped, lexicographic first)
};

inline RunContext make_run_context(const ExperimentConfig& cfg) {
  RunContext ctx{Likelihood(cfg.device)};
  if (cfg.policy.kind == ControlPolicy::Kind::asymptotic ||
      cfg.policy.kind == ControlPolicy::Kind::hybrid || !cfg.crb_trace_inverse) {
    auto crb = min_trace_inverse_fisher(cfg.device);
    if (!crb.minimizers.empty()) ctx.delta_star = crb.minimizers.front();
  }
  return ctx;
}

inline EstimationTrace run_estimation_impl(const ExperimentConfig& cfg,
                                           const RunContext& ctx, PhaseVector true_phi,
                                           std::uint64_t phase_index,
                                           std::uint64_t repetition) {
  EstimationTrace trace;
  trace.steps.reserve(static_cast<std::size_t>(cfg.probes));
  ParticleCloud cloud = init_uniform_grid(cfg.particles);

  for (int n = 1; n <= cfg.probes; ++n) {
    Rng rng = make_rng(cfg.seed, {phase_index, repetition, static_cast<std::uint64_t>(n)});
    PhaseVector controls =
        select_controls(cfg.policy, n, cloud, ctx.lik, ctx.delta_star, rng);
    if (cfg.hardware_mode) {
      auto sol = controls_for_target(cfg.power_coefficients, controls,
                                     cfg.control_resistors, cfg.control_quantum,
                                     cfg.resistor_base);
      controls = sol.achieved.wrapped();
    }
    int outcome = simulate_outcome(ctx.lik, true_phi, controls, rng);
    try {
      bayes_update(cloud, outcome, controls, ctx.lik);
    } catch (const ZeroEvidence&) {
      trace.failed = true;
      trace.failed_at = n;
      return trace;
    }
    if (needs_resample(cloud, cfg.resample)) liu_west_resample(cloud, cfg.resample, rng);

    StepRecord rec;
    rec.step = n;
    rec.controls = controls;
    rec.outcome = outcome;
    rec.mean = posterior_mean(cloud);
    rec.covariance = posterior_covariance(cloud);
    rec.loss_unwrapped = quadratic_loss(true_phi, rec.mean, false);
    rec.loss_wrapped = quadratic_loss(true_phi, rec.mean, true);
    trace.steps.push_back(rec);
  }
  trace.final_estimate = trace.steps.back().mean;
  return trace;
}

}  // namespace detail

inline EstimationTrace run_estimation(const ExperimentConfig& cfg, PhaseVector true_phi,
                                      std::uint64_t run_index) {
  validate(cfg);
  auto ctx = detail::make_run_context(cfg);
  return detail::run_estimation_impl(cfg, ctx, true_phi, run_index, 0);
}

struct ConvergenceFit {
  double a = 0.0;
  double b = 0.0;
  double tau = 0.0;
  double residual = 0.0;           // SSE of the exponential model
  double constant_residual = 0.0;  // SSE of the best constant-only fit
};

struct FitFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Least-squares fit of a + b exp(-N/tau) to loss(N) - crb(N) for N > n_min.
/// tau is scanned on a log grid, with (a, b) solved linearly per tau, then
/// refined by golden-section search.
inline ConvergenceFit fit_convergence_time(const std::vector<double>& loss,
                                           const std::vector<double>& crb,
                                           int n_min = 3) {
  if (loss.size() != crb.size())
    throw std::invalid_argument("loss and crb curves must have equal length");
  std::vector<double> n_vals, y_vals;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    int n = static_cast<int>(i) + 1;
    if (n > n_min) {
      n_vals.push_back(static_cast<double>(n));
      y_vals.push_back(loss[i] - crb[i]);
    }
  }
  if (n_vals.size() < 3) throw FitFailed("need at least 3 points beyond n_min");

  auto solve_for_tau = [&](double tau) {
    // Normal equations for y ~ a + b e.
    double se = 0.0, see = 0.0, sy = 0.0, sey = 0.0;
    const double k = static_cast<double>(n_vals.size());
    for (std::size_t i = 0; i < n_vals.size(); ++i) {
      double e = std::exp(-n_vals[i] / tau);
      se += e;
      see += e * e;
      sy += y_vals[i];
      sey += e * y_vals[i];
    }
    double det = k * see - se * se;
    double a, b;
    if (std::abs(det) < 1e-300) {
      a = sy / k;
      b = 0.0;
    } else {
      a = (see * sy - se * sey) / det;
      b = (k * sey - se * sy) / det;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < n_vals.size(); ++i) {
      double r = y_vals[i] - a - b * std::exp(-n_vals[i] / tau);
      sse += r * r;
    }
    return std::tuple<double, double, double>(sse, a, b);
  };

  const double tau_max = 10.0 * n_vals.back();
  const int grid = 256;
  double best_tau = 0.0, best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    double tau = 0.05 * std::pow(tau_max / 0.05, static_cast<double>(i) / (grid - 1));
    double sse = std::get<0>(solve_for_tau(tau));
    if (sse < best_sse) {
      best_sse = sse;
      best_tau = tau;
    }
  }

  // Golden-section refinement around the best grid point.
  const double ratio = std::pow(tau_max / 0.05, 1.0 / (grid - 1));
  double lo = best_tau / ratio, hi = best_tau * ratio;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = std::get<0>(solve_for_tau(x1)), f2 = std::get<0>(solve_for_tau(x2));
  while (hi - lo > 1e-9 * best_tau) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = std::get<0>(solve_for_tau(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = std::get<0>(solve_for_tau(x2));
    }
  }
  double tau = 0.5 * (lo + hi);
  auto [sse, a, b] = solve_for_tau(tau);

  // Constant-only model for comparison (and identifiability check).
  double mean_y = 0.0;
  for (double y : y_vals) mean_y += y;
  mean_y /= static_cast<double>(y_vals.size());
  double sse_const = 0.0;
  for (double y : y_vals) sse_const += (y - mean_y) * (y - mean_y);

  if (!std::isfinite(sse) || !std::isfinite(a) || !std::isfinite(b))
    throw FitFailed("non-finite fit residual");
  if (tau <= 0.0 || tau > tau_max) throw FitFailed("tau outside (0, 10 N]");
  double y_scale = 0.0;
  for (double y : y_vals) y_scale += y * y;
  if (sse_const <= 1e-20 * std::max(y_scale, 1e-300))
    throw FitFailed("tau unidentifiable: difference curve is constant");
  if (sse_const - sse <= 1e-12 * sse_const)
    throw FitFailed("tau unidentifiable: exponential term does not improve the fit");
  return {a, b, tau, sse, sse_const};
}

/// Per-step aggregates of a campaign. Losses are means over all non-failed
/// runs; `loss*` are the plain (unwrapped) differences matching the headline
/// figure of merit, `wrapped_*` wrap each difference into (-pi, pi] first.
/// Unwrapped averages over uniformly sampled truths are inflated by runs
/// whose posterior settles one period away; both conventions are reported.
struct CampaignResult {
  int probes = 0;
  std::size_t runs = 0;      // completed runs entering the aggregates
  std::size_t failures = 0;  // runs aborted by ZeroEvidence
  double crb_value = 0.0;    // Tr(F^-1) at the working point

  std::vector<double> loss, loss1, loss2, cross;
  std::vector<double> wrapped_loss, wrapped_loss1, wrapped_loss2, wrapped_cross;
  std::vector<double> cov_trace;
  std::vector<double> crb;  // crb_value / N

  std::vector<PhaseVector> phase_pairs;  // truths actually used

  bool fit_ok = false;
  ConvergenceFit fit{};  // fit of wrapped_loss - crb, valid when fit_ok
};

/// Uniform truths on [0,2pi)^2, one fixed stream independent of run order.
inline std::vector<PhaseVector> sample_phase_pairs(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x70686173657332ULL});  // tag: phase-pair stream
  std::vector<PhaseVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double p1 = uniform_angle(rng);
    double p2 = uniform_angle(rng);
    out.push_back({p1, p2});
  }
  return out;
}

inline CampaignResult run_campaign(const ExperimentConfig& cfg) {
  validate(cfg);
  auto ctx = detail::make_run_context(cfg);

  CampaignResult result;
  result.probes = cfg.probes;
  result.phase_pairs =
      cfg.phase_pairs.empty() ? sample_phase_pairs(cfg.sampled_phase_pairs, cfg.seed)
                              : cfg.phase_pairs;
  if (cfg.crb_trace_inverse) {
    result.crb_value = *cfg.crb_trace_inverse;
  } else {
    result.crb_value =
        fisher_matrix(ctx.lik, ctx.delta_star).matrix.trace_inverse();
  }

  const std::size_t n_ph = result.phase_pairs.size();
  const std::size_t n_runs = n_ph * static_cast<std::size_t>(cfg.repetitions);
  const std::size_t n_steps = static_cast<std::size_t>(cfg.probes);

  // Per-run per-step statistics, slot-indexed so that the reduction below is
  // independent of scheduling order.
  struct StepStats {
    double l1u, l2u, xu, l1w, l2w, xw, cov;
  };
  std::vector<std::vector<StepStats>> stats(n_runs);
  std::vector<char> failed(n_runs, 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t r = next.fetch_add(1);
      if (r >= n_runs) return;
      std::size_t ph = r / cfg.repetitions;
      std::size_t rep = r % cfg.repetitions;
      PhaseVector truth = result.phase_pairs[ph];
      auto trace = detail::run_estimation_impl(cfg, ctx, truth, ph, rep);
      if (trace.failed) {
        failed[r] = 1;
        continue;
      }
      auto& s = stats[r];
      s.reserve(n_steps);
      for (const auto& rec : trace.steps) {
        double d1 = truth.phi1 - rec.mean.phi1;
        double d2 = truth.phi2 - rec.mean.phi2;
        double w1 = wrap_pi(d1), w2 = wrap_pi(d2);
        s.push_back({d1 * d1, d2 * d2, d1 * d2, w1 * w1, w2 * w2, w1 * w2,
                     rec.covariance.trace()});
      }
    }
  };

  unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_runs));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  auto zeros = [&] { return std::vector<double>(n_steps, 0.0); };
  result.loss1 = zeros();
  result.loss2 = zeros();
  result.cross = zeros();
  result.wrapped_loss1 = zeros();
  result.wrapped_loss2 = zeros();
  result.wrapped_cross = zeros();
  result.cov_trace = zeros();

  for (std::size_t r = 0; r < n_runs; ++r) {
    if (failed[r]) {
      ++result.failures;
      continue;
    }
    ++result.runs;
    for (std::size_t k = 0; k < n_steps; ++k) {
      result.loss1[k] += stats[r][k].l1u;
      result.loss2[k] += stats[r][k].l2u;
      result.cross[k] += stats[r][k].xu;
      result.wrapped_loss1[k] += stats[r][k].l1w;
      result.wrapped_loss2[k] += stats[r][k].l2w;
      result.wrapped_cross[k] += stats[r][k].xw;
      result.cov_trace[k] += stats[r][k].cov;
    }
  }
  if (result.runs == 0) throw std::runtime_error("every campaign run failed");

  const double inv = 1.0 / static_cast<double>(result.runs);
  result.loss = zeros();
  result.wrapped_loss = zeros();
  result.crb = zeros();
  for (std::size_t k = 0; k < n_steps; ++k) {
    result.loss1[k] *= inv;
    result.loss2[k] *= inv;
    result.cross[k] *= inv;
    result.wrapped_loss1[k] *= inv;
    result.wrapped_loss2[k] *= inv;
    result.wrapped_cross[k] *= inv;
    result.cov_trace[k] *= inv;
    result.loss[k] = result.loss1[k] + result.loss2[k];
    result.wrapped_loss[k] = result.wrapped_loss1[k] + result.wrapped_loss2[k];
    result.crb[k] = result.crb_value / static_cast<double>(k + 1);
  }

  try {
    result.fit = fit_convergence_time(result.wrapped_loss, result.crb);
    result.fit_ok = true;
  } catch (const FitFailed&) {
    result.fit_ok = false;
  } catch (const std::invalid_argument&) {
    result.fit_ok = false;
  }
  return result;
}

}  // namespace triphase
