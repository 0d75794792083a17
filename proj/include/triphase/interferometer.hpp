#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "triphase/mat2.hpp"
#include "triphase/nelder_mead.hpp"
#include "triphase/phase.hpp"

namespace triphase {

using cplx = std::complex<double>;
using Mat3 = std::array<std::array<cplx, 3>, 3>;

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      r[i][j] = s;
    }
  return r;
}

inline Mat3 identity3() {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) r[i][i] = 1.0;
  return r;
}

/// max |(U^dag U - I)_{ij}|
inline double unitarity_defect(const Mat3& u) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < 3; ++k) s += std::conj(u[k][i]) * u[k][j];
      if (i == j) s -= 1.0;
      worst = std::max(worst, std::abs(s));
    }
  return worst;
}

enum class TritterKind { fourier, reck_planar };

/// One three-mode beam splitter. `fourier` is the balanced discrete Fourier
/// transform; `reck_planar` is the planar decomposition into three balanced
/// directional couplers with an internal phase shifter on the middle rail.
struct TritterConfig {
  TritterKind kind = TritterKind::fourier;
  double phi_t = 0.0;  // reck_planar only
};

namespace detail {

/// Balanced directional coupler [[1, i], [i, 1]]/sqrt(2) acting on modes (m, m+1).
inline Mat3 coupler(int m) {
  Mat3 r = identity3();
  const double s = 1.0 / std::sqrt(2.0);
  r[m][m] = s;
  r[m][m + 1] = cplx(0.0, s);
  r[m + 1][m] = cplx(0.0, s);
  r[m + 1][m + 1] = s;
  return r;
}

inline Mat3 phase_on_mode(int m, double phi) {
  Mat3 r = identity3();
  r[m][m] = std::polar(1.0, phi);
  return r;
}

}  // namespace detail

inline Mat3 tritter_unitary(const TritterConfig& cfg) {
  if (cfg.kind == TritterKind::fourier) {
    Mat3 r{};
    const double s = 1.0 / std::sqrt(3.0);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        r[j][k] = std::polar(s, two_pi * j * k / 3.0);
    return r;
  }
  // Couplers act in order (0,1), (1,2), (0,1); phi_t sits on the middle rail
  // between the first and second coupler. Matrices compose right to left.
  Mat3 u = detail::coupler(0);
  u = matmul(detail::phase_on_mode(1, cfg.phi_t), u);
  u = matmul(detail::coupler(1), u);
  u = matmul(detail::coupler(0), u);
  return u;
}

/// Detector non-idealities folded into the outcome distribution:
///   p_meas(d) = [V p_ideal(d) + (1-V)/3 + b] / (1 + 3b).
struct NoiseModel {
  double visibility = 1.0;  // in [0, 1]
  double background = 0.0;  // >= 0
};

/// Full three-mode interferometer: tritter A, per-mode phase shifters,
/// tritter B. The reference mode carries zero relative phase; the two
/// remaining modes (in increasing index order) carry phi1 and phi2.
struct DeviceModel {
  TritterConfig tritter_a{};
  TritterConfig tritter_b{};
  NoiseModel noise{};
  int input_mode = 1;      // 1-based, in {1,2,3}
  int reference_mode = 2;  // 1-based, in {1,2,3}

  std::array<int, 2> phase_modes() const {  // 0-based modes carrying phi1, phi2
    std::array<int, 2> m{};
    int n = 0;
    for (int i = 0; i < 3; ++i)
      if (i != reference_mode - 1) m[n++] = i;
    return m;
  }

  Mat3 total_unitary(PhaseVector delta_phi) const {
    auto pm = phase_modes();
    Mat3 u = tritter_unitary(tritter_a);
    u = matmul(detail::phase_on_mode(pm[0], delta_phi.phi1), u);
    u = matmul(detail::phase_on_mode(pm[1], delta_phi.phi2), u);
    return matmul(tritter_unitary(tritter_b), u);
  }
};

inline void validate(const DeviceModel& dev) {
  if (dev.input_mode < 1 || dev.input_mode > 3)
    throw std::invalid_argument("input_mode must be in {1,2,3}");
  if (dev.reference_mode < 1 || dev.reference_mode > 3)
    throw std::invalid_argument("reference_mode must be in {1,2,3}");
  if (dev.noise.visibility < 0.0 || dev.noise.visibility > 1.0)
    throw std::invalid_argument("visibility must be in [0,1]");
  if (dev.noise.background < 0.0)
    throw std::invalid_argument("background must be >= 0");
}

/// Precompiled likelihood of a device. The single-photon output amplitude
/// for detector d reduces to
///   A_d(z1, z2) = c_ref[d] + c_1[d] z1 + c_2[d] z2,   z_j = exp(i phi_j),
/// so outcome probabilities and their phase derivatives are closed-form in
/// the two phasors. Building this once per device keeps the SMC and utility
/// loops off the full 3x3 matrix product.
class Likelihood {
 public:
  explicit Likelihood(const DeviceModel& dev) {
    validate(dev);
    auto pm = dev.phase_modes();
    Mat3 ua = tritter_unitary(dev.tritter_a);
    Mat3 ub = tritter_unitary(dev.tritter_b);
    int in = dev.input_mode - 1;
    int ref = dev.reference_mode - 1;
    for (int d = 0; d < 3; ++d) {
      c_ref_[d] = ub[d][ref] * ua[ref][in];
      c_1_[d] = ub[d][pm[0]] * ua[pm[0]][in];
      c_2_[d] = ub[d][pm[1]] * ua[pm[1]][in];
    }
    const double v = dev.noise.visibility;
    const double b = dev.noise.background;
    scale_ = v / (1.0 + 3.0 * b);
    offset_ = ((1.0 - v) / 3.0 + b) / (1.0 + 3.0 * b);
  }

  std::array<double, 3> probs(cplx z1, cplx z2) const {
    std::array<double, 3> p{};
    for (int d = 0; d < 3; ++d) {
      cplx a = c_ref_[d] + c_1_[d] * z1 + c_2_[d] * z2;
      p[d] = scale_ * std::norm(a) + offset_;
    }
    return p;
  }

  std::array<double, 3> probs(PhaseVector delta_phi) const {
    return probs(std::polar(1.0, delta_phi.phi1), std::polar(1.0, delta_phi.phi2));
  }

  /// Probabilities and their analytic derivatives with respect to the two
  /// phases: dA/dphi_j = i c_j z_j, dp/dphi_j = 2 Re(conj(A) dA/dphi_j).
  void probs_and_grads(PhaseVector delta_phi, std::array<double, 3>& p,
                       std::array<double, 3>& dp1, std::array<double, 3>& dp2) const {
    cplx z1 = std::polar(1.0, delta_phi.phi1);
    cplx z2 = std::polar(1.0, delta_phi.phi2);
    for (int d = 0; d < 3; ++d) {
      cplx t1 = c_1_[d] * z1;
      cplx t2 = c_2_[d] * z2;
      cplx a = c_ref_[d] + t1 + t2;
      p[d] = scale_ * std::norm(a) + offset_;
      dp1[d] = 2.0 * scale_ * std::real(std::conj(a) * cplx(0.0, 1.0) * t1);
      dp2[d] = 2.0 * scale_ * std::real(std::conj(a) * cplx(0.0, 1.0) * t2);
    }
  }

  cplx amp_ref(int d) const { return c_ref_[d]; }
  cplx amp_1(int d) const { return c_1_[d]; }
  cplx amp_2(int d) const { return c_2_[d]; }
  double scale() const { return scale_; }
  double offset() const { return offset_; }

 private:
  std::array<cplx, 3> c_ref_{}, c_1_{}, c_2_{};
  double scale_ = 1.0;
  double offset_ = 0.0;
};

inline std::array<double, 3> outcome_probabilities(const DeviceModel& dev,
                                                   PhaseVector delta_phi) {
  return Likelihood(dev).probs(delta_phi);
}

/// Floor applied to probabilities before dividing in the Fisher sum.
inline constexpr double kProbFloor = 1e-12;

struct FisherResult {
  Sym2 matrix;
  bool regularized = false;  // some p(d) fell below the floor
};

inline FisherResult fisher_matrix(const Likelihood& lik, PhaseVector delta_phi) {
  std::array<double, 3> p{}, dp1{}, dp2{};
  lik.probs_and_grads(delta_phi, p, dp1, dp2);
  FisherResult out;
  for (int d = 0; d < 3; ++d) {
    double pd = p[d];
    if (pd < kProbFloor) {
      pd += kProbFloor;
      out.regularized = true;
    }
    out.matrix.xx += dp1[d] * dp1[d] / pd;
    out.matrix.xy += dp1[d] * dp2[d] / pd;
    out.matrix.yy += dp2[d] * dp2[d] / pd;
  }
  return out;
}

inline FisherResult fisher_matrix(const DeviceModel& dev, PhaseVector delta_phi) {
  return fisher_matrix(Likelihood(dev), delta_phi);
}

struct CrbMinimum {
  double value = 0.0;
  std::vector<PhaseVector> minimizers;  // wrapped, lexicographically sorted
};

/// Tolerance below which two minimizing phase pairs count as the same point.
inline constexpr double kMinimizerDistinctTol = 1e-3;

/// Global minimum of Tr(F^-1) over the torus, with all distinct minimizing
/// pairs. Dense grid scan over cell centers, Nelder-Mead refinement from
/// every grid-local minimum, then dedup modulo 2pi.
inline CrbMinimum min_trace_inverse_fisher(const DeviceModel& dev, int grid = 180) {
  Likelihood lik(dev);
  auto objective = [&](double x, double y) {
    return fisher_matrix(lik, {x, y}).matrix.trace_inverse();
  };

  std::vector<double> vals(static_cast<std::size_t>(grid) * grid);
  auto cell = [&](int i, int j) -> double& {
    return vals[static_cast<std::size_t>(((i % grid) + grid) % grid) * grid +
                static_cast<std::size_t>(((j % grid) + grid) % grid)];
  };
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      cell(i, j) = objective(two_pi * (i + 0.5) / grid, two_pi * (j + 0.5) / grid);

  struct Candidate {
    double value;
    PhaseVector point;
  };
  std::vector<Candidate> refined;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      double v = cell(i, j);
      bool local_min = true;
      for (int di = -1; di <= 1 && local_min; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          if (cell(i + di, j + dj) < v) {
            local_min = false;
            break;
          }
        }
      if (!local_min) continue;
      auto r = nelder_mead_2d(objective,
                              {two_pi * (i + 0.5) / grid, two_pi * (j + 0.5) / grid},
                              0.5 * two_pi / grid, 400, 1e-10, 1e-13);
      refined.push_back({r.value, PhaseVector{r.x[0], r.x[1]}.wrapped()});
    }

  CrbMinimum out;
  out.value = std::numeric_limits<double>::infinity();
  for (const auto& c : refined) out.value = std::min(out.value, c.value);
  const double value_tol = 1e-6 * std::abs(out.value);
  for (const auto& c : refined) {
    if (c.value > out.value + value_tol) continue;
    bool dup = false;
    for (const auto& m : out.minimizers)
      if (torus_distance(c.point, m) < kMinimizerDistinctTol) {
        dup = true;
        break;
      }
    if (!dup) out.minimizers.push_back(c.point);
  }
  std::sort(out.minimizers.begin(), out.minimizers.end(),
            [](PhaseVector a, PhaseVector b) {
              return a.phi1 != b.phi1 ? a.phi1 < b.phi1 : a.phi2 < b.phi2;
            });
  return out;
}

}  // namespace triphase
