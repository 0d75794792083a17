#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "triphase/interferometer.hpp"

using namespace triphase;

TEST_CASE("fourier tritter is balanced and unitary", "[interferometer]") {
  Mat3 u = tritter_unitary({TritterKind::fourier});
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k)
      REQUIRE(std::norm(u[j][k]) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(unitarity_defect(u) < 1e-12);
}

TEST_CASE("planar tritter is unitary for any internal phase", "[interferometer]") {
  Rng rng = make_rng(11, {0});
  double worst_defect = 0.0;
  for (int t = 0; t < 100; ++t) {
    Mat3 u = tritter_unitary({TritterKind::reck_planar, uniform_angle(rng)});
    worst_defect = std::max(worst_defect, unitarity_defect(u));
  }
  REQUIRE(worst_defect < 1e-12);
}

TEST_CASE("fourier applied twice is an index-reversal permutation", "[interferometer]") {
  Mat3 f = tritter_unitary({TritterKind::fourier});
  Mat3 m = matmul(f, f);
  // Unit-modulus entries on (0,0), (1,2), (2,1); everything else vanishes.
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      bool on = (j == 0 && k == 0) || (j == 1 && k == 2) || (j == 2 && k == 1);
      REQUIRE(std::abs(m[j][k]) == Catch::Approx(on ? 1.0 : 0.0).margin(1e-12));
    }
}

TEST_CASE("total unitary stays unitary across the configuration space", "[interferometer]") {
  Rng rng = make_rng(12, {0});
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    DeviceModel dev = testutil::random_device(rng);
    worst = std::max(worst, unitarity_defect(dev.total_unitary(testutil::random_phases(rng))));
  }
  REQUIRE(worst < 1e-12);
}

TEST_CASE("ideal device at zero phases routes the photon to one detector", "[interferometer]") {
  auto p = outcome_probabilities(DeviceModel{}, {0.0, 0.0});
  REQUIRE(p[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(p[1] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(p[2] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("outcome probabilities normalize and are 2pi-periodic", "[interferometer]") {
  Rng rng = make_rng(13, {0});
  double worst_norm = 0.0;
  double worst_period = 0.0;
  double worst_neg = 0.0;
  for (int t = 0; t < 10000; ++t) {
    DeviceModel dev = testutil::random_device(rng);
    Likelihood lik(dev);
    PhaseVector phi = testutil::random_phases(rng);
    auto p = lik.probs(phi);
    worst_norm = std::max(worst_norm, std::abs(p[0] + p[1] + p[2] - 1.0));
    auto q1 = lik.probs(phi + PhaseVector{two_pi, 0.0});
    auto q2 = lik.probs(phi + PhaseVector{0.0, two_pi});
    for (int d = 0; d < 3; ++d) {
      worst_period = std::max({worst_period, std::abs(p[d] - q1[d]), std::abs(p[d] - q2[d])});
      worst_neg = std::min(worst_neg, p[d]);
    }
  }
  REQUIRE(worst_norm < 1e-12);
  REQUIRE(worst_period < 1e-12);
  REQUIRE(worst_neg >= 0.0);
}

TEST_CASE("zero visibility gives the fully mixed outcome distribution", "[interferometer]") {
  DeviceModel dev;
  dev.noise.visibility = 0.0;
  Likelihood lik(dev);
  Rng rng = make_rng(14, {0});
  for (int t = 0; t < 50; ++t) {
    auto p = lik.probs(testutil::random_phases(rng));
    for (int d = 0; d < 3; ++d) REQUIRE(p[d] == Catch::Approx(1.0 / 3.0).margin(1e-14));
  }
}

TEST_CASE("analytic Fisher matches central finite differences", "[interferometer]") {
  Rng rng = make_rng(15, {0});
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    DeviceModel dev = testutil::random_device(rng);
    Likelihood lik(dev);
    PhaseVector phi = testutil::random_phases(rng);
    Sym2 f = fisher_matrix(lik, phi).matrix;
    Sym2 g = testutil::finite_difference_fisher(lik, phi);
    worst = std::max({worst, std::abs(f.xx - g.xx), std::abs(f.xy - g.xy),
                      std::abs(f.yy - g.yy)});
  }
  REQUIRE(worst < 1e-6);
}

TEST_CASE("Fisher matrix is positive semidefinite everywhere sampled", "[interferometer]") {
  Rng rng = make_rng(16, {0});
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    DeviceModel dev = testutil::random_device(rng);
    Sym2 f = fisher_matrix(dev, testutil::random_phases(rng)).matrix;
    worst = std::min(worst, f.eigenvalues()[0]);
  }
  REQUIRE(worst >= -1e-10);
}

TEST_CASE("Fisher at a probability node reports regularization", "[interferometer]") {
  // Two outcomes vanish at the zero-phase point of the ideal device.
  auto r = fisher_matrix(DeviceModel{}, {0.0, 0.0});
  REQUIRE(r.regularized);
  // Away from nodes with noise on, no flooring is needed.
  DeviceModel noisy;
  noisy.noise.visibility = 0.9;
  REQUIRE_FALSE(fisher_matrix(noisy, {1.0, 2.0}).regularized);
}

TEST_CASE("reconstructed-device Fisher fixture yields the expected bound", "[interferometer]") {
  Sym2 f_exp{0.548, -0.226, 0.585};
  REQUIRE(f_exp.trace_inverse() == Catch::Approx(4.2).margin(0.01));
}

TEST_CASE("ideal-device CRB landscape: global minimum and multiplicity", "[interferometer]") {
  auto crb = min_trace_inverse_fisher(DeviceModel{});
  REQUIRE(crb.value == Catch::Approx(3.8660254037962).margin(1e-6));
  REQUIRE(crb.minimizers.size() == 6);
  // Lexicographically first working point, frozen from an independent
  // dense-grid + local-refinement scan of the same landscape.
  REQUIRE(crb.minimizers.front().phi1 == Catch::Approx(0.2523350222).margin(1e-6));
  REQUIRE(crb.minimizers.front().phi2 == Catch::Approx(2.3467301273).margin(1e-6));
  Likelihood lik((DeviceModel()));
  for (auto m : crb.minimizers)
    REQUIRE(fisher_matrix(lik, m).matrix.trace_inverse() ==
            Catch::Approx(crb.value).margin(1e-6));
}

TEST_CASE("CRB minimum responds continuously to small noise changes", "[interferometer]") {
  auto ideal = min_trace_inverse_fisher(DeviceModel{}, 90);
  DeviceModel near_ideal;
  near_ideal.noise.visibility = 0.999;
  auto perturbed = min_trace_inverse_fisher(near_ideal, 90);
  REQUIRE(std::abs(perturbed.value - ideal.value) < 0.05);
  REQUIRE(perturbed.value >= ideal.value - 1e-9);
}

TEST_CASE("noise never lowers the CRB minimum of the ideal tritters", "[interferometer]") {
  const double ideal_value = 3.8660254037962;
  for (auto [v, b] : {std::pair{0.9, 0.0}, {1.0, 0.05}, {0.7, 0.1}}) {
    DeviceModel dev;
    dev.noise.visibility = v;
    dev.noise.background = b;
    REQUIRE(min_trace_inverse_fisher(dev, 60).value >= ideal_value - 1e-6);
  }
}

TEST_CASE("device validation rejects out-of-range parameters", "[interferometer]") {
  DeviceModel dev;
  dev.input_mode = 4;
  REQUIRE_THROWS_AS(validate(dev), std::invalid_argument);
  dev = DeviceModel{};
  dev.noise.visibility = 1.5;
  REQUIRE_THROWS_AS(validate(dev), std::invalid_argument);
  dev = DeviceModel{};
  dev.noise.background = -0.1;
  REQUIRE_THROWS_AS(validate(dev), std::invalid_argument);
}
