#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "mspulse/spline.hpp"
#include "support/oracles.hpp"

using namespace mspulse;
using Catch::Approx;

TEST_CASE("basis functions satisfy the boundary and interpolation conditions") {
  const double t0 = 0.0, tf = 41.74e-6;
  const int n_seg = 11; // 12 segments
  const SplineBasis basis(t0, tf, n_seg);
  REQUIRE((int)basis.knots().size() == n_seg + 2);

  double dmax = 0.0;
  for (int s = 0; s < n_seg; ++s)
    dmax = std::max(dmax, std::abs(basis.basis_function(s).derivatives().maxCoeff()));

  for (int s = 0; s < n_seg; ++s) {
    const auto& b = basis.basis_function(s);
    REQUIRE(std::abs(b(t0)) < 1e-12);
    REQUIRE(std::abs(b(tf)) < 1e-12);
    REQUIRE(std::abs(b.derivative(t0)) < 1e-12 * dmax);
    REQUIRE(std::abs(b.derivative(tf)) < 1e-12 * dmax);
    for (int sp = 0; sp < n_seg; ++sp)
      REQUIRE(basis.eval(s, basis.knots()[sp + 1]) == Approx(s == sp ? 1.0 : 0.0).margin(1e-14));
  }
}

TEST_CASE("boundary derivative vanishes under a finite-difference oracle") {
  const SplineBasis basis(0.0, 1.0, 7);
  for (int s = 0; s < 7; ++s) {
    const auto& b = basis.basis_function(s);
    double dpeak = 0.0;
    for (int i = 1; i < 200; ++i)
      dpeak = std::max(dpeak, std::abs(b.derivative(i / 200.0)));
    // five-point one-sided stencil at t0 and tf
    const double h = 1e-4;
    auto fd_start = (-25.0 * b(0) + 48 * b(h) - 36 * b(2 * h) + 16 * b(3 * h) - 3 * b(4 * h)) / (12 * h);
    auto fd_end = (25.0 * b(1) - 48 * b(1 - h) + 36 * b(1 - 2 * h) - 16 * b(1 - 3 * h) + 3 * b(1 - 4 * h)) / (12 * h);
    REQUIRE(std::abs(fd_start) < 1e-8 * dpeak);
    REQUIRE(std::abs(fd_end) < 1e-8 * dpeak);
  }
}

TEST_CASE("C2 continuity across interior knots") {
  const SplineBasis basis(0.0, 2.0, 9);
  const double eps = 1e-9;
  for (int s = 0; s < 9; ++s) {
    const auto& b = basis.basis_function(s);
    double scale = 0.0;
    for (int i = 0; i <= 400; ++i)
      scale = std::max(scale, std::abs(b.second_derivative(2.0 * i / 400)));
    for (int j = 1; j <= 9; ++j) {
      const double tk = basis.knots()[j];
      const double jump = b.second_derivative(tk + eps) - b.second_derivative(tk - eps);
      REQUIRE(std::abs(jump) < 1e-6 * scale); // eps offset itself moves p'' by ~1e-9*scale
    }
  }
}

TEST_CASE("pulse evaluation matches an independent moment-form spline") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const double t0 = 0.0, tf = 3.0e-5;
  const int n_seg = 11;
  const SplineBasis basis(t0, tf, n_seg);
  Eigen::VectorXd c(n_seg);
  for (int s = 0; s < n_seg; ++s) c[s] = coef(rng);
  const Pulse p = Pulse::from_spline(basis, c);

  Eigen::VectorXd knot_values = Eigen::VectorXd::Zero(n_seg + 2);
  knot_values.segment(1, n_seg) = c;
  oracles::MomentSpline oracle(t0, tf, knot_values);

  double scale = 0.0;
  for (int i = 0; i <= 1000; ++i) scale = std::max(scale, std::abs(p(t0 + (tf - t0) * i / 1000)));
  for (int i = 0; i <= 1000; ++i) {
    const double t = t0 + (tf - t0) * i / 1000;
    REQUIRE(p(t) == Approx(oracle(t)).margin(1e-10 * scale));
  }

  // pulse = sum of basis functions with the same coefficients
  for (int i = 0; i <= 57; ++i) {
    const double t = t0 + (tf - t0) * i / 57;
    double acc = 0.0;
    for (int s = 0; s < n_seg; ++s) acc += c[s] * basis.eval(s, t);
    REQUIRE(p(t) == Approx(acc).margin(1e-12 * scale));
  }
}

TEST_CASE("grid evaluation is bit-identical to pointwise evaluation") {
  const SplineBasis basis(0.0, 1e-5, 5);
  Eigen::VectorXd c(5);
  c << 0.3, -1.2, 2.0, 0.7, -0.4;
  const Pulse p = Pulse::from_spline(basis, c);
  std::vector<double> times;
  for (int i = 0; i <= 333; ++i) times.push_back(1e-5 * i / 333);
  const auto grid = p.evaluate_grid(times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    volatile double a = p(times[i]);
    REQUIRE(grid[i] == a);
  }
}

TEST_CASE("zero and single-coefficient pulses") {
  const SplineBasis basis(0.0, 1.0, 6);
  const Pulse zero = Pulse::from_spline(basis, Eigen::VectorXd::Zero(6));
  for (int i = 0; i <= 50; ++i) REQUIRE(zero(i / 50.0) == 0.0);

  Eigen::VectorXd c = Eigen::VectorXd::Zero(6);
  c[2] = 1.0;
  const Pulse single = Pulse::from_spline(basis, c);
  REQUIRE(single(basis.knots()[3]) == Approx(1.0).margin(1e-14));
}

TEST_CASE("out-of-domain evaluation raises a domain error") {
  const SplineBasis basis(0.0, 1.0, 3);
  const Pulse p = Pulse::from_spline(basis, Eigen::VectorXd::Ones(3));
  REQUIRE_THROWS_AS(p(-0.01), DomainError);
  REQUIRE_THROWS_AS(p(1.01), DomainError);
}

TEST_CASE("degenerate basis parameters are rejected") {
  REQUIRE_THROWS_AS(SplineBasis(0.0, 1.0, 0), ConfigError);
  REQUIRE_THROWS_AS(SplineBasis(1.0, 0.0, 3), ConfigError);
}

TEST_CASE("default segment count leaves a one-dimensional design nullspace") {
  // n free parameters minus 2 n_ions real constraints
  REQUIRE(default_segments(5) - 2 * 5 == 1);
  REQUIRE(default_segments(20) - 2 * 20 == 1);
}

TEST_CASE("sample-backed pulses reproduce their samples and clamp the ends") {
  Eigen::VectorXd samples(9);
  samples << 0, 0.2, 0.9, 1.4, 1.7, 1.4, 0.9, 0.2, 0;
  const Pulse p = Pulse::from_samples(0.0, 8.0, samples, PulseKind::transformed);
  for (int i = 0; i < 9; ++i) REQUIRE(p((double)i) == Approx(samples[i]).margin(1e-14));
  REQUIRE(std::abs(p.spline().derivative(0.0)) < 1e-12);
  REQUIRE(std::abs(p.spline().derivative(8.0)) < 1e-12);
  REQUIRE(p.kind() == PulseKind::transformed);
}
