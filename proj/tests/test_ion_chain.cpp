#include <catch2/catch_amalgamated.hpp>

#include "mspulse/ion_chain.hpp"
#include "support/cases.hpp"

using namespace mspulse;
using Catch::Approx;

namespace {

// brute-force oracle: 1-D grid search plus golden-section polish for the
// 2-ion equilibrium half-spacing
double two_ion_half_spacing_bruteforce() {
  auto pot = [](double u) { return u * u + 1.0 / (2.0 * u); }; // scaled, u = half spacing
  double best_u = 0, best_v = 1e300;
  for (int i = 1; i <= 20000; ++i) {
    const double u = 2.0 * i / 20000;
    if (pot(u) < best_v) {
      best_v = pot(u);
      best_u = u;
    }
    // note: scaled potential for positions (-u, u): 2 * u^2/2 + 1/(2u)
  }
  double a = best_u - 1e-3, b = best_u + 1e-3;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  while (b - a > 1e-14) {
    const double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    if (pot(x1) < pot(x2))
      b = x2;
    else
      a = x1;
  }
  return 0.5 * (a + b);
}

} // namespace

TEST_CASE("two-ion equilibrium matches brute-force minimization") {
  ChainConfig cfg = cases::chain2();
  const auto pos = equilibrium_positions(cfg);
  const double l = cfg.length_scale();
  const double u_oracle = two_ion_half_spacing_bruteforce();
  REQUIRE(pos[1] / l == Approx(u_oracle).epsilon(1e-8));
  REQUIRE(pos[1] / l == Approx(0.6300).margin(5e-5)); // (1/4)^(1/3)
  REQUIRE(pos[0] == Approx(-pos[1]).margin(1e-10 * l));
}

TEST_CASE("equilibrium gradient vanishes and positions are symmetric") {
  for (int n : {2, 3, 5, 7, 10}) {
    ChainConfig cfg = cases::chain5();
    cfg.n_ions = n;
    cfg.illuminated_pair = {0, 1};
    const auto pos = equilibrium_positions(cfg);
    const double l = cfg.length_scale();
    const Eigen::VectorXd u = pos / l;
    const auto g = detail::chain_gradient(u);
    REQUIRE(g.lpNorm<Eigen::Infinity>() < 1e-12);
    for (int k = 0; k < n; ++k)
      REQUIRE(u[k] == Approx(-u[n - 1 - k]).margin(1e-10));
    if (n % 2 == 1) REQUIRE(std::abs(u[n / 2]) < 1e-10);
    for (int k = 0; k + 1 < n; ++k) REQUIRE(u[k + 1] > u[k]);
  }
}

TEST_CASE("two-ion normal modes match the analytic diagonalization") {
  ChainConfig cfg = cases::chain2(1.1e6, 0.4e6);
  const auto md = compute_modes(cfg);
  const double wa = 2 * constants::pi * cfg.axial_freq;
  const double wr = 2 * constants::pi * cfg.radial_freq;
  // axial: {w_ax, sqrt(3) w_ax}; radial: {sqrt(wr^2 - wa^2), wr}
  REQUIRE(md.mode_freqs_axial[0] == Approx(wa).epsilon(1e-10));
  REQUIRE(md.mode_freqs_axial[1] == Approx(std::sqrt(3.0) * wa).epsilon(1e-10));
  REQUIRE(md.mode_freqs_radial[0] == Approx(std::sqrt(wr * wr - wa * wa)).epsilon(1e-10));
  REQUIRE(md.mode_freqs_radial[1] == Approx(wr).epsilon(1e-10));
}

TEST_CASE("mode matrices are orthonormal with small eigen-residual") {
  for (int n : {2, 5, 8}) {
    ChainConfig cfg = cases::chain5();
    cfg.n_ions = n;
    // keep the chain radially stable as it grows
    cfg.axial_freq = 0.55e6 / std::pow(n, 0.86);
    cfg.illuminated_pair = {0, 1};
    const auto md = compute_modes(cfg);
    for (const auto* vecs : {&md.mode_vectors_axial, &md.mode_vectors_radial}) {
      const Eigen::MatrixXd gram = vecs->transpose() * (*vecs);
      REQUIRE((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    }
    // eigen-residual ||K b - lambda b|| <= 1e-9 ||K||
    const double wa = 2 * constants::pi * cfg.axial_freq;
    const Eigen::VectorXd u = md.positions / cfg.length_scale();
    const Eigen::MatrixXd g = detail::coulomb_hessian(u);
    Eigen::MatrixXd k_rad = -g;
    k_rad.diagonal().array() +=
        (cfg.radial_freq / cfg.axial_freq) * (cfg.radial_freq / cfg.axial_freq);
    const double knorm = k_rad.norm();
    for (int m = 0; m < n; ++m) {
      const double lam = std::pow(md.mode_freqs_radial[m] / wa, 2);
      const Eigen::VectorXd r =
          k_rad * md.mode_vectors_radial.col(m) - lam * md.mode_vectors_radial.col(m);
      REQUIRE(r.norm() <= 1e-9 * knorm);
    }
  }
}

TEST_CASE("radial COM mode sits exactly at the radial trap frequency") {
  for (int n : {2, 4, 5, 9}) {
    ChainConfig cfg = cases::chain5();
    cfg.n_ions = n;
    cfg.axial_freq = 0.55e6 / std::pow(n, 0.86);
    cfg.illuminated_pair = {0, 1};
    const auto md = compute_modes(cfg);
    const double wr = 2 * constants::pi * cfg.radial_freq;
    REQUIRE(md.mode_freqs_radial[n - 1] == Approx(wr).epsilon(1e-9));
    // axial COM at the axial trap frequency (lowest axial mode)
    REQUIRE(md.mode_freqs_axial[0] ==
            Approx(2 * constants::pi * cfg.axial_freq).epsilon(1e-9));
  }
}

TEST_CASE("five-ion paper chain: lowest radial mode at 0.75 MHz") {
  const auto md = compute_modes(cases::chain5());
  REQUIRE(md.mode_freqs_radial[0] / (2 * constants::pi) == Approx(0.75e6).epsilon(0.01));
  // outer spacing exceeds inner spacing
  const auto& p = md.positions;
  REQUIRE(p[1] - p[0] > p[2] - p[1]);
}

TEST_CASE("Lamb-Dicke matrices scale with wavevector and zero-point motion") {
  ChainConfig cfg = cases::chain5();
  auto md = compute_modes(cfg);

  SECTION("zero radial wavevector zeroes the radial eta") {
    ChainConfig c0 = cfg;
    c0.wavevector_radial = 0.0;
    const auto md0 = compute_modes(c0);
    REQUIRE(md0.lamb_dicke_full.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("COM-mode couplings are equal for all ions") {
    const int com = cfg.n_ions - 1; // highest radial mode
    for (int k = 1; k < cfg.n_ions; ++k)
      REQUIRE(md.lamb_dicke_full(k, com) ==
              Approx(md.lamb_dicke_full(0, com)).epsilon(1e-9));
    // explicit value: k sqrt(hbar / 2 M w) / sqrt(n)
    const double w = md.mode_freqs_radial[com];
    const double eta_expect = cfg.wavevector_radial *
                              std::sqrt(constants::hbar / (2 * cfg.ion_mass * w)) /
                              std::sqrt((double)cfg.n_ions);
    REQUIRE(std::abs(md.lamb_dicke_full(0, com)) == Approx(eta_expect).epsilon(1e-10));
  }

  SECTION("pair rows are rows k1, k2 of the full matrix") {
    for (int m = 0; m < cfg.n_ions; ++m) {
      REQUIRE(md.lamb_dicke_pair(0, m) == md.lamb_dicke_full(cfg.illuminated_pair[0], m));
      REQUIRE(md.lamb_dicke_pair(1, m) == md.lamb_dicke_full(cfg.illuminated_pair[1], m));
    }
  }
}

TEST_CASE("config validation names the offending field") {
  ChainConfig cfg = cases::chain5();
  cfg.n_ions = 1;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = cases::chain5();
  cfg.radial_freq = cfg.axial_freq / 2;
  REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("radial_freq"));
  cfg = cases::chain5();
  cfg.illuminated_pair = {2, 2};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = cases::chain5();
  cfg.illuminated_pair = {0, 7};
  REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("illuminated_pair"));
}

TEST_CASE("unstable trap ratio raises an instability error naming the mode") {
  ChainConfig cfg = cases::chain5();
  // validation requires radial > axial; squeeze the ratio until the lowest
  // radial mode goes soft
  cfg.n_ions = 10;
  cfg.illuminated_pair = {4, 5};
  cfg.radial_freq = cfg.axial_freq * 1.05;
  try {
    compute_modes(cfg);
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    REQUIRE(e.mode_index() == 0);
  }
}

TEST_CASE("mode vector signs are reproducible") {
  const auto md1 = compute_modes(cases::chain5());
  const auto md2 = compute_modes(cases::chain5());
  REQUIRE((md1.mode_vectors_radial - md2.mode_vectors_radial).cwiseAbs().maxCoeff() == 0.0);
  for (int m = 0; m < 5; ++m) {
    int imax = 0;
    for (int i = 1; i < 5; ++i)
      if (std::abs(md1.mode_vectors_radial(i, m)) >
          std::abs(md1.mode_vectors_radial(imax, m)))
        imax = i;
    REQUIRE(md1.mode_vectors_radial(imax, m) > 0);
  }
}
