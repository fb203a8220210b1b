#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "mspulse/gate_analytics.hpp"
#include "mspulse/transform.hpp"
#include "support/cases.hpp"

using namespace mspulse;
using Catch::Approx;

namespace {

// shared 5-ion paper-case design, built once
struct FiveIonFixture {
  ChainConfig cfg = cases::chain5();
  ModeData md = compute_modes(cfg);
  GateSpec gate = cases::gate5();
  LinearSolveResult lin = cases::design_linear(cfg, md, gate);
  Pulse tr = inverse_transform(lin.pulse, gate.mu).pulse;
};

const FiveIonFixture& five_ion() {
  static FiveIonFixture fx;
  return fx;
}

TrajectoryRecord synthetic_record(const std::vector<cplx>& alpha_final, double chi12_final) {
  TrajectoryRecord tr;
  tr.n_modes = (int)alpha_final.size() / 2;
  tr.times = {0.0, 1.0};
  tr.alpha.assign(alpha_final.size() * 2, cplx(0.0));
  std::copy(alpha_final.begin(), alpha_final.end(), tr.alpha.begin() + alpha_final.size());
  tr.chi11 = {0.0, 0.0};
  tr.chi22 = {0.0, 0.0};
  tr.chi12 = {0.0, chi12_final};
  tr.phi_carrier = {0.0, 0.0};
  return tr;
}

// dense evaluation of <dU+ dU> - |<dU>|^2 on the qubit (x) {vac, one-phonon}
// space, for given final alpha and the chi12 deviation
double brute_force_f0(const std::vector<cplx>& alpha_final, double dchi,
                      const Eigen::Vector4cd& c) {
  const int m_count = (int)alpha_final.size() / 2;
  const int ph_dim = 1 + m_count;
  // basis: |x-string> x |0 or 1_m>
  // dU = (1/2) sum_ij dchi_ij sx_i sx_j + i sum_im sx_i (alpha* a - alpha a+)
  Eigen::MatrixXcd du = Eigen::MatrixXcd::Zero(4 * ph_dim, 4 * ph_dim);
  for (int x = 0; x < 4; ++x) {
    const int s1 = x < 2 ? 1 : -1, s2 = (x % 2) == 0 ? 1 : -1;
    const double dphase = dchi * (s1 * s2) * 2.0 * 0.5; // (1/2)(dchi_12+dchi_21) s1 s2
    du(x * ph_dim, x * ph_dim) += dphase;
    for (int i = 0; i < 2; ++i) {
      const int s = i == 0 ? s1 : s2;
      for (int m = 0; m < m_count; ++m) {
        const cplx a = alpha_final[i * m_count + m];
        // i sx_i (alpha* a_m - alpha a+_m): on vacuum only the a+ part acts
        du((x * ph_dim) + 1 + m, x * ph_dim) += cplx(0, 1) * double(s) * (-a);
        du(x * ph_dim, (x * ph_dim) + 1 + m) += cplx(0, 1) * double(s) * std::conj(a);
      }
    }
  }
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4 * ph_dim);
  for (int x = 0; x < 4; ++x) psi[x * ph_dim] = c[x];
  const Eigen::VectorXcd dpsi = du * psi;
  const cplx mean = psi.dot(dpsi); // <psi|dU|psi>
  return dpsi.squaredNorm() - std::norm(mean);
}

} // namespace

TEST_CASE("carrier phase: zero pulse and constant-pulse antiderivative") {
  GateSpec gate = cases::gate2(12e-6, 1.0e6);
  std::vector<double> times;
  for (int i = 0; i <= 64; ++i) times.push_back(gate.tf * i / 64);

  const Pulse zero = Pulse::zero(gate.t0, gate.tf);
  for (double phi : carrier_phase(zero, gate, times)) REQUIRE(phi == 0.0);

  const double omega0 = 0.37 * gate.mu;
  const Pulse flat =
      Pulse::from_samples(gate.t0, gate.tf, Eigen::VectorXd::Constant(6, omega0));
  const auto phi = carrier_phase(flat, gate, times);
  for (std::size_t q = 0; q < times.size(); ++q) {
    const double exact = omega0 / gate.mu * std::sin(gate.mu * times[q]);
    REQUIRE(phi[q] == Approx(exact).margin(1e-12 * omega0 / gate.mu));
  }
}

TEST_CASE("five-ion transformed pulse: carrier phase stays small") {
  const auto& fx = five_ion();
  const std::vector<double> tf_only = {fx.gate.tf};
  const double phi_final = carrier_phase(fx.tr, fx.gate, tf_only)[0];
  REQUIRE(std::abs(phi_final) > 1e-6);
  REQUIRE(std::abs(phi_final) < 5e-4); // paper reports 1e-5..1e-4
}

TEST_CASE("forces obey f = f0 cos 2Phi and vanish for a zero pulse") {
  const auto& fx = five_ion();
  std::vector<double> times;
  for (int i = 1; i < 40; ++i) times.push_back(fx.gate.tf * i / 40);

  const auto f_on = forces(fx.lin.pulse, fx.md, fx.gate, true, times);
  const auto f_off = forces(fx.lin.pulse, fx.md, fx.gate, false, times);
  const auto phi = carrier_phase(fx.lin.pulse, fx.gate, times);
  double fscale = 0.0;
  for (const auto& v : f_off.f) fscale = std::max(fscale, std::abs(v));
  for (std::size_t q = 0; q < times.size(); ++q)
    for (int j = 0; j < 2 * f_on.n_modes; ++j) {
      const cplx expect = f_off.f[q * 2 * f_on.n_modes + j] * std::cos(2 * phi[q]);
      REQUIRE(std::abs(f_on.f[q * 2 * f_on.n_modes + j] - expect) < 1e-12 * fscale);
    }

  const Pulse zero = Pulse::zero(fx.gate.t0, fx.gate.tf);
  const auto f_zero = forces(zero, fx.md, fx.gate, true, times);
  for (const auto& v : f_zero.f) REQUIRE(std::abs(v) == 0.0);
}

TEST_CASE("linear pulse closes its own carrier-free trajectories") {
  const auto& fx = five_ion();
  const auto traj = trajectories(fx.lin.pulse, fx.md, fx.gate, false);
  const int last = traj.n_times() - 1;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m)
      REQUIRE(std::abs(traj.alpha_at(last, i, m)) < 1e-9);
  REQUIRE(traj.chi12[last] == Approx(fx.gate.phi_target).margin(1e-9));
}

TEST_CASE("carrier degrades the linear pulse at the expected scale") {
  const auto& fx = five_ion();
  const auto traj = trajectories(fx.lin.pulse, fx.md, fx.gate, true);
  const int last = traj.n_times() - 1;
  double amax = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m)
      amax = std::max(amax, std::abs(traj.alpha_at(last, i, m)));
  REQUIRE(amax > 2e-3); // paper: residual amplitudes of order 1e-2
  REQUIRE(amax < 5e-2);
  REQUIRE(infidelity_z(traj, fx.gate) > 1e-3);
}

TEST_CASE("transformed pulse restores closure to the 1e-5 level") {
  const auto& fx = five_ion();
  const auto traj = trajectories(fx.tr, fx.md, fx.gate, true);
  REQUIRE(infidelity_z(traj, fx.gate) < 1e-5);
}

TEST_CASE("effective-amplitude route matches the exact carrier trajectories") {
  // alpha from f0(S(Omega_tr)) = f0(Omega_lin) vs alpha from f0(Omega_tr) cos(2Phi)
  const auto& fx = five_ion();
  auto rel_dev = [&](const GateSpec& gate, const Pulse& lin_pulse, const Pulse& tr_pulse) {
    const auto a_eff = trajectories(lin_pulse, fx.md, gate, false);
    const auto a_exact = trajectories(tr_pulse, fx.md, gate, true);
    REQUIRE(a_eff.n_times() == a_exact.n_times());
    double amax = 0.0, dmax = 0.0;
    for (int k = 0; k < a_eff.n_times(); ++k)
      for (int i = 0; i < 2; ++i)
        for (int m = 0; m < a_eff.n_modes; ++m) {
          amax = std::max(amax, std::abs(a_exact.alpha_at(k, i, m)));
          dmax = std::max(dmax,
                          std::abs(a_exact.alpha_at(k, i, m) - a_eff.alpha_at(k, i, m)));
        }
    return dmax / amax;
  };

  // paper-grid pulse: the running deviation is dominated by the intra-period
  // ripple that the averaging drops, a few 1e-3 of the peak excursion; the
  // endpoint closure (what the design actually relies on) is tested separately
  // at the 1e-5 infidelity level
  const double dev_paper = rel_dev(fx.gate, fx.lin.pulse, fx.tr);
  REQUIRE(dev_paper < 5e-3);
  REQUIRE(dev_paper > 1e-5); // the two routes are genuinely different
}

TEST_CASE("alpha additivity against direct subinterval quadrature") {
  const auto& fx = five_ion();
  const auto traj = trajectories(fx.tr, fx.md, fx.gate, true);
  const double dt = traj.times[1] - traj.times[0];
  const int k1 = (int)std::llround(0.37 * (traj.n_times() - 1));
  const int k2 = (int)std::llround(0.81 * (traj.n_times() - 1));
  const double t1 = traj.times[k1], t2 = traj.times[k2];
  (void)dt;

  // direct integral of -i f over [t1, t2] sampling the same force kernel
  const auto plan = quad::PanelPlan::build(t1, t2, {}, fx.gate.period() / 8);
  std::vector<double> nodes;
  std::vector<double> weights;
  for (std::size_t p = 0; p < plan.n_panels(); ++p) {
    const double mid = 0.5 * (plan.edges[p] + plan.edges[p + 1]);
    const double half = 0.5 * (plan.edges[p + 1] - plan.edges[p]);
    for (int j = 0; j < 8; ++j) {
      nodes.push_back(mid + half * quad::gl8_nodes[j]);
      weights.push_back(half * quad::gl8_weights[j]);
    }
  }
  const auto frec = forces(fx.tr, fx.md, fx.gate, true, nodes);
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m) {
      cplx direct = 0.0;
      for (std::size_t q = 0; q < nodes.size(); ++q)
        direct += cplx(0, -weights[q]) * frec.f[q * 2 * traj.n_modes + i * traj.n_modes + m];
      const cplx from_table = traj.alpha_at(k2, i, m) - traj.alpha_at(k1, i, m);
      REQUIRE(std::abs(from_table - direct) < 1e-10 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("factorization: alpha_im / eta_im is mode-wise ion-independent") {
  const auto& fx = five_ion();
  for (bool carrier : {false, true}) {
    const auto traj = trajectories(fx.lin.pulse, fx.md, fx.gate, carrier);
    for (int k : {traj.n_times() / 3, traj.n_times() - 1})
      for (int m = 0; m < traj.n_modes; ++m) {
        const double e1 = fx.md.lamb_dicke_pair(0, m), e2 = fx.md.lamb_dicke_pair(1, m);
        if (std::abs(e1) < 1e-12 || std::abs(e2) < 1e-12) continue;
        const cplx g1 = traj.alpha_at(k, 0, m) / e1;
        const cplx g2 = traj.alpha_at(k, 1, m) / e2;
        REQUIRE(std::abs(g1 - g2) <= 1e-10 * std::max(1.0, std::abs(g1)));
      }
  }
}

TEST_CASE("doubling one mode's Lamb-Dicke row quadruples its phonon term") {
  const ChainConfig cfg = cases::chain2();
  const ModeData md = compute_modes(cfg);
  const GateSpec gate = cases::gate2();
  const auto lin = cases::design_linear(cfg, md, gate);

  ModeData md2 = md;
  md2.lamb_dicke_pair.col(0) *= 2.0; // scale mode 0 for both ions
  const auto t1 = trajectories(lin.pulse, md, gate, true);
  const auto t2 = trajectories(lin.pulse, md2, gate, true);
  const int last = t1.n_times() - 1;
  for (auto [s1, s2] : x_strings) {
    const double c1 = std::norm(t1.string_alpha(last, 0, s1, s2));
    const double c2 = std::norm(t2.string_alpha(last, 0, s1, s2));
    REQUIRE(c2 == Approx(4.0 * c1).epsilon(1e-12));
  }
}

TEST_CASE("z-infidelity formula on synthetic records") {
  REQUIRE(infidelity_z(synthetic_record({0, 0, 0, 0}, constants::pi / 4),
                       cases::gate5()) == 0.0);
  const double got = infidelity_z(synthetic_record({0, 0, 0, 0}, constants::pi / 4 - 1e-3),
                                  cases::gate5());
  REQUIRE(got == Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("x-infidelity cancels for antisymmetric strings with equal alpha") {
  const std::vector<cplx> alpha = {cplx(0.01, -0.02), cplx(0.005, 0.0),
                                   cplx(0.01, -0.02), cplx(0.005, 0.0)};
  const auto rec = synthetic_record(alpha, constants::pi / 4);
  REQUIRE(infidelity_x(rec, 1, -1) == Approx(0.0).margin(1e-18));
  REQUIRE(infidelity_x(rec, 1, 1) > 0.0);
}

TEST_CASE("superposition infidelity: reductions and brute-force oracle") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> um(-0.03, 0.03);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<cplx> alpha(4);
    for (auto& a : alpha) a = cplx(um(rng), um(rng));
    const double dchi = um(rng) * 0.3;
    const auto rec = synthetic_record(alpha, constants::pi / 4 + dchi);
    const GateSpec gate = cases::gate5();

    // single-string coefficients reduce to infidelity_x
    for (int x = 0; x < 4; ++x) {
      Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
      c[x] = 1.0;
      const std::array<cplx, 4> cs = {c[0], c[1], c[2], c[3]};
      const auto [s1, s2] = x_strings[x];
      REQUIRE(infidelity_superposition(rec, gate, cs) ==
              Approx(infidelity_x(rec, s1, s2)).margin(1e-15));
    }

    // random superposition against the dense expansion oracle
    Eigen::Vector4cd c;
    std::uniform_real_distribution<double> uc(-1.0, 1.0);
    for (int x = 0; x < 4; ++x) c[x] = cplx(uc(rng), uc(rng));
    c /= std::sqrt(c.squaredNorm());
    const std::array<cplx, 4> cs = {c[0], c[1], c[2], c[3]};
    const double lib = infidelity_superposition(rec, gate, cs);
    const double oracle = brute_force_f0(alpha, dchi, c);
    REQUIRE(lib == Approx(oracle).margin(1e-12));
  }
}

TEST_CASE("superposition of equal-product strings cancels the phase variance") {
  const auto rec = synthetic_record({0, 0, 0, 0}, constants::pi / 4 + 5e-3);
  const double r = 1.0 / std::sqrt(2.0);
  const std::array<cplx, 4> cs = {r, 0.0, 0.0, r}; // (1,1) and (-1,-1): same s1 s2
  REQUIRE(infidelity_superposition(rec, cases::gate5(), cs) == Approx(0.0).margin(1e-15));
}

TEST_CASE("average infidelity bound composes its three terms") {
  const auto rec0 = synthetic_record({0, 0, 0, 0}, constants::pi / 4);
  const std::array<double, 4> zero = {0, 0, 0, 0};
  REQUIRE(average_infidelity_bound(rec0, cases::gate5(), zero) == 0.0);

  const std::array<double, 4> uniform = {1e-5, 1e-5, 1e-5, 1e-5};
  REQUIRE(average_infidelity_bound(rec0, cases::gate5(), uniform) ==
          Approx(1e-5).epsilon(1e-12));

  const auto rec1 = synthetic_record({0, 0, 0, 0}, constants::pi / 4 - 2e-3);
  REQUIRE(average_infidelity_bound(rec1, cases::gate5(), zero) ==
          Approx(0.8 * 4e-6).epsilon(1e-9));
}
