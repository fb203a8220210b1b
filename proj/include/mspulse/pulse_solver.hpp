#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "mspulse/constants.hpp"
#include "mspulse/errors.hpp"
#include "mspulse/ion_chain.hpp"
#include "mspulse/quadrature.hpp"
#include "mspulse/spline.hpp"
#include "mspulse/transform.hpp"

namespace mspulse {

using cplx = std::complex<double>;

/// Gate parameters: bichromatic detuning mu (rad/s), motional phase psi,
/// target spin-spin phase phi, and the gate interval.
struct GateSpec {
  double mu = 0.0;         // rad/s
  double psi = 0.0;        // rad
  double phi_target = constants::pi / 4.0;
  double t0 = 0.0;         // s
  double tf = 0.0;         // s

  void validate() const {
    if (!(mu > 0)) throw ConfigError("gate detuning mu must be positive");
    if (!(tf > t0)) throw ConfigError("gate interval needs tf > t0");
  }
  double duration() const { return tf - t0; }
  double period() const { return 2.0 * constants::pi / mu; }
};

struct LinearSystem {
  Eigen::MatrixXcd A; // n_modes x n_seg
  Eigen::MatrixXd B;  // n_seg x n_seg, symmetric
};

namespace detail {

template <class Basis>
quad::PanelPlan assembly_plan(const Basis& basis, const GateSpec& gate,
                              int nodes_per_period) {
  const auto& knots = basis.knots();
  std::vector<double> interior(knots.begin() + 1, knots.end() - 1);
  // 8 nodes per panel
  const double width = gate.period() / std::max(1, nodes_per_period / 8);
  return quad::PanelPlan::build(gate.t0, gate.tf, interior, width);
}

} // namespace detail

/**
 * Phase-trajectory closure matrix
 *   A_ms = int b_s(t) cos(mu t + psi) e^{i w_m t} dt
 * over the gate interval, one row per radial mode. Composite Gauss panels are
 * split at the basis knots and sized to the oscillation period.
 */
template <class Basis>
Eigen::MatrixXcd assemble_A(const Basis& basis, const ModeData& modes,
                            const GateSpec& gate, int nodes_per_period = 40) {
  gate.validate();
  const int n_m = modes.n_modes();
  const int n_s = basis.size();
  const auto plan = detail::assembly_plan(basis, gate, nodes_per_period);

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_m, n_s);
  std::vector<double> bval(n_s);
  for (std::size_t p = 0; p < plan.n_panels(); ++p) {
    const double lo = plan.edges[p], hi = plan.edges[p + 1];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int j = 0; j < 8; ++j) {
      const double t = mid + half * quad::gl8_nodes[j];
      const double w = half * quad::gl8_weights[j];
      const double c = std::cos(gate.mu * t + gate.psi) * w;
      for (int s = 0; s < n_s; ++s) bval[s] = basis.eval(s, t);
      for (int m = 0; m < n_m; ++m) {
        const cplx e = std::polar(c, modes.mode_freqs_radial[m] * t);
        for (int s = 0; s < n_s; ++s) a(m, s) += e * bval[s];
      }
    }
  }
  return a;
}

/**
 * Quadratic form of the spin-coupling phase: Omega^T B Omega = chi_12(tf).
 *   B_ss' = -2 sum_m eta_1m eta_2m int dt int^t dt' b_s(t) b_s'(t')
 *           cos(mu t + psi) cos(mu t' + psi) sin(w_m (t - t'))
 * evaluated via cumulative inner integrals, then symmetrized.
 */
template <class Basis>
Eigen::MatrixXd assemble_B(const Basis& basis, const ModeData& modes,
                           const GateSpec& gate, int nodes_per_period = 40) {
  gate.validate();
  const int n_m = modes.n_modes();
  const int n_s = basis.size();
  const auto plan = detail::assembly_plan(basis, gate, nodes_per_period);

  auto q = [&](int s, double t) {
    return basis.eval(s, t) * std::cos(gate.mu * t + gate.psi);
  };

  // prefix[s'][m] = int_{t0}^{panel start} q_s'(t') e^{-i w_m t'} dt'
  Eigen::MatrixXcd prefix = Eigen::MatrixXcd::Zero(n_s, n_m);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n_s, n_s);
  std::vector<double> qval(n_s);
  Eigen::MatrixXcd pval(n_s, n_m);

  for (std::size_t p = 0; p < plan.n_panels(); ++p) {
    const double lo = plan.edges[p], hi = plan.edges[p + 1];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int j = 0; j < 8; ++j) {
      const double t = mid + half * quad::gl8_nodes[j];
      const double w = half * quad::gl8_weights[j];
      // inner integrals up to t
      for (int sp = 0; sp < n_s; ++sp)
        for (int m = 0; m < n_m; ++m) pval(sp, m) = prefix(sp, m);
      const double imid = 0.5 * (lo + t), ihalf = 0.5 * (t - lo);
      for (int jj = 0; jj < 8; ++jj) {
        const double tp = imid + ihalf * quad::gl8_nodes[jj];
        const double wp = ihalf * quad::gl8_weights[jj];
        for (int sp = 0; sp < n_s; ++sp) qval[sp] = q(sp, tp) * wp;
        for (int m = 0; m < n_m; ++m) {
          const cplx e = std::polar(1.0, -modes.mode_freqs_radial[m] * tp);
          for (int sp = 0; sp < n_s; ++sp) pval(sp, m) += qval[sp] * e;
        }
      }
      // outer accumulation
      for (int s = 0; s < n_s; ++s) qval[s] = q(s, t) * w;
      for (int m = 0; m < n_m; ++m) {
        const double eta12 = modes.lamb_dicke_pair(0, m) * modes.lamb_dicke_pair(1, m);
        const cplx e = std::polar(1.0, modes.mode_freqs_radial[m] * t);
        for (int s = 0; s < n_s; ++s)
          for (int sp = 0; sp < n_s; ++sp)
            b(s, sp) += -2.0 * eta12 * qval[s] * (e * pval(sp, m)).imag();
      }
    }
    // extend the prefix by the full panel
    const double imid = 0.5 * (lo + hi), ihalf = 0.5 * (hi - lo);
    for (int jj = 0; jj < 8; ++jj) {
      const double tp = imid + ihalf * quad::gl8_nodes[jj];
      const double wp = ihalf * quad::gl8_weights[jj];
      for (int sp = 0; sp < n_s; ++sp) qval[sp] = q(sp, tp) * wp;
      for (int m = 0; m < n_m; ++m) {
        const cplx e = std::polar(1.0, -modes.mode_freqs_radial[m] * tp);
        for (int sp = 0; sp < n_s; ++sp) prefix(sp, m) += qval[sp] * e;
      }
    }
  }
  return 0.5 * (b + b.transpose());
}

struct LinearSolveDiagnostics {
  int nullspace_dim = 0;
  double sigma_min = 0.0;     // smallest singular value of the stacked system
  double residual_inf = 0.0;  // ||A Omega||_inf over stacked real rows
  double chi_residual = 0.0;  // Omega^T B Omega - phi
  double max_abs_omega = 0.0;
  bool sign_changes = false;
};

struct LinearSolveResult {
  Pulse pulse;
  Eigen::VectorXd coefficients;
  LinearSolveDiagnostics diag;
};

/**
 * Solves the homogeneous closure conditions A Omega = 0 (real-stacked) and
 * normalizes via Omega^T B Omega = phi. Among nullspace directions the one
 * maximizing Omega^T B Omega is chosen, which gives the minimal-Euclidean-norm
 * scaled solution; the overall sign is fixed by max(Omega) >= |min(Omega)|.
 */
inline LinearSolveResult solve_linear_pulse(const Eigen::MatrixXcd& a,
                                            const Eigen::MatrixXd& b,
                                            const GateSpec& gate,
                                            const SplineBasis& basis,
                                            double null_threshold = 1e-10) {
  gate.validate();
  const int n_m = static_cast<int>(a.rows());
  const int n_s = static_cast<int>(a.cols());

  Eigen::MatrixXd stacked(2 * n_m, n_s);
  stacked.topRows(n_m) = a.real();
  stacked.bottomRows(n_m) = a.imag();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  const int n_sv = static_cast<int>(sv.size());

  int rank = 0;
  for (int i = 0; i < n_sv; ++i)
    if (sv[i] > null_threshold * smax) ++rank;
  const int null_dim = n_s - rank;
  const double sigma_min = n_sv > 0 ? sv[n_sv - 1] : 0.0;
  if (null_dim <= 0)
    throw InfeasibleError("no pulse satisfies the closure conditions at this "
                          "(t_gate, mu): smallest singular value " +
                              std::to_string(sigma_min),
                          sigma_min);

  const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(null_dim);

  // direction maximizing sign(phi) * v^T B v on the nullspace unit sphere
  const double phi = gate.phi_target;
  const double phi_sign = phi >= 0 ? 1.0 : -1.0;
  Eigen::MatrixXd bp = null_basis.transpose() * b * null_basis;
  bp = 0.5 * (bp + bp.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bp);
  const int pick = phi_sign > 0 ? null_dim - 1 : 0; // eigenvalues ascending
  const double quad_val = es.eigenvalues()[pick];
  if (!(phi_sign * quad_val > 0))
    throw PhaseUnreachableError(
        "target phase unreachable: Omega^T B Omega has no direction with the "
        "required sign in the nullspace");

  Eigen::VectorXd omega = null_basis * es.eigenvectors().col(pick);
  omega *= std::sqrt(phi / (omega.dot(b * omega)));
  if (omega.maxCoeff() < -omega.minCoeff()) omega = -omega;

  LinearSolveResult out{Pulse::from_spline(basis, omega, PulseKind::linear), omega, {}};
  out.diag.nullspace_dim = null_dim;
  out.diag.sigma_min = sigma_min;
  out.diag.residual_inf = (stacked * omega).lpNorm<Eigen::Infinity>();
  out.diag.chi_residual = omega.dot(b * omega) - phi;
  out.diag.max_abs_omega = out.pulse.max_abs();
  out.diag.sign_changes = out.pulse.changes_sign();
  return out;
}

} // namespace mspulse
