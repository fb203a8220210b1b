#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mspulse/constants.hpp"
#include "mspulse/errors.hpp"

namespace mspulse {

/**
 * Static description of a linear ion chain in a harmonic trap plus the
 * laser geometry used to drive a gate on one ion pair.
 *
 * Frequencies are ordinary frequencies in Hz; wavevector components are the
 * projections of the laser wavevector on the trap axes in rad/m.
 */
struct ChainConfig {
  int n_ions = 0;
  double ion_mass = 0.0;                                  // kg
  double charge = constants::elementary_charge;          // C
  double axial_freq = 0.0;                                // Hz
  double radial_freq = 0.0;                               // Hz
  double wavevector_axial = 0.0;                          // rad/m
  double wavevector_radial = 0.0;                         // rad/m
  std::array<int, 2> illuminated_pair = {0, 1};           // zero-based

  void validate() const {
    if (n_ions < 2) throw ConfigError("n_ions must be >= 2");
    if (!(ion_mass > 0)) throw ConfigError("ion_mass must be positive");
    if (!(charge > 0)) throw ConfigError("charge must be positive");
    if (!(axial_freq > 0)) throw ConfigError("axial_freq must be positive");
    if (!(radial_freq > axial_freq))
      throw ConfigError("radial_freq must exceed axial_freq for a stable linear chain");
    if (illuminated_pair[0] == illuminated_pair[1])
      throw ConfigError("illuminated_pair indices must differ");
    for (int k : illuminated_pair)
      if (k < 0 || k >= n_ions)
        throw ConfigError("illuminated_pair index " + std::to_string(k) +
                          " out of range for n_ions=" + std::to_string(n_ions));
  }

  // Characteristic Coulomb length l = (e^2 / (4 pi eps0 M w_ax^2))^(1/3).
  double length_scale() const {
    const double w_ax = 2.0 * constants::pi * axial_freq;
    return std::cbrt(charge * charge /
                     (4.0 * constants::pi * constants::epsilon0 * ion_mass * w_ax * w_ax));
  }
};

/**
 * Equilibrium positions, normal modes for both trap branches, and the
 * Lamb-Dicke matrices. Mode vectors are the columns of the (orthonormal)
 * mode matrices; frequencies are angular (rad/s) and sorted ascending.
 */
struct ModeData {
  Eigen::VectorXd positions;            // m, ascending
  Eigen::VectorXd mode_freqs_axial;     // rad/s
  Eigen::VectorXd mode_freqs_radial;    // rad/s
  Eigen::MatrixXd mode_vectors_axial;   // b_km, column m = mode m
  Eigen::MatrixXd mode_vectors_radial;
  Eigen::MatrixXd lamb_dicke_axial;     // eta~_km per branch
  Eigen::MatrixXd lamb_dicke_full;      // radial branch (the one driving gates)
  Eigen::MatrixXd lamb_dicke_pair;      // rows k1, k2 of lamb_dicke_full

  int n_modes() const { return static_cast<int>(mode_freqs_radial.size()); }
};

namespace detail {

// Scaled Coulomb-chain potential and derivatives; u are positions in units of
// the length scale, energies in units of M w_ax^2 l^2.
inline double chain_potential(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  for (int k = 0; k + 1 < n; ++k)
    if (!(u[k + 1] > u[k])) return std::numeric_limits<double>::infinity();
  double v = 0.5 * u.squaredNorm();
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) v += 1.0 / (u[l] - u[k]);
  return v;
}

inline Eigen::VectorXd chain_gradient(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd g = u;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      const double d = u[k] - u[l];
      g[k] -= (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  return g;
}

// Hessian of the scaled Coulomb sum: diag_k sum_{k'!=k} 1/|u_k-u_k'|^3,
// off-diagonal -1/|u_k-u_l|^3.
inline Eigen::MatrixXd coulomb_hessian(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      const double inv3 = 1.0 / std::pow(std::abs(u[k] - u[l]), 3);
      g(k, l) = -inv3;
      g(k, k) += inv3;
    }
  return g;
}

} // namespace detail

/**
 * Equilibrium positions from Newton minimization of the chain potential,
 * started from an evenly spaced ansatz. Deterministic; converges to the
 * symmetric configuration with the stated gradient tolerance (in scaled
 * units) or throws ConvergenceError.
 */
inline Eigen::VectorXd equilibrium_positions(const ChainConfig& cfg,
                                             int max_iter = 200,
                                             double grad_tol = 1e-13) {
  cfg.validate();
  const int n = cfg.n_ions;

  // evenly spaced start; spacing from the empirical minimum-distance fit
  const double d0 = 2.018 / std::pow(n, 0.559);
  Eigen::VectorXd u(n);
  for (int k = 0; k < n; ++k) u[k] = d0 * (k - 0.5 * (n - 1));

  double res = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = detail::chain_gradient(u);
    res = g.lpNorm<Eigen::Infinity>();
    if (res < grad_tol) return cfg.length_scale() * u;

    Eigen::MatrixXd hess = detail::coulomb_hessian(u) * 2.0;
    hess.diagonal().array() += 1.0;
    Eigen::VectorXd step = hess.ldlt().solve(-g);

    // backtracking only while far from the minimum; near it the potential is
    // flat to roundoff and the sufficient-decrease test would stall
    double t = 1.0;
    if (res > 1e-8) {
      const double v0 = detail::chain_potential(u);
      const double slope = g.dot(step);
      for (int ls = 0; ls < 60; ++ls) {
        if (detail::chain_potential(u + t * step) <= v0 + 1e-4 * t * slope) break;
        t *= 0.5;
      }
    }
    u += t * step;
  }
  throw ConvergenceError("equilibrium position minimizer did not converge; "
                         "gradient max-norm " + std::to_string(res), res);
}

/**
 * Normal modes of both branches from the eigenproblems of the scaled
 * Hessians: axial K = I + 2*G, radial K = (w_rad/w_ax)^2 I - G with G the
 * scaled Coulomb Hessian. Frequencies sorted ascending; eigenvectors signed
 * so the largest-magnitude component is positive.
 */
inline ModeData normal_modes(const ChainConfig& cfg, const Eigen::VectorXd& positions) {
  cfg.validate();
  const int n = cfg.n_ions;
  if (positions.size() != n)
    throw ConfigError("positions length does not match n_ions");

  const double w_ax = 2.0 * constants::pi * cfg.axial_freq;
  const double w_rad = 2.0 * constants::pi * cfg.radial_freq;
  const Eigen::VectorXd u = positions / cfg.length_scale();
  const Eigen::MatrixXd g = detail::coulomb_hessian(u);

  Eigen::MatrixXd k_ax = 2.0 * g;
  k_ax.diagonal().array() += 1.0;
  Eigen::MatrixXd k_rad = -g;
  k_rad.diagonal().array() += (w_rad / w_ax) * (w_rad / w_ax);

  ModeData md;
  md.positions = positions;

  auto solve_branch = [&](const Eigen::MatrixXd& k, const char* name,
                          Eigen::VectorXd& freqs, Eigen::MatrixXd& vecs) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success)
      throw ConvergenceError(std::string(name) + " eigensolve failed", 0.0);
    const Eigen::VectorXd lam = es.eigenvalues(); // ascending
    freqs.resize(n);
    vecs = es.eigenvectors();
    for (int m = 0; m < n; ++m) {
      if (lam[m] <= 0.0)
        throw InstabilityError(std::string("chain unstable: ") + name + " mode " +
                                   std::to_string(m) + " has non-positive eigenvalue " +
                                   std::to_string(lam[m]),
                               m);
      freqs[m] = w_ax * std::sqrt(lam[m]);
      // reproducible sign: largest-|.| component positive, lowest index on ties
      int imax = 0;
      for (int i = 1; i < n; ++i)
        if (std::abs(vecs(i, m)) > std::abs(vecs(imax, m))) imax = i;
      if (vecs(imax, m) < 0) vecs.col(m) *= -1.0;
    }
  };

  solve_branch(k_ax, "axial", md.mode_freqs_axial, md.mode_vectors_axial);
  solve_branch(k_rad, "radial", md.mode_freqs_radial, md.mode_vectors_radial);
  return md;
}

/// Fills the Lamb-Dicke matrices eta~_km = k sqrt(hbar / 2 M w_m) b_km and
/// extracts the rows of the illuminated pair (radial branch).
inline void lamb_dicke(const ChainConfig& cfg, ModeData& md) {
  const int n = cfg.n_ions;
  auto branch = [&](double wavevector, const Eigen::VectorXd& freqs,
                    const Eigen::MatrixXd& vecs) {
    Eigen::MatrixXd eta(n, n);
    for (int m = 0; m < n; ++m) {
      const double x0 = std::sqrt(constants::hbar / (2.0 * cfg.ion_mass * freqs[m]));
      eta.col(m) = wavevector * x0 * vecs.col(m);
    }
    return eta;
  };
  md.lamb_dicke_axial = branch(cfg.wavevector_axial, md.mode_freqs_axial, md.mode_vectors_axial);
  md.lamb_dicke_full = branch(cfg.wavevector_radial, md.mode_freqs_radial, md.mode_vectors_radial);
  md.lamb_dicke_pair.resize(2, n);
  md.lamb_dicke_pair.row(0) = md.lamb_dicke_full.row(cfg.illuminated_pair[0]);
  md.lamb_dicke_pair.row(1) = md.lamb_dicke_full.row(cfg.illuminated_pair[1]);
}

inline ModeData compute_modes(const ChainConfig& cfg) {
  ModeData md = normal_modes(cfg, equilibrium_positions(cfg));
  lamb_dicke(cfg, md);
  return md;
}

} // namespace mspulse
