#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "mspulse/errors.hpp"
#include "mspulse/ion_chain.hpp"
#include "mspulse/pulse_solver.hpp"
#include "mspulse/quadrature.hpp"
#include "mspulse/spline.hpp"

namespace mspulse {

struct AnalyticsOptions {
  int samples_per_period = 40; // grid density for cumulative tables
};

/**
 * Cumulative propagator ingredients on a uniform time grid:
 * carrier phase Phi(t), phase-space displacements alpha_im(t, t0) for the
 * illuminated pair, and the spin-coupling phases chi_ij(t, t0).
 * chi12 is the symmetrized scalar entering the gate condition.
 */
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<cplx> alpha; // [(k * 2 + i) * n_modes + m]
  std::vector<double> chi11, chi12, chi22;
  std::vector<double> phi_carrier;
  bool carrier_on = false;
  int n_modes = 0;

  int n_times() const { return static_cast<int>(times.size()); }
  cplx alpha_at(int k, int i, int m) const {
    return alpha[(static_cast<std::size_t>(k) * 2 + i) * n_modes + m];
  }
  // displacement of mode m conditioned on the x-string (s1, s2)
  cplx string_alpha(int k, int m, int s1, int s2) const {
    return double(s1) * alpha_at(k, 0, m) + double(s2) * alpha_at(k, 1, m);
  }
  // chi_s = (chi11 + chi22)/2 + chi12 * s1 s2
  double string_chi(int k, int s1, int s2) const {
    return 0.5 * (chi11[k] + chi22[k]) + chi12[k] * (s1 * s2);
  }
};

namespace detail {

/**
 * Evaluator for the spin-dependent force f_im(t) = eta_im e^{i w_m t}
 * Omega(t) cos(mu t + psi) [cos 2Phi(t)], with Phi accumulated on a uniform
 * grid and interior values reached by partial Gauss panels inside one step.
 */
struct ForceKernel {
  const Pulse& pulse;
  Eigen::Matrix2Xd eta;       // illuminated pair rows
  Eigen::VectorXd omega;      // radial mode frequencies
  GateSpec gate;
  bool carrier_on;
  quad::UniformGrid grid;
  std::vector<double> phi_prefix;
  std::vector<cplx> alpha_prefix; // [(k * 2 + i) * M + m]

  ForceKernel(const Pulse& p, const ModeData& modes, const GateSpec& g,
              bool carrier, int samples_per_period)
      : pulse(p),
        eta(modes.lamb_dicke_pair),
        omega(modes.mode_freqs_radial),
        gate(g),
        carrier_on(carrier),
        grid(quad::UniformGrid::for_gate(g.t0, g.tf, g.mu, samples_per_period)) {
    phi_prefix = quad::cumulative<double>(grid, [&](double t) { return omega_c(t); });
  }

  int n_modes() const { return static_cast<int>(omega.size()); }

  double omega_c(double t) const { return pulse(t) * std::cos(gate.mu * t + gate.psi); }

  double phi_at(int step, double t) const {
    const double a = grid.time(step);
    if (t == a) return phi_prefix[step];
    return phi_prefix[step] + quad::gl8([&](double x) { return omega_c(x); }, a, t);
  }

  // f_im(t) for i = 0,1 and all modes; out has length 2*M
  void force_at(int step, double t, cplx* out) const {
    const int m_count = n_modes();
    double amp = omega_c(t);
    if (carrier_on) amp *= std::cos(2.0 * phi_at(step, t));
    for (int m = 0; m < m_count; ++m) {
      const cplx e = std::polar(amp, omega[m] * t);
      out[m] = eta(0, m) * e;
      out[m_count + m] = eta(1, m) * e;
    }
  }

  // alpha_im(t, t0) from the prefix table plus a partial panel; requires the
  // alpha_prefix table to be filled up to `step`.
  void alpha_at(int step, double t, cplx* out) const {
    const int m2 = 2 * n_modes();
    const cplx* base = &alpha_prefix[static_cast<std::size_t>(step) * m2];
    for (int j = 0; j < m2; ++j) out[j] = base[j];
    const double a = grid.time(step);
    if (t == a) return;
    const double mid = 0.5 * (a + t), half = 0.5 * (t - a);
    std::vector<cplx> f(m2);
    for (int q = 0; q < 8; ++q) {
      const double x = mid + half * quad::gl8_nodes[q];
      const double w = half * quad::gl8_weights[q];
      force_at(step, x, f.data());
      const cplx miw(0.0, -w); // -i * weight
      for (int j = 0; j < m2; ++j) out[j] += miw * f[j];
    }
  }
};

} // namespace detail

/// Carrier phase Phi(t) = int_{t0}^t Omega cos(mu t' + psi) dt' at the given
/// times (each inside the gate interval).
inline std::vector<double> carrier_phase(const Pulse& pulse, const GateSpec& gate,
                                         std::span<const double> times,
                                         AnalyticsOptions opt = {}) {
  gate.validate();
  ModeData dummy;
  dummy.lamb_dicke_pair = Eigen::Matrix2Xd::Zero(2, 1);
  dummy.mode_freqs_radial = Eigen::VectorXd::Ones(1);
  detail::ForceKernel kern(pulse, dummy, gate, false, opt.samples_per_period);
  std::vector<double> out(times.size());
  for (std::size_t q = 0; q < times.size(); ++q) {
    const double t = times[q];
    if (t < gate.t0 || t > gate.tf + 1e-12 * gate.duration())
      throw DomainError("carrier_phase time outside gate interval");
    const int step = std::clamp((int)std::floor((t - gate.t0) / kern.grid.dt), 0,
                                kern.grid.n_steps - 1);
    out[q] = kern.phi_at(step, t);
  }
  return out;
}

struct ForcesRecord {
  std::vector<double> times;
  std::vector<cplx> f; // [(q * 2 + i) * n_modes + m]
  int n_modes = 0;
};

/// Spin-dependent forces f_im(t) (carrier_on: f = f0 cos 2Phi, else f0).
inline ForcesRecord forces(const Pulse& pulse, const ModeData& modes,
                           const GateSpec& gate, bool carrier_on,
                           std::span<const double> times, AnalyticsOptions opt = {}) {
  gate.validate();
  detail::ForceKernel kern(pulse, modes, gate, carrier_on, opt.samples_per_period);
  ForcesRecord rec;
  rec.n_modes = kern.n_modes();
  rec.times.assign(times.begin(), times.end());
  rec.f.resize(times.size() * 2 * rec.n_modes);
  for (std::size_t q = 0; q < times.size(); ++q) {
    const double t = times[q];
    const int step = std::clamp((int)std::floor((t - gate.t0) / kern.grid.dt), 0,
                                kern.grid.n_steps - 1);
    kern.force_at(step, t, &rec.f[q * 2 * rec.n_modes]);
  }
  return rec;
}

/**
 * Cumulative alpha and chi tables over the gate interval:
 *   alpha_im(t, t0) = -i int f_im
 *   chi_ij(t, t0)   = 2 Re int alpha_im f_jm^* (mode-summed),
 * with chi12 stored in the symmetrized sense (chi12 + chi21)/2 that equals
 * the accumulated spin-spin phase.
 */
inline TrajectoryRecord trajectories(const Pulse& pulse, const ModeData& modes,
                                     const GateSpec& gate, bool carrier_on,
                                     AnalyticsOptions opt = {}) {
  gate.validate();
  detail::ForceKernel kern(pulse, modes, gate, carrier_on, opt.samples_per_period);
  const int m_count = kern.n_modes();
  const int m2 = 2 * m_count;
  const int n_pts = kern.grid.n_points();

  TrajectoryRecord rec;
  rec.carrier_on = carrier_on;
  rec.n_modes = m_count;
  rec.times = kern.grid.times();
  rec.alpha.assign(static_cast<std::size_t>(n_pts) * m2, cplx(0.0));
  rec.chi11.assign(n_pts, 0.0);
  rec.chi12.assign(n_pts, 0.0);
  rec.chi22.assign(n_pts, 0.0);
  rec.phi_carrier = kern.phi_prefix;

  // alpha prefix: per-step Gauss panels accumulated with compensation
  kern.alpha_prefix.assign(static_cast<std::size_t>(n_pts) * m2, cplx(0.0));
  std::vector<quad::Kahan<cplx>> acc(m2);
  std::vector<cplx> f(m2);
  for (int k = 0; k < kern.grid.n_steps; ++k) {
    const double a = kern.grid.time(k), b = kern.grid.time(k + 1);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < 8; ++q) {
      const double x = mid + half * quad::gl8_nodes[q];
      const double w = half * quad::gl8_weights[q];
      kern.force_at(k, x, f.data());
      const cplx miw(0.0, -w);
      for (int j = 0; j < m2; ++j) acc[j].add(miw * f[j]);
    }
    cplx* dst = &kern.alpha_prefix[static_cast<std::size_t>(k + 1) * m2];
    for (int j = 0; j < m2; ++j) dst[j] = acc[j].value();
  }
  rec.alpha = kern.alpha_prefix;

  // chi tables: integrands need alpha at interior Gauss nodes
  quad::Kahan<double> c11, c12, c22;
  std::vector<cplx> al(m2);
  for (int k = 0; k < kern.grid.n_steps; ++k) {
    const double a = kern.grid.time(k), b = kern.grid.time(k + 1);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < 8; ++q) {
      const double x = mid + half * quad::gl8_nodes[q];
      const double w = half * quad::gl8_weights[q];
      kern.force_at(k, x, f.data());
      kern.alpha_at(k, x, al.data());
      double i11 = 0, i12 = 0, i22 = 0;
      for (int m = 0; m < m_count; ++m) {
        const cplx a1 = al[m], a2 = al[m_count + m];
        const cplx f1 = f[m], f2 = f[m_count + m];
        i11 += 2.0 * (a1 * std::conj(f1)).real();
        i22 += 2.0 * (a2 * std::conj(f2)).real();
        i12 += (a1 * std::conj(f2) + a2 * std::conj(f1)).real();
      }
      c11.add(w * i11);
      c12.add(w * i12);
      c22.add(w * i22);
    }
    rec.chi11[k + 1] = c11.value();
    rec.chi12[k + 1] = c12.value();
    rec.chi22[k + 1] = c22.value();
  }
  return rec;
}

/// 1 - F0 for z-basis Pauli strings: sum |alpha_im(tf)|^2 + (phi - chi12)^2.
inline double infidelity_z(const TrajectoryRecord& traj, const GateSpec& gate) {
  const int last = traj.n_times() - 1;
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m) s += std::norm(traj.alpha_at(last, i, m));
  const double dchi = gate.phi_target - traj.chi12[last];
  return s + dchi * dchi;
}

/// Phonon-excitation probability for the x-string (s1, s2):
/// P_ph = sum_m |sum_i alpha_im s_i|^2.
inline double infidelity_x(const TrajectoryRecord& traj, int s1, int s2) {
  const int last = traj.n_times() - 1;
  double p = 0.0;
  for (int m = 0; m < traj.n_modes; ++m)
    p += std::norm(traj.string_alpha(last, m, s1, s2));
  return p;
}

// x-strings in fixed order (+l,+1), (+1,-1), (-1,+1), (-1,-1)
inline constexpr std::array<std::array<int, 2>, 4> x_strings = {
    {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

/**
 * 1 - F0 for an arbitrary x-basis superposition sum_s c_s |s>:
 * phonon term plus the variance of the string-dependent phase error.
 * Coefficients must be normalized.
 */
inline double infidelity_superposition(const TrajectoryRecord& traj, const GateSpec& gate,
                                       std::span<const cplx, 4> c) {
  double nrm = 0.0;
  for (const cplx& v : c) nrm += std::norm(v);
  if (std::abs(nrm - 1.0) > 1e-9)
    throw ConfigError("superposition coefficients must be normalized");

  const int last = traj.n_times() - 1;
  const double dchi = traj.chi12[last] - gate.phi_target;
  double ph = 0.0, mean = 0.0, meansq = 0.0;
  for (int x = 0; x < 4; ++x) {
    const auto [s1, s2] = x_strings[x];
    const double w = std::norm(c[x]);
    double px = 0.0;
    for (int m = 0; m < traj.n_modes; ++m)
      px += std::norm(traj.string_alpha(last, m, s1, s2));
    ph += w * px;
    const double d = 2.0 * dchi * (s1 * s2); // s^T dchi s
    mean += w * d;
    meansq += w * d * d;
  }
  return ph + 0.25 * (meansq - mean * mean);
}

/// Upper bound on the infidelity averaged over initial qubit states:
/// sum |alpha|^2 + (4/5) dchi^2 + (1/4) sum_s P_flip^s.
inline double average_infidelity_bound(const TrajectoryRecord& traj, const GateSpec& gate,
                                       std::span<const double, 4> p_flip) {
  const int last = traj.n_times() - 1;
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m) s += std::norm(traj.alpha_at(last, i, m));
  const double dchi = gate.phi_target - traj.chi12[last];
  double flips = 0.0;
  for (double p : p_flip) flips += p;
  return s + 0.8 * dchi * dchi + 0.25 * flips;
}

// ---------------------------------------------------------------------------
// Vacuum matrix elements of displacement-operator sandwiches. Vectors hold
// one amplitude per mode. beta = 1 tags an annihilation operator, beta = 2 a
// creation operator, matching the V^beta decomposition of the perturbation.
// ---------------------------------------------------------------------------

inline cplx sumdot(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  cplx s = 0.0;
  for (int m = 0; m < a.size(); ++m) s += a[m] * std::conj(b[m]);
  return s;
}

/// <0| D†(a1) D(a2) D(a3) |0>
inline cplx displacement_vacuum_overlap(const Eigen::VectorXcd& a1,
                                        const Eigen::VectorXcd& a2,
                                        const Eigen::VectorXcd& a3) {
  const double im = (sumdot(a1, a2) + sumdot(a1, a3) - sumdot(a2, a3)).imag();
  const double n2 = (a1 - a2 - a3).squaredNorm();
  return std::polar(std::exp(-0.5 * n2), -im);
}

/// <0| D†(a1) A^{b1}_{m1} D(a2) A^{b2}_{m2} D(a3) |0>
inline cplx displacement_ladder_element(int beta1, int m1, int beta2, int m2,
                                        const Eigen::VectorXcd& a1,
                                        const Eigen::VectorXcd& a2,
                                        const Eigen::VectorXcd& a3) {
  const cplx g = displacement_vacuum_overlap(a1, a2, a3);
  if (beta1 == 1 && beta2 == 1) return g * (a2[m1] + a3[m1]) * a3[m2];
  if (beta1 == 1 && beta2 == 2)
    return g * ((m1 == m2 ? 1.0 : 0.0) +
                std::conj(a1[m2] - a2[m2]) * (a2[m1] + a3[m1]));
  if (beta1 == 2 && beta2 == 1) return g * std::conj(a1[m1]) * a3[m2];
  return g * std::conj(a1[m1]) * std::conj(a1[m2] - a2[m2]);
}

struct SpinFlipOptions {
  int samples_per_period = 160;
  bool convergence_check = true;
  double clamp_warn_threshold = 1e-12;
};

struct SpinFlipResult {
  double value = 0.0;
  bool clamped = false;             // negative quadrature noise was clipped
  bool convergence_warning = false; // >10% change under grid refinement
  double coarse_value = 0.0;        // value at half density (when checked)
};

namespace detail {

inline double spin_flip_once(const Pulse& pulse, const ModeData& modes,
                             const GateSpec& gate, int s1, int s2,
                             int samples_per_period) {
  detail::ForceKernel kern(pulse, modes, gate, true, samples_per_period);
  const int m_count = kern.n_modes();
  const int n_pts = kern.grid.n_points();
  TrajectoryRecord traj =
      trajectories(pulse, modes, gate, true, {samples_per_period});

  // grid tables
  std::vector<double> w(n_pts);      // Omega cos(mu t + psi) sin 2Phi
  std::vector<cplx> e(n_pts * m_count); // e^{i w_m t}
  for (int k = 0; k < n_pts; ++k) {
    const double t = kern.grid.time(k);
    w[k] = kern.omega_c(t) * std::sin(2.0 * traj.phi_carrier[k]);
    for (int m = 0; m < m_count; ++m)
      e[k * m_count + m] = std::polar(1.0, kern.omega[m] * t);
  }

  // conditioned displacements and phases for the initial string and both
  // single-flip strings
  const std::array<std::array<int, 2>, 3> strings = {
      {{s1, s2}, {-s1, s2}, {s1, -s2}}};
  std::vector<cplx> as(3 * n_pts * m_count);
  std::vector<double> chi(3 * n_pts);
  for (int x = 0; x < 3; ++x)
    for (int k = 0; k < n_pts; ++k) {
      chi[x * n_pts + k] = traj.string_chi(k, strings[x][0], strings[x][1]);
      for (int m = 0; m < m_count; ++m)
        as[(x * n_pts + k) * m_count + m] =
            traj.string_alpha(k, m, strings[x][0], strings[x][1]);
    }

  // trapezoid weights
  std::vector<double> tw(n_pts, kern.grid.dt);
  tw.front() *= 0.5;
  tw.back() *= 0.5;

  const auto& eta = kern.eta;
  double total = 0.0;
  std::vector<cplx> d2(m_count);

  for (int flip = 0; flip < 2; ++flip) {
    const int xs = 1 + flip; // flipped string index in `strings`
    quad::Kahan<double> acc;
    for (int a = 0; a < n_pts; ++a) {
      const cplx* as_a = &as[(0 * n_pts + a) * m_count];
      const cplx* asp_a = &as[(xs * n_pts + a) * m_count];
      const cplx* e_a = &e[a * m_count];
      for (int b = 0; b <= a; ++b) {
        const cplx* as_b = &as[(0 * n_pts + b) * m_count];
        const cplx* asp_b = &as[(xs * n_pts + b) * m_count];
        const cplx* e_b = &e[b * m_count];

        // alpha vectors of the three-displacement sandwich
        // a1 = as_a, a2 = asp_a - asp_b, a3 = as_b
        double im = 0.0, n2 = 0.0;
        cplx l1 = 0.0, l2c = 0.0, r1 = 0.0, r2c = 0.0, dd = 0.0;
        for (int m = 0; m < m_count; ++m) {
          const cplx a1 = as_a[m];
          const cplx a2 = asp_a[m] - asp_b[m];
          const cplx a3 = as_b[m];
          im += (a1 * std::conj(a2) + a1 * std::conj(a3) - a2 * std::conj(a3)).imag();
          n2 += std::norm(a1 - a2 - a3);
          const double et = eta(flip, m);
          const cplx va = et * std::conj(e_a[m]); // V1 at t_a / w_a
          const cplx vb = et * std::conj(e_b[m]);
          l1 += va * (a2 + a3);
          l2c += va * a1;          // L2 = conj(l2c) * w_a
          r1 += vb * a3;
          r2c += vb * (a1 - a2);   // R2 = conj(r2c) * w_b
          dd += va * std::conj(vb);
        }
        const double chi_ss = chi[0 * n_pts + a] - chi[0 * n_pts + b];
        const double chi_sp = chi[xs * n_pts + a] - chi[xs * n_pts + b];
        double cross = 0.0;
        for (int m = 0; m < m_count; ++m)
          cross += (asp_b[m] * std::conj(asp_a[m] - asp_b[m])).imag();
        const double chi_sp_ab = chi_sp - cross; // chi_{s'}(t_a, t_b)
        const double phase = chi_ss - chi_sp_ab - im;

        const cplx kern_val = std::polar(std::exp(-0.5 * n2), phase) *
                              (w[a] * w[b]) *
                              ((l1 + std::conj(l2c)) * (r1 + std::conj(r2c)) + dd);
        const double contrib = (b == a)
                                   ? tw[a] * tw[b] * kern_val.real()
                                   : 2.0 * tw[a] * tw[b] * kern_val.real();
        acc.add(contrib);
      }
    }
    total += acc.value();
  }
  return total;
}

} // namespace detail

/**
 * Probability of a single spin flip during the gate for the initial state
 * |s1 s2>_x |0_ph>, from the first-order perturbation by the sin(2 Phi)
 * sigma_z part of the carrier-transformed Hamiltonian, evaluated as a
 * two-dimensional time integral over the time-ordered half plus its
 * Hermitian mirror.
 */
inline SpinFlipResult spin_flip_probability(const Pulse& pulse, const ModeData& modes,
                                            const GateSpec& gate, int s1, int s2,
                                            SpinFlipOptions opt = {}) {
  gate.validate();
  SpinFlipResult res;
  res.value = detail::spin_flip_once(pulse, modes, gate, s1, s2, opt.samples_per_period);
  if (opt.convergence_check) {
    res.coarse_value = detail::spin_flip_once(pulse, modes, gate, s1, s2,
                                              opt.samples_per_period / 2);
    const double scale = std::max(std::abs(res.value), 1e-300);
    if (std::abs(res.value - res.coarse_value) > 0.10 * scale)
      res.convergence_warning = true;
  }
  if (res.value < 0.0) {
    if (res.value < -opt.clamp_warn_threshold) res.clamped = true;
    res.value = 0.0;
  }
  return res;
}

} // namespace mspulse
