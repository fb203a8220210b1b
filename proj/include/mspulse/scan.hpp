#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "mspulse/gate_analytics.hpp"
#include "mspulse/ion_chain.hpp"
#include "mspulse/pulse_solver.hpp"
#include "mspulse/transform.hpp"

namespace mspulse {

struct ScanGridSpec {
  std::vector<double> t_gate;  // s
  std::vector<double> mu;      // rad/s
  int n_seg = 0;               // 0: default_segments(n_ions)
  double infidelity_threshold = 1e-5;
  int samples_per_period = 40;
  int threads = 0;             // 0: hardware concurrency

  static std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i)
      v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
  }
};

struct ScanCell {
  double t_gate = 0.0, mu = 0.0;
  bool feasible = false; // closure nullspace exists and phase is reachable
  bool allowed = false;  // max |Omega_lin| <= C mu
  double inf_lin = std::numeric_limits<double>::quiet_NaN();
  double inf_tr = std::numeric_limits<double>::quiet_NaN();
  double max_omega_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct ScanResult {
  std::vector<double> t_gate, mu;
  double transform_constant = 0.0; // C, maximized per run
  std::vector<ScanCell> cells;     // row-major: it * n_mu + imu
  double t_min = std::numeric_limits<double>::quiet_NaN();       // earliest allowed
  double t_min_star = std::numeric_limits<double>::quiet_NaN();  // earliest inf_tr <= threshold
  double threshold = 0.0;

  const ScanCell& cell(int it, int imu) const { return cells[it * mu.size() + imu]; }
};

/// One grid cell of the design pipeline: solve -> allowed test -> transform ->
/// carrier-on trajectories -> leading-order infidelity for |11>_z.
inline ScanCell scan_cell(const ModeData& modes, const GateSpec& templ, double t_gate,
                          double mu, int n_seg, int samples_per_period) {
  ScanCell cell;
  cell.t_gate = t_gate;
  cell.mu = mu;
  GateSpec gate = templ;
  gate.mu = mu;
  gate.tf = gate.t0 + t_gate;
  const SplineBasis basis(gate.t0, gate.tf, n_seg);
  try {
    const auto a = assemble_A(basis, modes, gate, samples_per_period);
    const auto b = assemble_B(basis, modes, gate, samples_per_period);
    const auto solved = solve_linear_pulse(a, b, gate, basis);
    cell.feasible = true;
    const double cmu = transform_peak().c_max * mu;
    cell.max_omega_ratio = solved.diag.max_abs_omega / cmu;
    cell.allowed = cell.max_omega_ratio <= 1.0;
    cell.inf_lin =
        infidelity_z(trajectories(solved.pulse, modes, gate, true,
                                  {samples_per_period}),
                     gate);
    if (cell.allowed) {
      const auto tr = inverse_transform(solved.pulse, mu, samples_per_period);
      cell.inf_tr = infidelity_z(
          trajectories(tr.pulse, modes, gate, true, {samples_per_period}), gate);
    }
  } catch (const Error&) {
    cell.feasible = false;
  }
  return cell;
}

/**
 * Sweeps the (t_gate, mu) grid. Cells are independent work items; the result
 * is bit-identical for any worker count because every cell is computed in
 * isolation and written to its own slot.
 */
inline ScanResult scan_grid(const ModeData& modes, const GateSpec& templ,
                            const ScanGridSpec& spec) {
  ScanResult res;
  res.t_gate = spec.t_gate;
  res.mu = spec.mu;
  res.transform_constant = transform_peak().c_max;
  res.threshold = spec.infidelity_threshold;
  const int n_seg = spec.n_seg > 0
                        ? spec.n_seg
                        : default_segments(static_cast<int>(modes.positions.size()));
  res.cells.resize(spec.t_gate.size() * spec.mu.size());

  const int n_threads = spec.threads > 0
                            ? spec.threads
                            : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= res.cells.size()) break;
      const std::size_t it = idx / spec.mu.size();
      const std::size_t imu = idx % spec.mu.size();
      res.cells[idx] = scan_cell(modes, templ, spec.t_gate[it], spec.mu[imu], n_seg,
                                 spec.samples_per_period);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // summary: earliest gate times
  for (std::size_t it = 0; it < spec.t_gate.size(); ++it) {
    bool any_allowed = false, any_good = false;
    for (std::size_t imu = 0; imu < spec.mu.size(); ++imu) {
      const ScanCell& c = res.cells[it * spec.mu.size() + imu];
      any_allowed |= c.allowed;
      any_good |= c.allowed && c.inf_tr <= spec.infidelity_threshold;
    }
    if (any_allowed && std::isnan(res.t_min)) res.t_min = spec.t_gate[it];
    if (any_good && std::isnan(res.t_min_star)) res.t_min_star = spec.t_gate[it];
  }
  return res;
}

// --- chain-length studies ---------------------------------------------------

/**
 * Axial frequency that places the lowest radial mode at `target_lowest_hz`
 * for an n-ion chain at fixed radial frequency. The scaled Coulomb Hessian
 * depends only on n, so the retuning is a closed-form rescaling.
 */
inline double retune_axial_freq(const ChainConfig& base, int n_ions,
                                double target_lowest_hz) {
  ChainConfig probe = base;
  probe.n_ions = n_ions;
  probe.illuminated_pair = {0, 1};
  probe.axial_freq = base.radial_freq / 10.0; // any valid value; c_n is scale-free
  const Eigen::VectorXd pos = equilibrium_positions(probe);
  const Eigen::VectorXd u = pos / probe.length_scale();
  const Eigen::MatrixXd g = detail::coulomb_hessian(u);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const double c_n = es.eigenvalues().maxCoeff();
  const double fr = base.radial_freq;
  const double fl = target_lowest_hz;
  if (fl >= fr) throw ConfigError("target lowest radial mode must be below radial_freq");
  return std::sqrt((fr * fr - fl * fl) / c_n);
}

struct MinGateTimes {
  int n_ions = 0;
  double axial_freq = 0.0;
  double t_min = std::numeric_limits<double>::quiet_NaN();
  double t_min_star = std::numeric_limits<double>::quiet_NaN();
};

/**
 * Minimal gate durations versus chain length: for each n the trap is retuned
 * so the radial band spans (target_lowest, radial_freq), the central ion pair
 * is driven, and the (t_gate, mu) grid is scanned for the earliest allowed
 * time and the earliest time reaching the infidelity threshold.
 */
inline std::vector<MinGateTimes> min_gate_times(const ChainConfig& base,
                                                const GateSpec& templ,
                                                const std::vector<int>& n_ions_list,
                                                ScanGridSpec spec,
                                                double target_lowest_hz = 0.75e6) {
  std::vector<MinGateTimes> out;
  for (int n : n_ions_list) {
    ChainConfig cfg = base;
    cfg.n_ions = n;
    cfg.axial_freq = retune_axial_freq(base, n, target_lowest_hz);
    cfg.illuminated_pair = {n / 2 - 1, n / 2};
    const ModeData modes = compute_modes(cfg);
    ScanGridSpec s = spec;
    s.n_seg = default_segments(n);
    const ScanResult res = scan_grid(modes, templ, s);
    out.push_back({n, cfg.axial_freq, res.t_min, res.t_min_star});
  }
  return out;
}

struct SpinFlipPoint {
  double t_gate = 0.0, mu = 0.0;
  double p_flip = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

/// Spin-flip probability of the transformed pulse for |1,1>_x at selected
/// (t_gate, mu) points inside the allowed area.
inline std::vector<SpinFlipPoint> spin_flip_points(
    const ModeData& modes, const GateSpec& templ,
    const std::vector<std::pair<double, double>>& points, int n_seg,
    SpinFlipOptions opt = {}) {
  std::vector<SpinFlipPoint> out;
  for (const auto& [t_gate, mu] : points) {
    SpinFlipPoint pt;
    pt.t_gate = t_gate;
    pt.mu = mu;
    GateSpec gate = templ;
    gate.mu = mu;
    gate.tf = gate.t0 + t_gate;
    try {
      const SplineBasis basis(gate.t0, gate.tf, n_seg);
      const auto a = assemble_A(basis, modes, gate);
      const auto b = assemble_B(basis, modes, gate);
      const auto solved = solve_linear_pulse(a, b, gate, basis);
      const auto tr = inverse_transform(solved.pulse, mu);
      pt.p_flip = spin_flip_probability(tr.pulse, modes, gate, 1, 1, opt).value;
      pt.valid = true;
    } catch (const Error&) {
      pt.valid = false;
    }
    out.push_back(pt);
  }
  return out;
}

} // namespace mspulse
