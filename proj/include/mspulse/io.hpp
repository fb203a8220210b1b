#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mspulse/errors.hpp"
#include "mspulse/gate_analytics.hpp"
#include "mspulse/ion_chain.hpp"
#include "mspulse/pulse_solver.hpp"
#include "mspulse/scan.hpp"
#include "mspulse/spline.hpp"
#include "mspulse/tdse.hpp"
#include "mspulse/version.hpp"

namespace mspulse::io {

using nlohmann::json;

// shortest-roundtrip formatting for reproducible text output
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("failed to parse " + path + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
}

namespace detail {

inline double require_number(const json& j, const std::string& key,
                             std::initializer_list<const char*> aliases = {}) {
  if (j.contains(key)) return j.at(key).get<double>();
  for (const char* a : aliases)
    if (j.contains(a)) return j.at(a).get<double>();
  throw ConfigError("missing config field: " + key);
}

inline double optional_number(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

} // namespace detail

// --- chain / gate configs ---------------------------------------------------

inline ChainConfig parse_chain_config(const json& j) {
  ChainConfig c;
  c.n_ions = (int)detail::require_number(j, "n_ions");
  c.ion_mass = detail::require_number(j, "ion_mass");
  c.charge = detail::optional_number(j, "charge", constants::elementary_charge);
  c.axial_freq = detail::require_number(j, "axial_freq", {"axial_freq_hz"});
  c.radial_freq = detail::require_number(j, "radial_freq", {"radial_freq_hz"});
  c.wavevector_axial = detail::optional_number(j, "wavevector_axial", 0.0);
  c.wavevector_radial = detail::require_number(j, "wavevector_radial");
  if (!j.contains("illuminated_pair") || !j.at("illuminated_pair").is_array() ||
      j.at("illuminated_pair").size() != 2)
    throw ConfigError("missing config field: illuminated_pair (two indices)");
  c.illuminated_pair = {j.at("illuminated_pair")[0].get<int>(),
                        j.at("illuminated_pair")[1].get<int>()};
  c.validate();
  return c;
}

inline json to_json(const ChainConfig& c) {
  return json{{"n_ions", c.n_ions},
              {"ion_mass", c.ion_mass},
              {"charge", c.charge},
              {"axial_freq", c.axial_freq},
              {"radial_freq", c.radial_freq},
              {"wavevector_axial", c.wavevector_axial},
              {"wavevector_radial", c.wavevector_radial},
              {"illuminated_pair", c.illuminated_pair}};
}

// Frequencies: `mu` is angular (rad/s); `mu_hz` is accepted as the ordinary
// frequency. Angles in rad, times in s.
inline GateSpec parse_gate_spec(const json& j) {
  GateSpec g;
  if (j.contains("mu"))
    g.mu = j.at("mu").get<double>();
  else if (j.contains("mu_hz"))
    g.mu = 2.0 * constants::pi * j.at("mu_hz").get<double>();
  else
    throw ConfigError("missing config field: mu (rad/s) or mu_hz");
  g.psi = detail::optional_number(j, "psi", 0.0);
  g.phi_target = detail::optional_number(j, "phi_target", constants::pi / 4.0);
  g.t0 = detail::optional_number(j, "t0", 0.0);
  g.tf = detail::require_number(j, "tf");
  g.validate();
  return g;
}

inline json to_json(const GateSpec& g) {
  return json{{"mu", g.mu}, {"psi", g.psi}, {"phi_target", g.phi_target},
              {"t0", g.t0}, {"tf", g.tf}};
}

// --- pulses -----------------------------------------------------------------

inline json to_json(const Pulse& p) {
  json j{{"t0", p.t0()}, {"tf", p.tf()}, {"kind", to_string(p.kind())}};
  if (p.kind() == PulseKind::linear) {
    j["n_seg"] = p.n_seg();
    j["coefficients"] = std::vector<double>(
        p.coefficients().data(), p.coefficients().data() + p.coefficients().size());
  } else {
    // S^-1 of a cubic is not a cubic: transformed pulses are carried as a
    // dense uniform sampling
    j["n_samples"] = (int)p.samples().size();
    j["samples"] = std::vector<double>(p.samples().data(),
                                       p.samples().data() + p.samples().size());
  }
  return j;
}

inline Pulse parse_pulse(const json& j) {
  const double t0 = detail::require_number(j, "t0");
  const double tf = detail::require_number(j, "tf");
  const std::string kind = j.value("kind", "linear");
  if (kind == "linear") {
    const int n_seg = (int)detail::require_number(j, "n_seg");
    const auto coeffs = j.at("coefficients").get<std::vector<double>>();
    if ((int)coeffs.size() != n_seg)
      throw ConfigError("pulse coefficients length does not match n_seg");
    const SplineBasis basis(t0, tf, n_seg);
    return Pulse::from_spline(basis,
                              Eigen::Map<const Eigen::VectorXd>(coeffs.data(), n_seg));
  }
  const auto samples = j.at("samples").get<std::vector<double>>();
  const Eigen::Map<const Eigen::VectorXd> v(samples.data(), samples.size());
  return Pulse::from_samples(t0, tf, v,
                             kind == "transformed" ? PulseKind::transformed
                                                   : PulseKind::raw_samples);
}

inline std::string pulse_csv(const Pulse& p, int n_samples,
                             const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash + "\nt,omega\n";
  for (int i = 0; i <= n_samples; ++i) {
    const double t = p.t0() + (p.tf() - p.t0()) * i / n_samples;
    out += fmt(t) + "," + fmt(p(t)) + "\n";
  }
  return out;
}

// --- mode data --------------------------------------------------------------

inline json to_json(const ModeData& md) {
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows.emplace_back();
      for (Eigen::Index c = 0; c < m.cols(); ++c) rows.back().push_back(m(r, c));
    }
    return rows;
  };
  return json{{"positions", vec(md.positions)},
              {"mode_freqs_axial", vec(md.mode_freqs_axial)},
              {"mode_freqs_radial", vec(md.mode_freqs_radial)},
              {"mode_vectors_axial", mat(md.mode_vectors_axial)},
              {"mode_vectors_radial", mat(md.mode_vectors_radial)},
              {"lamb_dicke_axial", mat(md.lamb_dicke_axial)},
              {"lamb_dicke_full", mat(md.lamb_dicke_full)},
              {"lamb_dicke_pair", mat(md.lamb_dicke_pair)}};
}

// one row per mode: frequency then vector components
inline std::string modes_csv(const Eigen::VectorXd& freqs, const Eigen::MatrixXd& vecs,
                             const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash + "\nfreq_rad_s";
  for (Eigen::Index k = 0; k < vecs.rows(); ++k)
    out += ",b" + std::to_string(k);
  out += "\n";
  for (Eigen::Index m = 0; m < freqs.size(); ++m) {
    out += fmt(freqs[m]);
    for (Eigen::Index k = 0; k < vecs.rows(); ++k) out += "," + fmt(vecs(k, m));
    out += "\n";
  }
  return out;
}

// --- trajectories / fidelity breakdown ---------------------------------------

inline std::string trajectories_csv(const TrajectoryRecord& tr,
                                    const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash + "\nt";
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < tr.n_modes; ++m) {
      const std::string tag = std::to_string(i + 1) + "_" + std::to_string(m);
      out += ",re_alpha" + tag + ",im_alpha" + tag;
    }
  out += ",chi12,phi\n";
  for (int k = 0; k < tr.n_times(); ++k) {
    out += fmt(tr.times[k]);
    for (int i = 0; i < 2; ++i)
      for (int m = 0; m < tr.n_modes; ++m) {
        const cplx a = tr.alpha_at(k, i, m);
        out += "," + fmt(a.real()) + "," + fmt(a.imag());
      }
    out += "," + fmt(tr.chi12[k]) + "," + fmt(tr.phi_carrier[k]) + "\n";
  }
  return out;
}

/// Per-initial-state infidelity contributions of a pulse.
struct FidelityBreakdown {
  std::vector<double> alpha_residuals; // |alpha_im(tf)|^2, i major
  double chi_error = 0.0;              // phi - chi12(tf)
  double phi_final = 0.0;              // carrier phase at tf
  double inf_z = 0.0;                  // 1 - F0 for z strings
  std::array<double, 4> p_ph{};        // per x-string
  std::array<double, 4> p_flip{};
  std::array<double, 4> inf_x_tot{};   // P_ph + P_flip
  bool spin_flip_computed = false;
  bool spin_flip_warning = false;
  double avg_bound = 0.0;
  double triangle_bound = 0.0; // diagnostic lower bound on F_tot, worst string
};

inline FidelityBreakdown analyze_pulse(const Pulse& pulse, const ModeData& modes,
                                       const GateSpec& gate, bool with_spin_flip,
                                       AnalyticsOptions aopt = {},
                                       SpinFlipOptions sopt = {}) {
  FidelityBreakdown fb;
  const TrajectoryRecord traj = trajectories(pulse, modes, gate, true, aopt);
  const int last = traj.n_times() - 1;
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < traj.n_modes; ++m)
      fb.alpha_residuals.push_back(std::norm(traj.alpha_at(last, i, m)));
  fb.chi_error = gate.phi_target - traj.chi12[last];
  fb.phi_final = traj.phi_carrier[last];
  fb.inf_z = infidelity_z(traj, gate);
  for (int x = 0; x < 4; ++x) {
    const auto [s1, s2] = x_strings[x];
    fb.p_ph[x] = infidelity_x(traj, s1, s2);
    if (with_spin_flip) {
      const auto sf = spin_flip_probability(pulse, modes, gate, s1, s2, sopt);
      fb.p_flip[x] = sf.value;
      fb.spin_flip_warning |= sf.convergence_warning;
    }
    fb.inf_x_tot[x] = fb.p_ph[x] + fb.p_flip[x];
  }
  fb.spin_flip_computed = with_spin_flip;
  fb.avg_bound = average_infidelity_bound(
      traj, gate, std::span<const double, 4>(fb.p_flip.data(), 4));
  // triangle inequality F_tot > cos(arccos F0 + arccos Fc), worst x-string
  double worst = 1.0;
  for (int x = 0; x < 4; ++x) {
    const double f0 = std::clamp(1.0 - fb.p_ph[x], 0.0, 1.0);
    const double fc = std::clamp(1.0 - fb.p_flip[x], 0.0, 1.0);
    worst = std::min(worst, std::cos(std::acos(f0) + std::acos(fc)));
  }
  fb.triangle_bound = worst;
  return fb;
}

inline json to_json(const FidelityBreakdown& fb) {
  const std::array<const char*, 4> names = {"pp", "pm", "mp", "mm"};
  json jx;
  for (int x = 0; x < 4; ++x) {
    jx[names[x]] = json{{"P_ph", fb.p_ph[x]},
                        {"P_flip", fb.p_flip[x]},
                        {"1-F_tot", fb.inf_x_tot[x]},
                        {"F_tot", 1.0 - fb.inf_x_tot[x]}};
  }
  return json{{"alpha_residuals", fb.alpha_residuals},
              {"chi_error", fb.chi_error},
              {"phi_carrier_final", fb.phi_final},
              {"infidelity_z", fb.inf_z},
              {"F0_z", 1.0 - fb.inf_z},
              {"x_strings", jx},
              {"spin_flip_computed", fb.spin_flip_computed},
              {"spin_flip_convergence_warning", fb.spin_flip_warning},
              {"average_infidelity_bound", fb.avg_bound},
              {"triangle_bound_diagnostic", fb.triangle_bound}};
}

// --- scan -------------------------------------------------------------------

inline std::string scan_csv(const ScanResult& res, const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash +
                    "\nt_gate,mu,feasible,allowed,inf_lin,inf_tr,max_omega_ratio\n";
  for (std::size_t it = 0; it < res.t_gate.size(); ++it)
    for (std::size_t imu = 0; imu < res.mu.size(); ++imu) {
      const ScanCell& c = res.cells[it * res.mu.size() + imu];
      out += fmt(c.t_gate) + "," + fmt(c.mu) + "," + (c.feasible ? "1" : "0") + "," +
             (c.allowed ? "1" : "0") + "," + fmt(c.inf_lin) + "," + fmt(c.inf_tr) +
             "," + fmt(c.max_omega_ratio) + "\n";
    }
  return out;
}

inline json scan_summary_json(const ScanResult& res) {
  int n_feasible = 0, n_allowed = 0;
  for (const auto& c : res.cells) {
    n_feasible += c.feasible;
    n_allowed += c.allowed;
  }
  // allowed-area boundary: earliest allowed gate time per detuning column
  json edge = json::array();
  for (std::size_t imu = 0; imu < res.mu.size(); ++imu) {
    double t_edge = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t it = 0; it < res.t_gate.size(); ++it)
      if (res.cells[it * res.mu.size() + imu].allowed) {
        t_edge = res.t_gate[it];
        break;
      }
    edge.push_back({res.mu[imu], t_edge});
  }
  return json{{"transform_constant", res.transform_constant},
              {"threshold", res.threshold},
              {"t_min", res.t_min},
              {"t_min_star", res.t_min_star},
              {"n_cells", res.cells.size()},
              {"n_feasible", n_feasible},
              {"n_allowed", n_allowed},
              {"t_gate_range", {res.t_gate.front(), res.t_gate.back()}},
              {"mu_range", {res.mu.front(), res.mu.back()}},
              {"allowed_edge", edge}};
}

// --- sim result / state dump --------------------------------------------------

inline json to_json(const SimResult& r, bool include_state = false) {
  json j{{"fidelity_vs_target", r.fidelity_vs_target},
         {"infidelity", 1.0 - r.fidelity_vs_target},
         {"phonon_excitation_prob", r.phonon_excitation_prob},
         {"spin_flip_prob", r.spin_flip_prob},
         {"norm_drift", r.norm_drift},
         {"n_steps", r.n_steps},
         {"step_check_delta", r.step_check_delta}};
  if (include_state) {
    std::vector<double> re, im;
    for (const cplx& z : r.final_state) {
      re.push_back(z.real());
      im.push_back(z.imag());
    }
    j["state_re"] = re;
    j["state_im"] = im;
  }
  return j;
}

// Little-endian state dump: 8-byte magic, u32 version, u32 total_dim, then
// total_dim (re, im) float64 pairs.
inline constexpr char state_dump_magic[8] = {'M', 'S', 'P', 'S', 'T', 'A', 'T', 'E'};

inline void write_state_dump(const std::string& path, const cvec& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out.write(state_dump_magic, 8);
  const std::uint32_t version = 1, dim = (std::uint32_t)state.size();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (const cplx& z : state) {
    const double re = z.real(), im = z.imag();
    out.write(reinterpret_cast<const char*>(&re), 8);
    out.write(reinterpret_cast<const char*>(&im), 8);
  }
}

inline cvec read_state_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, state_dump_magic, 8) != 0)
    throw ConfigError("not a state dump file: " + path);
  std::uint32_t version = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (version != 1) throw ConfigError("unsupported state dump version");
  cvec state(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    double re = 0, im = 0;
    in.read(reinterpret_cast<char*>(&re), 8);
    in.read(reinterpret_cast<char*>(&im), 8);
    state[i] = {re, im};
  }
  if (!in) throw ConfigError("truncated state dump: " + path);
  return state;
}

// --- run manifest -------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/**
 * Resolved-parameter record written next to every command's outputs. The hash
 * covers everything except the wall-clock timestamp, so identical inputs give
 * identical hashes and byte-identical primary outputs.
 */
struct RunManifest {
  json resolved;

  static RunManifest make(const std::string& command,
                          const std::vector<std::string>& config_paths,
                          json resolved_params) {
    RunManifest m;
    m.resolved = json{{"tool", "mspulse"},
                      {"version", version_string},
                      {"command", command},
                      {"config_paths", config_paths},
                      {"resolved", std::move(resolved_params)},
                      {"deterministic", true}};
    return m;
  }

  std::string hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)fnv1a64(resolved.dump()));
    return buf;
  }

  json with_timestamp(const std::string& utc) const {
    json j = resolved;
    j["manifest_hash"] = hash();
    j["created_utc"] = utc;
    return j;
  }
};

} // namespace mspulse::io
