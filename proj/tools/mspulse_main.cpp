// Command-line front end: modes / design / analyze / simulate / scan.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mspulse/mspulse.hpp"

namespace fs = std::filesystem;
using namespace mspulse;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  io::write_text_file(path.string(), j.dump(2) + "\n");
}

struct CommonOut {
  std::string out_dir = ".";
  fs::path dir() const {
    fs::path d(out_dir);
    fs::create_directories(d);
    return d;
  }
};

void emit_manifest(const io::RunManifest& man, const fs::path& dir) {
  write_json(dir / "manifest.json", man.with_timestamp(utc_now()));
}

std::vector<int> parse_cutoffs(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Carrier-compensated Molmer-Sorensen pulse design for ion chains"};
  app.require_subcommand(1);

  std::string chain_path, gate_path, pulse_path, grid_path;
  CommonOut out;
  int threads = (int)std::thread::hardware_concurrency();

  // ---- modes ----
  auto* cmd_modes = app.add_subcommand("modes", "Equilibrium positions, normal modes, Lamb-Dicke matrices");
  cmd_modes->add_option("--chain", chain_path, "chain config JSON")->required();
  cmd_modes->add_option("--out-dir", out.out_dir, "output directory");

  // ---- design ----
  auto* cmd_design = app.add_subcommand("design", "Solve the gate conditions and apply the carrier compensation");
  int segments = 0, csv_samples = 2000, spp = 40;
  bool do_transform = true;
  cmd_design->add_option("--chain", chain_path)->required();
  cmd_design->add_option("--gate", gate_path)->required();
  cmd_design->add_option("--segments", segments, "free spline parameters (default 2 n_ions + 1)");
  cmd_design->add_flag("--transform,!--no-transform", do_transform,
                       "apply the inverse carrier transform (default on)");
  cmd_design->add_option("--csv-samples", csv_samples, "rows in the sampled pulse CSV");
  cmd_design->add_option("--samples-per-period", spp, "quadrature/sampling density");
  cmd_design->add_option("--out-dir", out.out_dir);

  // ---- analyze ----
  auto* cmd_analyze = app.add_subcommand("analyze", "Closed-form fidelity breakdown for a pulse");
  std::string traj_csv;
  bool no_spin_flip = false;
  int spp_analyze = 40, spp_flip = 160;
  cmd_analyze->add_option("--chain", chain_path)->required();
  cmd_analyze->add_option("--gate", gate_path)->required();
  cmd_analyze->add_option("--pulse", pulse_path)->required();
  cmd_analyze->add_option("--trajectories", traj_csv, "dump (t, alpha, chi12, Phi) CSV");
  cmd_analyze->add_flag("--no-spin-flip", no_spin_flip, "skip the perturbative spin-flip integral");
  cmd_analyze->add_option("--samples-per-period", spp_analyze);
  cmd_analyze->add_option("--spin-flip-samples-per-period", spp_flip);
  cmd_analyze->add_option("--out-dir", out.out_dir);

  // ---- simulate ----
  auto* cmd_sim = app.add_subcommand("simulate", "Direct Schrodinger simulation on a truncated Fock space");
  std::string hamiltonian = "full", state = "11z", cutoffs_str, dump_path;
  double steps_per_period = 200;
  bool no_step_check = false;
  cmd_sim->add_option("--chain", chain_path)->required();
  cmd_sim->add_option("--gate", gate_path)->required();
  cmd_sim->add_option("--pulse", pulse_path)->required();
  cmd_sim->add_option("--hamiltonian", hamiltonian, "full | ld");
  cmd_sim->add_option("--state", state, "11z | 11x | 1m1x | <custom.json>");
  cmd_sim->add_option("--cutoffs", cutoffs_str, "per-mode Fock cutoffs, ascending mode order");
  cmd_sim->add_option("--steps-per-period", steps_per_period);
  cmd_sim->add_flag("--no-step-check", no_step_check, "skip the step-halving verification");
  cmd_sim->add_option("--dump-state", dump_path, "write the final state (binary)");
  cmd_sim->add_option("--threads", threads);
  cmd_sim->add_option("--out-dir", out.out_dir);

  // ---- scan ----
  auto* cmd_scan = app.add_subcommand("scan", "Sweep the (t_gate, mu) plane; allowed areas and infidelity maps");
  cmd_scan->add_option("--chain", chain_path)->required();
  cmd_scan->add_option("--gate", gate_path, "gate template (psi, phi_target)")->required();
  cmd_scan->add_option("--grid", grid_path, "grid spec JSON")->required();
  cmd_scan->add_option("--threads", threads);
  cmd_scan->add_option("--out-dir", out.out_dir);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(cmd_modes)) {
    const json jc = io::load_json_file(chain_path);
    const ChainConfig cfg = io::parse_chain_config(jc);
    const ModeData md = compute_modes(cfg);
    auto man = io::RunManifest::make("modes", {chain_path}, io::to_json(cfg));
    const auto dir = out.dir();
    json jm = io::to_json(md);
    jm["manifest_hash"] = man.hash();
    write_json(dir / "modes.json", jm);
    io::write_text_file((dir / "modes_radial.csv").string(),
                        io::modes_csv(md.mode_freqs_radial, md.mode_vectors_radial, man.hash()));
    io::write_text_file((dir / "modes_axial.csv").string(),
                        io::modes_csv(md.mode_freqs_axial, md.mode_vectors_axial, man.hash()));
    emit_manifest(man, dir);
    std::cout << "modes: lowest radial mode " << io::fmt(md.mode_freqs_radial[0] / (2 * constants::pi))
              << " Hz\n";
    return 0;
  }

  if (app.got_subcommand(cmd_design)) {
    const ChainConfig cfg = io::parse_chain_config(io::load_json_file(chain_path));
    const GateSpec gate = io::parse_gate_spec(io::load_json_file(gate_path));
    const ModeData md = compute_modes(cfg);
    const int n_seg = segments > 0 ? segments : default_segments(cfg.n_ions);
    const SplineBasis basis(gate.t0, gate.tf, n_seg);

    json params = {{"chain", io::to_json(cfg)}, {"gate", io::to_json(gate)},
                   {"segments", n_seg}, {"transform", do_transform},
                   {"samples_per_period", spp}};
    auto man = io::RunManifest::make("design", {chain_path, gate_path}, params);
    const auto dir = out.dir();

    const auto a = assemble_A(basis, md, gate, spp);
    const auto b = assemble_B(basis, md, gate, spp);
    const auto solved = solve_linear_pulse(a, b, gate, basis);

    json jlin = io::to_json(solved.pulse);
    jlin["manifest_hash"] = man.hash();
    write_json(dir / "pulse_lin.json", jlin);
    io::write_text_file((dir / "pulse_lin.csv").string(),
                        io::pulse_csv(solved.pulse, csv_samples, man.hash()));

    const double cmu = transform_peak().c_max * gate.mu;
    json report = {{"nullspace_dim", solved.diag.nullspace_dim},
                   {"sigma_min", solved.diag.sigma_min},
                   {"residual_inf", solved.diag.residual_inf},
                   {"chi_residual", solved.diag.chi_residual},
                   {"max_abs_omega", solved.diag.max_abs_omega},
                   {"max_omega_ratio", solved.diag.max_abs_omega / cmu},
                   {"sign_changes", solved.diag.sign_changes},
                   {"transform_constant", transform_peak().c_max},
                   {"manifest_hash", man.hash()}};

    if (do_transform) {
      const auto tr = inverse_transform(solved.pulse, gate.mu, spp);
      json jtr = io::to_json(tr.pulse);
      jtr["manifest_hash"] = man.hash();
      write_json(dir / "pulse_tr.json", jtr);
      io::write_text_file((dir / "pulse_tr.csv").string(),
                          io::pulse_csv(tr.pulse, csv_samples, man.hash()));
      report["transform_max_ratio"] = tr.max_ratio;
    }
    write_json(dir / "residual_report.json", report);
    emit_manifest(man, dir);
    std::cout << "design: nullspace dim " << solved.diag.nullspace_dim
              << ", max|Omega|/(C mu) = " << io::fmt(solved.diag.max_abs_omega / cmu) << "\n";
    return 0;
  }

  if (app.got_subcommand(cmd_analyze)) {
    const ChainConfig cfg = io::parse_chain_config(io::load_json_file(chain_path));
    const GateSpec gate = io::parse_gate_spec(io::load_json_file(gate_path));
    const Pulse pulse = io::parse_pulse(io::load_json_file(pulse_path));
    const ModeData md = compute_modes(cfg);

    json params = {{"chain", io::to_json(cfg)}, {"gate", io::to_json(gate)},
                   {"pulse", io::to_json(pulse)}, {"spin_flip", !no_spin_flip}};
    auto man = io::RunManifest::make("analyze", {chain_path, gate_path, pulse_path}, params);
    const auto dir = out.dir();

    const auto fb = io::analyze_pulse(pulse, md, gate, !no_spin_flip, {spp_analyze},
                                      {spp_flip, true, 1e-12});
    json jb = io::to_json(fb);
    jb["manifest_hash"] = man.hash();
    write_json(dir / "breakdown.json", jb);
    if (!traj_csv.empty()) {
      const auto traj = trajectories(pulse, md, gate, true, {spp_analyze});
      io::write_text_file((dir / traj_csv).string(), io::trajectories_csv(traj, man.hash()));
    }
    emit_manifest(man, dir);
    std::cout << "analyze: 1-F0(z) = " << io::fmt(fb.inf_z) << "\n";
    return 0;
  }

  if (app.got_subcommand(cmd_sim)) {
    const ChainConfig cfg = io::parse_chain_config(io::load_json_file(chain_path));
    const GateSpec gate = io::parse_gate_spec(io::load_json_file(gate_path));
    const Pulse pulse = io::parse_pulse(io::load_json_file(pulse_path));
    const ModeData md = compute_modes(cfg);

    const HamiltonianKind kind =
        hamiltonian == "full" ? HamiltonianKind::full
        : (hamiltonian == "ld" || hamiltonian == "LD")
            ? HamiltonianKind::lamb_dicke
            : throw ConfigError("unknown --hamiltonian (use full or ld)");

    InitialState st;
    if (state == "11z")
      st = InitialState::z_string_state(1, 1);
    else if (state == "11x")
      st = InitialState::x_string_state(1, 1);
    else if (state == "1m1x")
      st = InitialState::x_string_state(1, -1);
    else {
      const json js = io::load_json_file(state);
      Eigen::Vector4cd amps;
      const auto re = js.at("re").get<std::vector<double>>();
      const auto im = js.at("im").get<std::vector<double>>();
      if (re.size() != 4 || im.size() != 4)
        throw ConfigError("custom state needs 4 re and 4 im amplitudes");
      for (int q = 0; q < 4; ++q) amps[q] = cplx(re[q], im[q]);
      st = InitialState::custom_state(amps);
    }

    std::vector<int> cutoffs;
    if (!cutoffs_str.empty()) cutoffs = parse_cutoffs(cutoffs_str);
    const SimSpace space = SimSpace::build(md, cutoffs);

    json params = {{"chain", io::to_json(cfg)},   {"gate", io::to_json(gate)},
                   {"pulse", io::to_json(pulse)}, {"hamiltonian", hamiltonian},
                   {"state", state},              {"cutoffs", space.cutoffs},
                   {"steps_per_period", steps_per_period},
                   {"step_check", !no_step_check}};
    auto man = io::RunManifest::make("simulate", {chain_path, gate_path, pulse_path}, params);
    const auto dir = out.dir();

    PropagateOptions popt;
    popt.steps_per_period = steps_per_period;
    popt.verify_halving = !no_step_check;
    popt.threads = threads;
    const SimResult res = propagate(space, kind, pulse, gate, st, popt);

    json jr = io::to_json(res);
    jr["manifest_hash"] = man.hash();
    write_json(dir / "simresult.json", jr);
    if (!dump_path.empty()) io::write_state_dump((dir / dump_path).string(), res.final_state);
    emit_manifest(man, dir);
    std::cout << "simulate: infidelity " << io::fmt(1.0 - res.fidelity_vs_target)
              << ", norm drift " << io::fmt(res.norm_drift) << "\n";
    return 0;
  }

  if (app.got_subcommand(cmd_scan)) {
    const ChainConfig cfg = io::parse_chain_config(io::load_json_file(chain_path));
    const GateSpec templ = io::parse_gate_spec(io::load_json_file(gate_path));
    const json jg = io::load_json_file(grid_path);
    const ModeData md = compute_modes(cfg);
    const auto dir = out.dir();

    ScanGridSpec spec;
    spec.threads = threads;
    if (jg.contains("samples_per_period"))
      spec.samples_per_period = jg.at("samples_per_period").get<int>();
    if (jg.contains("threshold")) spec.infidelity_threshold = jg.at("threshold").get<double>();
    if (jg.contains("n_seg")) spec.n_seg = jg.at("n_seg").get<int>();

    json params = {{"chain", io::to_json(cfg)}, {"gate", io::to_json(templ)}, {"grid", jg}};
    auto man = io::RunManifest::make("scan", {chain_path, gate_path, grid_path}, params);

    if (jg.contains("t_gate") && jg.contains("mu")) {
      auto axis = [&](const json& spec_j) {
        return ScanGridSpec::linspace(spec_j.at("min").get<double>(),
                                      spec_j.at("max").get<double>(),
                                      spec_j.at("count").get<int>());
      };
      spec.t_gate = axis(jg.at("t_gate"));
      const auto jmu = jg.at("mu");
      // mu axis given in Hz
      spec.mu = axis(jmu);
      for (double& m : spec.mu) m *= 2.0 * constants::pi;
      const ScanResult res = scan_grid(md, templ, spec);
      io::write_text_file((dir / "scan.csv").string(), io::scan_csv(res, man.hash()));
      json summary = io::scan_summary_json(res);
      summary["manifest_hash"] = man.hash();
      write_json(dir / "scan_summary.json", summary);
      std::cout << "scan: t_min = " << io::fmt(res.t_min)
                << " s, t_min* = " << io::fmt(res.t_min_star) << " s\n";
    }

    if (jg.contains("min_times")) {
      const auto& jm = jg.at("min_times");
      ScanGridSpec mspec = spec;
      auto axis = [&](const json& spec_j) {
        return ScanGridSpec::linspace(spec_j.at("min").get<double>(),
                                      spec_j.at("max").get<double>(),
                                      spec_j.at("count").get<int>());
      };
      mspec.t_gate = axis(jm.at("t_gate"));
      mspec.mu = axis(jm.at("mu"));
      for (double& m : mspec.mu) m *= 2.0 * constants::pi;
      const auto ns = jm.at("n_ions").get<std::vector<int>>();
      const double target = jm.value("target_lowest_hz", 0.75e6);
      const auto rows = min_gate_times(cfg, templ, ns, mspec, target);
      std::string csv = "# manifest_hash: " + man.hash() + "\nn_ions,axial_freq,t_min,t_min_star\n";
      for (const auto& r : rows)
        csv += std::to_string(r.n_ions) + "," + io::fmt(r.axial_freq) + "," +
               io::fmt(r.t_min) + "," + io::fmt(r.t_min_star) + "\n";
      io::write_text_file((dir / "min_times.csv").string(), csv);
    }

    if (jg.contains("flip_points")) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : jg.at("flip_points"))
        pts.emplace_back(p[0].get<double>(), 2.0 * constants::pi * p[1].get<double>());
      const int n_seg = spec.n_seg > 0 ? spec.n_seg : default_segments(cfg.n_ions);
      const auto rows = spin_flip_points(md, templ, pts, n_seg);
      std::string csv = "# manifest_hash: " + man.hash() + "\nt_gate,mu,p_flip,valid\n";
      for (const auto& r : rows)
        csv += io::fmt(r.t_gate) + "," + io::fmt(r.mu) + "," + io::fmt(r.p_flip) + "," +
               (r.valid ? "1" : "0") + "\n";
      io::write_text_file((dir / "flip_points.csv").string(), csv);
    }

    emit_manifest(man, dir);
    return 0;
  }

  return 0;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    nlohmann::json err{{"error", {{"type", e.type()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"type", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
