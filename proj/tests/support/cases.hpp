#pragma once

// Shared parameter sets for tests: the 5-ion 40Ca+ chain and gate settings
// used across the unit and acceptance suites, plus a small 2-ion instance.
// The radial wavevector is the 729 nm quadrupole-transition value projected
// fully on the radial direction; the same number is frozen in
// configs/chain5.json and recorded in run manifests.

#include "mspulse/mspulse.hpp"

namespace cases {

using namespace mspulse;

inline constexpr double k_radial_729 = 2.0 * constants::pi / 729.147e-9;

inline ChainConfig chain5() {
  ChainConfig c;
  c.n_ions = 5;
  c.ion_mass = constants::ca40_mass;
  c.axial_freq = 264.8e3;
  c.radial_freq = 1.0e6;
  c.wavevector_axial = 0.0;
  c.wavevector_radial = k_radial_729;
  c.illuminated_pair = {1, 2};
  return c;
}

inline GateSpec gate5() {
  GateSpec g;
  g.mu = 2.0 * constants::pi * 1.034e6;
  g.psi = 0.0;
  g.phi_target = constants::pi / 4.0;
  g.t0 = 0.0;
  g.tf = 41.74e-6;
  return g;
}

inline ChainConfig chain2(double radial_hz = 1.0e6, double axial_hz = 0.45e6) {
  ChainConfig c;
  c.n_ions = 2;
  c.ion_mass = constants::ca40_mass;
  c.axial_freq = axial_hz;
  c.radial_freq = radial_hz;
  c.wavevector_axial = 0.0;
  c.wavevector_radial = k_radial_729;
  c.illuminated_pair = {0, 1};
  return c;
}

// 2-ion gate placed above the radial band, matching the 5-ion geometry style;
// at the default settings the designed pulse sits inside the allowed area
inline GateSpec gate2(double t_gate = 36e-6, double mu_hz = 1.05e6) {
  GateSpec g;
  g.mu = 2.0 * constants::pi * mu_hz;
  g.psi = 0.0;
  g.phi_target = constants::pi / 4.0;
  g.t0 = 0.0;
  g.tf = t_gate;
  return g;
}

inline LinearSolveResult design_linear(const ChainConfig& cfg, const ModeData& md,
                                       const GateSpec& gate, int n_seg = 0) {
  const int ns = n_seg > 0 ? n_seg : default_segments(cfg.n_ions);
  const SplineBasis basis(gate.t0, gate.tf, ns);
  const auto a = assemble_A(basis, md, gate);
  const auto b = assemble_B(basis, md, gate);
  return solve_linear_pulse(a, b, gate, basis);
}

} // namespace cases
