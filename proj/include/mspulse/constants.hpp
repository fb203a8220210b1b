#pragma once

namespace mspulse::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double epsilon0 = 8.8541878128e-12;         // F/m
inline constexpr double elementary_charge = 1.602176634e-19; // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg

// Mass of 40Ca+ (39.9625909 u), the species used in the bundled configs.
inline constexpr double ca40_mass = 39.9625909 * atomic_mass_unit;

} // namespace mspulse::constants
