#pragma once

// Conversion factors between deck convenience units (METRIC) and the SI
// quantities used internally (Pa, m, s, mol, kg).

namespace porosim::units {

inline constexpr double bar = 1.0e5;            // Pa
inline constexpr double centipoise = 1.0e-3;    // Pa*s
inline constexpr double millidarcy = 9.869233e-16;  // m^2
inline constexpr double day = 86400.0;          // s
inline constexpr double gravity = 9.80665;      // m/s^2

}  // namespace porosim::units
