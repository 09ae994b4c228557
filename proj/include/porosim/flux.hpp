#pragma once

#include <array>
#include <cstdint>

#include "porosim/bulk.hpp"

namespace porosim {

// Flux across one cell connection, positive from a to b. The per-phase
// potential drop is
//   dPhi_j = (P_a + Pc_j,a) - (P_b + Pc_j,b) - rho_avg_j g (z_a - z_b)
// with the phase density averaged arithmetically over the sides on which
// the phase is present (one-sided when only one side holds it). Mobility
// and molar density are taken from the upstream (potential-decreasing
// towards the other) side.
struct ConnFlux {
  int np = 0, nc = 0;
  std::array<double, kMaxPhases> q_v{};  // m^3/s per phase, a -> b
  std::array<double, kMaxPhases> q_n{};  // mol/s per component, a -> b
  std::array<std::uint8_t, kMaxPhases> up_is_b{};

  // d q_n[i] / d (P, N_1..N_c) of side s (0 = a, 1 = b)
  std::array<double, kMaxPhases * 2 * (kMaxPhases + 1)> dq{};

  double& d(int i, int side, int var) {
    return dq[(i * 2 + side) * (kMaxPhases + 1) + var];
  }
  double d(int i, int side, int var) const {
    return dq[(i * 2 + side) * (kMaxPhases + 1) + var];
  }
};

ConnFlux phaseFlux(const BulkVarSet& vs, const FluidModel& fluid, int la,
                   int lb, double trans, bool with_deriv);

// IMPEC view of the same connection: flux_N_i = m_i (P_a - P_b) + r_i with
// every coefficient frozen at the current state.
struct ImpecConnCoeff {
  int nc = 0;
  std::array<double, kMaxPhases> m{};
  std::array<double, kMaxPhases> r{};
  std::array<std::uint8_t, kMaxPhases> up_is_b{};
};

ImpecConnCoeff impecFluxCoeff(const BulkVarSet& vs, const FluidModel& fluid,
                              int la, int lb, double trans);

}  // namespace porosim
