#pragma once

#include <stdexcept>
#include <vector>

#include "porosim/bulk.hpp"
#include "porosim/grid.hpp"

namespace porosim {

class WellDead : public std::runtime_error {
 public:
  explicit WellDead(const std::string& well)
      : std::runtime_error("well " + well +
                           ": no BHP in range achieves the target rate") {}
};

// Runtime state of one well on its owning worker. Perforation source rates
// q_perf are per component in mol/s, positive into the reservoir.
struct WellState {
  WellSpec spec;
  WellControl control;
  bool open = false;

  std::vector<int> perf_local;    // owning worker's local interior indices
  std::vector<double> wi;         // Peaceman well index per perforation, m^3
  std::vector<double> perf_depth; // m, top-down
  double bhp = 0.0;

  std::vector<double> q_perf;  // perf * nc

  // FIM data: derivatives at fixed BHP plus the well-equation partials used
  // to eliminate the BHP unknown of a rate-controlled well.
  std::vector<double> dq_dx;    // perf * nc * (nc+1), vars (P, N_1..N_c)
  std::vector<double> dq_dbhp;  // perf * nc
  std::vector<double> dg_dx;    // perf * (nc+1)
  double dg_dbhp = 0.0;
  bool rate_controlled() const {
    return open && !control.shut && control.type == WellControlType::Rate;
  }
};

// Peaceman index per perforation: WI = 2 pi k_geo h / ln(r_e / r_w) with
// r_e = 0.14 sqrt(dx^2 + dy^2) and k_geo = sqrt(kx ky).
double peacemanIndex(double kx, double ky, double dx, double dy, double h,
                     double rw);

// Builds the perforation list (local indices via `localOf`) and the static
// well geometry. Cells must all be owned by the calling worker.
template <class LocalOf>
WellState makeWellState(const Grid& grid, const WellSpec& spec,
                        LocalOf&& localOf) {
  WellState ws;
  ws.spec = spec;
  const auto cells = wellCells(grid, spec);
  for (int gid : cells) {
    const int l = localOf(gid);
    if (l < 0)
      throw std::runtime_error("well " + spec.name +
                               " perforates a cell outside its worker");
    ws.perf_local.push_back(l);
    ws.wi.push_back(peacemanIndex(grid.permx[gid], grid.permy[gid],
                                  grid.dx[gid], grid.dy[gid], grid.dz[gid],
                                  spec.radius));
    ws.perf_depth.push_back(grid.depth[gid]);
  }
  return ws;
}

// Updates BHP and per-perforation rates for the current cell state. For a
// rate control the BHP solves the total-rate equation by bisection on the
// configured pressure window; throws WellDead when no BHP matches. The
// wellbore column density is frozen at the current cell state.
void computeWellRates(WellState& ws, const BulkVarSet& vs,
                      const FluidModel& fluid, const SolverConfig& cfg,
                      bool with_deriv);

// Target rate in solver units: mol/s for injectors, surface m^3/s of total
// fluid for producers.
double wellTargetSi(const WellState& ws, const FluidModel& fluid);

}  // namespace porosim
