#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "porosim/deck.hpp"
#include "porosim/tables.hpp"

namespace porosim {

inline constexpr int kMaxPhases = 3;

class DegenerateState : public std::runtime_error {
 public:
  explicit DegenerateState(const std::string& what)
      : std::runtime_error(what) {}
};

class NonPhysical : public std::runtime_error {
 public:
  explicit NonPhysical(const std::string& what) : std::runtime_error(what) {}
};

class NoConvergence : public std::runtime_error {
 public:
  explicit NoConvergence(const std::string& what)
      : std::runtime_error(what) {}
};

// Pressure-explicit dead-oil PVT: one component per phase, molar density
// xi_j(P) = xi_ref * exp(c_j (P - p_ref)).
struct PhasePvt {
  Phase kind = Phase::Water;
  double xi_ref = 0.0;
  double rho_ref = 0.0;
  double c = 0.0;
  double p_ref = 0.0;
  double mu_const = 0.0;
  PiecewiseLinear mu_table;  // optional mu(P)

  double xi(double P) const { return xi_ref * std::exp(c * (P - p_ref)); }
  double rho(double P) const { return rho_ref * std::exp(c * (P - p_ref)); }
  double mu(double P, double* dmu_dp = nullptr) const {
    if (mu_table.empty()) {
      if (dmu_dp) *dmu_dp = 0.0;
      return mu_const;
    }
    auto [v, s] = mu_table.evalWithSlope(P);
    if (dmu_dp) *dmu_dp = s;
    return v;
  }
};

struct FluidModel {
  std::vector<PhasePvt> phases;

  int np() const { return static_cast<int>(phases.size()); }
  int nc() const { return np(); }
  int indexOf(Phase p) const {
    for (int j = 0; j < np(); ++j)
      if (phases[j].kind == p) return j;
    return -1;
  }

  static FluidModel fromSpec(const FluidSpec& spec);
};

// Relative permeability and capillary pressure from the deck tables.
// In a three-phase system the oil curve is the normalized product of the
// two-phase tables: kro = krow(Sw) * krog(Sg) / kro_cw.
class SatModel {
 public:
  static SatModel fromSpec(const SatTable& tables, const FluidSpec& fluid);

  int np() const { return np_; }
  int refPhase() const { return ref_; }
  double connateWater() const { return swc_; }

  // kr, pc sized np; derivative matrices np*np at [(j)*np + k] = d/dS_k,
  // passed as nullptr when not needed.
  void evaluate(const double* sat, double* kr, double* pc, double* dkr_ds,
                double* dpc_ds) const;

 private:
  int np_ = 0;
  int iw_ = -1, io_ = -1, ig_ = -1;
  int ref_ = 0;
  double swc_ = 0.0;
  double kro_cw_ = 1.0;
  bool water_vs_gas_ = false;  // two-phase water/gas uses the SWOF table
  PiecewiseLinear krw_, krow_, pcow_;
  PiecewiseLinear krg_, krog_, pcgo_;
};

struct RockModel {
  double p_ref = 0.0;
  double c = 0.0;

  // phi = phi0 * (1 + c (P - p_ref)); throws NonPhysical when phi <= 0.
  double poro(double phi0, double P, double* dphi_dp = nullptr) const {
    const double phi = phi0 * (1.0 + c * (P - p_ref));
    if (dphi_dp) *dphi_dp = phi0 * c;
    if (phi <= 0.0) throw NonPhysical("porosity became non-positive");
    return phi;
  }
};

// Single-cell flash result; the FIM variant also carries derivatives.
struct CellState {
  int np = 0;
  std::array<double, kMaxPhases> sat{}, xi{}, rho{}, mu{};
  double vf = 0.0;
  // derivatives (flashFim only)
  std::array<double, kMaxPhases> dxi_dp{}, dmu_dp{}, dsat_dp{};
  std::array<double, kMaxPhases * kMaxPhases> dsat_dn{};  // [j*nc+i]
  double dvf_dp = 0.0;
  std::array<double, kMaxPhases> dvf_dn{};
};

// Field-major per-cell state over interior + ghost cells. Per-phase values
// of cell c live at [c*np + j], per-component at [c*nc + i], matrices at
// [(c*np + j)*nc + i].
struct BulkVarSet {
  int n_cells = 0, n_interior = 0;
  int np = 0, nc = 0;

  std::vector<double> pressure, moles;
  std::vector<double> sat, xi, rho, mu, kr, pc;
  std::vector<double> x_frac;  // identity, kept for the general layout
  std::vector<double> poro, vp, vf;

  // FIM derivative arrays
  std::vector<double> dxi_dp, dmu_dp, dsat_dp, dsat_dn;
  std::vector<double> dkr_ds, dpc_ds;
  std::vector<double> dvf_dp, dvf_dn, dvp_dp;

  // last accepted step
  std::vector<double> p_last, moles_last, sat_last;
  std::vector<double> mark_ds;  // max_j |S^n - S^{n-1}| per cell

  // static geometry
  std::vector<double> bulk_volume, depth, poro0;

  void allocate(int n_cells_, int n_interior_, int np_, int nc_);
};

class Bulk {
 public:
  Bulk(FluidModel fluid, SatModel sat, RockModel rock)
      : fluid_(std::move(fluid)), sat_(std::move(sat)), rock_(rock) {}

  const FluidModel& fluid() const { return fluid_; }
  const SatModel& satModel() const { return sat_; }
  const RockModel& rock() const { return rock_; }
  int np() const { return fluid_.np(); }
  int nc() const { return fluid_.nc(); }

  // Universal flash; throws DegenerateState when the fluid volume vanishes.
  CellState flashCell(double P, std::span<const double> N) const;
  // FIM flash: universal results plus analytic derivatives.
  CellState flashCellFim(double P, std::span<const double> N) const;

  // Refreshes all derived per-cell quantities from (P, N) on [begin, end).
  // The FIM variant also fills the derivative arrays. Returns false (with a
  // reason) instead of throwing when a cell fails to flash.
  bool updateProps(BulkVarSet& vs, int begin, int end, bool fim,
                   std::string* why = nullptr) const;

 private:
  void flashInto(double P, std::span<const double> N, bool fim,
                 CellState& out) const;

  FluidModel fluid_;
  SatModel sat_;
  RockModel rock_;
};

// Hydrostatic equilibrium: integrates dP/dz = rho g per zone segment with a
// fixed-point iteration (tolerance 1 Pa, at most 50 sweeps), assigns zone
// saturations from the contact depths, and back-computes N so that
// V_f = V_p at t = 0.
void initHydrostatic(BulkVarSet& vs, const Bulk& bulk, const InitSpec& init);

struct PhysicalCheck {
  bool ok = true;
  std::string reason;
};

// Interior-cell state check after a nonlinear update: negative moles beyond
// tolerance, pressure outside the configured window, or a failed flash all
// demand a time-step cut.
PhysicalCheck checkPhysical(const BulkVarSet& vs, const SolverConfig& cfg);

}  // namespace porosim
