#include "porosim/bulk.hpp"

#include <algorithm>
#include <cmath>

#include "porosim/units.hpp"

namespace porosim {

FluidModel FluidModel::fromSpec(const FluidSpec& spec) {
  FluidModel m;
  for (const auto& f : spec.phases) {
    PhasePvt p;
    p.kind = f.phase;
    p.xi_ref = f.xi_ref;
    p.rho_ref = f.rho_ref;
    p.c = f.compressibility;
    p.p_ref = f.p_ref;
    p.mu_const = f.viscosity;
    if (!f.visc_table.empty()) {
      std::vector<double> xs, ys;
      for (const auto& r : f.visc_table) {
        xs.push_back(r[0]);
        ys.push_back(r[1]);
      }
      p.mu_table = PiecewiseLinear(std::move(xs), std::move(ys));
    }
    m.phases.push_back(std::move(p));
  }
  return m;
}

namespace {

PiecewiseLinear column(const SatTable2P& t, int col) {
  std::vector<double> xs, ys;
  for (const auto& r : t.rows) {
    xs.push_back(r.s);
    ys.push_back(col == 0   ? r.kr_displacing
                 : col == 1 ? r.kr_displaced
                            : r.pc);
  }
  return PiecewiseLinear(std::move(xs), std::move(ys));
}

}  // namespace

SatModel SatModel::fromSpec(const SatTable& tables, const FluidSpec& fluid) {
  SatModel m;
  m.np_ = fluid.numPhases();
  m.iw_ = fluid.indexOf(Phase::Water);
  m.io_ = fluid.indexOf(Phase::Oil);
  m.ig_ = fluid.indexOf(Phase::Gas);
  m.ref_ = m.io_ >= 0 ? m.io_ : (m.ig_ >= 0 ? m.ig_ : 0);

  if (const SatTable2P* wt = tables.find(Phase::Water)) {
    m.krw_ = column(*wt, 0);
    m.krow_ = column(*wt, 1);
    m.pcow_ = column(*wt, 2);
    m.swc_ = wt->rows.front().s;
    m.kro_cw_ = wt->rows.front().kr_displaced;
    if (m.kro_cw_ <= 0.0) m.kro_cw_ = 1.0;
  }
  if (const SatTable2P* gt = tables.find(Phase::Gas)) {
    m.krg_ = column(*gt, 0);
    m.krog_ = column(*gt, 1);
    m.pcgo_ = column(*gt, 2);
  }
  m.water_vs_gas_ = (m.iw_ >= 0 && m.ig_ >= 0 && m.io_ < 0);
  return m;
}

void SatModel::evaluate(const double* sat, double* kr, double* pc,
                        double* dkr_ds, double* dpc_ds) const {
  const int np = np_;
  for (int j = 0; j < np; ++j) {
    kr[j] = 1.0;
    pc[j] = 0.0;
  }
  if (dkr_ds)
    for (int t = 0; t < np * np; ++t) dkr_ds[t] = 0.0;
  if (dpc_ds)
    for (int t = 0; t < np * np; ++t) dpc_ds[t] = 0.0;
  if (np == 1) return;

  const double sw = iw_ >= 0 ? sat[iw_] : 0.0;
  const double sg = ig_ >= 0 ? sat[ig_] : 0.0;

  if (iw_ >= 0) {
    auto [v, s] = krw_.evalWithSlope(sw);
    kr[iw_] = v;
    if (dkr_ds) dkr_ds[iw_ * np + iw_] = s;
    auto [pcv, pcs] = pcow_.evalWithSlope(sw);
    pc[iw_] = -pcv;  // table holds P_ref_phase - P_water
    if (dpc_ds) dpc_ds[iw_ * np + iw_] = -pcs;
  }
  if (ig_ >= 0) {
    if (water_vs_gas_) {
      // gas is the displaced phase of the water table
      auto [v, s] = krow_.evalWithSlope(sw);
      kr[ig_] = v;
      if (dkr_ds) dkr_ds[ig_ * np + iw_] = s;
    } else {
      auto [v, s] = krg_.evalWithSlope(sg);
      kr[ig_] = v;
      if (dkr_ds) dkr_ds[ig_ * np + ig_] = s;
      auto [pcv, pcs] = pcgo_.evalWithSlope(sg);
      pc[ig_] = pcv;  // table holds P_gas - P_oil
      if (dpc_ds) dpc_ds[ig_ * np + ig_] = pcs;
    }
  }
  if (io_ >= 0) {
    if (iw_ >= 0 && ig_ >= 0) {
      auto [ow, dow] = krow_.evalWithSlope(sw);
      auto [og, dog] = krog_.evalWithSlope(sg);
      kr[io_] = ow * og / kro_cw_;
      if (dkr_ds) {
        dkr_ds[io_ * np + iw_] = dow * og / kro_cw_;
        dkr_ds[io_ * np + ig_] = ow * dog / kro_cw_;
      }
    } else if (iw_ >= 0) {
      auto [ow, dow] = krow_.evalWithSlope(sw);
      kr[io_] = ow;
      if (dkr_ds) dkr_ds[io_ * np + iw_] = dow;
    } else if (ig_ >= 0) {
      auto [og, dog] = krog_.evalWithSlope(sg);
      kr[io_] = og;
      if (dkr_ds) dkr_ds[io_ * np + ig_] = dog;
    }
  }
}

void BulkVarSet::allocate(int n_cells_, int n_interior_, int np_, int nc_) {
  n_cells = n_cells_;
  n_interior = n_interior_;
  np = np_;
  nc = nc_;
  const std::size_t n = n_cells;
  pressure.assign(n, 0.0);
  moles.assign(n * nc, 0.0);
  sat.assign(n * np, 0.0);
  xi.assign(n * np, 0.0);
  rho.assign(n * np, 0.0);
  mu.assign(n * np, 0.0);
  kr.assign(n * np, 0.0);
  pc.assign(n * np, 0.0);
  x_frac.assign(n * np * nc, 0.0);
  for (std::size_t c = 0; c < n; ++c)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < nc; ++i)
        x_frac[(c * np + j) * nc + i] = (i == j) ? 1.0 : 0.0;
  poro.assign(n, 0.0);
  vp.assign(n, 0.0);
  vf.assign(n, 0.0);
  dxi_dp.assign(n * np, 0.0);
  dmu_dp.assign(n * np, 0.0);
  dsat_dp.assign(n * np, 0.0);
  dsat_dn.assign(n * np * nc, 0.0);
  dkr_ds.assign(n * np * np, 0.0);
  dpc_ds.assign(n * np * np, 0.0);
  dvf_dp.assign(n, 0.0);
  dvf_dn.assign(n * nc, 0.0);
  dvp_dp.assign(n, 0.0);
  p_last.assign(n, 0.0);
  moles_last.assign(n * nc, 0.0);
  sat_last.assign(n * np, 0.0);
  mark_ds.assign(n, 0.0);
  bulk_volume.assign(n, 0.0);
  depth.assign(n, 0.0);
  poro0.assign(n, 0.0);
}

void Bulk::flashInto(double P, std::span<const double> N, bool fim,
                     CellState& out) const {
  const int np = fluid_.np();
  out.np = np;
  double v[kMaxPhases];
  double vfs = 0.0;
  for (int j = 0; j < np; ++j) {
    const PhasePvt& p = fluid_.phases[j];
    out.xi[j] = p.xi(P);
    out.rho[j] = p.rho_ref * out.xi[j] / p.xi_ref;
    out.mu[j] = p.mu(P, fim ? &out.dmu_dp[j] : nullptr);
    v[j] = N[j] / out.xi[j];
    vfs += v[j];
  }
  if (vfs <= 0.0) throw DegenerateState("fluid volume is not positive");
  out.vf = vfs;
  double ssum = 0.0;
  for (int j = 0; j < np; ++j) {
    out.sat[j] = v[j] / vfs;
    ssum += out.sat[j];
  }
  if (std::fabs(ssum - 1.0) > 1.0e-12)
    throw DegenerateState("saturations failed to close");

  if (!fim) return;
  double dvf_dp = 0.0;
  for (int j = 0; j < np; ++j) {
    const double cj = fluid_.phases[j].c;
    out.dxi_dp[j] = cj * out.xi[j];
    dvf_dp += -v[j] * cj;
  }
  out.dvf_dp = dvf_dp;
  for (int i = 0; i < np; ++i) out.dvf_dn[i] = 1.0 / out.xi[i];
  for (int j = 0; j < np; ++j) {
    const double cj = fluid_.phases[j].c;
    const double dvj_dp = -v[j] * cj;
    out.dsat_dp[j] = (dvj_dp * vfs - v[j] * dvf_dp) / (vfs * vfs);
    for (int i = 0; i < np; ++i)
      out.dsat_dn[j * np + i] =
          ((i == j ? 1.0 : 0.0) - out.sat[j]) / (out.xi[i] * vfs);
  }
}

CellState Bulk::flashCell(double P, std::span<const double> N) const {
  CellState s;
  flashInto(P, N, false, s);
  return s;
}

CellState Bulk::flashCellFim(double P, std::span<const double> N) const {
  CellState s;
  flashInto(P, N, true, s);
  return s;
}

bool Bulk::updateProps(BulkVarSet& vs, int begin, int end, bool fim,
                       std::string* why) const {
  const int np = vs.np;
  const int nc = vs.nc;
  CellState cs;
  for (int c = begin; c < end; ++c) {
    try {
      flashInto(vs.pressure[c], {&vs.moles[c * nc], static_cast<std::size_t>(nc)},
                fim, cs);
      double dphi = 0.0;
      const double phi = rock_.poro(vs.poro0[c], vs.pressure[c], &dphi);
      vs.poro[c] = phi;
      vs.vp[c] = vs.bulk_volume[c] * phi;
      vs.dvp_dp[c] = vs.bulk_volume[c] * dphi;
    } catch (const std::runtime_error& e) {
      if (why) *why = "cell " + std::to_string(c) + ": " + e.what();
      return false;
    }
    vs.vf[c] = cs.vf;
    for (int j = 0; j < np; ++j) {
      vs.sat[c * np + j] = cs.sat[j];
      vs.xi[c * np + j] = cs.xi[j];
      vs.rho[c * np + j] = cs.rho[j];
      vs.mu[c * np + j] = cs.mu[j];
    }
    sat_.evaluate(&vs.sat[c * np], &vs.kr[c * np], &vs.pc[c * np],
                  fim ? &vs.dkr_ds[c * np * np] : nullptr,
                  fim ? &vs.dpc_ds[c * np * np] : nullptr);
    if (fim) {
      vs.dvf_dp[c] = cs.dvf_dp;
      for (int j = 0; j < np; ++j) {
        vs.dxi_dp[c * np + j] = cs.dxi_dp[j];
        vs.dmu_dp[c * np + j] = cs.dmu_dp[j];
        vs.dsat_dp[c * np + j] = cs.dsat_dp[j];
        for (int i = 0; i < nc; ++i)
          vs.dsat_dn[(c * np + j) * nc + i] = cs.dsat_dn[j * np + i];
      }
      for (int i = 0; i < nc; ++i) vs.dvf_dn[c * nc + i] = cs.dvf_dn[i];
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

// Phase occupying a given depth between the contacts.
int zonePhaseAt(double z, const FluidModel& fluid, const InitSpec& init) {
  const int iw = fluid.indexOf(Phase::Water);
  const int io = fluid.indexOf(Phase::Oil);
  const int ig = fluid.indexOf(Phase::Gas);
  if (fluid.np() == 1) return 0;
  if (iw >= 0 && z >= init.woc_depth) return iw;
  if (ig >= 0 && io >= 0 && z < init.goc_depth) return ig;
  if (io >= 0) return io;
  if (ig >= 0) return ig;  // water-gas system above the contact
  return iw;
}

// Integrates hydrostatic pressure from (z0, p0) to z1 through one zone.
double integrateSegment(double p0, double z0, double z1, int phase,
                        const FluidModel& fluid) {
  const PhasePvt& pvt = fluid.phases[phase];
  const double dz = z1 - z0;
  double p1 = p0;
  for (int it = 0; it < 50; ++it) {
    const double rho = pvt.rho(0.5 * (p0 + p1));
    const double next = p0 + rho * units::gravity * dz;
    if (std::fabs(next - p1) < 1.0) return next;
    p1 = next;
  }
  throw NoConvergence("hydrostatic integration did not converge");
}

double pressureAtDepth(double z, const FluidModel& fluid, const InitSpec& init) {
  // March from the reference depth, switching density at contacts.
  double z0 = init.ref_depth;
  double p = init.ref_pressure;
  const double dir = z >= z0 ? 1.0 : -1.0;
  std::vector<double> stops;
  for (double contact : {init.goc_depth, init.woc_depth}) {
    if ((contact - z0) * dir > 0.0 && (z - contact) * dir > 0.0)
      stops.push_back(contact);
  }
  std::sort(stops.begin(), stops.end(),
            [&](double a, double b) { return (a - z0) * dir < (b - z0) * dir; });
  stops.push_back(z);
  for (double s : stops) {
    const double zmid = 0.5 * (z0 + s);
    const int phase = zonePhaseAt(zmid, fluid, init);
    p = integrateSegment(p, z0, s, phase, fluid);
    z0 = s;
  }
  return p;
}

}  // namespace

void initHydrostatic(BulkVarSet& vs, const Bulk& bulk, const InitSpec& init) {
  const FluidModel& fluid = bulk.fluid();
  const int np = vs.np;
  const int nc = vs.nc;
  const int iw = fluid.indexOf(Phase::Water);
  const int io = fluid.indexOf(Phase::Oil);
  const int ig = fluid.indexOf(Phase::Gas);
  const double swc = bulk.satModel().connateWater();

  for (int c = 0; c < vs.n_cells; ++c) {
    const double z = vs.depth[c];
    const double P = pressureAtDepth(z, fluid, init);
    vs.pressure[c] = P;

    double s[kMaxPhases] = {0.0, 0.0, 0.0};
    const int zone = zonePhaseAt(z, fluid, init);
    if (np == 1) {
      s[0] = 1.0;
    } else if (zone == iw) {
      s[iw] = 1.0;
    } else if (io >= 0 && zone == io) {
      if (iw >= 0) s[iw] = swc;
      s[io] = 1.0 - (iw >= 0 ? swc : 0.0);
    } else {  // gas zone
      if (iw >= 0) s[iw] = swc;
      s[ig] = 1.0 - (iw >= 0 ? swc : 0.0);
    }

    const double phi = bulk.rock().poro(vs.poro0[c], P);
    const double vpc = vs.bulk_volume[c] * phi;
    for (int j = 0; j < np; ++j) {
      const double xij = fluid.phases[j].xi(P);
      vs.moles[c * nc + j] = vpc * s[j] * xij;
    }
  }
  std::string why;
  if (!bulk.updateProps(vs, 0, vs.n_cells, false, &why))
    throw DegenerateState("initialization failed: " + why);
  std::copy(vs.pressure.begin(), vs.pressure.end(), vs.p_last.begin());
  std::copy(vs.moles.begin(), vs.moles.end(), vs.moles_last.begin());
  std::copy(vs.sat.begin(), vs.sat.end(), vs.sat_last.begin());
  std::fill(vs.mark_ds.begin(), vs.mark_ds.end(), 0.0);
}

PhysicalCheck checkPhysical(const BulkVarSet& vs, const SolverConfig& cfg) {
  const int nc = vs.nc;
  for (int c = 0; c < vs.n_interior; ++c) {
    const double P = vs.pressure[c];
    if (!(P >= cfg.min_pressure && P <= cfg.max_pressure))
      return {false, "pressure out of range in cell " + std::to_string(c)};
    double ntot = 0.0;
    for (int i = 0; i < nc; ++i) ntot += std::max(0.0, vs.moles[c * nc + i]);
    for (int i = 0; i < nc; ++i) {
      if (vs.moles[c * nc + i] < cfg.neg_moles_rel * ntot)
        return {false, "negative moles in cell " + std::to_string(c)};
    }
  }
  return {true, ""};
}

}  // namespace porosim
