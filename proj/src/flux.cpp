#include "porosim/flux.hpp"

#include "porosim/units.hpp"

namespace porosim {

namespace {

inline bool phasePresent(const BulkVarSet& vs, int cell, int j) {
  return vs.sat[cell * vs.np + j] > 0.0;
}

}  // namespace

ConnFlux phaseFlux(const BulkVarSet& vs, const FluidModel& fluid, int la,
                   int lb, double trans, bool with_deriv) {
  const int np = vs.np;
  const int nc = vs.nc;
  ConnFlux f;
  f.np = np;
  f.nc = nc;

  const double pa = vs.pressure[la];
  const double pb = vs.pressure[lb];
  const double gdz = units::gravity * (vs.depth[la] - vs.depth[lb]);

  for (int j = 0; j < np; ++j) {
    const bool pres_a = phasePresent(vs, la, j);
    const bool pres_b = phasePresent(vs, lb, j);
    double rho_avg, drho_dpa = 0.0, drho_dpb = 0.0;
    const double cj = fluid.phases[j].c;
    if (pres_a == pres_b) {
      rho_avg = 0.5 * (vs.rho[la * np + j] + vs.rho[lb * np + j]);
      drho_dpa = 0.5 * cj * vs.rho[la * np + j];
      drho_dpb = 0.5 * cj * vs.rho[lb * np + j];
    } else if (pres_a) {
      rho_avg = vs.rho[la * np + j];
      drho_dpa = cj * rho_avg;
    } else {
      rho_avg = vs.rho[lb * np + j];
      drho_dpb = cj * rho_avg;
    }

    const double dphi = (pa + vs.pc[la * np + j]) - (pb + vs.pc[lb * np + j]) -
                        rho_avg * gdz;
    const int up = dphi >= 0.0 ? la : lb;
    f.up_is_b[j] = up == lb ? 1 : 0;

    const double mob = vs.kr[up * np + j] / vs.mu[up * np + j];
    const double mxi = vs.xi[up * np + j] * mob;
    f.q_v[j] = trans * mob * dphi;
    f.q_n[j] = trans * mxi * dphi;

    if (!with_deriv) continue;

    // dPhi derivatives; capillary pressure rides on saturations.
    double ddphi[2][kMaxPhases + 1] = {};
    for (int side = 0; side < 2; ++side) {
      const int cell = side == 0 ? la : lb;
      const double sgn = side == 0 ? 1.0 : -1.0;
      double dpc_dp = 0.0;
      for (int k = 0; k < np; ++k)
        dpc_dp += vs.dpc_ds[(cell * np + j) * np + k] * vs.dsat_dp[cell * np + k];
      ddphi[side][0] = sgn * (1.0 + dpc_dp) -
                       (side == 0 ? drho_dpa : drho_dpb) * gdz;
      for (int i = 0; i < nc; ++i) {
        double dpc_dn = 0.0;
        for (int k = 0; k < np; ++k)
          dpc_dn += vs.dpc_ds[(cell * np + j) * np + k] *
                    vs.dsat_dn[(cell * np + k) * nc + i];
        ddphi[side][1 + i] = sgn * dpc_dn;
      }
    }

    // d(m xi)/d(upstream state)
    const int up_side = up == la ? 0 : 1;
    const double xi_u = vs.xi[up * np + j];
    const double kr_u = vs.kr[up * np + j];
    const double mu_u = vs.mu[up * np + j];
    double dkr_dp = 0.0;
    for (int k = 0; k < np; ++k)
      dkr_dp += vs.dkr_ds[(up * np + j) * np + k] * vs.dsat_dp[up * np + k];
    const double dmxi_dp =
        vs.dxi_dp[up * np + j] * kr_u / mu_u + xi_u * dkr_dp / mu_u -
        xi_u * kr_u * vs.dmu_dp[up * np + j] / (mu_u * mu_u);

    for (int side = 0; side < 2; ++side) {
      f.d(j, side, 0) += trans * mxi * ddphi[side][0];
      for (int i = 0; i < nc; ++i)
        f.d(j, side, 1 + i) += trans * mxi * ddphi[side][1 + i];
    }
    f.d(j, up_side, 0) += trans * dmxi_dp * dphi;
    for (int i = 0; i < nc; ++i) {
      double dkr_dn = 0.0;
      for (int k = 0; k < np; ++k)
        dkr_dn += vs.dkr_ds[(up * np + j) * np + k] *
                  vs.dsat_dn[(up * np + k) * nc + i];
      f.d(j, up_side, 1 + i) += trans * xi_u * dkr_dn / mu_u * dphi;
    }
  }
  return f;
}

ImpecConnCoeff impecFluxCoeff(const BulkVarSet& vs, const FluidModel& fluid,
                              int la, int lb, double trans) {
  const int np = vs.np;
  ImpecConnCoeff c;
  c.nc = vs.nc;
  const double pa = vs.pressure[la];
  const double pb = vs.pressure[lb];
  const double gdz = units::gravity * (vs.depth[la] - vs.depth[lb]);
  for (int j = 0; j < np; ++j) {
    const bool pres_a = phasePresent(vs, la, j);
    const bool pres_b = phasePresent(vs, lb, j);
    double rho_avg;
    if (pres_a == pres_b)
      rho_avg = 0.5 * (vs.rho[la * np + j] + vs.rho[lb * np + j]);
    else
      rho_avg = pres_a ? vs.rho[la * np + j] : vs.rho[lb * np + j];
    const double pot_const =
        vs.pc[la * np + j] - vs.pc[lb * np + j] - rho_avg * gdz;
    const double dphi = (pa - pb) + pot_const;
    const int up = dphi >= 0.0 ? la : lb;
    c.up_is_b[j] = up == lb ? 1 : 0;
    const double mxi =
        trans * vs.xi[up * np + j] * vs.kr[up * np + j] / vs.mu[up * np + j];
    c.m[j] = mxi;
    c.r[j] = mxi * pot_const;
  }
  (void)fluid;
  return c;
}

}  // namespace porosim
