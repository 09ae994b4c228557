#include "porosim/wells.hpp"

#include <algorithm>
#include <cmath>

#include "porosim/units.hpp"

namespace porosim {

double peacemanIndex(double kx, double ky, double dx, double dy, double h,
                     double rw) {
  const double k_geo = std::sqrt(kx * ky);
  const double re = 0.14 * std::sqrt(dx * dx + dy * dy);
  return 2.0 * M_PI * k_geo * h / std::log(re / rw);
}

double wellTargetSi(const WellState& ws, const FluidModel& fluid) {
  const double rate_si = ws.control.target / units::day;  // m^3/s surface
  if (ws.spec.kind == WellKind::Injector) {
    const int j = fluid.indexOf(ws.control.inj_phase);
    return rate_si * fluid.phases[j].xi_ref;  // mol/s
  }
  return rate_si;
}

namespace {

// Connection pressures per perforation for a given BHP; the column density
// uses the current cell state and is therefore linear in BHP.
void connectionPressures(const WellState& ws, const BulkVarSet& vs,
                         const FluidModel& fluid, double bhp,
                         std::vector<double>& pconn) {
  const int np = vs.np;
  const std::size_t n = ws.perf_local.size();
  pconn.resize(n);
  const int inj_phase = ws.spec.kind == WellKind::Injector
                            ? fluid.indexOf(ws.control.inj_phase)
                            : -1;
  double p = bhp;
  double z_prev = ws.perf_depth.empty() ? 0.0 : ws.perf_depth.front();
  for (std::size_t m = 0; m < n; ++m) {
    const int cell = ws.perf_local[m];
    double rho;
    if (inj_phase >= 0) {
      rho = vs.rho[cell * np + inj_phase];
    } else {
      rho = 0.0;
      for (int j = 0; j < np; ++j)
        rho += vs.sat[cell * np + j] * vs.rho[cell * np + j];
    }
    p += rho * units::gravity * (ws.perf_depth[m] - z_prev);
    z_prev = ws.perf_depth[m];
    pconn[m] = p;
  }
}

// Fills rates (and optionally fixed-BHP derivatives) for a given BHP and
// returns the control function value: total mol/s for injectors, total
// produced surface m^3/s for producers.
double evalRates(WellState& ws, const BulkVarSet& vs, const FluidModel& fluid,
                 double bhp, bool with_deriv, std::vector<double>& pconn) {
  const int np = vs.np;
  const int nc = vs.nc;
  const int nv = nc + 1;
  const std::size_t n = ws.perf_local.size();
  connectionPressures(ws, vs, fluid, bhp, pconn);

  ws.q_perf.assign(n * nc, 0.0);
  if (with_deriv) {
    ws.dq_dx.assign(n * nc * nv, 0.0);
    ws.dq_dbhp.assign(n * nc, 0.0);
    ws.dg_dx.assign(n * nv, 0.0);
    ws.dg_dbhp = 0.0;
  }

  double total = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const int cell = ws.perf_local[m];
    const double wi = ws.wi[m];
    const double pc = vs.pressure[cell];

    if (ws.spec.kind == WellKind::Producer) {
      const double dp = pc - pconn[m];
      if (dp <= 0.0) continue;  // crossflow clamped
      for (int i = 0; i < nc; ++i) {
        const double kr = vs.kr[cell * np + i];
        const double mu = vs.mu[cell * np + i];
        const double xi = vs.xi[cell * np + i];
        const double lam = kr / mu;
        const double q = -wi * lam * xi * dp;
        ws.q_perf[m * nc + i] = q;
        total += -q / fluid.phases[i].xi_ref;  // produced surface volume
        if (!with_deriv) continue;
        double dkr_dp = 0.0;
        for (int k = 0; k < np; ++k)
          dkr_dp += vs.dkr_ds[(cell * np + i) * np + k] * vs.dsat_dp[cell * np + k];
        const double dlam_dp =
            dkr_dp / mu - kr * vs.dmu_dp[cell * np + i] / (mu * mu);
        const double dq_dp = -wi * (dlam_dp * xi + lam * vs.dxi_dp[cell * np + i]) * dp -
                             wi * lam * xi;
        ws.dq_dx[(m * nc + i) * nv + 0] = dq_dp;
        ws.dg_dx[m * nv + 0] += -dq_dp / fluid.phases[i].xi_ref;
        for (int v = 0; v < nc; ++v) {
          double dkr_dn = 0.0;
          for (int k = 0; k < np; ++k)
            dkr_dn += vs.dkr_ds[(cell * np + i) * np + k] *
                      vs.dsat_dn[(cell * np + k) * nc + v];
          const double dq_dn = -wi * (dkr_dn / mu) * xi * dp;
          ws.dq_dx[(m * nc + i) * nv + 1 + v] = dq_dn;
          ws.dg_dx[m * nv + 1 + v] += -dq_dn / fluid.phases[i].xi_ref;
        }
        const double dq_db = wi * lam * xi;  // d(dp)/dbhp = -1
        ws.dq_dbhp[m * nc + i] = dq_db;
        ws.dg_dbhp += -dq_db / fluid.phases[i].xi_ref;
      }
    } else {
      const double dp = pconn[m] - pc;
      if (dp <= 0.0) continue;
      const int jinj = fluid.indexOf(ws.control.inj_phase);
      double lam_t = 0.0, dlam_dp = 0.0;
      for (int j = 0; j < np; ++j) {
        const double mu = vs.mu[cell * np + j];
        lam_t += vs.kr[cell * np + j] / mu;
        if (with_deriv) {
          double dkr_dp = 0.0;
          for (int k = 0; k < np; ++k)
            dkr_dp += vs.dkr_ds[(cell * np + j) * np + k] * vs.dsat_dp[cell * np + k];
          dlam_dp += dkr_dp / mu - vs.kr[cell * np + j] *
                                       vs.dmu_dp[cell * np + j] / (mu * mu);
        }
      }
      const double xi = vs.xi[cell * np + jinj];
      const double q = wi * lam_t * xi * dp;
      ws.q_perf[m * nc + jinj] = q;
      total += q;
      if (!with_deriv) continue;
      const double dq_dp =
          wi * (dlam_dp * xi + lam_t * vs.dxi_dp[cell * np + jinj]) * dp -
          wi * lam_t * xi;
      ws.dq_dx[(m * nc + jinj) * nv + 0] = dq_dp;
      ws.dg_dx[m * nv + 0] += dq_dp;
      for (int v = 0; v < nc; ++v) {
        double dlam_dn = 0.0;
        for (int j = 0; j < np; ++j) {
          double dkr_dn = 0.0;
          for (int k = 0; k < np; ++k)
            dkr_dn += vs.dkr_ds[(cell * np + j) * np + k] *
                      vs.dsat_dn[(cell * np + k) * nc + v];
          dlam_dn += dkr_dn / vs.mu[cell * np + j];
        }
        const double dq_dn = wi * dlam_dn * xi * dp;
        ws.dq_dx[(m * nc + jinj) * nv + 1 + v] = dq_dn;
        ws.dg_dx[m * nv + 1 + v] += dq_dn;
      }
      const double dq_db = wi * lam_t * xi;
      ws.dq_dbhp[m * nc + jinj] = dq_db;
      ws.dg_dbhp += dq_db;
    }
  }
  return total;
}

}  // namespace

void computeWellRates(WellState& ws, const BulkVarSet& vs,
                      const FluidModel& fluid, const SolverConfig& cfg,
                      bool with_deriv) {
  const int nc = vs.nc;
  std::vector<double> pconn;
  if (!ws.open || ws.control.shut) {
    ws.q_perf.assign(ws.perf_local.size() * nc, 0.0);
    ws.dq_dx.assign(ws.perf_local.size() * nc * (nc + 1), 0.0);
    ws.dq_dbhp.assign(ws.perf_local.size() * nc, 0.0);
    ws.dg_dx.assign(ws.perf_local.size() * (nc + 1), 0.0);
    ws.dg_dbhp = 0.0;
    return;
  }

  if (ws.control.type == WellControlType::Bhp) {
    ws.bhp = ws.control.target;
    evalRates(ws, vs, fluid, ws.bhp, with_deriv, pconn);
    return;
  }

  const double target = wellTargetSi(ws, fluid);
  double lo = cfg.min_pressure, hi = cfg.max_pressure;
  // Injector totals grow with BHP, producer totals shrink.
  const bool grows = ws.spec.kind == WellKind::Injector;
  double flo = evalRates(ws, vs, fluid, lo, false, pconn);
  double fhi = evalRates(ws, vs, fluid, hi, false, pconn);
  const double fmin = grows ? flo : fhi;
  const double fmax = grows ? fhi : flo;
  if (target < fmin - 1e-12 || target > fmax + 1e-12)
    throw WellDead(ws.spec.name);
  for (int it = 0; it < 200 && hi - lo > 1.0e-6; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = evalRates(ws, vs, fluid, mid, false, pconn);
    const bool go_up = grows ? (f < target) : (f > target);
    if (go_up)
      lo = mid;
    else
      hi = mid;
  }
  ws.bhp = 0.5 * (lo + hi);
  evalRates(ws, vs, fluid, ws.bhp, with_deriv, pconn);
}

}  // namespace porosim
