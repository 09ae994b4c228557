#include "porosim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "porosim/units.hpp"

namespace porosim {

const char* stageMethodName(StageMethod m) {
  switch (m) {
    case StageMethod::FIM: return "FIM";
    case StageMethod::IMPEC: return "IMPEC";
    case StageMethod::FIMddm: return "FIMddm";
  }
  return "?";
}

WorkerSolver::WorkerSolver(const Grid& grid, const DomainMaps& dom, Bulk bulk,
                           SolverConfig cfg, Comm& comm)
    : dom_(&dom), bulk_(std::move(bulk)), cfg_(cfg), comm_(&comm) {
  const int np = bulk_.np();
  const int nc = bulk_.nc();
  nb_ = nc + 1;
  vs_.allocate(dom.numLocal(), dom.numInterior(), np, nc);
  for (int l = 0; l < dom.numLocal(); ++l) {
    const int gid = dom.gidOfLocal(l);
    vs_.bulk_volume[l] = grid.volume[gid];
    vs_.depth[l] = grid.depth[gid];
    vs_.poro0[l] = grid.poro_init[gid];
  }
  world_ = Comm::worldGroup(dom.n_ranks);
  full_gi_ = buildGroupIndexing(dom, world_);
  vp_step_.assign(dom.numLocal(), 0.0);
}

void WorkerSolver::initState(const InitSpec& init) {
  initHydrostatic(vs_, bulk_, init);
  std::copy(vs_.vp.begin(), vs_.vp.end(), vp_step_.begin());
}

void WorkerSolver::applyControls(const std::vector<WellControl>& controls) {
  for (const auto& wc : controls) {
    for (auto& ws : wells_) {
      if (ws.spec.name == wc.well) {
        ws.control = wc;
        ws.open = !wc.shut;
      }
    }
  }
}

void WorkerSolver::exchangePrimaries(const std::vector<int>* group) {
  FieldRef fields[2] = {{vs_.pressure.data(), 1}, {vs_.moles.data(), vs_.nc}};
  exchangeGhostFields(*dom_, *comm_, fields, tags::ghost_exchange, group);
}

bool WorkerSolver::refreshProps(bool fim, std::string* why) {
  return bulk_.updateProps(vs_, 0, vs_.n_cells, fim, why);
}

void WorkerSolver::refreshWells(bool with_deriv) {
  for (auto& ws : wells_)
    computeWellRates(ws, vs_, bulk_.fluid(), cfg_, with_deriv);
}

// ---------------------------------------------------------------------------
// FIM assembly

void WorkerSolver::assembleFim(double dt_s, const GroupIndexing& gi,
                               SegmentedBlockMatrix* mat,
                               std::vector<double>& resid) {
  const int n_int = dom_->numInterior();
  const int nc = vs_.nc;
  const int nb = nb_;
  const FluidModel& fluid = bulk_.fluid();

  resid.assign(static_cast<std::size_t>(n_int) * nb, 0.0);
  if (mat) mat->begin(n_int, nb);

  auto rowScale = [&](int c, int i) {
    // mass rows: dt / (Vp xi_ref); volume row: 1 / Vp
    if (i < nc) return dt_s / (vp_step_[c] * fluid.phases[i].xi_ref);
    return 1.0 / vp_step_[c];
  };

  std::vector<double> blk(static_cast<std::size_t>(nb) * nb);

  // Accumulation and volume balance, diagonal blocks.
  for (int c = 0; c < n_int; ++c) {
    for (int i = 0; i < nc; ++i)
      resid[c * nb + i] = (vs_.moles[c * nc + i] - vs_.moles_last[c * nc + i]) /
                          dt_s * rowScale(c, i);
    resid[c * nb + nc] = (vs_.vf[c] - vs_.vp[c]) * rowScale(c, nc);
    if (!mat) continue;
    std::fill(blk.begin(), blk.end(), 0.0);
    for (int i = 0; i < nc; ++i)
      blk[i * nb + 1 + i] = rowScale(c, i) / dt_s;
    blk[nc * nb + 0] = (vs_.dvf_dp[c] - vs_.dvp_dp[c]) * rowScale(c, nc);
    for (int i = 0; i < nc; ++i)
      blk[nc * nb + 1 + i] = vs_.dvf_dn[c * nc + i] * rowScale(c, nc);
    mat->addBlock(c, gi.group_col_of_local[c], blk);
  }

  // Connection fluxes. Boundary ghosts (no group column) contribute their
  // frozen-state flux to the residual only.
  for (const auto& conn : dom_->local_conns) {
    const int la = conn.a, lb = conn.b;
    const ConnFlux f =
        phaseFlux(vs_, fluid, la, lb, conn.trans, mat != nullptr);
    for (int side = 0; side < 2; ++side) {
      const int row = side == 0 ? la : lb;
      if (row >= n_int) continue;
      const double sgn = side == 0 ? 1.0 : -1.0;
      for (int i = 0; i < nc; ++i)
        resid[row * nb + i] += sgn * f.q_n[i] * rowScale(row, i);
      if (!mat) continue;
      for (int vside = 0; vside < 2; ++vside) {
        const int vcell = vside == 0 ? la : lb;
        const long col = gi.group_col_of_local[vcell];
        if (col < 0) continue;  // frozen boundary primary
        std::fill(blk.begin(), blk.end(), 0.0);
        for (int i = 0; i < nc; ++i) {
          const double s = sgn * rowScale(row, i);
          for (int v = 0; v < nb; ++v)
            blk[i * nb + v] = s * f.d(i, vside, v);
        }
        mat->addBlock(row, col, blk);
      }
    }
  }

  // Wells: source terms enter with a negative sign; a rate-controlled
  // well's BHP is eliminated locally, coupling its perforated cells.
  for (const auto& ws : wells_) {
    const std::size_t nperf = ws.perf_local.size();
    const int nv = nc + 1;
    for (std::size_t m = 0; m < nperf; ++m) {
      const int r = ws.perf_local[m];
      for (int i = 0; i < nc; ++i)
        resid[r * nb + i] -= ws.q_perf[m * nc + i] * rowScale(r, i);
    }
    if (!mat || ws.q_perf.empty()) continue;
    for (std::size_t m = 0; m < nperf; ++m) {
      const int r = ws.perf_local[m];
      std::fill(blk.begin(), blk.end(), 0.0);
      for (int i = 0; i < nc; ++i) {
        const double s = rowScale(r, i);
        for (int v = 0; v < nv; ++v)
          blk[i * nb + v] = -s * ws.dq_dx[(m * nc + i) * nv + v];
      }
      mat->addBlock(r, gi.group_col_of_local[r], blk);
    }
    if (ws.rate_controlled() && std::fabs(ws.dg_dbhp) > 1e-300) {
      for (std::size_t m = 0; m < nperf; ++m) {
        const int r = ws.perf_local[m];
        for (std::size_t m2 = 0; m2 < nperf; ++m2) {
          const int r2 = ws.perf_local[m2];
          std::fill(blk.begin(), blk.end(), 0.0);
          for (int i = 0; i < nc; ++i) {
            const double s = rowScale(r, i);
            for (int v = 0; v < nv; ++v)
              blk[i * nb + v] = s * ws.dq_dbhp[m * nc + i] *
                                ws.dg_dx[m2 * nv + v] / ws.dg_dbhp;
          }
          mat->addBlock(r, gi.group_col_of_local[r2], blk);
        }
      }
    }
  }

  if (mat) {
    auto& rhs = mat->rhs();
    for (std::size_t t = 0; t < resid.size(); ++t) rhs[t] = -resid[t];
  }
}

double WorkerSolver::fimUpdate(const std::vector<double>& u,
                               const std::vector<int>& group) {
  const int n_int = dom_->numInterior();
  const int np = vs_.np;
  const int nc = vs_.nc;
  const int nb = nb_;

  double max_ds = 0.0;
  for (int c = 0; c < n_int; ++c) {
    const double dp = u[c * nb + 0];
    for (int j = 0; j < np; ++j) {
      double ds = vs_.dsat_dp[c * np + j] * dp;
      for (int i = 0; i < nc; ++i)
        ds += vs_.dsat_dn[(c * np + j) * nc + i] * u[c * nb + 1 + i];
      max_ds = std::max(max_ds, std::fabs(ds));
    }
  }
  max_ds = comm_->allreduceScalar(group, max_ds, ReduceOp::Max,
                                  tags::reduction + 1);
  const double omega =
      max_ds > cfg_.max_ds_update ? cfg_.max_ds_update / max_ds : 1.0;

  for (int c = 0; c < n_int; ++c) {
    vs_.pressure[c] += omega * u[c * nb + 0];
    double ntot = 0.0;
    for (int i = 0; i < nc; ++i) {
      vs_.moles[c * nc + i] += omega * u[c * nb + 1 + i];
      ntot += std::max(0.0, vs_.moles[c * nc + i]);
    }
    for (int i = 0; i < nc; ++i) {
      double& n = vs_.moles[c * nc + i];
      if (n < 0.0 && n >= cfg_.neg_moles_rel * ntot) n = 0.0;
    }
  }
  return omega;
}

double WorkerSolver::fimResidualNorm(double dt_s, const GroupIndexing& gi,
                                     const std::vector<int>& group) {
  std::vector<double> resid;
  assembleFim(dt_s, gi, nullptr, resid);
  double norm = 0.0;
  for (double r : resid) norm = std::max(norm, std::fabs(r));
  return comm_->allreduceScalar(group, norm, ReduceOp::Max,
                                tags::reduction + 2);
}

bool WorkerSolver::fimConverged(double dt_s, const GroupIndexing& gi,
                                const std::vector<int>& group, double tol) {
  return fimResidualNorm(dt_s, gi, group) <= tol;
}

WorkerSolver::NewtonOutcome WorkerSolver::newtonLoop(
    const GroupIndexing& gi, const std::vector<int>& group, double dt_s,
    double tol_nr, double tol_ls, int max_nr, bool stop_at_max) {
  enum class Stage { Prepare, Assemble, Solve, Update, Check };
  NewtonOutcome out;
  std::vector<double> resid;
  Stage st = Stage::Prepare;
  while (true) {
    switch (st) {
      case Stage::Prepare: {
        exchangePrimaries(&group);
        std::string why;
        const bool ok = refreshProps(true, &why);
        if (!comm_->allreduceAnd(group, ok, tags::reduction + 3)) {
          out.cut_reason = "flash failed: " + why;
          return out;
        }
        refreshWells(true);
        st = Stage::Assemble;
        break;
      }
      case Stage::Assemble:
        assembleFim(dt_s, gi, &mat_, resid);
        st = Stage::Solve;
        break;
      case Stage::Solve: {
        GroupSolveComm sc(*dom_, gi, *comm_, nb_, tags::linear_solver);
        const LinearReport lr = solveLinear(mat_, tol_ls, cfg_.max_ls_iters,
                                            cfg_.gmres_restart, sc);
        out.ls += lr.iterations;
        if (!lr.converged) {
          out.cut_reason = "linear solver did not converge";
          return out;
        }
        st = Stage::Update;
        break;
      }
      case Stage::Update: {
        fimUpdate(mat_.solution(), group);
        ++out.nr;
        exchangePrimaries(&group);
        std::string why;
        const bool flash_ok = refreshProps(true, &why);
        const PhysicalCheck pc =
            flash_ok ? checkPhysical(vs_, cfg_) : PhysicalCheck{false, why};
        if (!comm_->allreduceAnd(group, flash_ok && pc.ok,
                                 tags::reduction + 3)) {
          out.cut_reason = "physical check failed: " + pc.reason;
          return out;
        }
        refreshWells(true);
        st = Stage::Check;
        break;
      }
      case Stage::Check: {
        if (fimConverged(dt_s, gi, group, tol_nr)) {
          out.converged = true;
          return out;
        }
        if (out.nr >= max_nr) {
          if (!stop_at_max)
            out.cut_reason = "Newton iteration limit reached";
          return out;
        }
        st = Stage::Assemble;
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// IMPEC

WorkerSolver::ImpecOutcome WorkerSolver::impecStep(double dt_s) {
  ImpecOutcome out;
  const int n_int = dom_->numInterior();
  const int np = vs_.np;
  const int nc = vs_.nc;
  const FluidModel& fluid = bulk_.fluid();

  {
    std::string why;
    const bool ok = refreshProps(true, &why);
    if (!comm_->allreduceAnd(world_, ok, tags::reduction + 3)) {
      out.reason = "flash failed: " + why;
      return out;
    }
  }
  refreshWells(true);

  // Frozen per-connection coefficients; fluxes are linear in pressure.
  std::vector<ImpecConnCoeff> coeff(dom_->local_conns.size());
  for (std::size_t k = 0; k < dom_->local_conns.size(); ++k) {
    const auto& conn = dom_->local_conns[k];
    coeff[k] = impecFluxCoeff(vs_, fluid, conn.a, conn.b, conn.trans);
  }

  mat_.begin(n_int, 1);
  std::vector<double> outflux(static_cast<std::size_t>(n_int) * nc, 0.0);
  for (std::size_t k = 0; k < dom_->local_conns.size(); ++k) {
    const auto& conn = dom_->local_conns[k];
    const double dp = vs_.pressure[conn.a] - vs_.pressure[conn.b];
    for (int i = 0; i < nc; ++i) {
      const double flow = coeff[k].m[i] * dp + coeff[k].r[i];
      if (conn.a < n_int) outflux[conn.a * nc + i] += flow;
      if (conn.b < n_int) outflux[conn.b * nc + i] -= flow;
    }
  }

  const int nv = nc + 1;
  for (int c = 0; c < n_int; ++c) {
    const double s = dt_s / vp_step_[c];
    double diag = (vs_.dvp_dp[c] - vs_.dvf_dp[c]) / vp_step_[c];
    double rhs = (vs_.vf[c] - vs_.vp[c]) / vp_step_[c];
    for (int i = 0; i < nc; ++i)
      rhs -= s * vs_.dvf_dn[c * nc + i] * outflux[c * nc + i];
    mat_.addBlock(c, full_gi_.group_col_of_local[c], {&diag, 1});
    mat_.addRhs(c, {&rhs, 1});
  }
  for (std::size_t k = 0; k < dom_->local_conns.size(); ++k) {
    const auto& conn = dom_->local_conns[k];
    for (int side = 0; side < 2; ++side) {
      const int row = side == 0 ? conn.a : conn.b;
      if (row >= n_int) continue;
      const double sgn = side == 0 ? 1.0 : -1.0;
      double sum_m = 0.0;
      for (int i = 0; i < nc; ++i)
        sum_m += vs_.dvf_dn[row * nc + i] * coeff[k].m[i];
      const double s = dt_s / vp_step_[row] * sgn * sum_m;
      const double da = s, db = -s;
      const long col_a = full_gi_.group_col_of_local[conn.a];
      const long col_b = full_gi_.group_col_of_local[conn.b];
      mat_.addBlock(row, col_a, {&da, 1});
      mat_.addBlock(row, col_b, {&db, 1});
    }
  }
  // Wells: BHP-controlled rates vary with cell pressure; rate-controlled
  // wells contribute their exact target and no pressure coupling.
  for (const auto& ws : wells_) {
    for (std::size_t m = 0; m < ws.perf_local.size(); ++m) {
      const int r = ws.perf_local[m];
      double rhs = 0.0;
      for (int i = 0; i < nc; ++i)
        rhs += dt_s / vp_step_[r] * vs_.dvf_dn[r * nc + i] *
               ws.q_perf[m * nc + i];
      mat_.addRhs(r, {&rhs, 1});
      if (ws.control.type == WellControlType::Bhp && ws.open &&
          !ws.control.shut) {
        double d = 0.0;
        for (int i = 0; i < nc; ++i)
          d -= dt_s / vp_step_[r] * vs_.dvf_dn[r * nc + i] *
               ws.dq_dx[(m * nc + i) * nv + 0];
        mat_.addBlock(r, full_gi_.group_col_of_local[r], {&d, 1});
      }
    }
  }

  GroupSolveComm sc(*dom_, full_gi_, *comm_, 1, tags::linear_solver);
  const LinearReport lr = solveLinear(mat_, cfg_.tol_ls_global,
                                      cfg_.max_ls_iters, cfg_.gmres_restart, sc);
  out.ls_iters = lr.iterations;
  if (!lr.converged) {
    out.reason = "pressure solve did not converge";
    return out;
  }

  for (int c = 0; c < n_int; ++c) vs_.pressure[c] += mat_.solution()[c];
  {
    FieldRef f[1] = {{vs_.pressure.data(), 1}};
    exchangeGhostFields(*dom_, *comm_, f, tags::ghost_exchange);
  }

  // Explicit component update with the frozen coefficients at new pressure,
  // plus the CFL number of the resulting volumetric outflow.
  std::fill(outflux.begin(), outflux.end(), 0.0);
  std::vector<double> outflow_v(n_int, 0.0);
  for (std::size_t k = 0; k < dom_->local_conns.size(); ++k) {
    const auto& conn = dom_->local_conns[k];
    const double dp = vs_.pressure[conn.a] - vs_.pressure[conn.b];
    for (int i = 0; i < nc; ++i) {
      const double flow = coeff[k].m[i] * dp + coeff[k].r[i];
      if (conn.a < n_int) outflux[conn.a * nc + i] += flow;
      if (conn.b < n_int) outflux[conn.b * nc + i] -= flow;
      const int up = coeff[k].up_is_b[i] ? conn.b : conn.a;
      const double qv = flow / vs_.xi[up * np + i];
      if (conn.a < n_int && qv > 0.0) outflow_v[conn.a] += qv;
      if (conn.b < n_int && qv < 0.0) outflow_v[conn.b] -= qv;
    }
  }
  refreshWells(false);  // rates at the new pressure, frozen mobilities
  for (const auto& ws : wells_) {
    for (std::size_t m = 0; m < ws.perf_local.size(); ++m) {
      const int r = ws.perf_local[m];
      for (int i = 0; i < nc; ++i) {
        outflux[r * nc + i] -= ws.q_perf[m * nc + i];
        const double qv = ws.q_perf[m * nc + i] / vs_.xi[r * np + i];
        if (qv < 0.0) outflow_v[r] -= qv;
      }
    }
  }

  double cfl = 0.0;
  for (int c = 0; c < n_int; ++c) {
    double smin = 1.0;
    for (int j = 0; j < np; ++j) {
      const double sj = vs_.sat[c * np + j];
      if (sj > 1e-6) smin = std::min(smin, sj);
    }
    cfl = std::max(cfl, dt_s * outflow_v[c] / (vp_step_[c] * smin));
  }
  cfl = comm_->allreduceScalar(world_, cfl, ReduceOp::Max, tags::reduction + 4);
  out.cfl = cfl;
  if (cfl > 1.0) {
    out.reason = "CFL violation";
    out.dt_suggest = cfg_.cfl_target * (dt_s / units::day) / cfl;
    return out;
  }

  for (int c = 0; c < n_int; ++c)
    for (int i = 0; i < nc; ++i)
      vs_.moles[c * nc + i] -= dt_s * outflux[c * nc + i];

  exchangePrimaries();
  std::string why;
  const bool flash_ok = refreshProps(false, &why);
  const PhysicalCheck pc =
      flash_ok ? checkPhysical(vs_, cfg_) : PhysicalCheck{false, why};
  if (!comm_->allreduceAnd(world_, flash_ok && pc.ok, tags::reduction + 3)) {
    out.reason = "physical check failed: " + pc.reason;
    return out;
  }
  out.ok = true;
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive coupling and the local solve

std::vector<int> WorkerSolver::computeCouplingGroups(StepReport& rep) {
  FieldRef f[1] = {{vs_.mark_ds.data(), 1}};
  exchangeGhostFields(*dom_, *comm_, f, tags::ghost_exchange);
  const auto flags = markCells(vs_.mark_ds, cfg_.ddm_mark_threshold);
  const CouplingGraph graph = buildCouplingGraph(*dom_, flags, *comm_);
  const auto comps = connectedComponents(graph);
  last_groups_ = comps;
  rep.n_groups = static_cast<int>(comps.size());
  int coupled = 0;
  for (const auto& c : comps)
    if (c.size() >= 2) coupled += static_cast<int>(c.size());
  rep.coupled_fraction = static_cast<double>(coupled) / dom_->n_ranks;
  for (const auto& c : comps)
    if (std::binary_search(c.begin(), c.end(), dom_->rank)) return c;
  return {dom_->rank};
}

WorkerSolver::LocalOutcome WorkerSolver::ddmLocalSolve(
    const std::vector<int>& group, double dt_s) {
  const GroupIndexing gi = buildGroupIndexing(*dom_, group);
  const NewtonOutcome no = newtonLoop(gi, group, dt_s, cfg_.tol_nr_local,
                                      cfg_.tol_ls_local, cfg_.max_nr_local,
                                      /*stop_at_max=*/true);
  LocalOutcome out;
  out.nr = no.nr;
  out.ls = no.ls;
  out.diverged = !no.cut_reason.empty();
  return out;
}

// ---------------------------------------------------------------------------

void WorkerSolver::saveStepStart() {
  std::copy(vs_.vp.begin(), vs_.vp.end(), vp_step_.begin());
}

void WorkerSolver::restoreStepStart() {
  std::copy(vs_.p_last.begin(), vs_.p_last.end(), vs_.pressure.begin());
  std::copy(vs_.moles_last.begin(), vs_.moles_last.end(), vs_.moles.begin());
  std::string why;
  if (!refreshProps(false, &why))
    throw StepFailed("restore failed to flash: " + why);
}

void WorkerSolver::acceptStep(StepReport& rep) {
  const int n_int = dom_->numInterior();
  const int np = vs_.np;
  double max_dp = 0.0, max_ds = 0.0;
  for (int c = 0; c < n_int; ++c) {
    max_dp = std::max(max_dp, std::fabs(vs_.pressure[c] - vs_.p_last[c]));
    double cell_ds = 0.0;
    for (int j = 0; j < np; ++j)
      cell_ds = std::max(
          cell_ds, std::fabs(vs_.sat[c * np + j] - vs_.sat_last[c * np + j]));
    vs_.mark_ds[c] = cell_ds;
    max_ds = std::max(max_ds, cell_ds);
  }
  rep.max_dp =
      comm_->allreduceScalar(world_, max_dp, ReduceOp::Max, tags::reduction + 5);
  rep.max_ds =
      comm_->allreduceScalar(world_, max_ds, ReduceOp::Max, tags::reduction + 5);
  std::copy(vs_.pressure.begin(), vs_.pressure.end(), vs_.p_last.begin());
  std::copy(vs_.moles.begin(), vs_.moles.end(), vs_.moles_last.begin());
  std::copy(vs_.sat.begin(), vs_.sat.end(), vs_.sat_last.begin());
  rep.accepted = true;
}

StepReport WorkerSolver::goOneStep(TimeControl& tc) {
  StepReport rep;
  saveStepStart();
  double dt = tc.dt;

  while (true) {
    rep.method_seq.clear();
    const double dt_s = dt * units::day;
    bool ok = false;
    bool fell_back = false;
    std::string fail;
    double dt_next_on_fail = dt * tc.cut_factor;
    int a_nr = 0, a_ls = 0, a_nrl = 0, a_lsl = 0;

    if (cfg_.method == Method::IMPEC) {
      rep.method_seq.push_back(StageMethod::IMPEC);
      const ImpecOutcome io = impecStep(dt_s);
      a_nr = 1;
      a_ls = io.ls_iters;
      rep.cfl = io.cfl;
      ok = io.ok;
      fail = io.reason;
      if (!ok && io.dt_suggest > 0.0)
        dt_next_on_fail = std::min(io.dt_suggest, 0.9 * dt);
    } else {
      const bool use_ddm =
          cfg_.method == Method::CDDM_FIM || cfg_.method == Method::ADDM_FIM;
      if (use_ddm && dom_->n_ranks > 1) {
        rep.method_seq.push_back(StageMethod::FIMddm);
        std::vector<int> group;
        if (cfg_.method == Method::ADDM_FIM) {
          group = computeCouplingGroups(rep);
        } else {
          group = {dom_->rank};
          rep.n_groups = dom_->n_ranks;
          rep.coupled_fraction = 0.0;
          last_groups_.clear();
          for (int r = 0; r < dom_->n_ranks; ++r) last_groups_.push_back({r});
        }
        const LocalOutcome lo = ddmLocalSolve(group, dt_s);
        const bool any_diverged = !comm_->allreduceAnd(
            world_, !lo.diverged, tags::reduction + 6);
        a_nrl = static_cast<int>(comm_->allreduceScalar(
            world_, lo.nr, ReduceOp::Max, tags::reduction + 7));
        a_lsl = static_cast<int>(comm_->allreduceScalar(
            world_, lo.ls, ReduceOp::Max, tags::reduction + 7));
        if (any_diverged) {
          // initial guess discarded; global FIM restarts from the last
          // accepted state
          restoreStepStart();
          rep.ddm_fallback = true;
          fell_back = true;
          rep.wasted_nr_local += a_nrl;
          rep.wasted_ls_local += a_lsl;
        }
      }
      rep.method_seq.push_back(StageMethod::FIM);
      const NewtonOutcome no =
          newtonLoop(full_gi_, world_, dt_s, cfg_.tol_nr_global,
                     cfg_.tol_ls_global, cfg_.max_nr_iters,
                     /*stop_at_max=*/false);
      a_nr = no.nr;
      a_ls = no.ls;
      ok = no.converged;
      fail = no.cut_reason.empty() ? "Newton did not converge" : no.cut_reason;
    }

    rep.nr_global += a_nr;
    rep.ls_global += a_ls;
    rep.nr_local += a_nrl;
    rep.ls_local += a_lsl;

    if (ok) {
      rep.dt_days = dt;
      acceptStep(rep);
      tc.dt = predictDt(rep, tc);
      return rep;
    }

    rep.wasted_nr_global += a_nr;
    rep.wasted_ls_global += a_ls;
    if (!fell_back) {
      rep.wasted_nr_local += a_nrl;
      rep.wasted_ls_local += a_lsl;
    }
    ++rep.cuts;
    restoreStepStart();
    dt = dt_next_on_fail;
    if (dt < tc.dt_min)
      throw StepFailed("time step fell below dt_min: " + fail);
  }
}

double WorkerSolver::predictDt(const StepReport& rep,
                               const TimeControl& tc) const {
  const double eps = 1e-300;
  double fac = std::min(tc.dp_target / std::max(rep.max_dp, eps),
                        tc.ds_target / std::max(rep.max_ds, eps));
  fac = std::min(fac, 2.0);
  double dt = rep.dt_days * fac;
  if (cfg_.method == Method::IMPEC && rep.cfl > 0.0)
    dt = std::min(dt, rep.dt_days * cfg_.cfl_target / rep.cfl);
  return std::clamp(dt, tc.dt_min, tc.dt_max);
}

double WorkerSolver::fieldAveragePressure() {
  const int n_int = dom_->numInterior();
  double pv = 0.0, pvp = 0.0;
  for (int c = 0; c < n_int; ++c) {
    pv += vs_.vp[c];
    pvp += vs_.vp[c] * vs_.pressure[c];
  }
  const auto sums = comm_->allreduce(world_, {pv, pvp}, ReduceOp::Sum,
                                     tags::reduction + 8);
  return sums[1] / sums[0];
}

}  // namespace porosim
