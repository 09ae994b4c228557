#include "porosim/sim.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <cstdio>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "porosim/bulk.hpp"
#include "porosim/output.hpp"
#include "porosim/solver.hpp"
#include "porosim/units.hpp"

namespace porosim {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::vector<int>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (int x : v) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<std::uint64_t>((x >> (8 * b)) & 0xff);
      h *= 1099511628211ull;
    }
  }
  return h;
}

struct SharedRun {
  const DeckModel* model = nullptr;
  const Grid* grid = nullptr;
  SolverConfig cfg;
  std::vector<DomainMaps>* doms = nullptr;
  MsgHub* hub = nullptr;
  std::vector<std::string> phase_names;
  std::vector<std::string> well_names;
  std::string out_dir;
  bool dump_domain = false;
  int verbosity = 0;

  // filled by rank 0
  std::mutex mu;
  RunStats stats;
  std::vector<json> step_groups;  // per accepted step, when dumping
};

// Per-step collective bookkeeping shared by every rank; rank 0 writes.
void recordStep(SharedRun& sh, WorkerSolver& solver, SummaryWriter* writer,
                double t_days, const StepReport& rep) {
  const auto& fluid = solver.bulk().fluid();
  const int np = fluid.np();
  const int n_wells = static_cast<int>(sh.well_names.size());

  SummaryRow row;
  row.time_days = t_days;
  row.fpr = solver.fieldAveragePressure();

  std::vector<double> packed(2 * np + n_wells * (np + 1), 0.0);
  for (const auto& ws : solver.wells()) {
    int widx = -1;
    for (int w = 0; w < n_wells; ++w)
      if (sh.well_names[w] == ws.spec.name) widx = w;
    double* wslot = packed.data() + 2 * np + widx * (np + 1);
    wslot[0] = ws.bhp;
    for (std::size_t m = 0; m < ws.perf_local.size(); ++m) {
      for (int i = 0; i < np; ++i) {
        const double q = ws.q_perf[m * np + i];
        const double surf = q / fluid.phases[i].xi_ref * units::day;
        wslot[1 + i] += surf;
        if (q > 0.0)
          packed[i] += surf;
        else
          packed[np + i] -= surf;
      }
    }
  }
  packed = solver.comm().allreduce(solver.worldGroup(), packed, ReduceOp::Sum,
                                   tags::output);
  row.inj_rate.assign(packed.begin(), packed.begin() + np);
  row.prod_rate.assign(packed.begin() + np, packed.begin() + 2 * np);
  row.well_bhp.resize(n_wells);
  row.well_rate.assign(static_cast<std::size_t>(n_wells) * np, 0.0);
  for (int w = 0; w < n_wells; ++w) {
    row.well_bhp[w] = packed[2 * np + w * (np + 1)];
    for (int i = 0; i < np; ++i)
      row.well_rate[w * np + i] = packed[2 * np + w * (np + 1) + 1 + i];
  }

  std::string methods;
  for (const auto m : rep.method_seq) {
    if (!methods.empty()) methods += '+';
    methods += stageMethodName(m);
  }
  row.methods = methods;
  row.dt_days = rep.dt_days;
  row.nr_g = rep.nr_global;
  row.ls_g = rep.ls_global;
  row.nr_l = rep.nr_local;
  row.ls_l = rep.ls_local;
  row.wasted_nr_g = rep.wasted_nr_global;
  row.wasted_ls_g = rep.wasted_ls_global;
  row.wasted_nr_l = rep.wasted_nr_local;
  row.wasted_ls_l = rep.wasted_ls_local;
  row.cuts = rep.cuts;
  row.n_groups = rep.n_groups;
  row.coupled_fraction = rep.coupled_fraction;
  row.max_dp = rep.max_dp;
  row.max_ds = rep.max_ds;
  row.cfl = rep.cfl;

  if (writer) writer->writeRow(row);
  if (sh.verbosity > 0 && solver.domain().rank == 0)
    std::fprintf(stderr, "t=%.4g d  dt=%.4g  %s  nr=%d ls=%d groups=%d\n",
                 t_days, rep.dt_days, methods.c_str(), rep.nr_global,
                 rep.ls_global, rep.n_groups);

  if (solver.domain().rank == 0) {
    std::lock_guard<std::mutex> lk(sh.mu);
    RunStats& st = sh.stats;
    st.steps += 1;
    st.nr_g += rep.nr_global;
    st.ls_g += rep.ls_global;
    st.wasted_nr_g += rep.wasted_nr_global;
    st.wasted_ls_g += rep.wasted_ls_global;
    st.nr_l += rep.nr_local;
    st.ls_l += rep.ls_local;
    st.wasted_nr_l += rep.wasted_nr_local;
    st.wasted_ls_l += rep.wasted_ls_local;
    st.end_time_days = t_days;
    st.coupled_fraction_per_step.push_back(rep.coupled_fraction);
  }
}

void workerMain(SharedRun& sh, int rank) {
  Comm comm(*sh.hub, rank);
  const DeckModel& m = *sh.model;
  const DomainMaps& dom = (*sh.doms)[rank];

  Bulk bulk(FluidModel::fromSpec(m.fluid),
            SatModel::fromSpec(m.sat_table, m.fluid), RockModel{
                m.rock.p_ref, m.rock.compressibility});
  WorkerSolver solver(*sh.grid, dom, std::move(bulk), sh.cfg, comm);

  // Wells whose perforations this worker owns.
  for (const auto& ws : m.wells) {
    const auto cells = wellCells(*sh.grid, ws);
    const int l0 = dom.localOf(cells.front());
    if (l0 < 0 || l0 >= dom.numInterior()) continue;
    solver.wells().push_back(makeWellState(
        *sh.grid, ws, [&](int gid) { return dom.localOf(gid); }));
  }

  solver.initState(m.init);

  std::unique_ptr<SummaryWriter> writer;
  if (rank == 0)
    writer = std::make_unique<SummaryWriter>(sh.out_dir, sh.phase_names,
                                             sh.well_names);

  TimeControl tc;
  tc.dt = std::min(sh.cfg.dt_init, sh.cfg.dt_max);
  tc.dt_min = sh.cfg.dt_min;
  tc.dt_max = sh.cfg.dt_max;
  tc.dp_target = sh.cfg.dp_target;
  tc.ds_target = sh.cfg.ds_target;
  tc.cut_factor = sh.cfg.cut_factor;

  double t = 0.0;
  writeSnapshot(sh.out_dir, rank, solver.varset(), dom, sh.phase_names, t);

  for (std::size_t e = 0; e < m.schedule.size(); ++e) {
    const ScheduleEvent& ev = m.schedule[e];
    solver.applyControls(ev.controls);
    const double t_end = e + 1 < m.schedule.size()
                             ? m.schedule[e + 1].time_days
                             : m.schedule.back().time_days;
    if (ev.time_days >= t_end) continue;  // final event only carries controls
    t = ev.time_days;
    const double tiny = 1e-9 * std::max(1.0, t_end);
    while (t_end - t > tiny) {
      double dt = std::min(tc.dt, t_end - t);
      if (t_end - t - dt < tc.dt_min) dt = t_end - t;
      tc.dt = dt;
      StepReport rep = solver.goOneStep(tc);
      t += rep.dt_days;
      if (t_end - t <= tiny) t = t_end;
      recordStep(sh, solver, writer.get(), t, rep);
      if (sh.dump_domain && rank == 0 && rep.n_groups > 0) {
        std::lock_guard<std::mutex> lk(sh.mu);
        json g;
        g["time_days"] = t;
        g["n_groups"] = rep.n_groups;
        g["coupled_fraction"] = rep.coupled_fraction;
        g["groups"] = solver.lastGroups();
        sh.step_groups.push_back(g);
      }
    }
    writeSnapshot(sh.out_dir, rank, solver.varset(), dom, sh.phase_names, t_end);
  }
}

}  // namespace

RunStats runSimulation(const DeckModel& model, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();

  DeckModel m = model;
  if (opts.workers_override > 0) m.solver.n_workers = opts.workers_override;
  if (opts.method_override) m.solver.method = *opts.method_override;

  const auto report = validateDeck(m);
  if (!report.ok())
    throw std::runtime_error("deck is invalid:\n" + report.toString());

  const Grid grid = buildGrid(m);
  const ConnectionList conns = buildConnections(grid);
  const int n_workers = std::min(m.solver.n_workers, grid.n_active);
  const PartitionResult part = partitionGrid(grid, m.wells, n_workers);
  std::vector<DomainMaps> doms =
      buildDomainMaps(grid, conns, part.rank_of, n_workers);

  std::filesystem::create_directories(opts.out_dir);

  MsgHub hub(n_workers);
  SharedRun sh;
  sh.model = &m;
  sh.grid = &grid;
  sh.cfg = m.solver;
  sh.cfg.n_workers = n_workers;
  sh.doms = &doms;
  sh.hub = &hub;
  for (const auto& f : m.fluid.phases) sh.phase_names.push_back(phaseName(f.phase));
  for (const auto& w : m.wells) sh.well_names.push_back(w.name);
  sh.out_dir = opts.out_dir;
  sh.dump_domain = opts.dump_domain;
  sh.verbosity = opts.verbosity;
  sh.stats.n_workers = n_workers;
  sh.stats.method = methodName(m.solver.method);

  std::vector<std::exception_ptr> errors(n_workers);
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (int r = 0; r < n_workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        workerMain(sh, r);
      } catch (...) {
        errors[r] = std::current_exception();
        hub.abort("worker " + std::to_string(r) + " failed");
      }
    });
  }
  for (auto& th : threads) th.join();

  for (int r = 0; r < n_workers; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const CommAborted&) {
      continue;  // secondary failure; keep looking for the root cause
    } catch (...) {
      std::rethrow_exception(errors[r]);
    }
  }
  for (int r = 0; r < n_workers; ++r)
    if (errors[r]) std::rethrow_exception(errors[r]);

  const auto t1 = std::chrono::steady_clock::now();
  sh.stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

  // run_meta.json: config echo, partition hash, totals.
  json meta;
  meta["format_version"] = 1;
  meta["porosim_version"] = "0.1.0";
  meta["title"] = m.title;
  meta["method"] = methodName(m.solver.method);
  meta["n_workers"] = n_workers;
  meta["n_active_cells"] = grid.n_active;
  meta["partition_hash"] = fnv1a(part.rank_of);
  meta["partition_notes"] = part.notes;
  meta["end_time_days"] = sh.stats.end_time_days;
  meta["phases"] = sh.phase_names;
  meta["wells"] = sh.well_names;
  meta["totals"] = {{"steps", sh.stats.steps},
                    {"nr_g", sh.stats.nr_g},
                    {"ls_g", sh.stats.ls_g},
                    {"wasted_nr_g", sh.stats.wasted_nr_g},
                    {"wasted_ls_g", sh.stats.wasted_ls_g},
                    {"nr_l", sh.stats.nr_l},
                    {"ls_l", sh.stats.ls_l},
                    {"wasted_nr_l", sh.stats.wasted_nr_l},
                    {"wasted_ls_l", sh.stats.wasted_ls_l}};
  meta["wall_seconds"] = sh.stats.wall_seconds;
  meta["coupled_fraction_per_step"] = sh.stats.coupled_fraction_per_step;
  {
    std::ofstream mf(opts.out_dir + "/run_meta.json", std::ios::trunc);
    mf << meta.dump(2) << '\n';
  }

  if (opts.dump_domain) {
    json dj;
    dj["rank_of"] = part.rank_of;
    json ranks = json::array();
    for (const auto& d : doms) {
      json r;
      r["rank"] = d.rank;
      r["interior"] = d.interior;
      r["ghosts"] = d.ghosts;
      r["ghost_owner"] = d.ghost_owner;
      json send, recv;
      for (const auto& [to, list] : d.send_element_loc)
        send[std::to_string(to)] = list;
      for (const auto& [from, range] : d.recv_element_loc)
        recv[std::to_string(from)] = {range.first, range.second};
      r["send_element_loc"] = send;
      r["recv_element_loc"] = recv;
      ranks.push_back(r);
    }
    dj["ranks"] = ranks;
    dj["step_groups"] = sh.step_groups;
    std::ofstream df(opts.out_dir + "/domain.json", std::ios::trunc);
    df << dj.dump(2) << '\n';
  }

  gatherOutputs(opts.out_dir, n_workers);
  return sh.stats;
}

RunStats runSimulationFile(const std::string& deck_path,
                           const RunOptions& opts) {
  const DeckModel model = parseDeckFile(deck_path);
  return runSimulation(model, opts);
}

}  // namespace porosim
