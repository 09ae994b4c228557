#include <doctest.h>

#include <functional>
#include <random>
#include <thread>

#include "porosim/sim.hpp"
#include "porosim/solver.hpp"
#include "porosim/units.hpp"
#include "testutil.hpp"

using namespace porosim;

namespace {

struct Harness {
  DeckModel model;
  Grid grid;
  ConnectionList conns;
  PartitionResult part;
  std::vector<DomainMaps> doms;
  int n_workers;

  explicit Harness(DeckModel m, int workers = 0)
      : model(std::move(m)),
        grid(buildGrid(model)),
        conns(buildConnections(grid)),
        part(partitionGrid(grid, model.wells,
                           workers > 0 ? workers : model.solver.n_workers)),
        doms(buildDomainMaps(grid, conns, part.rank_of, part.n_ranks)),
        n_workers(part.n_ranks) {}

  Bulk makeBulk() const {
    return Bulk(FluidModel::fromSpec(model.fluid),
                SatModel::fromSpec(model.sat_table, model.fluid),
                RockModel{model.rock.p_ref, model.rock.compressibility});
  }

  // Spawns workers, builds an initialized solver per rank with controls of
  // the first schedule event applied, and runs fn collectively.
  void run(const std::function<void(WorkerSolver&)>& fn) {
    MsgHub hub(n_workers);
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> ts;
    for (int r = 0; r < n_workers; ++r) {
      ts.emplace_back([&, r] {
        try {
          Comm comm(hub, r);
          SolverConfig cfg = model.solver;
          cfg.n_workers = n_workers;
          WorkerSolver ws(grid, doms[r], makeBulk(), cfg, comm);
          for (const auto& w : model.wells) {
            const auto cells = wellCells(grid, w);
            const int l0 = doms[r].localOf(cells.front());
            if (l0 < 0 || l0 >= doms[r].numInterior()) continue;
            ws.wells().push_back(makeWellState(
                grid, w, [&](int gid) { return doms[r].localOf(gid); }));
          }
          ws.initState(model.init);
          if (!model.schedule.empty())
            ws.applyControls(model.schedule.front().controls);
          fn(ws);
        } catch (...) {
          errors[r] = std::current_exception();
          hub.abort("worker failed");
        }
      });
    }
    for (auto& t : ts) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
};

TimeControl makeTc(const SolverConfig& cfg) {
  TimeControl tc;
  tc.dt = cfg.dt_init;
  tc.dt_min = cfg.dt_min;
  tc.dt_max = cfg.dt_max;
  tc.dp_target = cfg.dp_target;
  tc.ds_target = cfg.ds_target;
  tc.cut_factor = cfg.cut_factor;
  return tc;
}

DeckModel noWellsModel() {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.wells.clear();
  for (auto& ev : m.schedule) ev.controls.clear();
  return m;
}

}  // namespace

TEST_CASE("equilibrium with no sources converges in one Newton iteration") {
  Harness h(noWellsModel());
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    const auto before = ws.varset().pressure;
    const StepReport rep = ws.goOneStep(tc);
    CHECK(rep.accepted);
    CHECK(rep.nr_global == 1);
    CHECK(rep.cuts == 0);
    for (std::size_t i = 0; i < before.size(); ++i)
      CHECK(ws.varset().pressure[i] ==
            doctest::Approx(before[i]).epsilon(1e-12));
  });
}

TEST_CASE("two-cell FIM matrix has exactly two blocks per row") {
  Harness h(parseDeck(testutil::tinyDeck()));
  h.run([&](WorkerSolver& ws) {
    REQUIRE(ws.refreshProps(true, nullptr));
    for (auto& w : ws.wells())
      computeWellRates(w, ws.varset(), ws.bulk().fluid(), ws.config(), true);
    SegmentedBlockMatrix mat;
    std::vector<double> resid;
    ws.assembleFim(0.5 * units::day, ws.fullIndexing(), &mat, resid);
    REQUIRE(mat.numRows() == 2);
    CHECK(mat.colIds(0).size() == 2);
    CHECK(mat.colIds(1).size() == 2);
  });
}

TEST_CASE("FIM Jacobian-vector products match finite differences") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.nx = 3;
  m.dx.assign(3, 10.0);
  m.poro.assign(3, 0.2);
  m.permx.assign(3, 100.0 * units::millidarcy);
  m.permy.assign(3, 100.0 * units::millidarcy);
  m.permz.assign(3, 10.0 * units::millidarcy);
  m.actnum.assign(3, 1);
  m.wells[1].i = 2;  // producer in the last cell
  Harness h(m);

  h.run([&](WorkerSolver& ws) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> pd(1.8e7, 2.3e7);
    std::uniform_real_distribution<double> nd(2e4, 4e5);
    std::uniform_real_distribution<double> vd(-1.0, 1.0);
    const int n = 3, nb = 3;
    const double dt_s = 2.0 * units::day;

    auto setState = [&](const std::vector<double>& x) {
      auto& vs = ws.varset();
      for (int c = 0; c < n; ++c) {
        vs.pressure[c] = x[c * nb];
        vs.moles[c * 2 + 0] = x[c * nb + 1];
        vs.moles[c * 2 + 1] = x[c * nb + 2];
      }
      REQUIRE(ws.refreshProps(true, nullptr));
      for (auto& w : ws.wells())
        computeWellRates(w, ws.varset(), ws.bulk().fluid(), ws.config(), true);
    };
    auto residAt = [&](const std::vector<double>& x) {
      setState(x);
      std::vector<double> r;
      ws.assembleFim(dt_s, ws.fullIndexing(), nullptr, r);
      return r;
    };

    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> x(n * nb);
      for (int c = 0; c < n; ++c) {
        x[c * nb] = pd(rng);
        x[c * nb + 1] = nd(rng);
        x[c * nb + 2] = nd(rng);
      }
      setState(x);
      SegmentedBlockMatrix mat;
      std::vector<double> r0;
      ws.assembleFim(dt_s, ws.fullIndexing(), &mat, r0);

      // random direction scaled per component
      std::vector<double> v(n * nb);
      for (int k = 0; k < n * nb; ++k) v[k] = vd(rng) * x[k];
      const double hrel = 1e-6;
      std::vector<double> xp = x, xm = x;
      for (int k = 0; k < n * nb; ++k) {
        xp[k] += hrel * v[k];
        xm[k] -= hrel * v[k];
      }
      const auto rp = residAt(xp);
      const auto rm = residAt(xm);

      // J v from the assembled matrix
      const auto dense = testutil::denseFromSegmented(mat, n);
      std::vector<double> jv(n * nb, 0.0);
      for (int i = 0; i < n * nb; ++i)
        for (int j = 0; j < n * nb; ++j) jv[i] += dense[i * n * nb + j] * v[j];

      double num = 0.0, den = 0.0;
      for (int i = 0; i < n * nb; ++i) {
        const double fd = (rp[i] - rm[i]) / (2 * hrel);
        num += (jv[i] - fd) * (jv[i] - fd);
        den += jv[i] * jv[i];
      }
      CHECK(std::sqrt(num) <= 1e-5 * std::max(std::sqrt(den), 1e-12));
    }
  });
}

TEST_CASE("fimUpdate applies the saturation chop") {
  Harness h(noWellsModel());
  h.run([&](WorkerSolver& ws) {
    REQUIRE(ws.refreshProps(true, nullptr));
    const int nb = 3;
    std::vector<double> u(2 * nb, 0.0);

    SUBCASE("zero update leaves the state unchanged") {
      const auto before = ws.varset().pressure;
      const double omega = ws.fimUpdate(u, ws.worldGroup());
      CHECK(omega == 1.0);
      CHECK(ws.varset().pressure == before);
    }
    SUBCASE("small changes keep the full Newton step") {
      u[0] = 10.0;  // 10 Pa
      CHECK(ws.fimUpdate(u, ws.worldGroup()) == 1.0);
    }
    SUBCASE("a step that would blow past the chop limit is damped") {
      u[1] = 1.0e7;  // huge water-mole change
      const double omega = ws.fimUpdate(u, ws.worldGroup());
      CHECK(omega < 1.0);
      CHECK(omega > 0.0);
    }
  });
}

TEST_CASE("fimConverged verdicts at tolerance extremes") {
  Harness h(noWellsModel());
  h.run([&](WorkerSolver& ws) {
    REQUIRE(ws.refreshProps(true, nullptr));
    const double dt_s = 1.0 * units::day;
    // equilibrium: residual is tiny but nonzero, so tol=0 must fail
    CHECK(ws.fimConverged(dt_s, ws.fullIndexing(), ws.worldGroup(), 1e-4));
    CHECK_FALSE(
        ws.fimConverged(dt_s, ws.fullIndexing(), ws.worldGroup(), 0.0));
  });
}

TEST_CASE("IMPEC: single-cell injector mass balance is exact") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.nx = 1;
  m.dx = {10.0};
  m.poro = {0.2};
  m.permx = {100 * units::millidarcy};
  m.permy = {100 * units::millidarcy};
  m.permz = {10 * units::millidarcy};
  m.actnum = {1};
  m.wells.resize(1);  // keep the injector only
  m.schedule[0].controls.resize(1);
  m.solver.method = Method::IMPEC;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    const auto n_before = ws.varset().moles;
    TimeControl tc = makeTc(ws.config());
    tc.dt = 0.25;
    const StepReport rep = ws.goOneStep(tc);
    CHECK(rep.accepted);
    const double dt_s = rep.dt_days * units::day;
    const double target_mol = wellTargetSi(ws.wells()[0], ws.bulk().fluid());
    const double dn = ws.varset().moles[0] - n_before[0];
    CHECK(dn == doctest::Approx(dt_s * target_mol).epsilon(1e-12));
    CHECK(ws.varset().moles[1] == doctest::Approx(n_before[1]));
  });
}

TEST_CASE("IMPEC: uniform pressure with no wells changes nothing") {
  DeckModel m = noWellsModel();
  m.nx = 4;
  m.dx.assign(4, 10.0);
  m.poro.assign(4, 0.2);
  m.permx.assign(4, 100 * units::millidarcy);
  m.permy.assign(4, 100 * units::millidarcy);
  m.permz.assign(4, 10 * units::millidarcy);
  m.actnum.assign(4, 1);
  m.solver.method = Method::IMPEC;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    const auto p0 = ws.varset().pressure;
    const auto n0 = ws.varset().moles;
    const auto out = ws.impecStep(0.5 * units::day);
    CHECK(out.ok);
    for (std::size_t i = 0; i < p0.size(); ++i)
      CHECK(ws.varset().pressure[i] == doctest::Approx(p0[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < n0.size(); ++i)
      CHECK(ws.varset().moles[i] == doctest::Approx(n0[i]).epsilon(1e-12));
  });
}

TEST_CASE("IMPEC two-cell step matches a hand-built linearized update") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.wells.clear();
  for (auto& ev : m.schedule) ev.controls.clear();
  m.solver.method = Method::IMPEC;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    // put the pair out of equilibrium
    auto& vs = ws.varset();
    vs.pressure[0] += 2.0e5;
    REQUIRE(ws.refreshProps(true, nullptr));
    std::copy(vs.pressure.begin(), vs.pressure.end(), vs.p_last.begin());
    std::copy(vs.moles.begin(), vs.moles.end(), vs.moles_last.begin());
    std::copy(vs.sat.begin(), vs.sat.end(), vs.sat_last.begin());

    const double dt_s = 0.1 * units::day;

    // hand-built 2x2 pressure system from the documented linearization
    const auto& fluid = ws.bulk().fluid();
    const double trans = ws.domain().local_conns[0].trans;
    const ImpecConnCoeff cf = impecFluxCoeff(vs, fluid, 0, 1, trans);
    double A[4] = {0, 0, 0, 0}, rhs[2];
    for (int c = 0; c < 2; ++c) {
      A[c * 2 + c] += (vs.dvp_dp[c] - vs.dvf_dp[c]) / vs.vp[c];
      rhs[c] = (vs.vf[c] - vs.vp[c]) / vs.vp[c];
    }
    const double dp0 = vs.pressure[0] - vs.pressure[1];
    for (int c = 0; c < 2; ++c) {
      const double sgn = c == 0 ? 1.0 : -1.0;
      double sum_m = 0.0, sum_r = 0.0;
      for (int i = 0; i < 2; ++i) {
        sum_m += vs.dvf_dn[c * 2 + i] * cf.m[i];
        sum_r += vs.dvf_dn[c * 2 + i] * (cf.m[i] * dp0 + cf.r[i]);
      }
      const double s = dt_s / vs.vp[c];
      A[c * 2 + 0] += s * sgn * sum_m;
      A[c * 2 + 1] -= s * sgn * sum_m;
      rhs[c] -= s * sgn * sum_r;
    }
    const double det = A[0] * A[3] - A[1] * A[2];
    const double dpa = (rhs[0] * A[3] - A[1] * rhs[1]) / det;
    const double dpb = (A[0] * rhs[1] - rhs[0] * A[2]) / det;
    const double p0_expect = vs.pressure[0] + dpa;
    const double p1_expect = vs.pressure[1] + dpb;
    // explicit component update at the new pressures, frozen coefficients
    const double dp_new = p0_expect - p1_expect;
    double dn_expect[2][2];
    for (int i = 0; i < 2; ++i) {
      const double flow = cf.m[i] * dp_new + cf.r[i];
      dn_expect[0][i] = -dt_s * flow;
      dn_expect[1][i] = dt_s * flow;
    }
    const auto n_before = vs.moles;

    const auto out = ws.impecStep(dt_s);
    CHECK(out.ok);
    CHECK(vs.pressure[0] == doctest::Approx(p0_expect).epsilon(1e-10));
    CHECK(vs.pressure[1] == doctest::Approx(p1_expect).epsilon(1e-10));
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 2; ++i)
        CHECK(vs.moles[c * 2 + i] ==
              doctest::Approx(n_before[c * 2 + i] + dn_expect[c][i])
                  .epsilon(1e-10));
  });
}

TEST_CASE("predict_dt follows the growth formula and its clamps") {
  Harness h(noWellsModel());
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    tc.dp_target = 1e6;
    tc.ds_target = 0.05;
    tc.dt_max = 100.0;
    StepReport rep;
    rep.dt_days = 1.0;

    rep.max_dp = 1.0;  // tiny changes
    rep.max_ds = 1e-9;
    CHECK(ws.predictDt(rep, tc) == doctest::Approx(2.0));  // growth cap

    rep.max_ds = 0.1;  // twice the target
    rep.max_dp = 1.0;
    CHECK(ws.predictDt(rep, tc) == doctest::Approx(0.5));

    rep.max_ds = 1e-9;
    rep.max_dp = 1.0;
    tc.dt_max = 1.5;
    CHECK(ws.predictDt(rep, tc) == doctest::Approx(1.5));  // dt_max clamp
  });
}

TEST_CASE("IMPEC CFL violation cuts dt, records waste, then succeeds") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.solver.method = Method::IMPEC;
  m.solver.dt_init = 5.0;  // aggressive first step to force a CFL cut
  m.solver.dt_min = 1e-6;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    const StepReport rep = ws.goOneStep(tc);
    CHECK(rep.accepted);
    CHECK(rep.cuts >= 1);
    CHECK(rep.wasted_nr_global >= 1);
    CHECK(rep.dt_days < 5.0);
  });
}

TEST_CASE("unconvergeable Newton cuts until StepFailed") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.solver.tol_nr_global = 1e-30;
  m.solver.tol_nr_local = 1e-2;
  m.solver.max_nr_iters = 2;
  m.solver.dt_min = 0.2;
  m.solver.dt_init = 1.0;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    CHECK_THROWS_AS(ws.goOneStep(tc), StepFailed);
  });
}

TEST_CASE("FIM mass ledger closes per accepted step") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.solver.tol_nr_global = 1e-9;
  m.solver.tol_ls_global = 1e-11;
  Harness h(m);
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    for (int step = 0; step < 3; ++step) {
      const auto n_before = ws.varset().moles;
      const StepReport rep = ws.goOneStep(tc);
      REQUIRE(rep.accepted);
      const double dt_s = rep.dt_days * units::day;
      for (int i = 0; i < 2; ++i) {
        double dn = 0.0, mass = 0.0, q = 0.0;
        for (int c = 0; c < 2; ++c) {
          dn += ws.varset().moles[c * 2 + i] - n_before[c * 2 + i];
          mass += ws.varset().moles[c * 2 + i];
        }
        for (const auto& w : ws.wells())
          for (std::size_t p = 0; p < w.perf_local.size(); ++p)
            q += w.q_perf[p * 2 + i];
        CHECK(std::fabs(dn - dt_s * q) <= 1e-8 * std::max(mass, 1.0));
      }
    }
  });
}

TEST_CASE("a full-group local solve is bit-identical to global FIM") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.nx = 8;
  m.dx.assign(8, 10.0);
  m.poro.assign(8, 0.2);
  m.permx.assign(8, 100 * units::millidarcy);
  m.permy.assign(8, 100 * units::millidarcy);
  m.permz.assign(8, 10 * units::millidarcy);
  m.actnum.assign(8, 1);
  m.wells[1].i = 7;
  m.solver.n_workers = 2;
  m.solver.tol_nr_local = m.solver.tol_nr_global;
  m.solver.tol_ls_local = m.solver.tol_ls_global;
  m.solver.max_nr_local = m.solver.max_nr_iters;

  std::vector<std::vector<double>> p_fim(2), p_ddm(2);
  {
    Harness h(m, 2);
    h.run([&](WorkerSolver& ws) {
      TimeControl tc = makeTc(ws.config());
      ws.goOneStep(tc);
      p_fim[ws.domain().rank] = ws.varset().pressure;
    });
  }
  {
    Harness h(m, 2);
    h.run([&](WorkerSolver& ws) {
      const double dt_s = ws.config().dt_init * units::day;
      const auto out = ws.ddmLocalSolve({0, 1}, dt_s);
      CHECK_FALSE(out.diverged);
      p_ddm[ws.domain().rank] = ws.varset().pressure;
    });
  }
  CHECK(p_fim == p_ddm);
}

TEST_CASE("decoupled halves: singleton local solves reach the global answer") {
  // a 5x1x1 strip with the middle cell inactive: two isolated halves
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.nx = 5;
  m.dx.assign(5, 10.0);
  m.poro.assign(5, 0.2);
  m.permx.assign(5, 100 * units::millidarcy);
  m.permy.assign(5, 100 * units::millidarcy);
  m.permz.assign(5, 10 * units::millidarcy);
  m.actnum = {1, 1, 0, 1, 1};
  m.wells[0].i = 0;  // injector left half
  m.wells[1].i = 4;  // producer right half
  m.solver.method = Method::CDDM_FIM;
  m.solver.n_workers = 2;

  std::vector<std::vector<double>> p_cddm(2), p_fim(2);
  {
    Harness h(m, 2);
    h.run([&](WorkerSolver& ws) {
      TimeControl tc = makeTc(ws.config());
      const StepReport rep = ws.goOneStep(tc);
      CHECK(rep.accepted);
      CHECK(rep.nr_local >= 1);
      // the DDM guess already solves the decoupled physics, so global FIM
      // confirms it immediately
      CHECK(rep.nr_global <= 2);
      REQUIRE(rep.method_seq.size() == 2);
      CHECK(rep.method_seq[0] == StageMethod::FIMddm);
      CHECK(rep.method_seq[1] == StageMethod::FIM);
      p_cddm[ws.domain().rank] = ws.varset().pressure;
    });
  }
  {
    DeckModel mf = m;
    mf.solver.method = Method::FIM;
    Harness h(mf, 2);
    h.run([&](WorkerSolver& ws) {
      TimeControl tc = makeTc(ws.config());
      ws.goOneStep(tc);
      p_fim[ws.domain().rank] = ws.varset().pressure;
    });
  }
  for (int r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < p_fim[r].size(); ++i)
      CHECK(p_cddm[r][i] ==
            doctest::Approx(p_fim[r][i]).epsilon(10 * m.solver.tol_nr_global));
}

TEST_CASE("method handoff records the sequence and discards a bad guess") {
  // infeasible local tolerance with one local iteration still hands off
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.solver.method = Method::CDDM_FIM;
  m.solver.n_workers = 2;
  m.solver.max_nr_local = 1;
  Harness h(m, 2);
  h.run([&](WorkerSolver& ws) {
    TimeControl tc = makeTc(ws.config());
    const StepReport rep = ws.goOneStep(tc);
    CHECK(rep.accepted);
    REQUIRE(rep.method_seq.size() == 2);
    CHECK(rep.method_seq[0] == StageMethod::FIMddm);
    CHECK(rep.method_seq[1] == StageMethod::FIM);
  });
}

TEST_CASE("check_physical verdict is worker-count independent") {
  DeckModel m = noWellsModel();
  m.nx = 8;
  m.dx.assign(8, 10.0);
  m.poro.assign(8, 0.2);
  m.permx.assign(8, 100 * units::millidarcy);
  m.permy.assign(8, 100 * units::millidarcy);
  m.permz.assign(8, 10 * units::millidarcy);
  m.actnum.assign(8, 1);

  for (int workers : {1, 4}) {
    Harness h(m, workers);
    h.run([&](WorkerSolver& ws) {
      // corrupt global cell 5 wherever it lives
      auto& vs = ws.varset();
      const int l = ws.domain().localOf(5);
      if (l >= 0 && l < ws.domain().numInterior()) vs.moles[l * 2 + 0] = -1.0;
      const PhysicalCheck pc = checkPhysical(vs, ws.config());
      const bool global_ok =
          ws.comm().allreduceAnd(ws.worldGroup(), pc.ok, 250);
      CHECK_FALSE(global_ok);
    });
  }
}

TEST_CASE("1- and 4-worker states agree bitwise after an exchange-and-flash "
          "round") {
  DeckModel m = noWellsModel();
  m.nx = 6;
  m.ny = 4;
  m.dx.assign(6, 10.0);
  m.dy.assign(4, 10.0);
  const long n = m.numCells();
  m.poro.assign(n, 0.2);
  m.permx.assign(n, 100 * units::millidarcy);
  m.permy.assign(n, 100 * units::millidarcy);
  m.permz.assign(n, 10 * units::millidarcy);
  m.actnum.assign(n, 1);

  // reference: single worker, interior state per gid
  std::vector<double> p_ref(n), nw_ref(n);
  {
    Harness h(m, 1);
    h.run([&](WorkerSolver& ws) {
      for (int l = 0; l < ws.domain().numInterior(); ++l) {
        p_ref[ws.domain().interior[l]] = ws.varset().pressure[l];
        nw_ref[ws.domain().interior[l]] = ws.varset().moles[l * 2];
      }
    });
  }
  Harness h(m, 4);
  h.run([&](WorkerSolver& ws) {
    ws.exchangePrimaries();
    REQUIRE(ws.refreshProps(false, nullptr));
    for (int l = 0; l < ws.domain().numLocal(); ++l) {
      const int gid = ws.domain().gidOfLocal(l);
      CHECK(ws.varset().pressure[l] == p_ref[gid]);
      CHECK(ws.varset().moles[l * 2] == nw_ref[gid]);
    }
  });
}
