#include <doctest.h>

#include <random>

#include "porosim/bulk.hpp"
#include "porosim/units.hpp"
#include "testutil.hpp"

using namespace porosim;

namespace {

Bulk tinyBulk() {
  const DeckModel m = parseDeck(testutil::tinyDeck());
  return Bulk(FluidModel::fromSpec(m.fluid),
              SatModel::fromSpec(m.sat_table, m.fluid),
              RockModel{m.rock.p_ref, m.rock.compressibility});
}

}  // namespace

TEST_CASE("flash reduces to reference densities when incompressible") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  for (auto& f : m.fluid.phases) f.compressibility = 0.0;
  Bulk b(FluidModel::fromSpec(m.fluid), SatModel::fromSpec(m.sat_table, m.fluid),
         RockModel{m.rock.p_ref, 0.0});
  const double N[2] = {100.0, 50.0};
  const CellState s = b.flashCell(3.3e7, {N, 2});
  CHECK(s.xi[0] == 55500.0);
  CHECK(s.xi[1] == 7000.0);
  const CellState s2 = b.flashCellFim(1.0e5, {N, 2});
  CHECK(s2.dxi_dp[0] == 0.0);
  CHECK(s2.dxi_dp[1] == 0.0);
}

TEST_CASE("single-phase moles give unit saturation") {
  const Bulk b = tinyBulk();
  const double N[2] = {123.0, 0.0};
  const CellState s = b.flashCell(2.5e7, {N, 2});
  CHECK(s.sat[0] == doctest::Approx(1.0));
  CHECK(s.sat[1] == 0.0);
}

TEST_CASE("equal moles with a 2:1 molar density ratio split 1/3 : 2/3") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.fluid.phases[0].xi_ref = 2000.0;  // water
  m.fluid.phases[1].xi_ref = 1000.0;  // oil
  for (auto& f : m.fluid.phases) {
    f.compressibility = 0.0;
    f.p_ref = 1.0e5;
  }
  Bulk b(FluidModel::fromSpec(m.fluid), SatModel::fromSpec(m.sat_table, m.fluid),
         RockModel{1e5, 0.0});
  const double N[2] = {100.0, 100.0};
  const CellState s = b.flashCell(1.0e5, {N, 2});
  CHECK(s.sat[0] == doctest::Approx(1.0 / 3.0));
  CHECK(s.sat[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("flash refuses a zero fluid volume") {
  const Bulk b = tinyBulk();
  const double N[2] = {0.0, 0.0};
  CHECK_THROWS_AS(b.flashCell(1.0e7, {N, 2}), DegenerateState);
}

TEST_CASE("dVf/dN_i is the inverse molar density") {
  const Bulk b = tinyBulk();
  const double N[2] = {40.0, 60.0};
  const CellState s = b.flashCellFim(2.0e7, {N, 2});
  CHECK(s.dvf_dn[0] == doctest::Approx(1.0 / s.xi[0]));
  CHECK(s.dvf_dn[1] == doctest::Approx(1.0 / s.xi[1]));
}

TEST_CASE("flash derivatives match central differences on random states") {
  const Bulk b = tinyBulk();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pd(5.0e6, 5.0e7);
  std::uniform_real_distribution<double> nd(1.0, 1000.0);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const double P = pd(rng);
    double N[2] = {nd(rng), nd(rng)};
    const CellState s = b.flashCellFim(P, {N, 2});

    const double hp = 1e-6 * P;
    const CellState sp = b.flashCell(P + hp, {N, 2});
    const CellState sm = b.flashCell(P - hp, {N, 2});
    CHECK(s.dvf_dp ==
          doctest::Approx((sp.vf - sm.vf) / (2 * hp)).epsilon(1e-5));
    for (int j = 0; j < 2; ++j) {
      CHECK(s.dxi_dp[j] ==
            doctest::Approx((sp.xi[j] - sm.xi[j]) / (2 * hp)).epsilon(1e-5));
      CHECK(s.dsat_dp[j] ==
            doctest::Approx((sp.sat[j] - sm.sat[j]) / (2 * hp))
                .epsilon(1e-5)
                .scale(1e-9));
    }
    for (int i = 0; i < 2; ++i) {
      const double hn = 1e-6 * N[i];
      double Np[2] = {N[0], N[1]}, Nm[2] = {N[0], N[1]};
      Np[i] += hn;
      Nm[i] -= hn;
      const CellState p2 = b.flashCell(P, {Np, 2});
      const CellState m2 = b.flashCell(P, {Nm, 2});
      CHECK(s.dvf_dn[i] ==
            doctest::Approx((p2.vf - m2.vf) / (2 * hn)).epsilon(1e-5));
      for (int j = 0; j < 2; ++j)
        CHECK(s.dsat_dn[j * 2 + i] ==
              doctest::Approx((p2.sat[j] - m2.sat[j]) / (2 * hn))
                  .epsilon(1e-5)
                  .scale(1e-12));
    }
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("saturation closure holds after every flash") {
  const Bulk b = tinyBulk();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pd(1.0e6, 1.0e8);
  std::uniform_real_distribution<double> nd(0.1, 1e6);
  for (int t = 0; t < 200; ++t) {
    double N[2] = {nd(rng), nd(rng)};
    const CellState s = b.flashCell(pd(rng), {N, 2});
    CHECK(std::fabs(s.sat[0] + s.sat[1] - 1.0) <= 1e-12);
  }
}

TEST_CASE("saturation table evaluation") {
  const DeckModel m = parseDeck(testutil::tinyDeck());
  const SatModel sm = SatModel::fromSpec(m.sat_table, m.fluid);
  double kr[2], pc[2];

  SUBCASE("exact node reproduces the tabulated value") {
    const double s[2] = {0.5, 0.5};
    sm.evaluate(s, kr, pc, nullptr, nullptr);
    CHECK(kr[0] == 0.3);
    CHECK(kr[1] == 0.4);
  }
  SUBCASE("midpoint interpolates linearly") {
    // between (0.2, krw 0) and (0.5, krw 0.3): midpoint 0.35 -> 0.15
    const double s[2] = {0.35, 0.65};
    sm.evaluate(s, kr, pc, nullptr, nullptr);
    CHECK(kr[0] == doctest::Approx(0.15));
    // spec example: nodes (0.3, 0.1) and (0.5, 0.3) -> S=0.4 gives 0.2
    SatTable t2;
    SatTable2P w;
    w.displacing = Phase::Water;
    w.rows = {{0.3, 0.1, 1.0, 0.0}, {0.5, 0.3, 0.5, 0.0}};
    t2.tables.push_back(w);
    const SatModel sm2 = SatModel::fromSpec(t2, m.fluid);
    const double s2[2] = {0.4, 0.6};
    double kr2[2], pc2[2];
    sm2.evaluate(s2, kr2, pc2, nullptr, nullptr);
    CHECK(kr2[0] == doctest::Approx(0.2));
  }
  SUBCASE("clamping below the first node") {
    const double s[2] = {0.05, 0.95};
    sm.evaluate(s, kr, pc, nullptr, nullptr);
    CHECK(kr[0] == 0.0);   // first node krw
    CHECK(kr[1] == 1.0);   // first node krow
    double dkr[4], dpc[4];
    sm.evaluate(s, kr, pc, dkr, dpc);
    CHECK(dkr[0] == 0.0);  // clamped slope
  }
  SUBCASE("breakpoint uses the right segment's slope") {
    const double s[2] = {0.5, 0.5};
    double dkr[4], dpc[4];
    sm.evaluate(s, kr, pc, dkr, dpc);
    // right segment of krw: (0.8-0.5) over (0.8-0.5) sat: (0.8-0.3)/(0.3)
    CHECK(dkr[0 * 2 + 0] == doctest::Approx((0.8 - 0.3) / (0.8 - 0.5)));
  }
}

TEST_CASE("rock update and its derivative") {
  RockModel r{1.0e7, 0.0};
  SUBCASE("incompressible rock keeps phi0") {
    CHECK(r.poro(0.25, 9.9e7) == 0.25);
  }
  SUBCASE("hand arithmetic") {
    RockModel rc{1.0e7, 1.0e-9};
    // phi0=0.2, c=1e-9, dP=1e7 -> 0.2*(1+0.01) = 0.202
    double dphi = 0.0;
    CHECK(rc.poro(0.2, 2.0e7, &dphi) == doctest::Approx(0.202));
    CHECK(dphi == doctest::Approx(0.2e-9));
  }
  SUBCASE("non-physical porosity throws") {
    RockModel rc{1.0e7, 1.0e-6};
    CHECK_THROWS_AS(rc.poro(0.2, 1.0), NonPhysical);
  }
}

namespace {

BulkVarSet columnVarset(const Bulk& b, int n_cells, double dz, double top) {
  BulkVarSet vs;
  vs.allocate(n_cells, n_cells, b.np(), b.nc());
  for (int c = 0; c < n_cells; ++c) {
    vs.bulk_volume[c] = 1000.0;
    vs.depth[c] = top + (c + 0.5) * dz;
    vs.poro0[c] = 0.2;
  }
  return vs;
}

}  // namespace

TEST_CASE("hydrostatic init: incompressible water column spacing") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  m.fluid.phases.resize(1);  // water only
  m.fluid.phases[0].compressibility = 0.0;
  m.fluid.phases[0].rho_ref = 1000.0;
  m.sat_table.tables.clear();
  Bulk b(FluidModel::fromSpec(m.fluid), SatModel::fromSpec(m.sat_table, m.fluid),
         RockModel{m.rock.p_ref, 0.0});
  BulkVarSet vs = columnVarset(b, 3, 10.0, 1000.0);
  InitSpec init;
  init.ref_depth = 1005.0;  // the first cell center
  init.ref_pressure = 2.0e7;
  initHydrostatic(vs, b, init);
  CHECK(vs.pressure[0] == 2.0e7);  // reference cell exactly
  CHECK(vs.pressure[1] - vs.pressure[0] == doctest::Approx(98066.5));
  CHECK(vs.pressure[2] - vs.pressure[1] == doctest::Approx(98066.5));
}

TEST_CASE("hydrostatic init closes the volume balance") {
  const DeckModel m = parseDeck(testutil::tinyDeck());
  const Bulk b = tinyBulk();
  BulkVarSet vs = columnVarset(b, 5, 8.0, 990.0);
  InitSpec init = m.init;
  initHydrostatic(vs, b, init);
  for (int c = 0; c < vs.n_cells; ++c)
    CHECK(std::fabs(vs.vf[c] - vs.vp[c]) / vs.vp[c] < 1e-10);
}

TEST_CASE("hydrostatic init honors contact depths") {
  DeckModel m = parseDeck(testutil::tinyDeck());
  const Bulk b = tinyBulk();
  BulkVarSet vs = columnVarset(b, 4, 10.0, 1000.0);  // centers 1005..1035
  InitSpec init = m.init;
  init.ref_depth = 1005.0;
  init.ref_pressure = 2.5e7;
  init.woc_depth = 1020.0;  // two oil cells above, two water cells below
  initHydrostatic(vs, b, init);
  const int iw = 0, io = 1;
  CHECK(vs.sat[0 * 2 + iw] == doctest::Approx(0.2));  // connate water
  CHECK(vs.sat[0 * 2 + io] == doctest::Approx(0.8));
  CHECK(vs.sat[3 * 2 + iw] == doctest::Approx(1.0));
  CHECK(vs.sat[3 * 2 + io] == doctest::Approx(0.0));
}

TEST_CASE("moles recomputed from phi, S, xi and fluid volume match stored N") {
  const Bulk b = tinyBulk();
  BulkVarSet vs = columnVarset(b, 4, 10.0, 1000.0);
  const DeckModel m = parseDeck(testutil::tinyDeck());
  initHydrostatic(vs, b, m.init);
  // perturb into a generic state and re-flash
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> f(0.8, 1.2);
  for (int c = 0; c < vs.n_cells; ++c) {
    vs.pressure[c] *= f(rng);
    for (int i = 0; i < vs.nc; ++i) vs.moles[c * vs.nc + i] *= f(rng);
  }
  REQUIRE(b.updateProps(vs, 0, vs.n_cells, false));
  for (int c = 0; c < vs.n_cells; ++c) {
    for (int i = 0; i < vs.nc; ++i) {
      double n_back = 0.0;
      for (int j = 0; j < vs.np; ++j)
        n_back += vs.sat[c * vs.np + j] * vs.xi[c * vs.np + j] *
                  vs.x_frac[(c * vs.np + j) * vs.nc + i];
      n_back *= vs.vf[c];  // vf = vp is not enforced off-equilibrium
      CHECK(std::fabs(n_back - vs.moles[c * vs.nc + i]) <=
            1e-10 * std::max(1.0, std::fabs(vs.moles[c * vs.nc + i])));
    }
  }
}

TEST_CASE("physical check verdicts") {
  const Bulk b = tinyBulk();
  const DeckModel m = parseDeck(testutil::tinyDeck());
  BulkVarSet vs = columnVarset(b, 3, 10.0, 1000.0);
  initHydrostatic(vs, b, m.init);
  SolverConfig cfg;

  CHECK(checkPhysical(vs, cfg).ok);

  SUBCASE("negative moles") {
    vs.moles[0] = -1.0;
    const auto pc = checkPhysical(vs, cfg);
    CHECK_FALSE(pc.ok);
    CHECK(pc.reason.find("negative moles") != std::string::npos);
  }
  SUBCASE("pressure window") {
    vs.pressure[1] = 1.0;
    CHECK_FALSE(checkPhysical(vs, cfg).ok);
    vs.pressure[1] = 3.0e8;
    CHECK_FALSE(checkPhysical(vs, cfg).ok);
  }
  SUBCASE("tiny negative moles within tolerance pass") {
    vs.moles[0] = -1e-13 * vs.moles[1];
    CHECK(checkPhysical(vs, cfg).ok);
  }
}
