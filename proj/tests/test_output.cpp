#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "porosim/output.hpp"
#include "porosim/sim.hpp"
#include "porosim/units.hpp"
#include "testutil.hpp"

using namespace porosim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int countLines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("summary writer creates a header and appends flushed rows") {
  TempDir dir("porosim_test_summary");
  SummaryWriter w(dir.path.string(), {"WATER", "OIL"}, {"INJ1"});
  const std::string header = slurp(dir.path / "summary.csv");
  CHECK(countLines(header) == 1);
  CHECK(header.find("time_days,fpr_pa") == 0);

  SummaryRow row;
  row.time_days = 1.0;
  row.fpr = 2.0e7;
  row.inj_rate = {50.0, 0.0};
  row.prod_rate = {0.0, 40.0};
  row.well_bhp = {2.1e7};
  row.well_rate = {50.0, 0.0};
  row.methods = "FIM";
  w.writeRow(row);
  row.time_days = 2.0;
  w.writeRow(row);
  CHECK(countLines(slurp(dir.path / "summary.csv")) == 3);
}

TEST_CASE("snapshots cover interior cells once and gather merges them") {
  TempDir dir("porosim_test_snap");
  const DeckModel m = parseDeck(testutil::tinyDeck());
  const Grid g = buildGrid(m);
  const ConnectionList conns = buildConnections(g);
  std::vector<int> rank_of{0, 1};
  const auto doms = buildDomainMaps(g, conns, rank_of, 2);

  Bulk bulk(FluidModel::fromSpec(m.fluid),
            SatModel::fromSpec(m.sat_table, m.fluid),
            RockModel{m.rock.p_ref, m.rock.compressibility});
  for (int r = 0; r < 2; ++r) {
    BulkVarSet vs;
    vs.allocate(doms[r].numLocal(), doms[r].numInterior(), 2, 2);
    for (int l = 0; l < doms[r].numLocal(); ++l) {
      const int gid = doms[r].gidOfLocal(l);
      vs.bulk_volume[l] = g.volume[gid];
      vs.depth[l] = g.depth[gid];
      vs.poro0[l] = g.poro_init[gid];
    }
    initHydrostatic(vs, bulk, m.init);
    writeSnapshot(dir.path.string(), r, vs, doms[r], {"WATER", "OIL"}, 10.0);
    // ghost cells never appear: one data row per interior cell
    const std::string shard =
        slurp(dir.path / ("snap_t10_r" + std::to_string(r) + ".csv"));
    CHECK(countLines(shard) == 1 + doms[r].numInterior());
  }

  gatherOutputs(dir.path.string(), 2);
  const std::string merged = slurp(dir.path / "snap_t10_merged.csv");
  CHECK(countLines(merged) == 1 + g.n_active);
  // sorted by global index: cell 0 before cell 1
  CHECK(merged.find("\n0,") < merged.find("\n1,"));

  // idempotent
  gatherOutputs(dir.path.string(), 2);
  CHECK(slurp(dir.path / "snap_t10_merged.csv") == merged);

  // a deleted shard is reported
  fs::remove(dir.path / "snap_t10_r1.csv");
  CHECK_THROWS_AS(gatherOutputs(dir.path.string(), 2), MissingShard);
}

TEST_CASE("single-rank gather equals the shard") {
  TempDir dir("porosim_test_snap1");
  const DeckModel m = parseDeck(testutil::tinyDeck());
  const Grid g = buildGrid(m);
  const auto doms =
      buildDomainMaps(g, buildConnections(g), std::vector<int>{0, 0}, 1);
  Bulk bulk(FluidModel::fromSpec(m.fluid),
            SatModel::fromSpec(m.sat_table, m.fluid),
            RockModel{m.rock.p_ref, m.rock.compressibility});
  BulkVarSet vs;
  vs.allocate(2, 2, 2, 2);
  for (int l = 0; l < 2; ++l) {
    vs.bulk_volume[l] = g.volume[l];
    vs.depth[l] = g.depth[l];
    vs.poro0[l] = g.poro_init[l];
  }
  initHydrostatic(vs, bulk, m.init);
  writeSnapshot(dir.path.string(), 0, vs, doms[0], {"WATER", "OIL"}, 0.0);
  gatherOutputs(dir.path.string(), 1);
  CHECK(slurp(dir.path / "snap_t0_r0.csv") ==
        slurp(dir.path / "snap_t0_merged.csv"));
}
