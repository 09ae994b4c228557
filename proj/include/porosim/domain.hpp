#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "porosim/comm.hpp"
#include "porosim/grid.hpp"
#include "porosim/linsys.hpp"

namespace porosim {

class PartitionImbalance : public std::runtime_error {
 public:
  explicit PartitionImbalance(const std::string& what)
      : std::runtime_error(what) {}
};

class AsymmetryDetected : public std::runtime_error {
 public:
  explicit AsymmetryDetected(const std::string& what)
      : std::runtime_error(what) {}
};

struct PartitionResult {
  std::vector<int> rank_of;  // gid -> rank
  int n_ranks = 1;
  std::vector<std::string> notes;  // well-constraint repairs etc.
};

// Recursive coordinate bisection on cell centers, followed by reassignment
// of each well's perforated cells to the rank owning the majority of them.
// Deterministic for identical inputs.
PartitionResult partitionGrid(const Grid& grid,
                              const std::vector<WellSpec>& wells,
                              int n_workers);

// Per-worker cell ordering and communication maps (Parts 1 and 2).
// Interior cells come first, ascending by global index; ghost cells follow,
// grouped by owner rank ascending and by global index within each group.
struct DomainMaps {
  int rank = 0;
  int n_ranks = 1;
  std::vector<int> interior;           // gids
  std::vector<int> ghosts;             // gids
  std::vector<int> ghost_owner;        // rank per ghost
  std::vector<int> ghost_owner_local;  // position in the owner's interior list
  std::map<int, std::vector<int>> send_element_loc;        // rank -> local ids
  std::map<int, std::pair<int, int>> recv_element_loc;     // rank -> [lo,hi)
  std::vector<Connection> local_conns;  // endpoints are local cell indices
  std::vector<long> row_offset;         // per rank prefix of interior counts

  int numInterior() const { return static_cast<int>(interior.size()); }
  int numLocal() const {
    return numInterior() + static_cast<int>(ghosts.size());
  }
  int localOf(int gid) const {
    auto it = local_of_gid.find(gid);
    return it == local_of_gid.end() ? -1 : it->second;
  }
  int gidOfLocal(int l) const {
    return l < numInterior() ? interior[l] : ghosts[l - numInterior()];
  }
  long globalRowOfLocal(int l) const {
    if (l < numInterior()) return row_offset[rank] + l;
    const int g = l - numInterior();
    return row_offset[ghost_owner[g]] + ghost_owner_local[g];
  }

  std::unordered_map<int, int> local_of_gid;
};

std::vector<DomainMaps> buildDomainMaps(const Grid& grid,
                                        const ConnectionList& conns,
                                        const std::vector<int>& rank_of,
                                        int n_ranks);

// Collective ghost refresh for a set of per-cell fields. Every listed field
// has `mult` values per local cell; ghost entries are overwritten with the
// owners' interior values. When `group` is non-null only members of that
// group exchange; other ghosts keep their current (frozen) values.
struct FieldRef {
  double* data;
  int mult;
};
void exchangeGhostFields(const DomainMaps& dom, Comm& comm,
                         std::span<const FieldRef> fields, int tag,
                         const std::vector<int>* group = nullptr);

// Adaptive coupling (Part 3).
struct CouplingGraph {
  int n_vertices = 0;
  std::vector<std::pair<int, int>> edges;  // a < b, sorted, unique
};

std::vector<std::uint8_t> markCells(std::span<const double> ds_max,
                                    double threshold);

// Collective. Rule (a): a worker with a marked interior cell couples with
// all of its neighboring workers. Rule (b): a worker with a marked ghost
// cell couples with that ghost's owner. Throws AsymmetryDetected when a
// rule-(b) assertion has no matching assertion from the owner side.
CouplingGraph buildCouplingGraph(const DomainMaps& dom,
                                 std::span<const std::uint8_t> flags,
                                 Comm& comm);

// Union-find components; each group ascending, groups ordered by smallest
// member rank.
std::vector<std::vector<int>> connectedComponents(const CouplingGraph& g);

struct GroupIndexing {
  std::vector<int> group;              // ascending ranks, includes self
  std::vector<long> group_row_offset;  // per member, block rows
  long my_offset = 0;
  long group_rows = 0;
  std::vector<std::int8_t> ghost_is_dof;  // per ghost cell
  std::vector<long> group_col_of_local;   // -1 for boundary ghosts
};

// Contiguous group-local row offsets in rank order; ghosts owned inside the
// group are degrees of freedom, the rest are boundary. For the full group
// the indexing coincides with the global one.
GroupIndexing buildGroupIndexing(const DomainMaps& dom,
                                 const std::vector<int>& group);

// SolveComm over a coupled group: ghost-column refresh uses the domain's
// send/recv maps restricted to group members, reductions run in rank order.
class GroupSolveComm final : public SolveComm {
 public:
  GroupSolveComm(const DomainMaps& dom, const GroupIndexing& gi, Comm& comm,
                 int nb, int tag_base);

  long rowOffset() const override { return gi_->my_offset; }
  long numGhostCols() const override { return n_ghost_dof_; }
  long ghostSlot(long gcol) const override;
  void refreshGhosts(const double* x_local, double* ghost) override;
  double reduceSum(double v) override;
  double reduceMax(double v) override;

 private:
  const DomainMaps* dom_;
  const GroupIndexing* gi_;
  Comm* comm_;
  int nb_;
  int tag_;
  long n_ghost_dof_ = 0;
  std::unordered_map<long, long> slot_of_col_;
  std::vector<long> ghost_slot_of_ghost_;  // per ghost index, -1 if boundary
};

}  // namespace porosim
