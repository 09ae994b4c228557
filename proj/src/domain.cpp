#include "porosim/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace porosim {

namespace {

void rcb(const Grid& g, std::vector<int>& cells, int rank0, int nw,
         std::vector<int>& rank_of) {
  if (nw == 1) {
    for (int gid : cells) rank_of[gid] = rank0;
    return;
  }
  double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
  for (int gid : cells) {
    const double c[3] = {g.cx[gid], g.cy[gid], g.depth[gid]};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  int axis = 0;
  double best = hi[0] - lo[0];
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > best) {
      best = hi[a] - lo[a];
      axis = a;
    }
  }
  std::sort(cells.begin(), cells.end(), [&](int a, int b) {
    const double ca = axis == 0 ? g.cx[a] : axis == 1 ? g.cy[a] : g.depth[a];
    const double cb = axis == 0 ? g.cx[b] : axis == 1 ? g.cy[b] : g.depth[b];
    if (ca != cb) return ca < cb;
    return a < b;
  });
  const int wl = nw / 2;
  const int wr = nw - wl;
  long nl = std::lround(static_cast<double>(cells.size()) * wl / nw);
  nl = std::clamp<long>(nl, wl, static_cast<long>(cells.size()) - wr);
  std::vector<int> left(cells.begin(), cells.begin() + nl);
  std::vector<int> right(cells.begin() + nl, cells.end());
  rcb(g, left, rank0, wl, rank_of);
  rcb(g, right, rank0 + wl, wr, rank_of);
}

}  // namespace

PartitionResult partitionGrid(const Grid& g, const std::vector<WellSpec>& wells,
                              int n_workers) {
  if (n_workers < 1 || n_workers > g.n_active)
    throw PartitionImbalance("worker count must be in [1, n_active]");
  PartitionResult res;
  res.n_ranks = n_workers;
  res.rank_of.assign(g.n_active, 0);
  if (n_workers > 1) {
    std::vector<int> cells(g.n_active);
    std::iota(cells.begin(), cells.end(), 0);
    rcb(g, cells, 0, n_workers, res.rank_of);
  }

  // Pull each well's perforated cells onto one rank. Wells sharing a cell
  // are merged and handled jointly; ties go to the lower rank. Processing
  // order is by well name for determinism.
  if (!wells.empty() && n_workers > 1) {
    std::vector<const WellSpec*> order;
    for (const auto& w : wells) order.push_back(&w);
    std::sort(order.begin(), order.end(),
              [](const WellSpec* a, const WellSpec* b) { return a->name < b->name; });

    std::vector<std::vector<int>> wcells;
    for (const auto* w : order) wcells.push_back(wellCells(g, *w));

    // union wells that share cells
    std::vector<int> parent(order.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::map<int, int> owner_well;
    for (std::size_t w = 0; w < order.size(); ++w) {
      for (int gid : wcells[w]) {
        auto [it, inserted] = owner_well.insert({gid, static_cast<int>(w)});
        if (!inserted) {
          const int a = find(it->second), b = find(static_cast<int>(w));
          if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
            res.notes.push_back("wells " + order[it->second]->name + " and " +
                                order[w]->name + " share a cell; merged");
          }
        }
      }
    }
    std::map<int, std::vector<int>> cluster_cells;
    for (std::size_t w = 0; w < order.size(); ++w) {
      auto& cc = cluster_cells[find(static_cast<int>(w))];
      cc.insert(cc.end(), wcells[w].begin(), wcells[w].end());
    }
    for (auto& [root, cc] : cluster_cells) {
      std::map<int, int> votes;
      for (int gid : cc) ++votes[res.rank_of[gid]];
      int target = -1, best = -1;
      for (const auto& [rk, cnt] : votes) {
        if (cnt > best) {
          best = cnt;
          target = rk;
        }
      }
      bool moved = false;
      for (int gid : cc) {
        if (res.rank_of[gid] != target) {
          res.rank_of[gid] = target;
          moved = true;
        }
      }
      if (moved)
        res.notes.push_back("well group rooted at " + order[root]->name +
                            " pinned to rank " + std::to_string(target));
    }
  }

  std::vector<long> sizes(n_workers, 0);
  for (int r : res.rank_of) ++sizes[r];
  const double mean = static_cast<double>(g.n_active) / n_workers;
  for (int r = 0; r < n_workers; ++r) {
    if (std::fabs(sizes[r] - mean) > 0.2 * mean + 1.0) {
      std::ostringstream os;
      os << "partition imbalance: rank " << r << " owns " << sizes[r]
         << " cells, mean " << mean;
      throw PartitionImbalance(os.str());
    }
  }
  return res;
}

std::vector<DomainMaps> buildDomainMaps(const Grid& grid,
                                        const ConnectionList& conns,
                                        const std::vector<int>& rank_of,
                                        int n_ranks) {
  std::vector<DomainMaps> doms(n_ranks);

  std::vector<long> row_offset(n_ranks + 1, 0);
  std::vector<int> owner_local(grid.n_active, -1);
  {
    std::vector<long> counts(n_ranks, 0);
    for (int gid = 0; gid < grid.n_active; ++gid)
      owner_local[gid] = static_cast<int>(counts[rank_of[gid]]++);
    for (int r = 0; r < n_ranks; ++r) row_offset[r + 1] = row_offset[r] + counts[r];
  }

  for (int r = 0; r < n_ranks; ++r) {
    doms[r].rank = r;
    doms[r].n_ranks = n_ranks;
    doms[r].row_offset = row_offset;
  }
  for (int gid = 0; gid < grid.n_active; ++gid)
    doms[rank_of[gid]].interior.push_back(gid);

  // Ghosts from cross-rank connections; std::set keeps (owner, gid) order.
  std::vector<std::set<std::pair<int, int>>> ghost_sets(n_ranks);
  for (const auto& c : conns.conns) {
    const int ra = rank_of[c.a], rb = rank_of[c.b];
    if (ra == rb) continue;
    ghost_sets[ra].insert({rb, c.b});
    ghost_sets[rb].insert({ra, c.a});
  }

  for (int r = 0; r < n_ranks; ++r) {
    DomainMaps& d = doms[r];
    const int n_int = d.numInterior();
    for (int l = 0; l < n_int; ++l) d.local_of_gid[d.interior[l]] = l;
    int l = n_int;
    for (const auto& [owner, gid] : ghost_sets[r]) {
      d.ghosts.push_back(gid);
      d.ghost_owner.push_back(owner);
      d.ghost_owner_local.push_back(owner_local[gid]);
      d.local_of_gid[gid] = l;
      auto [it, inserted] = d.recv_element_loc.insert({owner, {l, l + 1}});
      if (!inserted) it->second.second = l + 1;
      ++l;
    }
  }

  // Send maps mirror the neighbors' ghost lists.
  for (int r = 0; r < n_ranks; ++r) {
    for (const auto& [owner, gid] : ghost_sets[r]) {
      doms[owner].send_element_loc[r].push_back(owner_local[gid]);
    }
  }
  for (int r = 0; r < n_ranks; ++r)
    for (auto& [to, list] : doms[r].send_element_loc)
      std::sort(list.begin(), list.end());

  // Local connection lists: every connection with at least one interior end.
  auto addLocalConn = [&](int r, const Connection& c) {
    DomainMaps& d = doms[r];
    Connection lc = c;
    lc.a = d.localOf(c.a);
    lc.b = d.localOf(c.b);
    d.local_conns.push_back(lc);
  };
  for (const auto& c : conns.conns) {
    const int ra = rank_of[c.a], rb = rank_of[c.b];
    addLocalConn(ra, c);
    if (rb != ra) addLocalConn(rb, c);
  }
  return doms;
}

void exchangeGhostFields(const DomainMaps& dom, Comm& comm,
                         std::span<const FieldRef> fields, int tag,
                         const std::vector<int>* group) {
  auto inGroup = [&](int r) {
    return group == nullptr ||
           std::binary_search(group->begin(), group->end(), r);
  };
  int mult_total = 0;
  for (const auto& f : fields) mult_total += f.mult;

  for (const auto& [to, list] : dom.send_element_loc) {
    if (!inGroup(to)) continue;
    std::vector<double> buf;
    buf.reserve(list.size() * mult_total);
    for (int l : list)
      for (const auto& f : fields)
        for (int m = 0; m < f.mult; ++m) buf.push_back(f.data[l * f.mult + m]);
    comm.send(to, tag, std::move(buf));
  }
  for (const auto& [from, range] : dom.recv_element_loc) {
    if (!inGroup(from)) continue;
    const std::vector<double> buf = comm.recv(from, tag);
    std::size_t pos = 0;
    for (int l = range.first; l < range.second; ++l)
      for (const auto& f : fields)
        for (int m = 0; m < f.mult; ++m) f.data[l * f.mult + m] = buf[pos++];
  }
}

std::vector<std::uint8_t> markCells(std::span<const double> ds_max,
                                    double threshold) {
  std::vector<std::uint8_t> flags(ds_max.size(), 0);
  for (std::size_t i = 0; i < ds_max.size(); ++i)
    flags[i] = ds_max[i] > threshold ? 1 : 0;
  return flags;
}

CouplingGraph buildCouplingGraph(const DomainMaps& dom,
                                 std::span<const std::uint8_t> flags,
                                 Comm& comm) {
  const int me = dom.rank;
  const int n_int = dom.numInterior();

  bool marked_interior = false;
  for (int l = 0; l < n_int; ++l)
    if (flags[l]) {
      marked_interior = true;
      break;
    }

  // Encode assertions as (a, b, rule) triples; rule 0 = (a), rule 1 = (b).
  std::vector<double> mine;
  if (marked_interior) {
    for (const auto& [nbr, range] : dom.recv_element_loc) {
      (void)range;
      mine.push_back(me);
      mine.push_back(nbr);
      mine.push_back(0.0);
    }
  }
  for (std::size_t g = 0; g < dom.ghosts.size(); ++g) {
    if (flags[n_int + static_cast<int>(g)]) {
      mine.push_back(me);
      mine.push_back(dom.ghost_owner[g]);
      mine.push_back(1.0);
    }
  }

  const auto world = Comm::worldGroup(dom.n_ranks);
  const auto gathered = comm.allgather(world, mine, tags::coupling);

  std::set<std::pair<int, int>> asserted;      // directed (from, to)
  std::vector<std::pair<int, int>> rule_b;     // directed (from, owner)
  for (const auto& part : gathered) {
    for (std::size_t i = 0; i + 3 <= part.size(); i += 3) {
      const int a = static_cast<int>(part[i]);
      const int b = static_cast<int>(part[i + 1]);
      asserted.insert({a, b});
      if (part[i + 2] != 0.0) rule_b.push_back({a, b});
    }
  }
  // A marked ghost on one side means a marked interior cell on the owner
  // side, whose rule-(a) assertion must cover the reverse direction.
  for (const auto& [a, b] : rule_b) {
    if (!asserted.count({b, a}))
      throw AsymmetryDetected("rank " + std::to_string(a) +
                              " saw a marked ghost owned by rank " +
                              std::to_string(b) +
                              " but the owner asserted no coupling");
  }

  CouplingGraph g;
  g.n_vertices = dom.n_ranks;
  std::set<std::pair<int, int>> undirected;
  for (const auto& [a, b] : asserted)
    undirected.insert({std::min(a, b), std::max(a, b)});
  g.edges.assign(undirected.begin(), undirected.end());
  return g;
}

std::vector<std::vector<int>> connectedComponents(const CouplingGraph& g) {
  std::vector<int> parent(g.n_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : g.edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<int, std::vector<int>> groups;
  for (int v = 0; v < g.n_vertices; ++v) groups[find(v)].push_back(v);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;  // map iteration is already ordered by smallest member
}

GroupIndexing buildGroupIndexing(const DomainMaps& dom,
                                 const std::vector<int>& group) {
  GroupIndexing gi;
  gi.group = group;
  gi.group_row_offset.resize(group.size());
  long off = 0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    gi.group_row_offset[i] = off;
    const int r = group[i];
    off += dom.row_offset[r + 1] - dom.row_offset[r];
    if (r == dom.rank) gi.my_offset = gi.group_row_offset[i];
  }
  gi.group_rows = off;

  const int n_int = dom.numInterior();
  gi.group_col_of_local.assign(dom.numLocal(), -1);
  for (int l = 0; l < n_int; ++l) gi.group_col_of_local[l] = gi.my_offset + l;

  gi.ghost_is_dof.assign(dom.ghosts.size(), 0);
  for (std::size_t g = 0; g < dom.ghosts.size(); ++g) {
    const int owner = dom.ghost_owner[g];
    auto it = std::lower_bound(group.begin(), group.end(), owner);
    if (it != group.end() && *it == owner) {
      gi.ghost_is_dof[g] = 1;
      const long owner_off = gi.group_row_offset[it - group.begin()];
      gi.group_col_of_local[n_int + static_cast<int>(g)] =
          owner_off + dom.ghost_owner_local[g];
    }
  }
  return gi;
}

GroupSolveComm::GroupSolveComm(const DomainMaps& dom, const GroupIndexing& gi,
                               Comm& comm, int nb, int tag_base)
    : dom_(&dom), gi_(&gi), comm_(&comm), nb_(nb), tag_(tag_base) {
  ghost_slot_of_ghost_.assign(dom.ghosts.size(), -1);
  for (std::size_t g = 0; g < dom.ghosts.size(); ++g) {
    if (!gi.ghost_is_dof[g]) continue;
    const long col = gi.group_col_of_local[dom.numInterior() + static_cast<int>(g)];
    ghost_slot_of_ghost_[g] = n_ghost_dof_;
    slot_of_col_[col] = n_ghost_dof_;
    ++n_ghost_dof_;
  }
}

long GroupSolveComm::ghostSlot(long gcol) const {
  auto it = slot_of_col_.find(gcol);
  if (it == slot_of_col_.end())
    throw std::logic_error("ghost column outside the coupled group");
  return it->second;
}

void GroupSolveComm::refreshGhosts(const double* x, double* ghost) {
  auto inGroup = [&](int r) {
    return std::binary_search(gi_->group.begin(), gi_->group.end(), r);
  };
  for (const auto& [to, list] : dom_->send_element_loc) {
    if (!inGroup(to)) continue;
    std::vector<double> buf;
    buf.reserve(list.size() * nb_);
    for (int l : list)
      for (int m = 0; m < nb_; ++m) buf.push_back(x[l * nb_ + m]);
    comm_->send(to, tag_, std::move(buf));
  }
  const int n_int = dom_->numInterior();
  for (const auto& [from, range] : dom_->recv_element_loc) {
    if (!inGroup(from)) continue;
    const std::vector<double> buf = comm_->recv(from, tag_);
    std::size_t pos = 0;
    for (int l = range.first; l < range.second; ++l) {
      const long slot = ghost_slot_of_ghost_[l - n_int];
      for (int m = 0; m < nb_; ++m) ghost[slot * nb_ + m] = buf[pos++];
    }
  }
}

double GroupSolveComm::reduceSum(double v) {
  return comm_->allreduceScalar(gi_->group, v, ReduceOp::Sum, tag_ + 1);
}

double GroupSolveComm::reduceMax(double v) {
  return comm_->allreduceScalar(gi_->group, v, ReduceOp::Max, tag_ + 1);
}

}  // namespace porosim
