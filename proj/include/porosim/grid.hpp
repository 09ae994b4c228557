#pragma once

#include <stdexcept>
#include <vector>

#include "porosim/deck.hpp"

namespace porosim {

class EmptyGrid : public std::runtime_error {
 public:
  EmptyGrid() : std::runtime_error("grid has no active cells") {}
};

// Active-cell geometry. Inactive cells (ACTNUM 0 or non-positive porosity)
// are excluded and their properties are not stored; "gid" below always means
// an index into the active ordering.
struct Grid {
  int nx = 0, ny = 0, nz = 0;
  int n_active = 0;
  std::vector<int> global_index;    // gid -> original flattened (i,j,k) index
  std::vector<int> active_of_cell;  // flattened index -> gid, or -1
  std::vector<double> volume;       // m^3
  std::vector<double> depth;        // m, cell center, increasing downward
  std::vector<double> poro_init;
  std::vector<double> permx, permy, permz;  // m^2
  std::vector<double> dx, dy, dz;           // cell sizes, per active cell
  std::vector<double> cx, cy;               // horizontal cell centers, m

  int flat(int i, int j, int k) const { return i + nx * (j + ny * k); }
  int gidAt(int i, int j, int k) const { return active_of_cell[flat(i, j, k)]; }
};

struct Connection {
  int a = 0, b = 0;    // gids with a < b
  double trans = 0.0;  // m^3
  int axis = 0;        // 0=x, 1=y, 2=z
  double dz = 0.0;     // depth(b) - depth(a), m
};

struct ConnectionList {
  std::vector<Connection> conns;
};

Grid buildGrid(const DeckModel& model);
ConnectionList buildConnections(const Grid& grid);

// Active cells perforated by a well, ordered top-down. Throws if any
// perforated cell is inactive.
std::vector<int> wellCells(const Grid& grid, const WellSpec& well);

}  // namespace porosim
