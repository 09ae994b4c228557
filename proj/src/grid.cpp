#include "porosim/grid.hpp"

#include <numeric>

namespace porosim {

Grid buildGrid(const DeckModel& m) {
  Grid g;
  g.nx = m.nx;
  g.ny = m.ny;
  g.nz = m.nz;
  const long nc = m.numCells();
  g.active_of_cell.assign(static_cast<std::size_t>(nc), -1);

  // Depth of cell centers: top depth plus cumulative layer thicknesses.
  std::vector<double> layer_depth(static_cast<std::size_t>(m.nz));
  {
    double top = m.depth_top;
    for (int k = 0; k < m.nz; ++k) {
      layer_depth[k] = top + 0.5 * m.dz[k];
      top += m.dz[k];
    }
  }
  std::vector<double> xc(static_cast<std::size_t>(m.nx));
  {
    double x = 0.0;
    for (int i = 0; i < m.nx; ++i) {
      xc[i] = x + 0.5 * m.dx[i];
      x += m.dx[i];
    }
  }
  std::vector<double> yc(static_cast<std::size_t>(m.ny));
  {
    double y = 0.0;
    for (int j = 0; j < m.ny; ++j) {
      yc[j] = y + 0.5 * m.dy[j];
      y += m.dy[j];
    }
  }

  for (int k = 0; k < m.nz; ++k) {
    for (int j = 0; j < m.ny; ++j) {
      for (int i = 0; i < m.nx; ++i) {
        const long c = g.flat(i, j, k);
        if (m.actnum[c] == 0 || m.poro[c] <= 0.0) continue;
        g.active_of_cell[c] = g.n_active++;
        g.global_index.push_back(static_cast<int>(c));
        g.volume.push_back(m.dx[i] * m.dy[j] * m.dz[k]);
        g.depth.push_back(layer_depth[k]);
        g.poro_init.push_back(m.poro[c]);
        g.permx.push_back(m.permx[c]);
        g.permy.push_back(m.permy[c]);
        g.permz.push_back(m.permz[c]);
        g.dx.push_back(m.dx[i]);
        g.dy.push_back(m.dy[j]);
        g.dz.push_back(m.dz[k]);
        g.cx.push_back(xc[i]);
        g.cy.push_back(yc[j]);
      }
    }
  }
  if (g.n_active == 0) throw EmptyGrid();
  return g;
}

ConnectionList buildConnections(const Grid& g) {
  ConnectionList cl;
  auto halfTrans = [&](int gid, int axis) {
    const double perm = axis == 0   ? g.permx[gid]
                        : axis == 1 ? g.permy[gid]
                                    : g.permz[gid];
    const double area = axis == 0   ? g.dy[gid] * g.dz[gid]
                        : axis == 1 ? g.dx[gid] * g.dz[gid]
                                    : g.dx[gid] * g.dy[gid];
    const double dist = 0.5 * (axis == 0 ? g.dx[gid] : axis == 1 ? g.dy[gid] : g.dz[gid]);
    return perm * area / dist;
  };

  for (int k = 0; k < g.nz; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const int a = g.active_of_cell[g.flat(i, j, k)];
        if (a < 0) continue;
        const int nbr[3] = {
            i + 1 < g.nx ? g.active_of_cell[g.flat(i + 1, j, k)] : -1,
            j + 1 < g.ny ? g.active_of_cell[g.flat(i, j + 1, k)] : -1,
            k + 1 < g.nz ? g.active_of_cell[g.flat(i, j, k + 1)] : -1};
        for (int axis = 0; axis < 3; ++axis) {
          const int b = nbr[axis];
          if (b < 0) continue;
          const double ta = halfTrans(a, axis);
          const double tb = halfTrans(b, axis);
          Connection c;
          c.a = a;
          c.b = b;
          c.trans = 1.0 / (1.0 / ta + 1.0 / tb);
          c.axis = axis;
          c.dz = g.depth[b] - g.depth[a];
          cl.conns.push_back(c);
        }
      }
    }
  }
  return cl;
}

std::vector<int> wellCells(const Grid& g, const WellSpec& w) {
  std::vector<int> cells;
  for (int k = w.k1; k <= w.k2; ++k) {
    const int gid = g.gidAt(w.i, w.j, k);
    if (gid < 0)
      throw std::runtime_error("well " + w.name + " perforates an inactive cell");
    cells.push_back(gid);
  }
  return cells;
}

}  // namespace porosim
