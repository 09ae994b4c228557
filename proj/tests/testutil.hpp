#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "porosim/linsys.hpp"

namespace testutil {

// Two-cell water/oil case used across the unit tests.
inline std::string tinyDeck() {
  return R"(TITLE tiny two cell case /
DIMENS 2 1 1 /
DX 10 10 /
DY 10 /
DZ 10 /
TOPS 1000 /
PORO 2*0.2 /
PERMX 2*100 /
PERMY 2*100 /
PERMZ 2*10 /
PHASES WATER OIL /
FLUID
 WATER 55500 1000 4.6e-5 0.5 /
 OIL 7000 800 1.0e-4 2.0 /
/
SWOF
 0.2 0.0 1.0 0.0 /
 0.5 0.3 0.4 0.0 /
 0.8 0.8 0.0 0.0 /
/
ROCK 250 4.5e-5 /
EQUIL 1005 250 /
WELLS
 INJ1 INJ 1 1 1 1 0.1 /
 PROD1 PROD 2 1 1 1 0.1 /
/
SOLVER
 NWORKERS 1 /
 DTINIT 0.5 /
 DTMAX 5 /
/
SCHEDULE
TIME 0 /
 WINJ INJ1 WATER RATE 50 /
 WPROD PROD1 BHP 240 /
TIME 10 /
ENDSCHED
END
)";
}

// Dense reconstruction of a block matrix over columns [0, ncols).
inline std::vector<double> denseFromSegmented(
    const porosim::SegmentedBlockMatrix& m, long ncols) {
  const int nb = m.nb();
  const long n = m.numRows() * nb;
  const long nc = ncols * nb;
  std::vector<double> d(n * nc, 0.0);
  for (long r = 0; r < m.numRows(); ++r) {
    const auto& cols = m.colIds(r);
    const auto& vals = m.rowValues(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const long c = cols[k];
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
          d[(r * nb + i) * nc + c * nb + j] = vals[k * nb * nb + i * nb + j];
    }
  }
  return d;
}

inline std::vector<double> denseFromCsr(
    const porosim::SegmentedBlockMatrix::Csr& csr, long ncols) {
  const int nb = csr.nb;
  const long n = csr.nrows * nb;
  const long nc = ncols * nb;
  std::vector<double> d(n * nc, 0.0);
  for (long r = 0; r < csr.nrows; ++r) {
    for (long k = csr.row_ptr[r]; k < csr.row_ptr[r + 1]; ++k) {
      const long c = csr.col[k];
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
          d[(r * nb + i) * nc + c * nb + j] = csr.val[k * nb * nb + i * nb + j];
    }
  }
  return d;
}

// Gaussian elimination with partial pivoting; returns x, A and b copied.
inline std::vector<double> denseSolve(std::vector<double> a,
                                      std::vector<double> b) {
  const long n = static_cast<long>(b.size());
  for (long k = 0; k < n; ++k) {
    long p = k;
    for (long i = k + 1; i < n; ++i)
      if (std::fabs(a[i * n + k]) > std::fabs(a[p * n + k])) p = i;
    for (long j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
    std::swap(b[k], b[p]);
    for (long i = k + 1; i < n; ++i) {
      const double f = a[i * n + k] / a[k * n + k];
      for (long j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n, 0.0);
  for (long i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (long j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
    x[i] = s / a[i * n + i];
  }
  return x;
}

}  // namespace testutil
