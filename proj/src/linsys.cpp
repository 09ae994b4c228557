#include "porosim/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace porosim {

void SegmentedBlockMatrix::begin(long nrows, int nb) {
  if (nrows < 1 || nb < 1) throw ShapeError("begin: nrows and nb must be >= 1");
  nb_ = nb;
  nrows_ = nrows;
  col_.resize(nrows);
  val_.resize(nrows);
  for (long r = 0; r < nrows; ++r) {
    col_[r].clear();
    val_[r].clear();
  }
  b_.assign(static_cast<std::size_t>(nrows) * nb, 0.0);
  u_.assign(static_cast<std::size_t>(nrows) * nb, 0.0);
}

void SegmentedBlockMatrix::addBlock(long row, long col,
                                    std::span<const double> block) {
  const std::size_t bs = static_cast<std::size_t>(nb_) * nb_;
  if (block.size() != bs)
    throw ShapeError("addBlock: block size mismatch");
  auto& cols = col_[row];
  auto& vals = val_[row];
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] == col) {
      double* dst = vals.data() + k * bs;
      for (std::size_t i = 0; i < bs; ++i) dst[i] += block[i];
      return;
    }
  }
  cols.push_back(col);
  vals.insert(vals.end(), block.begin(), block.end());
}

void SegmentedBlockMatrix::addRhs(long row, std::span<const double> vec) {
  if (vec.size() != static_cast<std::size_t>(nb_))
    throw ShapeError("addRhs: vector size mismatch");
  double* dst = b_.data() + row * nb_;
  for (int i = 0; i < nb_; ++i) dst[i] += vec[i];
}

SegmentedBlockMatrix::Csr SegmentedBlockMatrix::toCsr() const {
  const std::size_t bs = static_cast<std::size_t>(nb_) * nb_;
  Csr csr;
  csr.nrows = nrows_;
  csr.nb = nb_;
  csr.row_ptr.resize(nrows_ + 1);
  csr.row_ptr[0] = 0;
  long total = 0;
  for (long r = 0; r < nrows_; ++r) {
    total += static_cast<long>(col_[r].size());
    csr.row_ptr[r + 1] = total;
  }
  csr.col.reserve(total);
  csr.val.reserve(total * bs);
  std::vector<std::size_t> order;
  for (long r = 0; r < nrows_; ++r) {
    const auto& cols = col_[r];
    order.resize(cols.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return cols[a] < cols[b]; });
    for (std::size_t k : order) {
      csr.col.push_back(cols[k]);
      const double* src = val_[r].data() + k * bs;
      csr.val.insert(csr.val.end(), src, src + bs);
    }
  }
  return csr;
}

// ---------------------------------------------------------------------------
// Dense block kernels

namespace blockops {

bool luFactor(double* a, int* piv, int n) {
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(a[i * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best == 0.0) return false;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
      std::swap(piv[k], piv[p]);
    }
    const double inv = 1.0 / a[k * n + k];
    for (int i = k + 1; i < n; ++i) {
      a[i * n + k] *= inv;
      const double lik = a[i * n + k];
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= lik * a[k * n + j];
    }
  }
  return true;
}

void luSolve(const double* lu, const int* piv, int n, double* x) {
  double y[16];
  for (int i = 0; i < n; ++i) y[i] = x[piv[i]];
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < i; ++k) y[i] -= lu[i * n + k] * y[k];
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) y[i] -= lu[i * n + k] * y[k];
    y[i] /= lu[i * n + i];
  }
  for (int i = 0; i < n; ++i) x[i] = y[i];
}

void mulSub(double* c, const double* a, const double* b, int n) {
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      for (int j = 0; j < n; ++j) c[i * n + j] -= aik * b[k * n + j];
    }
}

void mul(double* c, const double* a, const double* b, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a[i * n + k] * b[k * n + j];
      c[i * n + j] = s;
    }
}

}  // namespace blockops

// ---------------------------------------------------------------------------
// Block-ILU(0) over the local square sub-block, block-Jacobi across workers.

namespace {

// Computes inv into `out` from a block already LU-factored in place.
void blockInverse(const double* lu, const int* piv, int n, double* out) {
  double e[16];
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n; ++i) e[i] = (i == c) ? 1.0 : 0.0;
    blockops::luSolve(lu, piv, n, e);
    for (int i = 0; i < n; ++i) out[i * n + c] = e[i];
  }
}

struct LocalPrecond {
  long n = 0;
  int nb = 0;
  bool fallback = false;
  // local square pattern, rows sorted by column
  std::vector<long> row_ptr, col;
  std::vector<double> val;       // factored off-diagonal L/U entries
  std::vector<double> inv_diag;  // explicit inverse of each diagonal block
  std::vector<long> diag_at;     // index of the diagonal entry per row

  // z = M^{-1} r
  void apply(const double* r, double* z) const {
    const int b = nb;
    const std::size_t bs = static_cast<std::size_t>(b) * b;
    if (fallback) {
      for (long i = 0; i < n; ++i) {
        const double* inv = inv_diag.data() + i * bs;
        const double* ri = r + i * b;
        double* zi = z + i * b;
        for (int ii = 0; ii < b; ++ii) {
          double s = 0.0;
          for (int jj = 0; jj < b; ++jj) s += inv[ii * b + jj] * ri[jj];
          zi[ii] = s;
        }
      }
      return;
    }
    std::vector<double> tmp(static_cast<std::size_t>(n) * b);
    // forward: L y = r, unit block diagonal
    for (long i = 0; i < n; ++i) {
      double* yi = tmp.data() + i * b;
      std::memcpy(yi, r + i * b, b * sizeof(double));
      for (long k = row_ptr[i]; k < diag_at[i]; ++k) {
        const double* lik = val.data() + k * bs;
        const double* yk = tmp.data() + col[k] * b;
        for (int ii = 0; ii < b; ++ii)
          for (int jj = 0; jj < b; ++jj) yi[ii] -= lik[ii * b + jj] * yk[jj];
      }
    }
    // backward: U z = y with z_i = inv(U_ii) (y_i - sum U_ij z_j)
    for (long i = n - 1; i >= 0; --i) {
      double* yi = tmp.data() + i * b;
      for (long k = diag_at[i] + 1; k < row_ptr[i + 1]; ++k) {
        const double* uij = val.data() + k * bs;
        const double* zj = z + col[k] * b;
        for (int ii = 0; ii < b; ++ii)
          for (int jj = 0; jj < b; ++jj) yi[ii] -= uij[ii * b + jj] * zj[jj];
      }
      const double* inv = inv_diag.data() + i * bs;
      double* zi = z + i * b;
      for (int ii = 0; ii < b; ++ii) {
        double s = 0.0;
        for (int jj = 0; jj < b; ++jj) s += inv[ii * b + jj] * yi[jj];
        zi[ii] = s;
      }
    }
  }
};

// Extracts the local square part (columns within [off, off+n)) in sorted CSR
// form and factors it in place.
LocalPrecond buildPrecond(const SegmentedBlockMatrix& A, long off,
                          bool& had_breakdown) {
  LocalPrecond P;
  P.n = A.numRows();
  P.nb = A.nb();
  const int b = P.nb;
  const std::size_t bs = static_cast<std::size_t>(b) * b;

  P.row_ptr.assign(P.n + 1, 0);
  std::vector<std::pair<long, const double*>> entries;
  for (long r = 0; r < P.n; ++r) {
    const auto& cols = A.colIds(r);
    const auto& vals = A.rowValues(r);
    entries.clear();
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const long lc = cols[k] - off;
      if (lc >= 0 && lc < P.n) entries.push_back({lc, vals.data() + k * bs});
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [lc, src] : entries) {
      P.col.push_back(lc);
      P.val.insert(P.val.end(), src, src + bs);
    }
    P.row_ptr[r + 1] = static_cast<long>(P.col.size());
  }
  P.diag_at.assign(P.n, -1);
  for (long r = 0; r < P.n; ++r)
    for (long k = P.row_ptr[r]; k < P.row_ptr[r + 1]; ++k)
      if (P.col[k] == r) P.diag_at[r] = k;
  for (long r = 0; r < P.n; ++r)
    if (P.diag_at[r] < 0) throw ShapeError("missing diagonal block in row");

  P.inv_diag.assign(static_cast<std::size_t>(P.n) * bs, 0.0);

  // Block IKJ factorization on the fixed pattern.
  had_breakdown = false;
  std::vector<double> lu(bs), work(bs);
  std::vector<int> piv(b);
  for (long i = 0; i < P.n && !had_breakdown; ++i) {
    for (long kk = P.row_ptr[i]; kk < P.diag_at[i]; ++kk) {
      const long k = P.col[kk];
      double* aik = P.val.data() + kk * bs;
      blockops::mul(work.data(), aik, P.inv_diag.data() + k * bs, b);
      std::memcpy(aik, work.data(), bs * sizeof(double));
      for (long jj = kk + 1; jj < P.row_ptr[i + 1]; ++jj) {
        const long j = P.col[jj];
        for (long t = P.diag_at[k]; t < P.row_ptr[k + 1]; ++t) {
          if (P.col[t] == j) {
            blockops::mulSub(P.val.data() + jj * bs, aik,
                             P.val.data() + t * bs, b);
            break;
          }
        }
      }
    }
    std::memcpy(lu.data(), P.val.data() + P.diag_at[i] * bs,
                bs * sizeof(double));
    if (!blockops::luFactor(lu.data(), piv.data(), b)) {
      had_breakdown = true;
      break;
    }
    blockInverse(lu.data(), piv.data(), b, P.inv_diag.data() + i * bs);
  }

  if (had_breakdown) {
    // Rebuild diagonal inverses from the unfactored matrix, block-Jacobi.
    P.fallback = true;
    for (long r = 0; r < P.n; ++r) {
      const auto& cols = A.colIds(r);
      const auto& vals = A.rowValues(r);
      std::memset(lu.data(), 0, bs * sizeof(double));
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k] - off == r) {
          std::memcpy(lu.data(), vals.data() + k * bs, bs * sizeof(double));
          break;
        }
      }
      double* inv = P.inv_diag.data() + r * bs;
      if (blockops::luFactor(lu.data(), piv.data(), b)) {
        blockInverse(lu.data(), piv.data(), b, inv);
      } else {
        std::memset(inv, 0, bs * sizeof(double));
        for (int t = 0; t < b; ++t) inv[t * b + t] = 1.0;
      }
    }
  }
  return P;
}

struct DistMat {
  const SegmentedBlockMatrix* A = nullptr;
  SolveComm* comm = nullptr;
  long off = 0;
  int nb = 0;
  std::vector<double> ghost;  // numGhostCols * nb

  // y = A x  (collective: refreshes ghost column values)
  void matvec(const double* x, double* y) {
    const long n = A->numRows();
    const int b = nb;
    const std::size_t bs = static_cast<std::size_t>(b) * b;
    if (comm->numGhostCols() > 0) {
      ghost.resize(static_cast<std::size_t>(comm->numGhostCols()) * b);
      comm->refreshGhosts(x, ghost.data());
    }
    for (long r = 0; r < n; ++r) {
      double* yr = y + r * b;
      for (int i = 0; i < b; ++i) yr[i] = 0.0;
      const auto& cols = A->colIds(r);
      const auto& vals = A->rowValues(r);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const long lc = cols[k] - off;
        const double* xv;
        if (lc >= 0 && lc < n) {
          xv = x + lc * b;
        } else {
          xv = ghost.data() + comm->ghostSlot(cols[k]) * b;
        }
        const double* blk = vals.data() + k * bs;
        for (int i = 0; i < b; ++i) {
          double s = yr[i];
          for (int j = 0; j < b; ++j) s += blk[i * b + j] * xv[j];
          yr[i] = s;
        }
      }
    }
  }
};

}  // namespace

LinearReport solveLinear(SegmentedBlockMatrix& A, double tol, int max_iters,
                         int restart, SolveComm& comm) {
  LinearReport rep;
  const long n = A.numRows();
  const int b = A.nb();
  const long nloc = n * b;
  const long off = comm.rowOffset();

  bool breakdown = false;
  LocalPrecond P = buildPrecond(A, off, breakdown);
  rep.precond_fallback = breakdown;

  DistMat mat{&A, &comm, off, b, {}};

  std::vector<double>& x = A.solution();
  x.assign(nloc, 0.0);
  const std::vector<double>& rhs = A.rhs();

  auto dot = [&](const double* u, const double* v) {
    double s = 0.0;
    for (long i = 0; i < nloc; ++i) s += u[i] * v[i];
    return comm.reduceSum(s);
  };

  double bnorm = std::sqrt(dot(rhs.data(), rhs.data()));
  if (bnorm == 0.0) {
    rep.converged = true;
    rep.residual = 0.0;
    return rep;
  }

  const int m = std::max(1, restart);
  std::vector<std::vector<double>> V(m + 1), Z(m);
  std::vector<double> H((m + 1) * m, 0.0), cs(m), sn(m), g(m + 1);
  std::vector<double> r(nloc), w(nloc);

  int iters = 0;
  double rel = 1.0;
  while (iters < max_iters) {
    // r = b - A x
    mat.matvec(x.data(), r.data());
    for (long i = 0; i < nloc; ++i) r[i] = rhs[i] - r[i];
    double beta = std::sqrt(dot(r.data(), r.data()));
    rel = beta / bnorm;
    if (rel <= tol) {
      rep.converged = true;
      break;
    }
    V[0].assign(nloc, 0.0);
    for (long i = 0; i < nloc; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::fill(H.begin(), H.end(), 0.0);

    int j = 0;
    for (; j < m && iters < max_iters; ++j) {
      Z[j].assign(nloc, 0.0);
      P.apply(V[j].data(), Z[j].data());
      mat.matvec(Z[j].data(), w.data());
      for (int i = 0; i <= j; ++i) {
        const double hij = dot(w.data(), V[i].data());
        H[i * m + j] = hij;
        for (long t = 0; t < nloc; ++t) w[t] -= hij * V[i][t];
      }
      const double hnext = std::sqrt(dot(w.data(), w.data()));
      H[(j + 1) * m + j] = hnext;
      ++iters;
      // Givens rotations
      for (int i = 0; i < j; ++i) {
        const double t1 = cs[i] * H[i * m + j] + sn[i] * H[(i + 1) * m + j];
        const double t2 = -sn[i] * H[i * m + j] + cs[i] * H[(i + 1) * m + j];
        H[i * m + j] = t1;
        H[(i + 1) * m + j] = t2;
      }
      const double denom = std::hypot(H[j * m + j], hnext);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = H[j * m + j] / denom;
        sn[j] = hnext / denom;
      }
      H[j * m + j] = cs[j] * H[j * m + j] + sn[j] * hnext;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      rel = std::fabs(g[j + 1]) / bnorm;
      if (hnext == 0.0 || rel <= tol) {
        ++j;
        break;
      }
      V[j + 1].assign(nloc, 0.0);
      for (long t = 0; t < nloc; ++t) V[j + 1][t] = w[t] / hnext;
    }
    // y = H^{-1} g on the j x j triangle, then x += Z y
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H[i * m + k] * y[k];
      y[i] = s / H[i * m + i];
    }
    for (int k = 0; k < j; ++k)
      for (long t = 0; t < nloc; ++t) x[t] += y[k] * Z[k][t];
    if (rel <= tol) {
      // confirm with a true residual
      mat.matvec(x.data(), r.data());
      for (long i = 0; i < nloc; ++i) r[i] = rhs[i] - r[i];
      rel = std::sqrt(dot(r.data(), r.data())) / bnorm;
      if (rel <= tol) {
        rep.converged = true;
        break;
      }
    }
  }

  rep.iterations = iters;
  rep.residual = rel;
  return rep;
}

}  // namespace porosim
