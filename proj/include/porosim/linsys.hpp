#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace porosim {

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct LinearReport {
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  bool converged = false;
  bool precond_fallback = false;  // ILU(0) breakdown, block-Jacobi used
};

// Row-segmented block-sparse matrix. Each local row owns independently
// growable column/value lists, so sparsity patterns and the block size nb
// may change between assemblies while reusing capacity.
class SegmentedBlockMatrix {
 public:
  // Resets structure for a new assembly; previously allocated row capacity
  // is retained.
  void begin(long nrows, int nb);

  long numRows() const { return nrows_; }
  int nb() const { return nb_; }

  // Accumulates into an existing (row,col) block or appends a new one.
  void addBlock(long row, long col, std::span<const double> block);
  void addRhs(long row, std::span<const double> vec);

  const std::vector<long>& colIds(long row) const { return col_[row]; }
  const std::vector<double>& rowValues(long row) const { return val_[row]; }
  std::vector<double>& rhs() { return b_; }
  const std::vector<double>& rhs() const { return b_; }
  std::vector<double>& solution() { return u_; }
  const std::vector<double>& solution() const { return u_; }

  struct Csr {
    long nrows = 0;
    int nb = 0;
    std::vector<long> row_ptr;  // nrows+1
    std::vector<long> col;      // block column indices, sorted per row
    std::vector<double> val;    // nb*nb per block, row-major
  };
  Csr toCsr() const;  // row-sorted; values bit-identical to stored blocks

 private:
  int nb_ = 0;
  long nrows_ = 0;
  std::vector<std::vector<long>> col_;
  std::vector<std::vector<double>> val_;
  std::vector<double> b_, u_;
};

// Collective services a distributed solve needs: ghost-column refresh and
// group-wide reductions. Reduction order is fixed by the implementation so
// repeated runs produce bit-identical results.
class SolveComm {
 public:
  virtual ~SolveComm() = default;
  virtual long rowOffset() const = 0;   // first global block row owned here
  virtual long numGhostCols() const = 0;
  // Maps a remote global block column to a ghost slot in [0, numGhostCols).
  virtual long ghostSlot(long gcol) const = 0;
  // Collective: fills ghost values (numGhostCols*nb) from the owners' x.
  virtual void refreshGhosts(const double* x_local, double* ghost) = 0;
  virtual double reduceSum(double v) = 0;
  virtual double reduceMax(double v) = 0;
};

// Single-worker context: all columns are local.
class SerialSolveComm final : public SolveComm {
 public:
  long rowOffset() const override { return 0; }
  long numGhostCols() const override { return 0; }
  long ghostSlot(long) const override {
    throw std::logic_error("serial solve has no ghost columns");
  }
  void refreshGhosts(const double*, double*) override {}
  double reduceSum(double v) override { return v; }
  double reduceMax(double v) override { return v; }
};

// FGMRES(restart) with a block-ILU(0) preconditioner on the local square
// sub-block and block-Jacobi coupling across workers. On a zero pivot the
// preconditioner falls back to block-Jacobi and the report says so.
LinearReport solveLinear(SegmentedBlockMatrix& mat, double tol, int max_iters,
                         int restart, SolveComm& comm);

// Dense helpers shared with tests and the IMPEC path.
namespace blockops {
// lu <- factor(a) in place with partial pivoting; returns false if singular.
bool luFactor(double* a, int* piv, int n);
void luSolve(const double* lu, const int* piv, int n, double* x);
// c -= a*b for row-major n x n blocks
void mulSub(double* c, const double* a, const double* b, int n);
// c = a*b
void mul(double* c, const double* a, const double* b, int n);
}  // namespace blockops

}  // namespace porosim
