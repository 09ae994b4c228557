#include <doctest.h>

#include <random>

#include "porosim/linsys.hpp"
#include "testutil.hpp"

using namespace porosim;

TEST_CASE("begin resets structure and zeroes vectors") {
  SegmentedBlockMatrix m;
  m.begin(4, 3);
  CHECK(m.numRows() == 4);
  CHECK(m.nb() == 3);
  for (long r = 0; r < 4; ++r) CHECK(m.colIds(r).empty());
  CHECK(m.rhs().size() == 12);

  // reuse with a different block size, then begin again without solving
  const double b4[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  m.begin(2, 4);
  m.addBlock(0, 0, {b4, 16});
  m.begin(2, 1);
  CHECK(m.nb() == 1);
  CHECK(m.colIds(0).empty());
}

TEST_CASE("addBlock accumulates and appends") {
  SegmentedBlockMatrix m;
  m.begin(2, 2);
  const double b[4] = {1, 2, 3, 4};
  const double nb[4] = {-1, -2, -3, -4};
  m.addBlock(0, 1, {b, 4});
  CHECK(m.colIds(0).size() == 1);
  m.addBlock(0, 1, {nb, 4});
  CHECK(m.colIds(0).size() == 1);
  for (double v : m.rowValues(0)) CHECK(v == 0.0);
  m.addBlock(0, 0, {b, 4});
  CHECK(m.colIds(0).size() == 2);
  const double wrong[2] = {1, 2};
  CHECK_THROWS_AS(m.addBlock(0, 0, {wrong, 2}), ShapeError);
}

TEST_CASE("CSR conversion sorts columns and preserves values bit-exactly") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> vd(-5.0, 5.0);
  SegmentedBlockMatrix m;
  const long n = 5;
  const int nb = 2;
  m.begin(n, nb);
  for (long r = 0; r < n; ++r) {
    std::vector<long> cols{r};
    if (r > 0) cols.push_back(r - 1);
    if (r + 1 < n) cols.push_back(r + 1);
    std::shuffle(cols.begin(), cols.end(), rng);
    for (long c : cols) {
      double blk[nb * nb];
      for (auto& v : blk) v = vd(rng);
      m.addBlock(r, c, {blk, nb * nb});
    }
  }
  const auto csr = m.toCsr();
  CHECK(csr.row_ptr.front() == 0);
  CHECK(csr.row_ptr.back() == static_cast<long>(csr.col.size()));
  for (long r = 0; r < n; ++r)
    for (long k = csr.row_ptr[r] + 1; k < csr.row_ptr[r + 1]; ++k)
      CHECK(csr.col[k - 1] < csr.col[k]);
  CHECK(testutil::denseFromCsr(csr, n) == testutil::denseFromSegmented(m, n));
}

TEST_CASE("empty rows are allowed in CSR (rowPtr repeats)") {
  SegmentedBlockMatrix m;
  m.begin(3, 1);
  const double one = 1.0;
  m.addBlock(0, 0, {&one, 1});
  m.addBlock(2, 2, {&one, 1});
  const auto csr = m.toCsr();
  CHECK(csr.row_ptr == std::vector<long>{0, 1, 1, 2});
}

TEST_CASE("block-diagonal row pointers") {
  SegmentedBlockMatrix m;
  m.begin(2, 2);
  const double b[4] = {2, 0, 0, 2};
  m.addBlock(0, 0, {b, 4});
  m.addBlock(1, 1, {b, 4});
  CHECK(m.toCsr().row_ptr == std::vector<long>{0, 1, 2});
}

TEST_CASE("identity solves in one iteration") {
  SegmentedBlockMatrix m;
  m.begin(3, 2);
  const double eye[4] = {1, 0, 0, 1};
  for (long r = 0; r < 3; ++r) m.addBlock(r, r, {eye, 4});
  for (long r = 0; r < 3; ++r) {
    const double rv[2] = {1.0 * r + 1, -2.0 * r};
    m.addRhs(r, {rv, 2});
  }
  SerialSolveComm comm;
  const auto rep = solveLinear(m, 1e-12, 50, 10, comm);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  for (std::size_t i = 0; i < m.rhs().size(); ++i)
    CHECK(m.solution()[i] == doctest::Approx(m.rhs()[i]));
}

TEST_CASE("2x scaled identity gives u = b/2") {
  SegmentedBlockMatrix m;
  m.begin(2, 2);
  const double two[4] = {2, 0, 0, 2};
  m.addBlock(0, 0, {two, 4});
  m.addBlock(1, 1, {two, 4});
  const double rv[2] = {4.0, -6.0};
  m.addRhs(0, {rv, 2});
  m.addRhs(1, {rv, 2});
  SerialSolveComm comm;
  const auto rep = solveLinear(m, 1e-12, 50, 10, comm);
  CHECK(rep.converged);
  for (std::size_t i = 0; i < m.rhs().size(); ++i)
    CHECK(m.solution()[i] == doctest::Approx(m.rhs()[i] / 2.0));
}

namespace {

// Random diagonally dominant block system with a banded pattern.
void fillRandomSystem(SegmentedBlockMatrix& m, long n, int nb,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> vd(-1.0, 1.0);
  m.begin(n, nb);
  std::vector<double> blk(nb * nb);
  for (long r = 0; r < n; ++r) {
    double offsum = 0.0;
    for (long c = std::max<long>(0, r - 2); c <= std::min<long>(n - 1, r + 2);
         ++c) {
      if (c == r) continue;
      for (auto& v : blk) {
        v = vd(rng);
        offsum += std::fabs(v);
      }
      m.addBlock(r, c, {blk.data(), blk.size()});
    }
    for (auto& v : blk) v = vd(rng);
    for (int i = 0; i < nb; ++i) blk[i * nb + i] = offsum + 1.0 + vd(rng) * 0.1;
    m.addBlock(r, r, {blk.data(), blk.size()});
    std::vector<double> rv(nb);
    for (auto& v : rv) v = vd(rng);
    m.addRhs(r, {rv.data(), rv.size()});
  }
}

}  // namespace

TEST_CASE("FGMRES+ILU(0) matches the dense oracle on random DD systems") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const long n = 20;
    const int nb = 4;
    SegmentedBlockMatrix m;
    fillRandomSystem(m, n, nb, rng);
    const auto dense = testutil::denseFromSegmented(m, n);
    const auto x_ref = testutil::denseSolve(dense, m.rhs());
    SerialSolveComm comm;
    const auto rep = solveLinear(m, 1e-12, 400, 30, comm);
    CHECK(rep.converged);
    for (long i = 0; i < n * nb; ++i)
      CHECK(m.solution()[i] == doctest::Approx(x_ref[i]).epsilon(1e-8));
  }
}

TEST_CASE("solver reports the relative residual contract") {
  std::mt19937_64 rng(55);
  SegmentedBlockMatrix m;
  fillRandomSystem(m, 50, 2, rng);
  SerialSolveComm comm;
  const auto rep = solveLinear(m, 1e-10, 400, 30, comm);
  CHECK(rep.converged);
  CHECK(rep.residual <= 1e-10);
}

TEST_CASE("two identical runs produce bit-identical solutions") {
  std::mt19937_64 rng1(77), rng2(77);
  SegmentedBlockMatrix m1, m2;
  fillRandomSystem(m1, 30, 3, rng1);
  fillRandomSystem(m2, 30, 3, rng2);
  SerialSolveComm comm;
  solveLinear(m1, 1e-11, 400, 30, comm);
  solveLinear(m2, 1e-11, 400, 30, comm);
  CHECK(m1.solution() == m2.solution());
}

TEST_CASE("singular pivot falls back to block-Jacobi and reports it") {
  SegmentedBlockMatrix m;
  m.begin(2, 1);
  const double z = 0.0, one = 1.0, eps = 0.5;
  m.addBlock(0, 0, {&z, 1});     // zero pivot
  m.addBlock(0, 1, {&one, 1});
  m.addBlock(1, 0, {&one, 1});
  m.addBlock(1, 1, {&eps, 1});
  const double rv = 1.0;
  m.addRhs(0, {&rv, 1});
  m.addRhs(1, {&rv, 1});
  SerialSolveComm comm;
  const auto rep = solveLinear(m, 1e-10, 400, 30, comm);
  CHECK(rep.precond_fallback);
  CHECK(rep.converged);  // GMRES still solves the nonsingular system
}

TEST_CASE("FGMRES+ILU(0) solves SPD systems to 1e-10") {
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> vd(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const long n = 40;
    const int nb = 2;
    // SPD via symmetric banded blocks plus strong diagonal
    std::vector<std::vector<double>> blocks(n * n);
    auto blockRef = [&](long r, long c) -> std::vector<double>& {
      return blocks[r * n + c];
    };
    for (long r = 0; r < n; ++r) {
      for (long c = r; c <= std::min(n - 1, r + 2); ++c) {
        std::vector<double> b(nb * nb);
        for (auto& v : b) v = vd(rng);
        if (c == r) {
          // symmetrize the diagonal block
          for (int i = 0; i < nb; ++i)
            for (int j = 0; j < i; ++j) b[i * nb + j] = b[j * nb + i];
          for (int i = 0; i < nb; ++i) b[i * nb + i] = 8.0 + vd(rng);
          blockRef(r, c) = b;
        } else {
          blockRef(r, c) = b;
          // transpose into the mirror block
          std::vector<double> t(nb * nb);
          for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j) t[j * nb + i] = b[i * nb + j];
          blockRef(c, r) = t;
        }
      }
    }
    SegmentedBlockMatrix m;
    m.begin(n, nb);
    for (long r = 0; r < n; ++r) {
      for (long c = 0; c < n; ++c)
        if (!blocks[r * n + c].empty())
          m.addBlock(r, c, {blocks[r * n + c].data(), blocks[r * n + c].size()});
      std::vector<double> rv(nb);
      for (auto& v : rv) v = vd(rng);
      m.addRhs(r, {rv.data(), rv.size()});
    }
    const auto x_ref =
        testutil::denseSolve(testutil::denseFromSegmented(m, n), m.rhs());
    SerialSolveComm comm;
    const auto rep = solveLinear(m, 1e-10, 500, 30, comm);
    CHECK(rep.converged);
    CHECK(rep.residual <= 1e-10);
    for (std::size_t i = 0; i < x_ref.size(); ++i)
      CHECK(m.solution()[i] == doctest::Approx(x_ref[i]).epsilon(1e-8));
  }
}
