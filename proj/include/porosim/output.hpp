#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "porosim/bulk.hpp"
#include "porosim/domain.hpp"

namespace porosim {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class MissingShard : public std::runtime_error {
 public:
  MissingShard(const std::string& time, int rank)
      : std::runtime_error("snapshot t=" + time + " is missing the shard of rank " +
                           std::to_string(rank)) {}
};

struct SummaryRow {
  double time_days = 0.0;
  double fpr = 0.0;  // pore-volume weighted field pressure, Pa
  std::vector<double> inj_rate;    // per phase, surface m^3/day
  std::vector<double> prod_rate;   // per phase, surface m^3/day
  std::vector<double> well_bhp;    // per deck well, Pa
  std::vector<double> well_rate;   // per deck well * phase, signed m^3/day
  std::string methods;
  double dt_days = 0.0;
  int nr_g = 0, ls_g = 0, nr_l = 0, ls_l = 0;
  int wasted_nr_g = 0, wasted_ls_g = 0, wasted_nr_l = 0, wasted_ls_l = 0;
  int cuts = 0;
  int n_groups = 0;
  double coupled_fraction = 0.0;
  double max_dp = 0.0, max_ds = 0.0, cfl = 0.0;
};

// Rank-0 CSV time series, one row per accepted step, flushed per row.
class SummaryWriter {
 public:
  SummaryWriter(const std::string& run_dir,
                const std::vector<std::string>& phase_names,
                const std::vector<std::string>& well_names);
  void writeRow(const SummaryRow& row);

 private:
  std::ofstream out_;
  int np_;
  int n_wells_;
};

std::string formatTimeToken(double time_days);

// Per-rank field snapshot of interior cells at a report time.
void writeSnapshot(const std::string& run_dir, int rank, const BulkVarSet& vs,
                   const DomainMaps& dom,
                   const std::vector<std::string>& phase_names,
                   double time_days);

// Merges per-rank snapshot shards into snap_t*_merged.csv sorted by global
// cell index. Shards are retained; rerunning produces identical output.
void gatherOutputs(const std::string& run_dir, int n_ranks);

}  // namespace porosim
