#pragma once

#include <optional>
#include <string>
#include <vector>

#include "porosim/deck.hpp"

namespace porosim {

struct RunOptions {
  std::string out_dir = "out";
  int workers_override = 0;  // 0 keeps the deck's NWORKERS
  std::optional<Method> method_override;
  bool dump_domain = false;
  int verbosity = 0;
};

struct RunStats {
  int steps = 0;
  long nr_g = 0, ls_g = 0, wasted_nr_g = 0, wasted_ls_g = 0;
  long nr_l = 0, ls_l = 0, wasted_nr_l = 0, wasted_ls_l = 0;
  int n_workers = 1;
  std::string method;
  double end_time_days = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> coupled_fraction_per_step;

  double lsPerNr() const {
    return nr_g > 0 ? static_cast<double>(ls_g) / nr_g : 0.0;
  }
};

// Runs the full schedule of a validated deck: partition, distribute,
// initialize, march segments, write outputs under opts.out_dir, and gather
// the per-rank snapshots.
RunStats runSimulation(const DeckModel& model, const RunOptions& opts);

// Parses and validates first; throws DeckError / std::runtime_error with a
// readable message on bad input.
RunStats runSimulationFile(const std::string& deck_path,
                           const RunOptions& opts);

}  // namespace porosim
