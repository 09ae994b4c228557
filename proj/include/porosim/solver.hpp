#pragma once

#include <string>
#include <vector>

#include "porosim/bulk.hpp"
#include "porosim/domain.hpp"
#include "porosim/flux.hpp"
#include "porosim/wells.hpp"

namespace porosim {

class StepFailed : public std::runtime_error {
 public:
  explicit StepFailed(const std::string& what) : std::runtime_error(what) {}
};

// Method actually executed inside a step; FIMddm only ever precedes FIM.
enum class StageMethod { FIM, IMPEC, FIMddm };
const char* stageMethodName(StageMethod m);

struct StepReport {
  std::vector<StageMethod> method_seq;
  int nr_global = 0, ls_global = 0;
  // Local counts are the maximum over the coupled groups of the step, since
  // groups iterate concurrently.
  int nr_local = 0, ls_local = 0;
  int wasted_nr_global = 0, wasted_ls_global = 0;
  int wasted_nr_local = 0, wasted_ls_local = 0;
  int cuts = 0;
  double dt_days = 0.0;
  bool accepted = false;
  int n_groups = 0;
  double coupled_fraction = 0.0;  // workers in groups of size >= 2
  double max_dp = 0.0, max_ds = 0.0;
  double cfl = 0.0;  // IMPEC only
  bool ddm_fallback = false;
};

struct TimeControl {
  double dt = 1.0;  // days
  double dt_min = 1e-4, dt_max = 10.0;
  double dp_target = 1e6;
  double ds_target = 0.05;
  double cut_factor = 0.5;
};

// Per-worker solver: owns the worker's cell state and wells and advances
// one time step collectively with the other workers.
class WorkerSolver {
 public:
  WorkerSolver(const Grid& grid, const DomainMaps& dom, Bulk bulk,
               SolverConfig cfg, Comm& comm);

  BulkVarSet& varset() { return vs_; }
  const BulkVarSet& varset() const { return vs_; }
  std::vector<WellState>& wells() { return wells_; }
  const DomainMaps& domain() const { return *dom_; }
  const SolverConfig& config() const { return cfg_; }
  const Bulk& bulk() const { return bulk_; }
  Comm& comm() { return *comm_; }

  // Hydrostatic initialization; collective only in that everyone must call.
  void initState(const InitSpec& init);

  // Applies schedule controls to the wells this worker owns.
  void applyControls(const std::vector<WellControl>& controls);

  // Advances one time step with the configured method, cutting dt on
  // failure. Throws StepFailed when dt falls below dt_min. Collective.
  StepReport goOneStep(TimeControl& tc);

  // --- pieces, exposed for tests ---

  // Refresh ghost primaries (P, N) from their owners; group-restricted when
  // group != nullptr. Collective over the participating ranks.
  void exchangePrimaries(const std::vector<int>* group = nullptr);

  // Flash + saturation + rock refresh over all local cells; FIM variant
  // fills derivative arrays. Returns false on a failed flash.
  bool refreshProps(bool fim, std::string* why = nullptr);

  // Scaled FIM residual and (optionally) Jacobian over the rows given by
  // `gi`. Boundary ghosts (group_col < 0) contribute frozen-state fluxes to
  // the residual only.
  void assembleFim(double dt_s, const GroupIndexing& gi,
                   SegmentedBlockMatrix* mat, std::vector<double>& resid);

  // Applies the Newton update with an Appleyard-style saturation chop; the
  // damping factor is agreed across `group`. Returns the factor.
  double fimUpdate(const std::vector<double>& u,
                   const std::vector<int>& group);

  // Max-norm of the scaled residual reduced over `group`.
  double fimResidualNorm(double dt_s, const GroupIndexing& gi,
                         const std::vector<int>& group);
  bool fimConverged(double dt_s, const GroupIndexing& gi,
                    const std::vector<int>& group, double tol);

  // One IMPEC step at the current state: implicit pressure, explicit moles.
  // Returns false with a suggested dt on a CFL violation.
  struct ImpecOutcome {
    bool ok = false;
    double cfl = 0.0;
    double dt_suggest = 0.0;
    int ls_iters = 0;
    std::string reason;
  };
  ImpecOutcome impecStep(double dt_s);

  // Adaptive coupling for this step (ADDM): returns this worker's group.
  std::vector<int> computeCouplingGroups(StepReport& rep);

  // Local FIM solve over the given group; returns false on local
  // divergence (the caller then discards the guess).
  struct LocalOutcome {
    bool diverged = false;
    int nr = 0, ls = 0;
  };
  LocalOutcome ddmLocalSolve(const std::vector<int>& group, double dt_s);

  // dt prediction from the accepted step's changes.
  double predictDt(const StepReport& rep, const TimeControl& tc) const;

  // Pore-volume weighted average pressure over all workers.
  double fieldAveragePressure();

  const GroupIndexing& fullIndexing() const { return full_gi_; }
  const std::vector<int>& worldGroup() const { return world_; }
  // Coupling groups of the last DDM-preceded attempt (all workers see the
  // same partition of ranks).
  const std::vector<std::vector<int>>& lastGroups() const {
    return last_groups_;
  }

 private:
  struct NewtonOutcome {
    bool converged = false;
    int nr = 0, ls = 0;
    std::string cut_reason;  // empty when converged
  };
  NewtonOutcome newtonLoop(const GroupIndexing& gi,
                           const std::vector<int>& group, double dt_s,
                           double tol_nr, double tol_ls, int max_nr,
                           bool stop_at_max);

  void saveStepStart();
  void restoreStepStart();
  void acceptStep(StepReport& rep);
  void refreshWells(bool with_deriv);

  const DomainMaps* dom_;
  Bulk bulk_;
  SolverConfig cfg_;
  Comm* comm_;
  BulkVarSet vs_;
  std::vector<WellState> wells_;
  SegmentedBlockMatrix mat_;
  GroupIndexing full_gi_;
  std::vector<int> world_;
  std::vector<double> vp_step_;  // pore volumes frozen at step start
  std::vector<std::vector<int>> last_groups_;
  int nb_ = 0;
};

}  // namespace porosim
