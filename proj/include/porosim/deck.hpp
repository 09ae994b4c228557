#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace porosim {

enum class Phase { Water = 0, Oil = 1, Gas = 2 };

const char* phaseName(Phase p);
std::optional<Phase> phaseFromName(const std::string& name);

enum class Method { FIM, IMPEC, CDDM_FIM, ADDM_FIM };

const char* methodName(Method m);
std::optional<Method> methodFromName(const std::string& name);

// ---------------------------------------------------------------------------
// Parse errors. Every parse error carries a 1-based line number.

class DeckError : public std::runtime_error {
 public:
  DeckError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class SyntaxError : public DeckError {
 public:
  SyntaxError(int line, const std::string& token, const std::string& detail)
      : DeckError(line, "syntax error near '" + token + "': " + detail),
        token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class MissingSection : public DeckError {
 public:
  MissingSection(int line, const std::string& name)
      : DeckError(line, "required section " + name + " is missing"),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class ArityError : public DeckError {
 public:
  ArityError(int line, const std::string& keyword, long expected, long got)
      : DeckError(line, keyword + " expects " + std::to_string(expected) +
                            " values, got " + std::to_string(got)),
        keyword_(keyword),
        expected_(expected),
        got_(got) {}
  const std::string& keyword() const { return keyword_; }
  long expected() const { return expected_; }
  long got() const { return got_; }

 private:
  std::string keyword_;
  long expected_;
  long got_;
};

// ---------------------------------------------------------------------------
// Deck model. All stored quantities are SI (Pa, m, s, mol, kg); METRIC decks
// are converted while parsing.

struct FluidPhaseSpec {
  Phase phase = Phase::Water;
  std::string component;     // one component per phase
  double xi_ref = 0.0;       // mol/m^3 at p_ref
  double rho_ref = 0.0;      // kg/m^3 at p_ref
  double compressibility = 0.0;  // 1/Pa
  double viscosity = 0.0;    // Pa*s, used when visc_table is empty
  double p_ref = 0.0;        // Pa
  std::vector<std::array<double, 2>> visc_table;  // rows (P, mu)

  bool operator==(const FluidPhaseSpec&) const = default;
};

struct FluidSpec {
  std::vector<FluidPhaseSpec> phases;  // deck order; n_p == n_c

  int numPhases() const { return static_cast<int>(phases.size()); }
  int indexOf(Phase p) const {
    for (int j = 0; j < numPhases(); ++j)
      if (phases[j].phase == p) return j;
    return -1;
  }

  bool operator==(const FluidSpec&) const = default;
};

struct SatTableRow {
  double s = 0.0;
  double kr_displacing = 0.0;
  double kr_displaced = 0.0;
  double pc = 0.0;  // Pa, displaced-phase pressure minus displacing-phase pressure

  bool operator==(const SatTableRow&) const = default;
};

struct SatTable2P {
  Phase displacing = Phase::Water;
  std::vector<SatTableRow> rows;

  bool operator==(const SatTable2P&) const = default;
};

struct SatTable {
  std::vector<SatTable2P> tables;

  const SatTable2P* find(Phase displacing) const {
    for (const auto& t : tables)
      if (t.displacing == displacing) return &t;
    return nullptr;
  }

  bool operator==(const SatTable&) const = default;
};

struct RockSpec {
  double p_ref = 0.0;           // Pa
  double compressibility = 0.0;  // 1/Pa

  bool operator==(const RockSpec&) const = default;
};

struct InitSpec {
  double ref_depth = 0.0;     // m
  double ref_pressure = 0.0;  // Pa
  double woc_depth = 1.0e9;   // m; below the grid means no water zone
  double goc_depth = -1.0e9;  // m; above the grid means no gas zone

  bool operator==(const InitSpec&) const = default;
};

enum class WellKind { Injector, Producer };

struct WellSpec {
  std::string name;
  WellKind kind = WellKind::Producer;
  int i = 0, j = 0;      // 0-based column position
  int k1 = 0, k2 = 0;    // 0-based perforated layer range, inclusive
  double radius = 0.0;   // m

  bool operator==(const WellSpec&) const = default;
};

enum class WellControlType { Rate, Bhp };

struct WellControl {
  std::string well;
  bool shut = false;
  WellControlType type = WellControlType::Bhp;
  Phase inj_phase = Phase::Water;  // injectors only
  double target = 0.0;  // rate: surface m^3/day; bhp: Pa

  bool operator==(const WellControl&) const = default;
};

struct ScheduleEvent {
  double time_days = 0.0;
  std::vector<WellControl> controls;

  bool operator==(const ScheduleEvent&) const = default;
};

struct SolverConfig {
  Method method = Method::FIM;
  double tol_nr_global = 1.0e-4;
  double tol_ls_global = 1.0e-4;
  double tol_nr_local = 1.0e-2;
  double tol_ls_local = 1.0e-2;
  double dt_init = 1.0;    // days
  double dt_max = 10.0;    // days
  double dt_min = 1.0e-4;  // days
  int max_nr_iters = 15;
  int max_nr_local = 10;
  int max_ls_iters = 200;
  int gmres_restart = 30;
  double ddm_mark_threshold = 5.0e-3;
  int n_workers = 1;
  double dp_target = 1.0e6;  // Pa, time-step growth target
  double ds_target = 0.05;
  double cut_factor = 0.5;
  double max_ds_update = 0.2;  // saturation chop limit per Newton update
  double cfl_target = 0.9;     // IMPEC dt prediction aims below this
  double min_pressure = 1.0e3;  // Pa, physical-check window
  double max_pressure = 2.0e8;  // Pa
  double neg_moles_rel = -1.0e-10;

  bool operator==(const SolverConfig&) const = default;
};

struct DeckModel {
  std::string title;
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> dx, dy, dz;  // per-axis cell sizes, m
  double depth_top = 0.0;          // m, depth of the top face of layer k=0
  std::vector<double> poro;        // fraction, per cell
  std::vector<double> permx, permy, permz;  // m^2, per cell
  std::vector<int> actnum;                  // 0/1, per cell
  FluidSpec fluid;
  SatTable sat_table;
  RockSpec rock;
  InitSpec init;
  std::vector<WellSpec> wells;
  std::vector<ScheduleEvent> schedule;
  SolverConfig solver;

  long numCells() const { return static_cast<long>(nx) * ny * nz; }
  double endTimeDays() const {
    return schedule.empty() ? 0.0 : schedule.back().time_days;
  }

  bool operator==(const DeckModel&) const = default;
};

// ---------------------------------------------------------------------------

DeckModel parseDeck(std::istream& in);
DeckModel parseDeck(const std::string& text);
DeckModel parseDeckFile(const std::string& path);

struct Violation {
  std::string keyword;
  long index = -1;  // cell/row index when applicable, else -1
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> items;
  bool ok() const { return items.empty(); }
  std::string toString() const;
};

ValidationReport validateDeck(const DeckModel& model);

// Emits a deck in SI units that parses back to a structurally equal model.
std::string serializeDeck(const DeckModel& model);

}  // namespace porosim
