#include "porosim/deck.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "porosim/units.hpp"

namespace porosim {

const char* phaseName(Phase p) {
  switch (p) {
    case Phase::Water: return "WATER";
    case Phase::Oil: return "OIL";
    case Phase::Gas: return "GAS";
  }
  return "?";
}

std::optional<Phase> phaseFromName(const std::string& name) {
  if (name == "WATER") return Phase::Water;
  if (name == "OIL") return Phase::Oil;
  if (name == "GAS") return Phase::Gas;
  return std::nullopt;
}

const char* methodName(Method m) {
  switch (m) {
    case Method::FIM: return "FIM";
    case Method::IMPEC: return "IMPEC";
    case Method::CDDM_FIM: return "CDDM_FIM";
    case Method::ADDM_FIM: return "ADDM_FIM";
  }
  return "?";
}

std::optional<Method> methodFromName(const std::string& name) {
  if (name == "FIM") return Method::FIM;
  if (name == "IMPEC") return Method::IMPEC;
  if (name == "CDDM_FIM") return Method::CDDM_FIM;
  if (name == "ADDM_FIM") return Method::ADDM_FIM;
  return std::nullopt;
}

namespace {

struct Token {
  std::string text;
  int line;
};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

bool isKeywordLike(const std::string& t) {
  return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) != 0);
}

std::vector<Token> tokenize(std::istream& in, int& last_line) {
  std::vector<Token> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find("--"); pos != std::string::npos)
      line.erase(pos);
    std::size_t i = 0;
    const std::size_t n = line.size();
    while (i < n) {
      while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i >= n) break;
      if (line[i] == '/') {
        out.push_back({"/", lineno});
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && !std::isspace(static_cast<unsigned char>(line[j])) &&
             line[j] != '/')
        ++j;
      out.push_back({line.substr(i, j - i), lineno});
      i = j;
    }
  }
  last_line = std::max(1, lineno);
  return out;
}

// Unit handling: values are converted to SI while reading.
struct UnitSystem {
  bool metric = true;
  double pressure() const { return metric ? units::bar : 1.0; }
  double perm() const { return metric ? units::millidarcy : 1.0; }
  double viscosity() const { return metric ? units::centipoise : 1.0; }
  double invPressure() const { return 1.0 / pressure(); }
};

class Parser {
 public:
  Parser(std::vector<Token> toks, int last_line)
      : toks_(std::move(toks)), last_line_(last_line) {}

  DeckModel run() {
    while (!atEnd()) {
      const Token kw = next();
      if (!isKeywordLike(kw.text))
        throw SyntaxError(kw.line, kw.text, "expected a keyword");
      const std::string k = upper(kw.text);
      if (k == "END") break;
      handleKeyword(k, kw.line);
    }
    finalize();
    return std::move(model_);
  }

 private:
  bool atEnd() const { return pos_ >= toks_.size(); }
  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_++]; }
  int hereLine() const {
    return atEnd() ? last_line_ : toks_[pos_].line;
  }

  [[noreturn]] void eofError() const {
    throw SyntaxError(last_line_, "<eof>", "unexpected end of input");
  }

  // Collects raw tokens of one record, consuming the trailing '/'.
  std::vector<Token> record(const std::string& kw) {
    std::vector<Token> r;
    while (true) {
      if (atEnd()) eofError();
      Token t = next();
      if (t.text == "/") return r;
      (void)kw;
      r.push_back(std::move(t));
    }
  }

  double toDouble(const Token& t) const {
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end == nullptr || *end != '\0' || t.text.empty())
      throw SyntaxError(t.line, t.text, "expected a number");
    return v;
  }

  long toInt(const Token& t) const {
    char* end = nullptr;
    const long v = std::strtol(t.text.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || t.text.empty())
      throw SyntaxError(t.line, t.text, "expected an integer");
    return v;
  }

  // Numeric list with N*value repeat expansion, exact count enforced.
  std::vector<double> readDoubles(const std::string& kw, long count,
                                  double scale) {
    std::vector<double> vals;
    int line = hereLine();
    while (true) {
      if (atEnd()) eofError();
      Token t = next();
      line = t.line;
      if (t.text == "/") break;
      auto star = t.text.find('*');
      if (star != std::string::npos && star > 0) {
        Token cnt{t.text.substr(0, star), t.line};
        Token val{t.text.substr(star + 1), t.line};
        const long n = toInt(cnt);
        if (n <= 0) throw SyntaxError(t.line, t.text, "repeat count must be positive");
        const double v = toDouble(val) * scale;
        vals.insert(vals.end(), static_cast<std::size_t>(n), v);
      } else {
        vals.push_back(toDouble(t) * scale);
      }
    }
    if (static_cast<long>(vals.size()) != count)
      throw ArityError(line, kw, count, static_cast<long>(vals.size()));
    return vals;
  }

  void requireDimens(const std::string& kw, int line) const {
    if (!have_.count("DIMENS"))
      throw SyntaxError(line, kw, "DIMENS must appear before per-cell arrays");
  }

  void handleKeyword(const std::string& k, int line) {
    if (have_.count(k) && k != "VISCTAB")
      throw SyntaxError(line, k, "duplicate keyword");
    if (k == "TITLE") {
      auto r = record(k);
      std::string t;
      for (const auto& tok : r) {
        if (!t.empty()) t += ' ';
        t += tok.text;
      }
      model_.title = t;
    } else if (k == "UNITS") {
      auto r = record(k);
      if (r.size() != 1) throw ArityError(line, k, 1, static_cast<long>(r.size()));
      const std::string u = upper(r[0].text);
      if (u == "METRIC")
        units_.metric = true;
      else if (u == "SI")
        units_.metric = false;
      else
        throw SyntaxError(r[0].line, r[0].text, "expected METRIC or SI");
    } else if (k == "DIMENS") {
      auto r = record(k);
      if (r.size() != 3) throw ArityError(line, k, 3, static_cast<long>(r.size()));
      model_.nx = static_cast<int>(toInt(r[0]));
      model_.ny = static_cast<int>(toInt(r[1]));
      model_.nz = static_cast<int>(toInt(r[2]));
      if (model_.nx <= 0 || model_.ny <= 0 || model_.nz <= 0)
        throw SyntaxError(line, k, "cell counts must be positive");
    } else if (k == "DX" || k == "DY" || k == "DZ") {
      requireDimens(k, line);
      const long n = k == "DX" ? model_.nx : k == "DY" ? model_.ny : model_.nz;
      auto v = readDoubles(k, n, 1.0);
      (k == "DX" ? model_.dx : k == "DY" ? model_.dy : model_.dz) = std::move(v);
    } else if (k == "TOPS") {
      auto r = record(k);
      if (r.size() != 1) throw ArityError(line, k, 1, static_cast<long>(r.size()));
      model_.depth_top = toDouble(r[0]);
    } else if (k == "PORO") {
      requireDimens(k, line);
      model_.poro = readDoubles(k, model_.numCells(), 1.0);
    } else if (k == "PERMX" || k == "PERMY" || k == "PERMZ") {
      requireDimens(k, line);
      auto v = readDoubles(k, model_.numCells(), units_.perm());
      (k == "PERMX"   ? model_.permx
       : k == "PERMY" ? model_.permy
                      : model_.permz) = std::move(v);
    } else if (k == "ACTNUM") {
      requireDimens(k, line);
      auto v = readDoubles(k, model_.numCells(), 1.0);
      model_.actnum.assign(v.size(), 1);
      for (std::size_t i = 0; i < v.size(); ++i)
        model_.actnum[i] = static_cast<int>(v[i]);
    } else if (k == "PHASES") {
      auto r = record(k);
      if (r.empty()) throw ArityError(line, k, 1, 0);
      for (const auto& t : r) {
        auto p = phaseFromName(upper(t.text));
        if (!p) throw SyntaxError(t.line, t.text, "unknown phase");
        phases_.push_back(*p);
      }
    } else if (k == "FLUID") {
      parseFluid(line);
    } else if (k == "VISCTAB") {
      parseViscTable(line);
    } else if (k == "SWOF" || k == "SGOF") {
      parseSatTable(k, line);
    } else if (k == "ROCK") {
      auto r = record(k);
      if (r.size() != 2) throw ArityError(line, k, 2, static_cast<long>(r.size()));
      model_.rock.p_ref = toDouble(r[0]) * units_.pressure();
      model_.rock.compressibility = toDouble(r[1]) * units_.invPressure();
    } else if (k == "EQUIL") {
      auto r = record(k);
      if (r.size() < 2 || r.size() > 4)
        throw ArityError(line, k, 2, static_cast<long>(r.size()));
      model_.init.ref_depth = toDouble(r[0]);
      model_.init.ref_pressure = toDouble(r[1]) * units_.pressure();
      if (r.size() >= 3) model_.init.woc_depth = toDouble(r[2]);
      if (r.size() >= 4) model_.init.goc_depth = toDouble(r[3]);
    } else if (k == "WELLS") {
      parseWells(line);
    } else if (k == "SOLVER") {
      parseSolver(line);
    } else if (k == "SCHEDULE") {
      parseSchedule(line);
    } else {
      throw SyntaxError(line, k, "unknown keyword");
    }
    have_.insert(k);
  }

  void parseFluid(int line) {
    (void)line;
    while (true) {
      auto r = record("FLUID");
      if (r.empty()) break;  // lone '/' terminates the table
      if (r.size() != 5 && r.size() != 6)
        throw ArityError(r[0].line, "FLUID", 5, static_cast<long>(r.size()));
      FluidPhaseSpec f;
      auto p = phaseFromName(upper(r[0].text));
      if (!p) throw SyntaxError(r[0].line, r[0].text, "unknown phase");
      f.phase = *p;
      f.component = phaseName(*p);
      f.xi_ref = toDouble(r[1]);
      f.rho_ref = toDouble(r[2]);
      f.compressibility = toDouble(r[3]) * units_.invPressure();
      f.viscosity = toDouble(r[4]) * units_.viscosity();
      f.p_ref = r.size() == 6 ? toDouble(r[5]) * units_.pressure()
                              : 1.0e5;
      model_.fluid.phases.push_back(std::move(f));
    }
  }

  void parseViscTable(int line) {
    auto head = record("VISCTAB");
    if (head.size() != 1)
      throw ArityError(line, "VISCTAB", 1, static_cast<long>(head.size()));
    auto p = phaseFromName(upper(head[0].text));
    if (!p) throw SyntaxError(head[0].line, head[0].text, "unknown phase");
    std::vector<std::array<double, 2>> rows;
    while (true) {
      auto r = record("VISCTAB");
      if (r.empty()) break;
      if (r.size() != 2)
        throw ArityError(r[0].line, "VISCTAB", 2, static_cast<long>(r.size()));
      rows.push_back({toDouble(r[0]) * units_.pressure(),
                      toDouble(r[1]) * units_.viscosity()});
    }
    visc_tables_[*p] = std::move(rows);
  }

  void parseSatTable(const std::string& k, int line) {
    SatTable2P t;
    t.displacing = (k == "SWOF") ? Phase::Water : Phase::Gas;
    while (true) {
      auto r = record(k);
      if (r.empty()) break;
      if (r.size() != 4)
        throw ArityError(r[0].line, k, 4, static_cast<long>(r.size()));
      SatTableRow row;
      row.s = toDouble(r[0]);
      row.kr_displacing = toDouble(r[1]);
      row.kr_displaced = toDouble(r[2]);
      row.pc = toDouble(r[3]) * units_.pressure();
      t.rows.push_back(row);
    }
    if (t.rows.empty()) throw ArityError(line, k, 1, 0);
    model_.sat_table.tables.push_back(std::move(t));
  }

  void parseWells(int line) {
    (void)line;
    while (true) {
      auto r = record("WELLS");
      if (r.empty()) break;
      if (r.size() != 7)
        throw ArityError(r[0].line, "WELLS", 7, static_cast<long>(r.size()));
      WellSpec w;
      w.name = upper(r[0].text);
      const std::string kind = upper(r[1].text);
      if (kind == "INJ")
        w.kind = WellKind::Injector;
      else if (kind == "PROD")
        w.kind = WellKind::Producer;
      else
        throw SyntaxError(r[1].line, r[1].text, "expected INJ or PROD");
      w.i = static_cast<int>(toInt(r[2])) - 1;
      w.j = static_cast<int>(toInt(r[3])) - 1;
      w.k1 = static_cast<int>(toInt(r[4])) - 1;
      w.k2 = static_cast<int>(toInt(r[5])) - 1;
      w.radius = toDouble(r[6]);
      model_.wells.push_back(std::move(w));
    }
  }

  void parseSolver(int line) {
    (void)line;
    SolverConfig& c = model_.solver;
    while (true) {
      auto r = record("SOLVER");
      if (r.empty()) break;
      if (r.size() != 2)
        throw ArityError(r[0].line, "SOLVER", 2, static_cast<long>(r.size()));
      const std::string key = upper(r[0].text);
      const Token& v = r[1];
      if (key == "METHOD") {
        auto m = methodFromName(upper(v.text));
        if (!m) throw SyntaxError(v.line, v.text, "unknown method");
        c.method = *m;
      } else if (key == "NWORKERS") {
        c.n_workers = static_cast<int>(toInt(v));
      } else if (key == "TOLNR") {
        c.tol_nr_global = toDouble(v);
      } else if (key == "TOLLS") {
        c.tol_ls_global = toDouble(v);
      } else if (key == "TOLNRLOCAL") {
        c.tol_nr_local = toDouble(v);
      } else if (key == "TOLLSLOCAL") {
        c.tol_ls_local = toDouble(v);
      } else if (key == "DTINIT") {
        c.dt_init = toDouble(v);
      } else if (key == "DTMAX") {
        c.dt_max = toDouble(v);
      } else if (key == "DTMIN") {
        c.dt_min = toDouble(v);
      } else if (key == "MAXNR") {
        c.max_nr_iters = static_cast<int>(toInt(v));
      } else if (key == "MAXNRLOCAL") {
        c.max_nr_local = static_cast<int>(toInt(v));
      } else if (key == "MAXLS") {
        c.max_ls_iters = static_cast<int>(toInt(v));
      } else if (key == "RESTART") {
        c.gmres_restart = static_cast<int>(toInt(v));
      } else if (key == "MARKTHRESHOLD") {
        c.ddm_mark_threshold = toDouble(v);
      } else if (key == "DPTARGET") {
        c.dp_target = toDouble(v) * units_.pressure();
      } else if (key == "DSTARGET") {
        c.ds_target = toDouble(v);
      } else if (key == "CUTFACTOR") {
        c.cut_factor = toDouble(v);
      } else if (key == "DSCHOP") {
        c.max_ds_update = toDouble(v);
      } else if (key == "CFLTARGET") {
        c.cfl_target = toDouble(v);
      } else if (key == "PMIN") {
        c.min_pressure = toDouble(v) * units_.pressure();
      } else if (key == "PMAX") {
        c.max_pressure = toDouble(v) * units_.pressure();
      } else if (key == "NEGMOLES") {
        c.neg_moles_rel = toDouble(v);
      } else {
        throw SyntaxError(r[0].line, r[0].text, "unknown SOLVER key");
      }
    }
  }

  void parseSchedule(int line) {
    bool saw_time = false;
    while (true) {
      if (atEnd()) eofError();
      Token kw = next();
      const std::string k = upper(kw.text);
      if (k == "ENDSCHED") break;
      if (k == "TIME") {
        auto r = record(k);
        if (r.size() != 1) throw ArityError(kw.line, k, 1, static_cast<long>(r.size()));
        ScheduleEvent ev;
        ev.time_days = toDouble(r[0]);
        model_.schedule.push_back(std::move(ev));
        saw_time = true;
      } else if (k == "WINJ" || k == "WPROD" || k == "WSHUT") {
        if (!saw_time)
          throw SyntaxError(kw.line, kw.text, "well controls must follow a TIME record");
        auto r = record(k);
        WellControl wc;
        if (k == "WSHUT") {
          if (r.size() != 1) throw ArityError(kw.line, k, 1, static_cast<long>(r.size()));
          wc.well = upper(r[0].text);
          wc.shut = true;
        } else if (k == "WINJ") {
          if (r.size() != 4) throw ArityError(kw.line, k, 4, static_cast<long>(r.size()));
          wc.well = upper(r[0].text);
          auto p = phaseFromName(upper(r[1].text));
          if (!p) throw SyntaxError(r[1].line, r[1].text, "unknown phase");
          wc.inj_phase = *p;
          wc.type = controlType(r[2]);
          wc.target = toDouble(r[3]) *
                      (wc.type == WellControlType::Bhp ? units_.pressure() : 1.0);
        } else {
          if (r.size() != 3) throw ArityError(kw.line, k, 3, static_cast<long>(r.size()));
          wc.well = upper(r[0].text);
          wc.type = controlType(r[1]);
          wc.target = toDouble(r[2]) *
                      (wc.type == WellControlType::Bhp ? units_.pressure() : 1.0);
        }
        model_.schedule.back().controls.push_back(std::move(wc));
      } else {
        throw SyntaxError(kw.line, kw.text,
                          "expected TIME, WINJ, WPROD, WSHUT or ENDSCHED");
      }
    }
    (void)line;
  }

  WellControlType controlType(const Token& t) const {
    const std::string s = upper(t.text);
    if (s == "RATE") return WellControlType::Rate;
    if (s == "BHP") return WellControlType::Bhp;
    throw SyntaxError(t.line, t.text, "expected RATE or BHP");
  }

  void finalize() {
    static const char* required[] = {"DIMENS", "DX",    "DY",   "DZ",
                                     "TOPS",   "PORO",  "PERMX", "PERMY",
                                     "PERMZ",  "PHASES", "FLUID", "ROCK",
                                     "EQUIL",  "SCHEDULE"};
    for (const char* r : required)
      if (!have_.count(r)) throw MissingSection(last_line_, r);

    if (model_.actnum.empty())
      model_.actnum.assign(static_cast<std::size_t>(model_.numCells()), 1);

    // Reorder fluid rows to the PHASES declaration order and attach
    // viscosity tables.
    std::vector<FluidPhaseSpec> ordered;
    for (Phase p : phases_) {
      bool found = false;
      for (auto& f : model_.fluid.phases) {
        if (f.phase == p) {
          if (auto it = visc_tables_.find(p); it != visc_tables_.end())
            f.visc_table = it->second;
          ordered.push_back(f);
          found = true;
          break;
        }
      }
      if (!found)
        throw MissingSection(last_line_,
                             std::string("FLUID row for ") + phaseName(p));
    }
    model_.fluid.phases = std::move(ordered);
  }

  std::vector<Token> toks_;
  int last_line_;
  std::size_t pos_ = 0;
  DeckModel model_;
  UnitSystem units_;
  std::set<std::string> have_;
  std::vector<Phase> phases_;
  std::map<Phase, std::vector<std::array<double, 2>>> visc_tables_;
};

}  // namespace

DeckModel parseDeck(std::istream& in) {
  int last_line = 1;
  auto toks = tokenize(in, last_line);
  return Parser(std::move(toks), last_line).run();
}

DeckModel parseDeck(const std::string& text) {
  std::istringstream in(text);
  return parseDeck(in);
}

DeckModel parseDeckFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("no such file: " + path);
  return parseDeck(in);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check(ValidationReport& rep, bool ok, const std::string& kw, long idx,
           const std::string& msg) {
  if (!ok) rep.items.push_back({kw, idx, msg});
}

}  // namespace

std::string ValidationReport::toString() const {
  std::ostringstream os;
  for (const auto& v : items) {
    os << v.keyword;
    if (v.index >= 0) os << '[' << v.index << ']';
    os << ": " << v.message << '\n';
  }
  return os.str();
}

ValidationReport validateDeck(const DeckModel& m) {
  ValidationReport rep;
  const long nc = m.numCells();

  check(rep, m.nx > 0 && m.ny > 0 && m.nz > 0, "DIMENS", -1,
        "cell counts must be positive");
  auto checkSizes = [&](const char* kw, const std::vector<double>& v, long n) {
    check(rep, static_cast<long>(v.size()) == n, kw, -1, "wrong entry count");
    for (long i = 0; i < static_cast<long>(v.size()); ++i)
      check(rep, v[i] > 0.0, kw, i, "must be > 0");
  };
  checkSizes("DX", m.dx, m.nx);
  checkSizes("DY", m.dy, m.ny);
  checkSizes("DZ", m.dz, m.nz);

  check(rep, static_cast<long>(m.actnum.size()) == nc, "ACTNUM", -1,
        "wrong entry count");
  for (long c = 0; c < static_cast<long>(m.actnum.size()); ++c)
    check(rep, m.actnum[c] == 0 || m.actnum[c] == 1, "ACTNUM", c,
          "must be 0 or 1");

  auto active = [&](long c) {
    return c < static_cast<long>(m.actnum.size()) && m.actnum[c] == 1;
  };
  check(rep, static_cast<long>(m.poro.size()) == nc, "PORO", -1,
        "wrong entry count");
  for (long c = 0; c < static_cast<long>(m.poro.size()); ++c)
    if (active(c))
      check(rep, m.poro[c] > 0.0 && m.poro[c] <= 1.0, "PORO", c,
            "must be in (0,1]");
  auto checkPerm = [&](const char* kw, const std::vector<double>& v) {
    check(rep, static_cast<long>(v.size()) == nc, kw, -1, "wrong entry count");
    for (long c = 0; c < static_cast<long>(v.size()); ++c)
      if (active(c)) check(rep, v[c] > 0.0, kw, c, "must be > 0");
  };
  checkPerm("PERMX", m.permx);
  checkPerm("PERMY", m.permy);
  checkPerm("PERMZ", m.permz);

  // Fluid
  check(rep, !m.fluid.phases.empty(), "PHASES", -1, "at least one phase");
  std::set<Phase> seen;
  for (long j = 0; j < static_cast<long>(m.fluid.phases.size()); ++j) {
    const auto& f = m.fluid.phases[j];
    check(rep, seen.insert(f.phase).second, "PHASES", j, "duplicate phase");
    check(rep, f.xi_ref > 0.0, "FLUID", j, "xi_ref must be > 0");
    check(rep, f.rho_ref > 0.0, "FLUID", j, "rho_ref must be > 0");
    check(rep, f.compressibility >= 0.0, "FLUID", j,
          "compressibility must be >= 0");
    check(rep, f.viscosity > 0.0, "FLUID", j, "viscosity must be > 0");
    check(rep, f.p_ref > 0.0, "FLUID", j, "p_ref must be > 0");
    for (long r = 0; r + 1 < static_cast<long>(f.visc_table.size()); ++r)
      check(rep, f.visc_table[r][0] < f.visc_table[r + 1][0], "VISCTAB", r,
            "pressure must be strictly increasing");
    for (long r = 0; r < static_cast<long>(f.visc_table.size()); ++r)
      check(rep, f.visc_table[r][1] > 0.0, "VISCTAB", r,
            "viscosity must be > 0");
  }

  // Saturation tables
  const bool has_w = m.fluid.indexOf(Phase::Water) >= 0;
  const bool has_o = m.fluid.indexOf(Phase::Oil) >= 0;
  const bool has_g = m.fluid.indexOf(Phase::Gas) >= 0;
  const int np = m.fluid.numPhases();
  if (np >= 2) {
    if (has_w)
      check(rep, m.sat_table.find(Phase::Water) != nullptr, "SWOF", -1,
            "required for a system with mobile water");
    if (has_g && has_o)
      check(rep, m.sat_table.find(Phase::Gas) != nullptr, "SGOF", -1,
            "required for a gas-oil system");
  }
  for (const auto& t : m.sat_table.tables) {
    const char* kw = t.displacing == Phase::Water ? "SWOF" : "SGOF";
    for (long r = 0; r < static_cast<long>(t.rows.size()); ++r) {
      const auto& row = t.rows[r];
      if (r + 1 < static_cast<long>(t.rows.size()))
        check(rep, row.s < t.rows[r + 1].s, kw, r,
              "saturation must be strictly increasing");
      check(rep, row.kr_displacing >= 0.0 && row.kr_displacing <= 1.0, kw, r,
            "kr must be in [0,1]");
      check(rep, row.kr_displaced >= 0.0 && row.kr_displaced <= 1.0, kw, r,
            "kr must be in [0,1]");
      if (r + 1 < static_cast<long>(t.rows.size()))
        check(rep, row.kr_displacing <= t.rows[r + 1].kr_displacing, kw, r,
              "displacing-phase kr must be non-decreasing");
    }
  }

  check(rep, m.rock.p_ref > 0.0, "ROCK", -1, "p_ref must be > 0");
  check(rep, m.rock.compressibility >= 0.0, "ROCK", -1,
        "compressibility must be >= 0");
  check(rep, m.init.ref_pressure > 0.0, "EQUIL", -1,
        "reference pressure must be > 0");

  // Wells
  std::set<std::string> well_names;
  for (long w = 0; w < static_cast<long>(m.wells.size()); ++w) {
    const auto& ws = m.wells[w];
    check(rep, well_names.insert(ws.name).second, "WELLS", w,
          "duplicate well name");
    check(rep, ws.radius > 0.0, "WELLS", w, "radius must be > 0");
    const bool in_grid = ws.i >= 0 && ws.i < m.nx && ws.j >= 0 && ws.j < m.ny &&
                         ws.k1 >= 0 && ws.k2 < m.nz && ws.k1 <= ws.k2;
    check(rep, in_grid, "WELLS", w, "perforation outside grid");
    if (in_grid) {
      for (int k = ws.k1; k <= ws.k2; ++k) {
        const long c = ws.i + static_cast<long>(m.nx) * (ws.j + static_cast<long>(m.ny) * k);
        check(rep, active(c), "WELLS", w, "perforated cell is inactive");
      }
    }
  }

  // Schedule
  check(rep, !m.schedule.empty(), "SCHEDULE", -1, "schedule is empty");
  for (long e = 0; e < static_cast<long>(m.schedule.size()); ++e) {
    const auto& ev = m.schedule[e];
    check(rep, ev.time_days >= 0.0, "SCHEDULE", e, "time must be >= 0");
    if (e > 0)
      check(rep, ev.time_days > m.schedule[e - 1].time_days, "SCHEDULE", e,
            "event times must be strictly increasing");
    for (const auto& wc : ev.controls) {
      const WellSpec* spec = nullptr;
      for (const auto& ws : m.wells)
        if (ws.name == wc.well) spec = &ws;
      check(rep, spec != nullptr, "SCHEDULE", e, "unknown well " + wc.well);
      if (spec && !wc.shut) {
        check(rep, wc.target > 0.0, "SCHEDULE", e,
              "control target must be > 0");
        if (spec->kind == WellKind::Injector)
          check(rep, m.fluid.indexOf(wc.inj_phase) >= 0, "SCHEDULE", e,
                "injected phase not in PHASES");
      }
    }
  }
  if (!m.schedule.empty())
    check(rep, m.schedule.back().time_days > 0.0, "SCHEDULE", -1,
          "end time must be > 0");

  // Solver configuration
  const SolverConfig& c = m.solver;
  auto tolOk = [](double t) { return t > 0.0 && t < 1.0; };
  check(rep, tolOk(c.tol_nr_global), "SOLVER", -1, "TOLNR must be in (0,1)");
  check(rep, tolOk(c.tol_ls_global), "SOLVER", -1, "TOLLS must be in (0,1)");
  check(rep, tolOk(c.tol_nr_local), "SOLVER", -1, "TOLNRLOCAL must be in (0,1)");
  check(rep, tolOk(c.tol_ls_local), "SOLVER", -1, "TOLLSLOCAL must be in (0,1)");
  check(rep, c.tol_nr_local >= c.tol_nr_global, "SOLVER", -1,
        "TOLNRLOCAL must be >= TOLNR");
  check(rep, c.dt_min <= c.dt_init && c.dt_init <= c.dt_max, "SOLVER", -1,
        "need DTMIN <= DTINIT <= DTMAX");
  check(rep, c.dt_min > 0.0, "SOLVER", -1, "DTMIN must be > 0");
  check(rep, c.n_workers >= 1, "SOLVER", -1, "NWORKERS must be >= 1");
  check(rep, c.max_nr_iters >= 1, "SOLVER", -1, "MAXNR must be >= 1");
  check(rep, c.cut_factor > 0.0 && c.cut_factor < 1.0, "SOLVER", -1,
        "CUTFACTOR must be in (0,1)");
  check(rep, c.ddm_mark_threshold > 0.0, "SOLVER", -1,
        "MARKTHRESHOLD must be > 0");

  return rep;
}

// ---------------------------------------------------------------------------
// Serialization (SI units; reparses to a structurally equal model)

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void writeArray(std::ostream& os, const char* kw,
                const std::vector<double>& v) {
  os << kw << '\n';
  int col = 0;
  for (double x : v) {
    os << ' ' << fmt(x);
    if (++col % 8 == 0) os << '\n';
  }
  os << " /\n";
}

}  // namespace

std::string serializeDeck(const DeckModel& m) {
  std::ostringstream os;
  if (!m.title.empty()) os << "TITLE " << m.title << " /\n";
  os << "UNITS SI /\n";
  os << "DIMENS " << m.nx << ' ' << m.ny << ' ' << m.nz << " /\n";
  writeArray(os, "DX", m.dx);
  writeArray(os, "DY", m.dy);
  writeArray(os, "DZ", m.dz);
  os << "TOPS " << fmt(m.depth_top) << " /\n";
  writeArray(os, "PORO", m.poro);
  writeArray(os, "PERMX", m.permx);
  writeArray(os, "PERMY", m.permy);
  writeArray(os, "PERMZ", m.permz);
  os << "ACTNUM\n";
  {
    int col = 0;
    for (int a : m.actnum) {
      os << ' ' << a;
      if (++col % 20 == 0) os << '\n';
    }
    os << " /\n";
  }
  os << "PHASES";
  for (const auto& f : m.fluid.phases) os << ' ' << phaseName(f.phase);
  os << " /\n";
  os << "FLUID\n";
  for (const auto& f : m.fluid.phases)
    os << ' ' << phaseName(f.phase) << ' ' << fmt(f.xi_ref) << ' '
       << fmt(f.rho_ref) << ' ' << fmt(f.compressibility) << ' '
       << fmt(f.viscosity) << ' ' << fmt(f.p_ref) << " /\n";
  os << "/\n";
  for (const auto& f : m.fluid.phases) {
    if (f.visc_table.empty()) continue;
    os << "VISCTAB " << phaseName(f.phase) << " /\n";
    for (const auto& r : f.visc_table)
      os << ' ' << fmt(r[0]) << ' ' << fmt(r[1]) << " /\n";
    os << "/\n";
  }
  for (const auto& t : m.sat_table.tables) {
    os << (t.displacing == Phase::Water ? "SWOF" : "SGOF") << '\n';
    for (const auto& r : t.rows)
      os << ' ' << fmt(r.s) << ' ' << fmt(r.kr_displacing) << ' '
         << fmt(r.kr_displaced) << ' ' << fmt(r.pc) << " /\n";
    os << "/\n";
  }
  os << "ROCK " << fmt(m.rock.p_ref) << ' ' << fmt(m.rock.compressibility)
     << " /\n";
  os << "EQUIL " << fmt(m.init.ref_depth) << ' ' << fmt(m.init.ref_pressure)
     << ' ' << fmt(m.init.woc_depth) << ' ' << fmt(m.init.goc_depth) << " /\n";
  if (!m.wells.empty()) {
    os << "WELLS\n";
    for (const auto& w : m.wells)
      os << ' ' << w.name << ' '
         << (w.kind == WellKind::Injector ? "INJ" : "PROD") << ' ' << w.i + 1
         << ' ' << w.j + 1 << ' ' << w.k1 + 1 << ' ' << w.k2 + 1 << ' '
         << fmt(w.radius) << " /\n";
    os << "/\n";
  }
  const SolverConfig& c = m.solver;
  os << "SOLVER\n";
  os << " METHOD " << methodName(c.method) << " /\n";
  os << " NWORKERS " << c.n_workers << " /\n";
  os << " TOLNR " << fmt(c.tol_nr_global) << " /\n";
  os << " TOLLS " << fmt(c.tol_ls_global) << " /\n";
  os << " TOLNRLOCAL " << fmt(c.tol_nr_local) << " /\n";
  os << " TOLLSLOCAL " << fmt(c.tol_ls_local) << " /\n";
  os << " DTINIT " << fmt(c.dt_init) << " /\n";
  os << " DTMAX " << fmt(c.dt_max) << " /\n";
  os << " DTMIN " << fmt(c.dt_min) << " /\n";
  os << " MAXNR " << c.max_nr_iters << " /\n";
  os << " MAXNRLOCAL " << c.max_nr_local << " /\n";
  os << " MAXLS " << c.max_ls_iters << " /\n";
  os << " RESTART " << c.gmres_restart << " /\n";
  os << " MARKTHRESHOLD " << fmt(c.ddm_mark_threshold) << " /\n";
  os << " DPTARGET " << fmt(c.dp_target) << " /\n";
  os << " DSTARGET " << fmt(c.ds_target) << " /\n";
  os << " CUTFACTOR " << fmt(c.cut_factor) << " /\n";
  os << " DSCHOP " << fmt(c.max_ds_update) << " /\n";
  os << " CFLTARGET " << fmt(c.cfl_target) << " /\n";
  os << " PMIN " << fmt(c.min_pressure) << " /\n";
  os << " PMAX " << fmt(c.max_pressure) << " /\n";
  os << " NEGMOLES " << fmt(c.neg_moles_rel) << " /\n";
  os << "/\n";
  os << "SCHEDULE\n";
  for (const auto& ev : m.schedule) {
    os << "TIME " << fmt(ev.time_days) << " /\n";
    for (const auto& wc : ev.controls) {
      if (wc.shut) {
        os << " WSHUT " << wc.well << " /\n";
        continue;
      }
      const WellSpec* spec = nullptr;
      for (const auto& ws : m.wells)
        if (ws.name == wc.well) spec = &ws;
      const bool inj = spec && spec->kind == WellKind::Injector;
      if (inj)
        os << " WINJ " << wc.well << ' ' << phaseName(wc.inj_phase) << ' '
           << (wc.type == WellControlType::Rate ? "RATE" : "BHP") << ' '
           << fmt(wc.target) << " /\n";
      else
        os << " WPROD " << wc.well << ' '
           << (wc.type == WellControlType::Rate ? "RATE" : "BHP") << ' '
           << fmt(wc.target) << " /\n";
    }
  }
  os << "ENDSCHED\nEND\n";
  return os.str();
}

}  // namespace porosim
