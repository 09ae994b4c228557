#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "porosim/deck.hpp"
#include "porosim/domain.hpp"
#include "porosim/grid.hpp"
#include "porosim/sim.hpp"

namespace py = pybind11;
using namespace porosim;

namespace {

std::vector<std::string> validateText(const std::string& text) {
  const DeckModel m = parseDeck(text);
  const ValidationReport rep = validateDeck(m);
  std::vector<std::string> out;
  for (const auto& v : rep.items) {
    std::string s = v.keyword;
    if (v.index >= 0) s += "[" + std::to_string(v.index) + "]";
    out.push_back(s + ": " + v.message);
  }
  return out;
}

py::dict deckSummary(const std::string& text) {
  const DeckModel m = parseDeck(text);
  py::dict d;
  d["title"] = m.title;
  d["dimens"] = py::make_tuple(m.nx, m.ny, m.nz);
  std::vector<std::string> phases;
  for (const auto& f : m.fluid.phases) phases.push_back(phaseName(f.phase));
  d["phases"] = phases;
  std::vector<std::string> wells;
  for (const auto& w : m.wells) wells.push_back(w.name);
  d["wells"] = wells;
  d["method"] = methodName(m.solver.method);
  d["n_workers"] = m.solver.n_workers;
  d["end_time_days"] = m.endTimeDays();
  d["n_events"] = m.schedule.size();
  return d;
}

bool roundTrip(const std::string& text) {
  const DeckModel a = parseDeck(text);
  const DeckModel b = parseDeck(serializeDeck(a));
  return a == b;
}

py::dict runDeck(const std::string& deck_path, const std::string& out_dir,
                 int workers, const std::string& method, bool dump_domain) {
  RunOptions opts;
  opts.out_dir = out_dir;
  opts.workers_override = workers;
  opts.dump_domain = dump_domain;
  if (!method.empty()) {
    const auto m = methodFromName(method);
    if (!m) throw std::invalid_argument("unknown method " + method);
    opts.method_override = *m;
  }
  const RunStats st = runSimulationFile(deck_path, opts);
  py::dict d;
  d["steps"] = st.steps;
  d["nr_g"] = st.nr_g;
  d["ls_g"] = st.ls_g;
  d["wasted_nr_g"] = st.wasted_nr_g;
  d["wasted_ls_g"] = st.wasted_ls_g;
  d["nr_l"] = st.nr_l;
  d["ls_l"] = st.ls_l;
  d["n_workers"] = st.n_workers;
  d["method"] = st.method;
  d["end_time_days"] = st.end_time_days;
  d["wall_seconds"] = st.wall_seconds;
  d["ls_per_nr"] = st.lsPerNr();
  return d;
}

std::vector<std::vector<int>> components(
    int n, const std::vector<std::pair<int, int>>& edges) {
  CouplingGraph g;
  g.n_vertices = n;
  for (auto [a, b] : edges)
    g.edges.push_back({std::min(a, b), std::max(a, b)});
  return connectedComponents(g);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "porosim: worker-parallel multiphase porous-media simulator";

  m.def("validate_deck", &validateText, py::arg("text"),
        "Parse and validate deck text; returns a list of violations "
        "(empty means valid).");
  m.def("deck_summary", &deckSummary, py::arg("text"),
        "Parse deck text and return its headline contents.");
  m.def("serialize_round_trip", &roundTrip, py::arg("text"),
        "True when parse -> serialize -> reparse reproduces the model.");
  m.def("run", &runDeck, py::arg("deck_path"), py::arg("out_dir") = "out",
        py::arg("workers") = 0, py::arg("method") = "",
        py::arg("dump_domain") = false,
        "Run a deck file and return iteration statistics.");
  m.def("connected_components", &components, py::arg("n_vertices"),
        py::arg("edges"),
        "Connected components of an undirected graph over 0..n-1.");

  py::register_exception<DeckError>(m, "DeckError");
}
