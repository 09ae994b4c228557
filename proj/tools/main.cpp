#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "porosim/deck.hpp"
#include "porosim/domain.hpp"
#include "porosim/output.hpp"
#include "porosim/sim.hpp"
#include "porosim/solver.hpp"

namespace {

using namespace porosim;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitSolver = 3;

void printStatsTable(const std::string& method, long steps, long nr,
                     long nr_wasted, long ls, long ls_wasted, double wall_s) {
  std::printf("%-10s %12s %18s %18s %8s %12s\n", "Method", "NumTimeSteps",
              "NRiters", "LSiters", "LS/NR", "WallTime(s)");
  char nr_s[64], ls_s[64];
  std::snprintf(nr_s, sizeof nr_s, "%ld (%ld)", nr, nr_wasted);
  std::snprintf(ls_s, sizeof ls_s, "%ld (%ld)", ls, ls_wasted);
  std::printf("%-10s %12ld %18s %18s %8.2f %12.1f\n", method.c_str(), steps,
              nr_s, ls_s, nr > 0 ? static_cast<double>(ls) / nr : 0.0, wall_s);
}

int cmdRun(const std::string& deck_path, const RunOptions& opts) {
  if (!std::filesystem::exists(deck_path)) {
    std::cerr << "porosim: no such file: " << deck_path << '\n';
    return kExitIo;
  }
  const DeckModel model = parseDeckFile(deck_path);
  const auto report = validateDeck(model);
  if (!report.ok()) {
    std::cout << report.toString();
    std::cerr << "porosim: deck failed validation with "
              << report.items.size() << " violation(s)\n";
    return kExitValidation;
  }
  const RunStats st = runSimulation(model, opts);
  printStatsTable(st.method, st.steps, st.nr_g, st.wasted_nr_g, st.ls_g,
                  st.wasted_ls_g, st.wall_seconds);
  if (st.nr_l > 0)
    std::printf("local (DDM): NRiters %ld (%ld), LSiters %ld (%ld)\n", st.nr_l,
                st.wasted_nr_l, st.ls_l, st.wasted_ls_l);
  return kExitOk;
}

int cmdValidate(const std::string& deck_path) {
  if (!std::filesystem::exists(deck_path)) {
    std::cerr << "porosim: no such file: " << deck_path << '\n';
    return kExitIo;
  }
  const DeckModel model = parseDeckFile(deck_path);
  const auto report = validateDeck(model);
  if (!report.ok()) {
    std::cout << report.toString();
    std::cerr << "porosim: deck failed validation with "
              << report.items.size() << " violation(s)\n";
    return kExitValidation;
  }
  std::cout << "deck is valid\n";
  return kExitOk;
}

int cmdReport(const std::string& run_dir) {
  const std::string meta_path = run_dir + "/run_meta.json";
  std::ifstream mf(meta_path);
  if (!mf) {
    std::cerr << "porosim: no run metadata at " << meta_path << '\n';
    return kExitIo;
  }
  nlohmann::json meta;
  mf >> meta;
  gatherOutputs(run_dir, meta["n_workers"].get<int>());
  const auto& t = meta["totals"];
  printStatsTable(meta["method"].get<std::string>(), t["steps"].get<long>(),
                  t["nr_g"].get<long>(), t["wasted_nr_g"].get<long>(),
                  t["ls_g"].get<long>(), t["wasted_ls_g"].get<long>(),
                  meta["wall_seconds"].get<double>());
  if (t["nr_l"].get<long>() > 0)
    std::printf("local (DDM): NRiters %ld (%ld), LSiters %ld (%ld)\n",
                t["nr_l"].get<long>(), t["wasted_nr_l"].get<long>(),
                t["ls_l"].get<long>(), t["wasted_ls_l"].get<long>());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"porosim - worker-parallel multiphase porous-media simulator"};
  app.require_subcommand(1);

  std::string deck_path, run_dir;
  RunOptions opts;
  std::string method_str;

  auto* run = app.add_subcommand("run", "run a simulation deck");
  run->add_option("deck", deck_path, "input deck path")->required();
  run->add_option("--workers", opts.workers_override, "worker count override");
  run->add_option("--method", method_str,
                  "method override (FIM, IMPEC, CDDM_FIM, ADDM_FIM)");
  run->add_option("--out", opts.out_dir, "output directory");
  run->add_flag("--dump-domain", opts.dump_domain,
                "dump partition, maps and coupling groups as JSON");
  run->add_flag("-v,--verbose", opts.verbosity, "verbose progress");

  auto* validate = app.add_subcommand("validate", "parse and validate a deck");
  validate->add_option("deck", deck_path, "input deck path")->required();

  auto* report = app.add_subcommand("report", "gather outputs and print stats");
  report->add_option("run_dir", run_dir, "completed run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!method_str.empty()) {
      const auto m = methodFromName(method_str);
      if (!m) {
        std::cerr << "porosim: unknown method " << method_str << '\n';
        return kExitValidation;
      }
      opts.method_override = *m;
    }
    if (run->parsed()) return cmdRun(deck_path, opts);
    if (validate->parsed()) return cmdValidate(deck_path);
    if (report->parsed()) return cmdReport(run_dir);
  } catch (const DeckError& e) {
    std::cerr << "porosim: " << e.what() << '\n';
    return kExitValidation;
  } catch (const MissingShard& e) {
    std::cerr << "porosim: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "porosim: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "porosim: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitOk;
}
