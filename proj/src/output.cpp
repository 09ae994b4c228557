#include "porosim/output.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace porosim {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string formatTimeToken(double time_days) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", time_days);
  return buf;
}

SummaryWriter::SummaryWriter(const std::string& run_dir,
                             const std::vector<std::string>& phase_names,
                             const std::vector<std::string>& well_names)
    : np_(static_cast<int>(phase_names.size())),
      n_wells_(static_cast<int>(well_names.size())) {
  fs::create_directories(run_dir);
  const std::string path = run_dir + "/summary.csv";
  out_.open(path, std::ios::trunc);
  if (!out_) throw IoError("cannot open " + path);
  out_ << "time_days,fpr_pa";
  for (const auto& p : phase_names) out_ << ",inj_" << p << "_m3day";
  for (const auto& p : phase_names) out_ << ",prod_" << p << "_m3day";
  for (const auto& w : well_names) {
    out_ << ',' << w << "_bhp_pa";
    for (const auto& p : phase_names) out_ << ',' << w << '_' << p << "_m3day";
  }
  out_ << ",methods,dt_days,nr_g,ls_g,nr_l,ls_l,wasted_nr_g,wasted_ls_g,"
          "wasted_nr_l,wasted_ls_l,cuts,n_groups,coupled_fraction,max_dp_pa,"
          "max_ds,cfl\n";
  out_.flush();
}

void SummaryWriter::writeRow(const SummaryRow& r) {
  out_ << fmt(r.time_days) << ',' << fmt(r.fpr);
  for (int j = 0; j < np_; ++j) out_ << ',' << fmt(r.inj_rate[j]);
  for (int j = 0; j < np_; ++j) out_ << ',' << fmt(r.prod_rate[j]);
  for (int w = 0; w < n_wells_; ++w) {
    out_ << ',' << fmt(r.well_bhp[w]);
    for (int j = 0; j < np_; ++j) out_ << ',' << fmt(r.well_rate[w * np_ + j]);
  }
  out_ << ',' << r.methods << ',' << fmt(r.dt_days) << ',' << r.nr_g << ','
       << r.ls_g << ',' << r.nr_l << ',' << r.ls_l << ',' << r.wasted_nr_g
       << ',' << r.wasted_ls_g << ',' << r.wasted_nr_l << ',' << r.wasted_ls_l
       << ',' << r.cuts << ',' << r.n_groups << ',' << fmt(r.coupled_fraction)
       << ',' << fmt(r.max_dp) << ',' << fmt(r.max_ds) << ',' << fmt(r.cfl)
       << '\n';
  out_.flush();
  if (!out_) throw IoError("summary write failed");
}

void writeSnapshot(const std::string& run_dir, int rank, const BulkVarSet& vs,
                   const DomainMaps& dom,
                   const std::vector<std::string>& phase_names,
                   double time_days) {
  fs::create_directories(run_dir);
  const std::string path = run_dir + "/snap_t" + formatTimeToken(time_days) +
                           "_r" + std::to_string(rank) + ".csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path);
  out << "global_index,P";
  for (const auto& p : phase_names) out << ",S_" << p;
  for (const auto& p : phase_names) out << ",N_" << p;
  out << '\n';
  const int np = vs.np;
  const int nc = vs.nc;
  for (int l = 0; l < dom.numInterior(); ++l) {
    out << dom.interior[l] << ',' << fmt(vs.pressure[l]);
    for (int j = 0; j < np; ++j) out << ',' << fmt(vs.sat[l * np + j]);
    for (int i = 0; i < nc; ++i) out << ',' << fmt(vs.moles[l * nc + i]);
    out << '\n';
  }
  if (!out) throw IoError("snapshot write failed: " + path);
}

void gatherOutputs(const std::string& run_dir, int n_ranks) {
  const std::regex shard_re(R"(snap_t(.+)_r(\d+)\.csv)");
  std::map<std::string, std::map<int, fs::path>> by_time;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (std::regex_match(name, m, shard_re))
      by_time[m[1].str()][std::stoi(m[2].str())] = e.path();
  }
  for (const auto& [time, shards] : by_time) {
    for (int r = 0; r < n_ranks; ++r)
      if (!shards.count(r)) throw MissingShard(time, r);
    std::string header;
    std::vector<std::pair<long, std::string>> rows;
    for (const auto& [rank, path] : shards) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot read " + path.string());
      std::string line;
      if (!std::getline(in, line)) throw IoError("empty shard " + path.string());
      if (header.empty())
        header = line;
      else if (header != line)
        throw IoError("shard headers disagree for t=" + time);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back({std::stol(line.substr(0, line.find(','))), line});
      }
    }
    std::sort(rows.begin(), rows.end());
    const std::string merged = run_dir + "/snap_t" + time + "_merged.csv";
    std::ofstream out(merged, std::ios::trunc);
    if (!out) throw IoError("cannot open " + merged);
    out << header << '\n';
    for (const auto& [gid, line] : rows) out << line << '\n';
  }
}

}  // namespace porosim
