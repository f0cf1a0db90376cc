// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfakf/cgra/grid.hpp"
#include "mfakf/cgra/schedule.hpp"
#include "mfakf/error.hpp"
#include "mfakf/faddeeva.hpp"
#include "mfakf/kernels.hpp"
#include "mfakf/matrix.hpp"
#include "mfakf/scenario_io.hpp"

namespace mfakf::cli {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

// --- mfa ---------------------------------------------------------------------

int cmd_mfa(const std::string& a_path, const std::string& b_path, const std::string& c_path,
            const std::string& d_path, const std::string& out_path, bool check) {
  Matrix a = read_matrix(a_path);
  Matrix b = read_matrix(b_path);
  Matrix c = read_matrix(c_path);
  Matrix d = read_matrix(d_path);
  faddeeva::SchurResult r = faddeeva::mfa(faddeeva::build_compound(a, b, c, d));
  write_matrix(r.value, out_path);
  if (check) {
    Matrix x = dense::solve(a, b);                  // pivoted-LU oracle route
    Matrix oracle = dense::gemm(1.0, c, x, 1.0, d);
    const double resid = max_abs_diff(r.value, oracle) / (1.0 + oracle.max_abs());
    std::cout << "r_diag_min_abs " << fmt_double(r.r_diag_min_abs) << "\n";
    std::cout << "residual " << fmt_double(resid) << "\n";
  }
  return 0;
}

// --- kf ------------------------------------------------------------------------

int cmd_kf(const std::string& scenario_path, const std::string& out_csv,
           const std::string& engine) {
  kalman::Scenario sc = kalman::load_scenario(scenario_path);
  kalman::Engine eng;
  if (engine == "mfa")
    eng = kalman::Engine::Mfa;
  else if (engine == "direct")
    eng = kalman::Engine::Direct;
  else
    throw ConfigError("unknown engine '" + engine + "' (expected mfa|direct)");
  kalman::ScenarioTrace trace = kalman::run_scenario(sc, eng);
  kalman::write_trace_csv(trace, out_csv);
  return 0;
}

// --- sim -----------------------------------------------------------------------

json report_json(const cgra::CycleReport& rep, const std::string& workload,
                 std::size_t size, const std::string& mode, const std::string& grid) {
  json j = json::parse(rep.to_json());
  j["workload"] = workload;
  j["size"] = size;
  j["mode"] = mode;
  j["grid"] = grid;
  return j;
}

int cmd_sim(const std::string& workload, std::size_t size, const std::string& mode_s,
            const std::string& config_path, const std::string& out_json,
            const std::string& sweep, const std::string& out_csv, std::uint64_t seed,
            const std::string& grid_s) {
  cgra::SimConfig cfg =
      config_path.empty() ? cgra::SimConfig{} : cgra::SimConfig::load(config_path);
  cgra::Workload w = cgra::make_workload(workload, size, seed);

  if (sweep.empty()) {
    cgra::Mode mode = cgra::mode_from_string(mode_s);
    cgra::CycleReport rep;
    std::string where = "pe";
    if (grid_s.empty()) {
      rep = cgra::simulate_pe(w, cfg, mode);
    } else {
      // "config": the tile array from the config file; or a preset "2x2".
      cgra::GridConfig g = cfg.grid;
      if (grid_s != "config") {
        if (grid_s.size() == 3 && grid_s[1] == 'x' && grid_s[0] == grid_s[2])
          g = cgra::GridConfig::preset(grid_s[0] - '0', cfg.hop_latency);
        else
          throw ConfigError("unknown grid '" + grid_s + "' (expected 2x2|3x3|4x4|config)");
      }
      rep = cgra::simulate_grid(w, g, cfg, mode);
      where = std::to_string(g.rows) + "x" + std::to_string(g.cols);
    }
    json j = report_json(rep, workload, size, mode_s, where);
    if (out_json.empty())
      std::cout << j.dump(2) << "\n";
    else
      write_text(out_json, j.dump(2) + "\n");
    if (!out_csv.empty())
      write_text(out_csv, cgra::CycleReport::csv_header() + "\n" +
                              rep.csv_row(workload, size, mode_s, where) + "\n");
    return 0;
  }

  std::ostringstream csv;
  csv << cgra::CycleReport::csv_header() << "\n";
  json all = json::array();
  if (sweep == "modes") {
    for (const char* m : {"base", "hw", "sw"}) {
      cgra::CycleReport rep = cgra::simulate_pe(w, cfg, cgra::mode_from_string(m));
      csv << rep.csv_row(workload, size, m, "pe") << "\n";
      all.push_back(report_json(rep, workload, size, m, "pe"));
    }
  } else if (sweep == "grids") {
    const std::string& mode_used = mode_s;
    cgra::Mode mode = cgra::mode_from_string(mode_used);
    for (int k : {2, 3, 4}) {
      cgra::GridConfig g = cgra::GridConfig::preset(k, cfg.hop_latency);
      cgra::CycleReport rep = cgra::simulate_grid(w, g, cfg, mode);
      const std::string gname = std::to_string(k) + "x" + std::to_string(k);
      csv << rep.csv_row(workload, size, mode_used, gname) << "\n";
      all.push_back(report_json(rep, workload, size, mode_used, gname));
    }
  } else {
    throw ConfigError("unknown sweep '" + sweep + "' (expected modes|grids)");
  }
  if (!out_csv.empty()) write_text(out_csv, csv.str());
  if (!out_json.empty()) write_text(out_json, all.dump(2) + "\n");
  if (out_csv.empty() && out_json.empty()) std::cout << csv.str();
  return 0;
}

// --- report ---------------------------------------------------------------------

struct CsvRow {
  std::string workload, mode, grid;
  std::size_t size = 0;
  long long cycles = 0, flops = 0, stalls = 0, fills = 0, noc = 0;
  double utilization = 0, achieved = 0, peak = 0;
};

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv " + path + ": empty file");
  if (line != cgra::CycleReport::csv_header())
    throw ConfigError("csv " + path + ": unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw ConfigError("csv " + path + ": malformed row '" + line + "'");
    try {
      CsvRow r;
      r.workload = f[0];
      r.size = std::stoull(f[1]);
      r.mode = f[2];
      r.grid = f[3];
      r.cycles = std::stoll(f[4]);
      r.flops = std::stoll(f[5]);
      r.stalls = std::stoll(f[6]);
      r.fills = std::stoll(f[7]);
      r.utilization = std::stod(f[8]);
      r.achieved = std::stod(f[9]);
      r.peak = std::stod(f[10]);
      r.noc = std::stoll(f[11]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ConfigError("csv " + path + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", v * 100.0);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

int cmd_report(const std::vector<std::string>& csv_paths, const std::string& out_md,
               const std::string& out_tidy) {
  std::vector<CsvRow> rows;
  for (const std::string& p : csv_paths) {
    std::vector<CsvRow> r = read_csv(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw ConfigError("report: no data rows");

  std::ostringstream md, tidy;
  tidy << "workload,size,mode,grid,metric,value\n";
  auto tidy_row = [&](const CsvRow& r, const std::string& metric, double v) {
    tidy << r.workload << "," << r.size << "," << r.mode << "," << r.grid << "," << metric
         << "," << fmt_double(v) << "\n";
  };

  // Group rows by (workload, size) preserving input order.
  std::vector<std::pair<std::string, std::vector<const CsvRow*>>> groups;
  for (const CsvRow& r : rows) {
    const std::string key = r.workload + "/" + std::to_string(r.size);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(&r);
  }

  md << "# Simulation summary\n";
  for (auto& [key, grp] : groups) {
    md << "\n## " << key << "\n\n";
    const bool is_grid_sweep = grp.size() > 1 && grp.front()->grid != "pe";
    if (!is_grid_sweep) {
      md << "| mode | cycles | flops | utilization | achieved Gflops | peak Gflops |\n";
      md << "|------|--------|-------|-------------|-----------------|-------------|\n";
      const CsvRow* base = nullptr;
      for (const CsvRow* r : grp) {
        if (r->mode == "base") base = r;
        md << "| " << r->mode << " | " << r->cycles << " | " << r->flops << " | "
           << pct(r->utilization) << " | " << fixed2(r->achieved) << " | "
           << fixed2(r->peak) << " |\n";
        tidy_row(*r, "utilization", r->utilization);
        tidy_row(*r, "achieved_gflops", r->achieved);
        tidy_row(*r, "cycles", static_cast<double>(r->cycles));
      }
      if (base) {
        md << "\n";
        for (const CsvRow* r : grp) {
          if (r == base || base->utilization <= 0) continue;
          const double norm = r->utilization / base->utilization;
          const double raw = base->achieved > 0 ? r->achieved / base->achieved : 0.0;
          md << "- speedup(" << r->mode << " vs base) = " << fixed2(norm)
             << " (peak-normalized; raw Gflops ratio " << fixed2(raw) << ")\n";
          tidy_row(*r, "speedup_vs_base_normalized", norm);
          tidy_row(*r, "speedup_vs_base_gflops", raw);
        }
      }
    } else {
      md << "| grid | cycles | utilization | achieved Gflops | NoC words |\n";
      md << "|------|--------|-------------|-----------------|-----------|\n";
      const CsvRow* sat = grp.front();
      for (const CsvRow* r : grp) {
        md << "| " << r->grid << " | " << r->cycles << " | " << pct(r->utilization)
           << " | " << fixed2(r->achieved) << " | " << r->noc << " |\n";
        tidy_row(*r, "utilization", r->utilization);
        tidy_row(*r, "cycles", static_cast<double>(r->cycles));
        if (r->utilization > sat->utilization) sat = r;
      }
      md << "\n- utilization saturates around " << pct(sat->utilization) << " (at "
         << sat->grid << ")\n";
    }
  }

  if (out_md.empty())
    std::cout << md.str();
  else
    write_text(out_md, md.str());
  if (!out_tidy.empty()) write_text(out_tidy, tidy.str());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Schur-complement engine, Kalman filtering and PE/tile-array simulation"};
  app.require_subcommand(1);

  // mfa
  std::string a_path, b_path, c_path, d_path, out_path;
  bool check = false;
  CLI::App* mfa = app.add_subcommand("mfa", "Run the two-step engine on four matrix files");
  mfa->add_option("--a", a_path, "matrix A file")->required();
  mfa->add_option("--b", b_path, "matrix B file")->required();
  mfa->add_option("--c", c_path, "matrix C file (stored negated internally)")->required();
  mfa->add_option("--d", d_path, "matrix D file")->required();
  mfa->add_option("--out", out_path, "output matrix file")->required();
  mfa->add_flag("--check", check, "print r_diag_min_abs and residual vs the LU oracle");

  // kf
  std::string scenario_path, kf_out, engine = "mfa";
  CLI::App* kf = app.add_subcommand("kf", "Run a filter scenario, write the trace CSV");
  kf->add_option("--scenario", scenario_path, "scenario JSON")->required();
  kf->add_option("--out", kf_out, "trace CSV path")->required();
  kf->add_option("--engine", engine, "mfa|direct (default mfa)");

  // sim
  std::string workload = "kf", mode = "base", config_path, sim_out, sweep, sim_csv, grid_s;
  std::size_t size = 16;
  std::uint64_t seed = 1;
  CLI::App* sim = app.add_subcommand("sim", "Simulate a workload on the PE / tile array");
  sim->add_option("--workload", workload, "kf|mfa|gemm (default kf)");
  sim->add_option("--size", size, "matrix/state dimension (default 16)");
  sim->add_option("--mode", mode, "base|hw|sw (default base)");
  sim->add_option("--config", config_path, "simulation config JSON");
  sim->add_option("--out", sim_out, "report JSON path (stdout when omitted)");
  sim->add_option("--sweep", sweep, "modes|grids");
  sim->add_option("--grid", grid_s, "2x2|3x3|4x4|config: run on a tile array");
  sim->add_option("--csv", sim_csv, "CSV output path (sweeps)");
  sim->add_option("--seed", seed, "workload seed (default 1)");

  // report
  std::vector<std::string> csv_paths;
  std::string report_out, tidy_out;
  CLI::App* rep = app.add_subcommand("report", "Aggregate sweep CSVs into a summary");
  rep->add_option("csvs", csv_paths, "sweep CSV files")->required();
  rep->add_option("--out", report_out, "summary markdown path (stdout when omitted)");
  rep->add_option("--csv", tidy_out, "tidy CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mfa->parsed()) return cmd_mfa(a_path, b_path, c_path, d_path, out_path, check);
    if (kf->parsed()) return cmd_kf(scenario_path, kf_out, engine);
    if (sim->parsed())
      return cmd_sim(workload, size, mode, config_path, sim_out, sweep, sim_csv, seed,
                     grid_s);
    if (rep->parsed()) return cmd_report(csv_paths, report_out, tidy_out);
  } catch (const SingularError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("mfakf");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mfakf::cli
