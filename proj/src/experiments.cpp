// SPDX-License-Identifier: Apache-2.0
#include "curleq/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace curleq {

RunResult run_single(const CaseDefinition& c, const TetMesh& mesh, int N, int p,
                     const ExperimentConfig& cfg, const ProblemRecorder& rec) {
  auto t0 = std::chrono::steady_clock::now();

  RunResult out;
  out.case_name = c.name;
  out.p = p;
  out.N = N;
  out.h = mesh.nominal_h;

  ShapeRegistry registry(mesh);

  MagneticPotentialSolution sol = solve_magnetic_potential(mesh, registry, p, c.current, cfg.quad);
  out.dofs = sol.space.n_free;

  if (cfg.verify) {
    OrthogonalityReport orth = check_patch_orthogonality(mesh, sol, c.current, cfg.quad);
    out.orthogonality_residual = orth.max_scaled_residual;
    if (c.current.is_piecewise_rt && orth.max_scaled_residual > 1e-9)
      throw std::runtime_error("verify: patchwise orthogonality residual " +
                               std::to_string(orth.max_scaled_residual) + " at vertex " +
                               std::to_string(orth.worst_vertex));
  }

  EquilibrationConfig ecfg;
  ecfg.quad = cfg.quad;
  ecfg.verify = cfg.verify;
  ecfg.n_threads = cfg.n_threads;
  ecfg.dump_dir = cfg.dump_dir;
  ecfg.max_degree = p + 1;
  auto recon = equilibrate_flux(mesh, registry, sol, c.current, ecfg, rec);

  out.report = build_report(mesh, sol, *recon, cfg.constants,
                            c.has_exact ? &c.exact_curl : nullptr, cfg.quad);

  if (c.current.is_piecewise_rt && out.report.equil_residual > 1e-10)
    throw std::runtime_error("equilibration residual " +
                             std::to_string(out.report.equil_residual) +
                             " above tolerance for polynomial data");

  if (cfg.dorfler_theta >= 0.0)
    out.marked = doerfler_mark(out.report.eta_element, cfg.dorfler_theta);

  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

TetMesh mesh_for(const ExperimentConfig& cfg, int N) {
  if (!cfg.mesh_file.empty()) return load_mesh(cfg.mesh_file);
  return build_structured_cube_mesh(N);
}

std::vector<RunResult> run_convergence_study(const ExperimentConfig& cfg) {
  auto c = find_case(cfg.case_name, cfg.series_m);
  if (!c) throw std::invalid_argument("unknown case: " + cfg.case_name);
  if (cfg.degrees.empty() || (cfg.mesh_n.empty() && cfg.mesh_file.empty()))
    throw std::invalid_argument("empty mesh or degree list");

  std::vector<RunResult> rows;
  std::vector<int> meshes = cfg.mesh_file.empty() ? cfg.mesh_n : std::vector<int>{0};
  for (int p : cfg.degrees) {
    for (int N : meshes) {
      TetMesh mesh = mesh_for(cfg, N);
      rows.push_back(run_single(*c, mesh, N, p, cfg));
    }
  }
  return rows;
}

std::vector<RunResult> run_p_sweep(const ExperimentConfig& cfg) {
  auto c = find_case(cfg.case_name, cfg.series_m);
  if (!c) throw std::invalid_argument("unknown case: " + cfg.case_name);
  if (!cfg.mesh_file.empty() ? false : cfg.mesh_n.size() != 1)
    throw std::invalid_argument("p sweep expects a single mesh");
  for (int p : cfg.degrees)
    if (p < 1 || p > 4) throw std::invalid_argument("p sweep degrees must lie in 1..4");

  int N = cfg.mesh_file.empty() ? cfg.mesh_n.front() : 0;
  TetMesh mesh = mesh_for(cfg, N);
  std::vector<RunResult> rows;
  for (int p : cfg.degrees) rows.push_back(run_single(*c, mesh, N, p, cfg));
  return rows;
}

std::vector<double> observed_rates(const std::vector<double>& h,
                                   const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2)
    throw std::invalid_argument("observed_rates: need at least two rows");
  std::vector<double> rates;
  for (size_t i = 0; i + 1 < h.size(); ++i)
    rates.push_back(std::log(err[i] / err[i + 1]) / std::log(h[i] / h[i + 1]));
  return rates;
}

std::string to_csv(const std::vector<RunResult>& rows) {
  std::string out = "case,p,N,h,dofs,err,eta,eta_osc,eff,equil_res,seconds\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.12e,%d,%.12e,%.12e,%.12e,%.12e,%.12e,%.3f\n",
                  r.case_name.c_str(), r.p, r.N, r.h, r.dofs, r.report.exact_error,
                  r.report.eta, r.report.eta_osc, r.report.effectivity,
                  r.report.equil_residual, r.seconds);
    out += buf;
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<RunResult>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << to_csv(rows);
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

} // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "case") cfg.case_name = value;
    else if (key == "study") cfg.study = value;
    else if (key == "mesh_n") cfg.mesh_n = parse_int_list(value);
    else if (key == "mesh_file") cfg.mesh_file = value;
    else if (key == "degrees") cfg.degrees = parse_int_list(value);
    else if (key == "series_m") cfg.series_m = std::stoi(value);
    else if (key == "dorfler_theta") cfg.dorfler_theta = std::stod(value);
    else if (key == "out") cfg.out_path = value;
    else if (key == "verify") cfg.verify = (value == "1" || value == "true");
    else if (key == "quad_volume") cfg.quad.volume_override = std::stoi(value);
    else if (key == "quad_data") cfg.quad.data_override = std::stoi(value);
    else if (key == "threads") cfg.n_threads = std::stoi(value);
    else if (key == "dump_dir") cfg.dump_dir = value;
    else if (key == "c_lift") cfg.constants.c_lift = std::stod(value);
    else if (key == "c_pf") cfg.constants.c_pf = std::stod(value);
    else
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
  }
  if (cfg.series_m < 1) throw std::runtime_error("config: series_m must be >= 1");
  return cfg;
}

} // namespace curleq
