// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/cases.hpp"
#include "curleq/estimator.hpp"

#include <string>
#include <vector>

namespace curleq {

struct ExperimentConfig {
  std::string case_name = "const_j";
  std::string study = "conv"; // "conv" or "psweep"
  std::vector<int> mesh_n = {1, 2};
  std::string mesh_file; // overrides mesh_n when set
  std::vector<int> degrees = {1};
  int series_m = 100;
  double dorfler_theta = -1.0; // < 0: no marking
  std::string out_path;
  bool verify = false;
  QuadConfig quad;
  EstimatorConstants constants;
  int n_threads = 0;
  std::string dump_dir;
};

/// One (case, degree, mesh) pipeline run.
struct RunResult {
  std::string case_name;
  int p = 0;
  int N = 0; // 0 for file meshes
  double h = 0.0;
  int dofs = 0;
  EstimatorReport report;
  double seconds = 0.0;
  double orthogonality_residual = 0.0;
  std::vector<int> marked;
};

/// Runs the full pipeline (solve, reconstruct, estimate) for one mesh and
/// degree. Post-check failures raise std::runtime_error.
RunResult run_single(const CaseDefinition& c, const TetMesh& mesh, int N, int p,
                     const ExperimentConfig& cfg, const ProblemRecorder& rec = nullptr);

/// One row per (mesh, degree) pair of the config.
std::vector<RunResult> run_convergence_study(const ExperimentConfig& cfg);

/// Degree sweep on a single mesh.
std::vector<RunResult> run_p_sweep(const ExperimentConfig& cfg);

/// Observed convergence rates log(e_i/e_{i+1}) / log(h_i/h_{i+1}).
std::vector<double> observed_rates(const std::vector<double>& h, const std::vector<double>& err);

/// CSV with header case,p,N,h,dofs,err,eta,eta_osc,eff,equil_res,seconds.
std::string to_csv(const std::vector<RunResult>& rows);
void write_csv(const std::string& path, const std::vector<RunResult>& rows);

/// Plain-text "key = value" config file; '#' starts a comment. Unknown
/// keys are rejected.
ExperimentConfig load_config_file(const std::string& path);

TetMesh mesh_for(const ExperimentConfig& cfg, int N);

} // namespace curleq
