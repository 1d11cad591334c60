// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "curleq/curl_solver.hpp"

#include <optional>
#include <string>

namespace curleq {

/// A manufactured problem: the current density, and when available the
/// exact potential and its curl for error evaluation.
struct CaseDefinition {
  std::string name;
  CurrentDensity current;
  bool has_exact = false;
  std::function<Vec3(const Vec3&)> exact_potential;
  std::function<Vec3(const Vec3&)> exact_curl;
  int series_terms = 0; // truncation actually used (series cases)
};

/// j = (0,0,1) on the unit cube; the solution is a double sine series cut
/// at n,m <= series_m (only odd terms contribute).
CaseDefinition make_const_j_case(int series_m = 100);

/// j = 8 pi^2 (sin(2 pi x2) sin(2 pi x3), 0, 0); analytic solution
/// A = (sin(2 pi x2) sin(2 pi x3), 0, 0).
CaseDefinition make_sine_case();

/// Singular solution on the L-shaped prism, with a quintic cutoff that is
/// 1 for r <= 1/4 and 0 for r >= 3/4. Exploratory only: needs a user mesh
/// of the L-shaped domain.
CaseDefinition make_lshape_case();

/// Case registry lookup ("const_j", "sine", "lshape").
std::optional<CaseDefinition> find_case(const std::string& name, int series_m);

/// Finite-difference consistency of exact_curl against exact_potential at
/// `samples` interior points; returns the largest deviation.
double case_self_check(const CaseDefinition& c, int samples = 20);

} // namespace curleq
