#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "slipctl/types.hpp"

namespace slipctl {

using ScalarFn = std::function<double(const Vec&)>;

/// Central differences with step 1e-4 * max(1, |w_j|); 2n evaluations.
/// Throws std::domain_error naming the coordinate when f is not finite at a probe.
Vec numerical_gradient(const ScalarFn& f, const Vec& w);

enum class SolveStatus { converged, max_iter, infeasible };
std::string to_string(SolveStatus status);

/// Slab on the first-step velocity change: lb <= row . w - offset <= ub.
struct FirstStepBox {
  Vec row;              // first column of the basis matrix
  double offset = 0.0;  // observed speed
  double lb = -0.1;
  double ub = 0.1;

  double value(const Vec& w) const { return row.dot(w) - offset; }
  bool feasible() const;
  Vec project(const Vec& w) const;
};

/// lb <= row . w <= ub, enforced by projection like the box.
struct LinearBound {
  Vec row;
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
};

struct OptProblem {
  ScalarFn objective;
  std::vector<ScalarFn> inequalities;  // feasible when g_k(w) <= 0
  std::optional<FirstStepBox> box;
  std::vector<LinearBound> bounds;
  Vec initial;
  int max_outer = 20;
  int max_inner = 100;
  long max_evaluations = 0;  // budget of objective and constraint-vector evaluations, 0 = unlimited
  double tol = 1e-3;
  double ctol = 1e-3;
  double rho0 = 10.0;
  double rho_max = 1e6;
  bool record_trace = false;
};

struct TraceRow {
  int outer = 0;
  int inner = 0;  // cumulative inner steps
  double f = 0.0;
  double violation = 0.0;
  double grad_norm = 0.0;
};

struct SolveResult {
  Vec w_star;
  double rov = 0.0;  // ||w - P(w - grad L)||: projected Lagrangian gradient at exit
  double objective = 0.0;
  std::vector<double> violations;  // max(0, g_k) per constraint
  double max_violation = 0.0;
  Vec multipliers;
  int outer_iterations = 0;
  int inner_iterations = 0;
  long evaluations = 0;
  SolveStatus status = SolveStatus::max_iter;
  double wall_ms = 0.0;
  std::vector<TraceRow> trace;
};

/// Augmented Lagrangian with projected-gradient inner loop and backtracking line search.
/// Throws std::invalid_argument for a non-finite initial point or non-positive tolerances.
SolveResult solve(const OptProblem& problem);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

struct GridResult {
  bool found = false;
  Vec w;
  double value = 0.0;
  long evaluated = 0;
  long feasible = 0;
  std::string report;
};

/// Exhaustive search over [lo, hi]^n with `resolution` points per axis (n <= 3).
/// Points violating the box, a linear bound or any g_k by more than ctol are skipped.
GridResult grid_oracle(const OptProblem& problem, double lo, double hi, int resolution);

}  // namespace slipctl
