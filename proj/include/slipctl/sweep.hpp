#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "slipctl/controllers.hpp"
#include "slipctl/metrics.hpp"

namespace slipctl {

/// Seed of trial i in cell (kind, N): a pure hash of its coordinates.
std::uint64_t cell_seed(std::uint64_t master, ControllerKind kind, int n_basis, int trial);

struct SweepConfig {
  int n_min = 2;
  int n_max = 8;
  int trials = 10;
  std::vector<ControllerKind> kinds{ControllerKind::rsc, ControllerKind::psc};
  double v_max = 0.5;
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  ControllerConfig controller;
  ObjectParams params = ObjectParams::training_box();
  SimConfig sim;

  void validate() const;
};

struct SweepCell {
  ControllerKind kind = ControllerKind::none;
  int n_basis = 0;
  std::vector<TrialLog> logs;
  std::vector<TrialMetrics> metrics;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<MetricsRow> rows;
};

/// Runs one cell; re-running it reproduces the same logs.
SweepCell run_cell(const SweepConfig& config, ControllerKind kind, int n_basis, const DetectorFn& detector,
                   const PredictorFn& predictor);

/// Every (kind, N) cell in kind-major order; trials run on parallel workers.
SweepResult run_sweep(const SweepConfig& config, const DetectorFn& detector, const PredictorFn& predictor,
                      const std::function<void(const std::string&)>& progress = {});

/// Long-format traces: one row per (controller, n_basis, trial, tick).
void write_traces_csv(std::ostream& out, const std::vector<SweepCell>& cells);

}  // namespace slipctl
