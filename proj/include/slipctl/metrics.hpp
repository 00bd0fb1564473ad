#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "slipctl/grasp_sim.hpp"

namespace slipctl {

struct TrialMetrics {
  double rov = 0.0;     // mean over converged ticks
  int converged_ticks = 0;
  double mor = 0.0;     // deg
  int rts = 0;          // ticks with |theta| > 6 deg
  double drt = 0.0;     // sum over ticks of |cmd - ref|, m/s
  double et_ms = 0.0;   // mean controller time per tick
  bool dropped = false;
};

TrialMetrics compute_metrics(const TrialLog& log, const ReferenceProfile& ref);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for fewer than two values
  bool operator==(const MeanStd&) const = default;
};

/// One-pass (Welford) accumulation.
MeanStd mean_std(std::span<const double> values);
/// Two-pass reference computation.
MeanStd mean_std_two_pass(std::span<const double> values);

struct MetricsRow {
  std::string controller;
  int n_basis = 0;
  int trials = 0;
  int drops = 0;
  MeanStd rov, mor, et, rts, drt;
  bool operator==(const MetricsRow&) const = default;
};

MetricsRow aggregate(const std::string& controller, int n_basis, std::span<const TrialMetrics> trials);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
/// Throws std::runtime_error naming the line on malformed input.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace slipctl
