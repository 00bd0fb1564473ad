#include "slipctl/sweep.hpp"

#include <atomic>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace slipctl {

std::uint64_t cell_seed(std::uint64_t master, ControllerKind kind, int n_basis, int trial) {
  std::uint64_t s = derive_seed(master, std::uint64_t(kind) + 1);
  s = derive_seed(s, std::uint64_t(n_basis));
  return derive_seed(s, std::uint64_t(trial));
}

void SweepConfig::validate() const {
  if (n_min < 2 || n_max > 8 || n_min > n_max) throw std::invalid_argument("sweep: basis range must lie in 2..8");
  if (trials < 1) throw std::invalid_argument("sweep: trials must be at least 1");
  if (kinds.empty()) throw std::invalid_argument("sweep: no controller kinds");
}

namespace {

struct Job {
  std::size_t cell;
  int trial;
};

TrialLog run_one(const SweepConfig& config, ControllerKind kind, int n_basis, int trial, const DetectorFn& detector,
                 const PredictorFn& predictor) {
  ControllerConfig cc = config.controller;
  cc.kind = kind;
  cc.n_basis = n_basis;
  const auto profile = task_profile(config.v_max);
  return run_closed_loop(profile, config.params, cc, detector, predictor,
                         cell_seed(config.master_seed, kind, n_basis, trial), config.sim);
}

}  // namespace

SweepCell run_cell(const SweepConfig& config, ControllerKind kind, int n_basis, const DetectorFn& detector,
                   const PredictorFn& predictor) {
  SweepCell cell{kind, n_basis, {}, {}};
  const auto profile = task_profile(config.v_max);
  for (int i = 0; i < config.trials; ++i) {
    cell.logs.push_back(run_one(config, kind, n_basis, i, detector, predictor));
    cell.metrics.push_back(compute_metrics(cell.logs.back(), profile));
  }
  return cell;
}

SweepResult run_sweep(const SweepConfig& config, const DetectorFn& detector, const PredictorFn& predictor,
                      const std::function<void(const std::string&)>& progress) {
  config.validate();
  SweepResult out;
  std::vector<Job> jobs;
  for (ControllerKind kind : config.kinds) {
    for (int n = config.n_min; n <= config.n_max; ++n) {
      SweepCell cell{kind, n, std::vector<TrialLog>(std::size_t(config.trials)), {}};
      for (int i = 0; i < config.trials; ++i) jobs.push_back({out.cells.size(), i});
      out.cells.push_back(std::move(cell));
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      SweepCell& cell = out.cells[jobs[j].cell];
      try {
        cell.logs[std::size_t(jobs[j].trial)] =
            run_one(config, cell.kind, cell.n_basis, jobs[j].trial, detector, predictor);
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
      if (progress) {
        std::ostringstream msg;
        msg << to_string(cell.kind) << " N=" << cell.n_basis << " trial " << jobs[j].trial + 1 << '/'
            << config.trials;
        std::lock_guard lock(report_mutex);
        progress(msg.str());
      }
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_workers = unsigned(config.workers > 0 ? config.workers : int(hw));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const auto profile = task_profile(config.v_max);
  for (auto& cell : out.cells) {
    for (const auto& log : cell.logs) cell.metrics.push_back(compute_metrics(log, profile));
    out.rows.push_back(aggregate(to_string(cell.kind), cell.n_basis, cell.metrics));
  }
  return out;
}

void write_traces_csv(std::ostream& out, const std::vector<SweepCell>& cells) {
  std::ostringstream buf;
  buf.precision(10);
  buf << "controller,n_basis,trial,seed,tick,t,theta_deg,cmd,ref,speed,p_slip,slip\n";
  for (const auto& cell : cells) {
    for (std::size_t i = 0; i < cell.logs.size(); ++i) {
      const auto& log = cell.logs[i];
      for (std::size_t k = 0; k < log.records.size(); ++k) {
        const auto& r = log.records[k];
        buf << to_string(cell.kind) << ',' << cell.n_basis << ',' << i << ',' << log.meta.seed << ',' << k << ','
            << r.t << ',' << r.theta << ',' << r.cmd << ',' << log.meta.profile.at(long(k)) << ',' << r.speed << ',';
        if (r.p_slip) buf << *r.p_slip;
        buf << ',' << (r.slip ? 1 : 0) << '\n';
      }
    }
  }
  out << buf.str();
}

}  // namespace slipctl
