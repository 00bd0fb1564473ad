#pragma once

#include <deque>
#include <functional>
#include <string>

#include "slipctl/basis.hpp"
#include "slipctl/constrained_opt.hpp"
#include "slipctl/grasp_sim.hpp"
#include "slipctl/signal_filter.hpp"
#include "slipctl/slip_models.hpp"

namespace slipctl {

enum class ControllerKind { none, rsc, psc };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& text);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::none;
  int n_basis = 5;
  int horizon = kDefaultHorizon;
  int context = kDefaultContext;
  double a = 0.5;
  double epsilon = 0.01;
  double delta_slip = 0.05;
  double lb = -0.1;  // m/s per tick on the first-step speed change
  double ub = 0.1;
  double min_speed = 0.0;  // every planned step stays within [min_speed, max_speed]
  double max_speed = 0.0;  // 0 = the task profile's v_max
  bool warm_start = true;
  int max_outer = 20;
  int max_inner = 100;
  long max_evaluations = 6000;  // per-tick solver budget
  double tol = 1e-3;
  double ctol = 1e-3;
  KalmanNoise filter;

  void validate() const;
};

/// Slip probability of the current tactile window.
using DetectorFn = std::function<double(const TactileWindow&)>;
/// Scores a (T+1) x 6 action block under a tactile window fixed for the tick.
using ActionScorer = std::function<double(const Mat&)>;
using PredictorFn = std::function<ActionScorer(const TactileWindow&)>;

DetectorFn detector_fn(const DetectorModel& model);
/// Encodes the window once per tick and reuses it for every candidate action block.
PredictorFn predictor_fn(const PredictorModel& model);

struct TickResult {
  double command = 0.0;
  Vec weights;
  SolveResult solve;
  double probability = 0.0;
  double elapsed_ms = 0.0;
  bool held = false;  // previous command reused after a failure
  std::string status;
};

/// || phi^T w - ref || + a^(1/(S+eps)) * || phi^T w ||.
double rsc_objective(const Vec& w, const Mat& phi, const Vec& ref, int slip, double a, double epsilon);

/// One 6-d action row per speed sample of a path-speed trajectory.
Mat embed_actions(const Vec& speeds);

/// Box on the first-step change from the observed speed.
FirstStepBox first_step_box(const Mat& phi, double observed_speed, const ControllerConfig& config);

/// Starting weights: the previous trajectory shifted one step and refit, or the reference fit.
Vec initial_weights(const Mat& phi, const Vec& ref_window, const Vec* previous);

TickResult rsc_step(double observed_speed, const TactileWindow& window, const Vec& ref_window,
                    const DetectorFn& detector, const ControllerConfig& config, const Mat& phi, const Vec& initial);

/// Falls back to minimizing the predicted probability when p <= delta is out of reach.
/// `current_command` is the command in force, prepended to the planned rows before scoring.
TickResult psc_step(double observed_speed, double current_command, const TactileWindow& window,
                    const Vec& ref_window, const PredictorFn& predictor, const ControllerConfig& config,
                    const Mat& phi, const Vec& initial);

/// Receding-horizon policy: filters tactile frames, solves each tick and applies the first step.
class SlipControlPolicy : public CommandPolicy {
 public:
  SlipControlPolicy(ControllerConfig config, DetectorFn detector, PredictorFn predictor);

  PolicyDecision decide(const TickObservation& obs) override;
  std::string kind() const override { return to_string(config_.kind); }
  int n_basis() const override { return config_.kind == ControllerKind::none ? 0 : config_.n_basis; }
  const TickResult& last() const { return last_; }

 private:
  TactileWindow window() const;

  ControllerConfig config_;
  DetectorFn detector_;
  PredictorFn predictor_;
  Mat phi_;
  TactileFilter filter_;
  std::deque<Vec> frames_;
  std::optional<Vec> previous_w_;
  std::optional<double> previous_command_;
  TickResult last_;
};

/// kind=none runs the open-loop reference. Throws std::invalid_argument when the model for the kind is missing.
TrialLog run_closed_loop(const ReferenceProfile& profile, const ObjectParams& params, const ControllerConfig& config,
                         const DetectorFn& detector, const PredictorFn& predictor, std::uint64_t seed,
                         const SimConfig& sim = {});

}  // namespace slipctl
