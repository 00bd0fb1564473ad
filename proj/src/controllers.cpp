#include "slipctl/controllers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace slipctl {
namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

OptProblem base_problem(const ControllerConfig& config, const Mat& phi, double observed, const Vec& initial) {
  OptProblem p;
  p.box = first_step_box(phi, observed, config);
  p.initial = initial;
  p.max_outer = config.max_outer;
  p.max_inner = config.max_inner;
  p.max_evaluations = config.max_evaluations;
  p.tol = config.tol;
  p.ctol = config.ctol;
  // Per-step speed limits keep plans inside the range of motions the models were trained on.
  const double hi = config.max_speed > 0.0 ? config.max_speed : std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    LinearBound b{phi.col(j), config.min_speed, hi};
    if (j == 0) {
      // The first step must stay reachable from the observed speed.
      b.lb = std::min(b.lb, observed + config.ub);
      b.ub = std::max(b.ub, observed + config.lb);
    }
    p.bounds.push_back(std::move(b));
  }
  return p;
}

double first_command(const Mat& phi, const Vec& w, double observed, const ControllerConfig& config) {
  double x = std::max(phi.col(0).dot(w), config.min_speed);
  if (config.max_speed > 0.0) x = std::min(x, config.max_speed);
  return std::clamp(x, observed + config.lb, observed + config.ub);
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::none: return "none";
    case ControllerKind::rsc: return "rsc";
    case ControllerKind::psc: return "psc";
  }
  return "none";
}

ControllerKind parse_controller_kind(const std::string& text) {
  if (text == "none") return ControllerKind::none;
  if (text == "rsc") return ControllerKind::rsc;
  if (text == "psc") return ControllerKind::psc;
  throw std::invalid_argument("unknown controller '" + text + "' (expected none, rsc or psc)");
}

void ControllerConfig::validate() const {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("controller: a must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("controller: epsilon must be positive");
  if (!(lb < ub)) throw std::invalid_argument("controller: lb must be below ub");
  if (horizon < 2 || context < 1) throw std::invalid_argument("controller: horizon >= 2 and context >= 1 required");
  if (kind != ControllerKind::none && (n_basis < 2 || n_basis > 8)) {
    throw std::invalid_argument("controller: n_basis must lie in 2..8");
  }
  if (!(delta_slip > 0.0 && delta_slip < 1.0)) throw std::invalid_argument("controller: delta_slip must lie in (0, 1)");
  if (max_speed < 0.0 || (max_speed > 0.0 && !(min_speed < max_speed))) {
    throw std::invalid_argument("controller: speed limits must satisfy min_speed < max_speed");
  }
}

DetectorFn detector_fn(const DetectorModel& model) {
  return [&model](const TactileWindow& w) { return detector_forward(model, w); };
}

PredictorFn predictor_fn(const PredictorModel& model) {
  return [&model](const TactileWindow& w) -> ActionScorer {
    Vec encoding = model.encode(w);
    return [&model, encoding = std::move(encoding)](const Mat& actions) {
      return model.predict_encoded(encoding, actions);
    };
  };
}

double rsc_objective(const Vec& w, const Mat& phi, const Vec& ref, int slip, double a, double epsilon) {
  const Vec x = trajectory_from_weights(phi, w);
  const double coeff = std::pow(a, 1.0 / (double(slip) + epsilon));
  return (x - ref).norm() + coeff * x.norm();
}

Mat embed_actions(const Vec& speeds) {
  Mat out(speeds.size(), kActionDim);
  for (Eigen::Index j = 0; j < speeds.size(); ++j) {
    const auto row = embed_action(speeds(j));
    for (int c = 0; c < kActionDim; ++c) out(j, c) = row[std::size_t(c)];
  }
  return out;
}

FirstStepBox first_step_box(const Mat& phi, double observed_speed, const ControllerConfig& config) {
  FirstStepBox box;
  box.row = phi.col(0);
  box.offset = observed_speed;
  box.lb = config.lb;
  box.ub = config.ub;
  return box;
}

Vec initial_weights(const Mat& phi, const Vec& ref_window, const Vec* previous) {
  if (!previous) return fit_weights(ref_window, phi).w;
  const Vec x = trajectory_from_weights(phi, *previous);
  Vec shifted(x.size());
  shifted.head(x.size() - 1) = x.tail(x.size() - 1);
  shifted(x.size() - 1) = x(x.size() - 1);
  return fit_weights(shifted, phi).w;
}

TickResult rsc_step(double observed_speed, const TactileWindow& window, const Vec& ref_window,
                    const DetectorFn& detector, const ControllerConfig& config, const Mat& phi, const Vec& initial) {
  const auto started = std::chrono::steady_clock::now();
  TickResult out;
  out.probability = detector(window);
  const int slip = out.probability > 0.5 ? 1 : 0;

  OptProblem p = base_problem(config, phi, observed_speed, initial);
  p.objective = [&](const Vec& w) { return rsc_objective(w, phi, ref_window, slip, config.a, config.epsilon); };
  out.solve = solve(p);
  out.status = to_string(out.solve.status);
  out.weights = out.solve.w_star;
  out.command = first_command(phi, out.weights, observed_speed, config);
  out.elapsed_ms = elapsed_ms(started);
  return out;
}

constexpr double kLogitSlack = 0.1;

TickResult psc_step(double observed_speed, double current_command, const TactileWindow& window,
                    const Vec& ref_window, const PredictorFn& predictor, const ControllerConfig& config,
                    const Mat& phi, const Vec& initial) {
  const auto started = std::chrono::steady_clock::now();
  TickResult out;
  const ActionScorer scorer = predictor(window);
  Vec speeds(phi.cols() + 1);
  speeds(0) = current_command;
  auto probability = [&](const Vec& w) {
    speeds.tail(phi.cols()) = trajectory_from_weights(phi, w);
    return scorer(embed_actions(speeds));
  };

  OptProblem p = base_problem(config, phi, observed_speed, initial);
  p.objective = [&](const Vec& w) { return (trajectory_from_weights(phi, w) - ref_window).norm(); };
  // Same feasible set as p <= delta, posed on the logit where the constraint is far better conditioned.
  auto logit = [](double q) {
    q = std::clamp(q, 1e-15, 1.0 - 1e-15);
    return std::log(q) - std::log1p(-q);
  };
  const double bound = logit(config.delta_slip);
  double relaxed = bound;
  p.inequalities.push_back([&](const Vec& w) { return logit(probability(w)) - relaxed; });
  out.solve = solve(p);
  out.status = to_string(out.solve.status);

  if (out.solve.status == SolveStatus::infeasible || out.solve.max_violation > config.ctol) {
    OptProblem safest = base_problem(config, phi, observed_speed, out.solve.w_star);
    safest.objective = probability;
    const SolveResult fallback = solve(safest);
    double wall = fallback.wall_ms;
    long evals = fallback.evaluations;
    if (fallback.status == SolveStatus::infeasible) {
      out.solve.status = SolveStatus::infeasible;
    } else {
      wall += out.solve.wall_ms;
      evals += out.solve.evaluations;
      // Restart the tracking problem from the safest point. When the margin is out of reach it is
      // relaxed to just above the smallest reachable probability, so ties go to the reference.
      const bool reachable = fallback.objective <= config.delta_slip;
      relaxed = reachable ? bound : logit(fallback.objective) + kLogitSlack;
      p.initial = fallback.w_star;
      SolveResult retry = solve(p);
      if (retry.max_violation > config.ctol) {
        retry.w_star = fallback.w_star;
        retry.objective = p.objective(retry.w_star);
      }
      retry.status = !reachable ? SolveStatus::infeasible
                     : retry.max_violation > config.ctol ? SolveStatus::max_iter
                                                         : retry.status;
      out.solve = std::move(retry);
    }
    out.solve.wall_ms += wall;
    out.solve.evaluations += evals;
    out.status = to_string(out.solve.status);
  }
  out.weights = out.solve.w_star;
  out.command = first_command(phi, out.weights, observed_speed, config);
  out.probability = probability(out.weights);
  out.elapsed_ms = elapsed_ms(started);
  return out;
}

SlipControlPolicy::SlipControlPolicy(ControllerConfig config, DetectorFn detector, PredictorFn predictor)
    : config_(std::move(config)), detector_(std::move(detector)), predictor_(std::move(predictor)),
      filter_(config_.filter) {
  config_.validate();
  if (config_.kind == ControllerKind::rsc && !detector_) throw std::invalid_argument("rsc needs a detector");
  if (config_.kind == ControllerKind::psc && !predictor_) throw std::invalid_argument("psc needs a predictor");
  if (config_.kind != ControllerKind::none) {
    phi_ = basis_matrix(BasisSpec::uniform(config_.n_basis, config_.horizon));
  }
}

TactileWindow SlipControlPolicy::window() const {
  TactileWindow w;
  w.frames.resize(config_.context, kTactileChannels);
  // Before C frames exist the earliest frame is repeated.
  const int missing = config_.context - int(frames_.size());
  for (int r = 0; r < config_.context; ++r) {
    w.frames.row(r) = frames_[std::size_t(std::max(0, r - missing))].transpose();
  }
  return w;
}

PolicyDecision SlipControlPolicy::decide(const TickObservation& obs) {
  const auto started = std::chrono::steady_clock::now();
  const TactileFrame filtered = filter_.push(obs.tactile);
  frames_.push_back(Eigen::Map<const Vec>(filtered.shear.data(), kTactileChannels));
  while (int(frames_.size()) > config_.context) frames_.pop_front();

  PolicyDecision d;
  if (config_.kind == ControllerKind::none) {
    d.command = obs.profile.at(obs.tick + 1);
    return d;
  }

  ControllerConfig config = config_;
  if (config.max_speed <= 0.0) config.max_speed = std::max(obs.profile.v_max, config.min_speed + 1e-6);
  const double observed = obs.state.ee_speed;
  const Vec ref = sample_reference_window(obs.profile, obs.tick, config.horizon);
  const Vec* warm = config.warm_start && previous_w_ ? &*previous_w_ : nullptr;
  try {
    const Vec initial = initial_weights(phi_, ref, warm);
    last_ = config.kind == ControllerKind::rsc
                ? rsc_step(observed, window(), ref, detector_, config, phi_, initial)
                : psc_step(observed, previous_command_.value_or(obs.profile.at(0)), window(), ref, predictor_,
                           config, phi_, initial);
    previous_w_ = last_.weights;
  } catch (const std::exception&) {
    last_ = TickResult{};
    last_.held = true;
    last_.status = "error";
    const double held = previous_command_.value_or(observed);
    last_.command = std::clamp(held, observed + config_.lb, observed + config_.ub);
  }
  previous_command_ = last_.command;

  d.command = last_.command;
  d.p_slip = last_.probability;
  d.rov = last_.solve.rov;
  d.status = last_.status;
  d.et_ms = elapsed_ms(started);
  return d;
}

TrialLog run_closed_loop(const ReferenceProfile& profile, const ObjectParams& params, const ControllerConfig& config,
                         const DetectorFn& detector, const PredictorFn& predictor, std::uint64_t seed,
                         const SimConfig& sim) {
  if (config.kind == ControllerKind::none) return run_trial(profile, params, nullptr, seed, sim);
  SlipControlPolicy policy(config, detector, predictor);
  return run_trial(profile, params, &policy, seed, sim);
}

}  // namespace slipctl
