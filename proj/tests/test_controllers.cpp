#include <cmath>

#include "doctest.h"
#include "slipctl/controllers.hpp"
#include "slipctl/trial_io.hpp"

using namespace slipctl;

namespace {

DetectorFn constant_detector(double p) {
  return [p](const TactileWindow&) { return p; };
}

PredictorFn constant_predictor(double p) {
  return [p](const TactileWindow&) -> ActionScorer { return [p](const Mat&) { return p; }; };
}

// Slip probability rising steeply with the mean planned path speed.
double mean_speed_logistic(const Mat& actions) {
  const double mean = actions.leftCols(2).rowwise().norm().mean();
  return 1.0 / (1.0 + std::exp(-20.0 * (mean - 0.3)));
}

PredictorFn speed_predictor() {
  return [](const TactileWindow&) -> ActionScorer { return mean_speed_logistic; };
}

TactileWindow blank_window() {
  TactileWindow w;
  w.frames = Mat::Zero(kDefaultContext, kTactileChannels);
  return w;
}

ControllerConfig config_for(ControllerKind kind, int n) {
  ControllerConfig c;
  c.kind = kind;
  c.n_basis = n;
  c.max_speed = 0.6;
  return c;
}

}  // namespace

TEST_SUITE("controllers") {
  TEST_CASE("rsc penalty coefficients") {
    const Mat phi = basis_matrix(BasisSpec::uniform(3, 10));
    const Vec w = Vec::Constant(3, 0.4);
    const double norm = trajectory_from_weights(phi, w).norm();
    const Vec zero = Vec::Zero(10);
    const double c0 = (rsc_objective(w, phi, zero, 0, 0.5, 0.01) - norm) / norm;
    const double c1 = (rsc_objective(w, phi, zero, 1, 0.5, 0.01) - norm) / norm;
    CHECK(c0 == doctest::Approx(7.9e-31).epsilon(0.01));
    CHECK(c1 == doctest::Approx(0.5035).epsilon(1e-4));
    CHECK(std::pow(0.5, 100.0) == doctest::Approx(7.8886e-31).epsilon(1e-4));

    const Vec ref = trajectory_from_weights(phi, w);
    CHECK(rsc_objective(w, phi, ref, 0, 0.5, 0.01) < 1e-29);
  }

  TEST_CASE("rsc stubs") {
    const auto cfg = config_for(ControllerKind::rsc, 5);
    const Mat phi = basis_matrix(BasisSpec::uniform(5, cfg.horizon));
    const Vec ref = Vec::Constant(cfg.horizon, 0.4);
    const Vec init = initial_weights(phi, ref, nullptr);

    const auto calm = rsc_step(0.35, blank_window(), ref, constant_detector(0.1), cfg, phi, init);
    const auto slipping = rsc_step(0.35, blank_window(), ref, constant_detector(0.9), cfg, phi, init);
    CHECK(calm.command == doctest::Approx(0.4).epsilon(0.01));
    CHECK(trajectory_from_weights(phi, slipping.weights).norm() < trajectory_from_weights(phi, calm.weights).norm());
    CHECK(slipping.command < calm.command);
    for (const auto& r : {calm, slipping}) CHECK(std::abs(r.command - 0.35) <= cfg.ub + 1e-9);

    const Vec zero = Vec::Zero(cfg.horizon);
    const auto idle = rsc_step(0.0, blank_window(), zero, constant_detector(0.1), cfg, phi,
                               initial_weights(phi, zero, nullptr));
    CHECK(std::abs(idle.command) < 1e-6);

    // Far from the reference the first step is clipped to the box.
    const auto clipped = rsc_step(0.0, blank_window(), ref, constant_detector(0.1), cfg, phi, init);
    CHECK(clipped.command == doctest::Approx(cfg.ub).epsilon(1e-6));
  }

  TEST_CASE("rsc with S=0 matches pure tracking and its argmin is scale invariant") {
    const auto cfg = config_for(ControllerKind::rsc, 4);
    const Mat phi = basis_matrix(BasisSpec::uniform(4, cfg.horizon));
    const auto profile = task_profile(0.5);
    const Vec ref = sample_reference_window(profile, 8, cfg.horizon);
    const Vec init = initial_weights(phi, ref, nullptr);
    const auto r = rsc_step(0.2, blank_window(), ref, constant_detector(0.0), cfg, phi, init);

    OptProblem p;
    p.box = first_step_box(phi, 0.2, cfg);
    for (Eigen::Index j = 0; j < phi.cols(); ++j) p.bounds.push_back(LinearBound{phi.col(j), 0.0, 0.6});
    p.initial = init;
    p.objective = [&](const Vec& w) { return (trajectory_from_weights(phi, w) - ref).norm(); };
    const auto track = solve(p);
    CHECK(std::abs(r.solve.objective - track.objective) <= cfg.tol);

    auto scaled = p;
    scaled.objective = [&](const Vec& w) { return 7.0 * rsc_objective(w, phi, ref, 1, cfg.a, cfg.epsilon); };
    auto unit = p;
    unit.objective = [&](const Vec& w) { return rsc_objective(w, phi, ref, 1, cfg.a, cfg.epsilon); };
    unit.tol = scaled.tol = 1e-6;
    const auto a = solve(unit);
    const auto b = solve(scaled);
    REQUIRE(a.status == SolveStatus::converged);
    REQUIRE(b.status == SolveStatus::converged);
    CHECK((trajectory_from_weights(phi, a.w_star) - trajectory_from_weights(phi, b.w_star)).norm() < cfg.tol);
  }

  TEST_CASE("psc with a silent predictor reduces to tracking") {
    const auto cfg = config_for(ControllerKind::psc, 5);
    const Mat phi = basis_matrix(BasisSpec::uniform(5, cfg.horizon));
    const Vec ref = sample_reference_window(task_profile(0.5), 20, cfg.horizon);
    const Vec init = initial_weights(phi, ref, nullptr);
    const auto psc = psc_step(0.45, 0.45, blank_window(), ref, constant_predictor(0.0), cfg, phi, init);
    const auto rsc = rsc_step(0.45, blank_window(), ref, constant_detector(0.0), cfg, phi, init);
    CHECK(psc.status == "converged");
    CHECK(std::abs(psc.solve.objective - rsc.solve.objective) <= cfg.tol);
    CHECK(std::abs(psc.command - rsc.command) <= 10.0 * cfg.tol);
  }

  TEST_CASE("psc pins a monotone predictor at the slip margin") {
    auto cfg = config_for(ControllerKind::psc, 2);
    const Mat phi = basis_matrix(BasisSpec::uniform(2, cfg.horizon));
    const Vec ref = Vec::Constant(cfg.horizon, 0.5);
    const Vec init = initial_weights(phi, ref, nullptr);
    const auto r = psc_step(0.2, 0.2, blank_window(), ref, speed_predictor(), cfg, phi, init);
    CHECK(r.status == "converged");
    CHECK(r.probability <= cfg.delta_slip + cfg.ctol);
    CHECK(r.probability >= cfg.delta_slip - 0.01);

    // Same feasible set posed directly on the probability, searched exhaustively.
    OptProblem p;
    p.box = first_step_box(phi, 0.2, cfg);
    for (Eigen::Index j = 0; j < phi.cols(); ++j) p.bounds.push_back(LinearBound{phi.col(j), 0.0, 0.6});
    p.objective = [&](const Vec& w) { return (trajectory_from_weights(phi, w) - ref).norm(); };
    p.inequalities.push_back([&](const Vec& w) {
      Vec speeds(cfg.horizon + 1);
      speeds << 0.2, trajectory_from_weights(phi, w);
      return mean_speed_logistic(embed_actions(speeds)) - cfg.delta_slip;
    });
    p.initial = init;
    p.ctol = 1e-4;
    const auto g = grid_oracle(p, -1.0, 1.0, 400);
    REQUIRE(g.found);
    CHECK(r.solve.objective <= g.value * 1.01);

    // Warm and cold starts land on the same objective.
    const Vec cold = Vec::Zero(2);
    const auto c = psc_step(0.2, 0.2, blank_window(), ref, speed_predictor(), cfg, phi, cold);
    CHECK(std::abs(c.solve.objective - r.solve.objective) <= 2.0 * cfg.tol);

    // An unreachable margin falls back to the least risky plan and says so.
    cfg.delta_slip = 1e-9;
    const auto f = psc_step(0.5, 0.5, blank_window(), ref, speed_predictor(), cfg, phi, init);
    CHECK(f.status == "infeasible");
    CHECK(f.probability < mean_speed_logistic(embed_actions(Vec::Constant(cfg.horizon + 1, 0.5))));
    CHECK(std::abs(f.command - 0.5) <= cfg.ub + 1e-9);
  }

  TEST_CASE("closed loop box respect, log shape and constraint satisfaction") {
    const auto profile = task_profile(0.5);
    const auto params = ObjectParams::training_box();
    for (const auto kind : {ControllerKind::rsc, ControllerKind::psc}) {
      const auto cfg = config_for(kind, 3);
      const auto log = run_closed_loop(profile, params, cfg, constant_detector(0.7), speed_predictor(), 4);
      CHECK(long(log.records.size()) == profile.samples.size() + SimConfig{}.settle_ticks);
      CHECK(log.meta.controller == to_string(kind));
      CHECK(log.meta.n_basis == 3);
      for (std::size_t k = 0; k + 1 < log.records.size(); ++k) {
        CHECK(std::abs(log.records[k + 1].cmd - log.records[k].speed) <= cfg.ub + 1e-9);
        REQUIRE(log.records[k + 1].status.has_value());
        if (kind == ControllerKind::psc && *log.records[k + 1].status == "converged") {
          CHECK(*log.records[k + 1].p_slip <= cfg.delta_slip + cfg.ctol);
        }
      }
      const auto again = run_closed_loop(profile, params, cfg, constant_detector(0.7), speed_predictor(), 4);
      CHECK(same_trajectory(log, again));
    }
  }

  TEST_CASE("pass-through policy equals the open-loop trial") {
    const auto profile = task_profile(0.4);
    const auto params = ObjectParams::training_box();
    ControllerConfig none;
    SlipControlPolicy policy(none, {}, {});
    const auto a = run_trial(profile, params, &policy, 9);
    const auto b = run_trial(profile, params, nullptr, 9);
    CHECK(same_trajectory(a, b));
    CHECK(same_trajectory(run_closed_loop(profile, params, none, {}, {}, 9), b));
  }

  TEST_CASE("configuration errors") {
    auto cfg = config_for(ControllerKind::rsc, 5);
    CHECK_THROWS_AS(SlipControlPolicy(cfg, {}, {}), std::invalid_argument);
    cfg.kind = ControllerKind::psc;
    CHECK_THROWS_AS(SlipControlPolicy(cfg, constant_detector(0.0), {}), std::invalid_argument);
    cfg.a = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.a = 0.5;
    cfg.n_basis = 9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_controller_kind("mpc"), std::invalid_argument);
    CHECK(parse_controller_kind("psc") == ControllerKind::psc);
  }

  TEST_CASE("action embedding") {
    Vec speeds(3);
    speeds << 0.0, 0.3, 0.5;
    const Mat a = embed_actions(speeds);
    CHECK(a.rows() == 3);
    CHECK(a.cols() == kActionDim);
    for (int j = 0; j < 3; ++j) {
      CHECK(a.row(j).head(2).norm() == doctest::Approx(speeds[j]).epsilon(1e-12));
      CHECK(a.row(j).tail(4).norm() == 0.0);
    }
  }
}
