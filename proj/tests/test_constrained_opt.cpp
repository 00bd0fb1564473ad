#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "slipctl/basis.hpp"
#include "slipctl/constrained_opt.hpp"
#include "slipctl/slip_models.hpp"

using namespace slipctl;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Random strictly convex quadratic with one linear inequality that cuts off the unconstrained minimum half the time.
OptProblem random_convex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::uniform_real_distribution<double> s(0.5, 3.0);
  Mat a(2, 2);
  a << s(rng), u(rng), u(rng), s(rng);
  const Mat h = a.transpose() * a + 0.1 * Mat::Identity(2, 2);
  const Vec c = vec2(u(rng), u(rng));
  const Vec n = vec2(u(rng), u(rng)).normalized();
  const double off = 0.3 * u(rng);
  OptProblem p;
  p.objective = [h, c](const Vec& w) { return 0.5 * (w - c).dot(h * (w - c)); };
  p.inequalities.push_back([n, off](const Vec& w) { return n.dot(w) - off; });
  p.initial = Vec::Zero(2);
  p.tol = 1e-6;
  return p;
}

}  // namespace

TEST_SUITE("constrained_opt") {
  TEST_CASE("numerical_gradient") {
    const ScalarFn sq = [](const Vec& w) { return w.squaredNorm(); };
    const Vec g = numerical_gradient(sq, vec2(1.0, 2.0));
    CHECK(std::abs(g[0] - 2.0) < 1e-6);
    CHECK(std::abs(g[1] - 4.0) < 1e-6);
    CHECK(numerical_gradient([](const Vec&) { return 3.0; }, vec2(0.3, -7.0)).norm() == 0.0);

    const ScalarFn blowup = [](const Vec& w) { return w[1] > 1.0 ? std::nan("") : 0.0; };
    try {
      numerical_gradient(blowup, vec2(0.0, 1.0));
      FAIL("expected a domain error");
    } catch (const std::domain_error& e) {
      CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
    }
  }

  TEST_CASE("numerical_gradient through a detector agrees with one-sided differences") {
    std::mt19937_64 rng(21);
    auto det = DetectorModel::init(6, rng);
    std::normal_distribution<double> n01;
    for (auto& t : det.trainable()) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = 0.3 * n01(rng);
    }
    const Mat phi = basis_matrix(BasisSpec::uniform(3, 10));
    // Speed trajectory written into channel 0 of each frame.
    const ScalarFn f = [&](const Vec& w) {
      TactileWindow win;
      win.frames = Mat::Zero(10, kTactileChannels);
      win.frames.col(0) = trajectory_from_weights(phi, w);
      return detector_forward(det, win);
    };
    const Vec w = Vec::Constant(3, 0.2);
    const Vec central = numerical_gradient(f, w);
    for (int j = 0; j < 3; ++j) {
      Vec step = w;
      step[j] += 1e-6;
      const double forward = (f(step) - f(w)) / 1e-6;
      CHECK(std::abs(central[j] - forward) < 1e-3);
    }
  }

  TEST_CASE("unconstrained quadratic") {
    OptProblem p;
    p.objective = [](const Vec& w) { return (w - vec2(1.0, 2.0)).squaredNorm(); };
    p.initial = Vec::Zero(2);
    p.tol = 1e-7;
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::converged);
    CHECK((r.w_star - vec2(1.0, 2.0)).norm() < 1e-6);
    CHECK(r.rov < 1e-6);

    const auto g = grid_oracle(p, -3.0, 3.0, 121);
    REQUIRE(g.found);
    CHECK((g.w - r.w_star).cwiseAbs().maxCoeff() <= 6.0 / 120.0);
  }

  TEST_CASE("active linear constraint matches the KKT point") {
    OptProblem p;
    p.objective = [](const Vec& w) { return w.squaredNorm(); };
    p.inequalities.push_back([](const Vec& w) { return 1.0 - w[0]; });
    p.initial = Vec::Zero(3);
    p.tol = 1e-6;
    p.ctol = 1e-6;
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::converged);
    CHECK(r.w_star[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(std::abs(r.w_star[1]) < 1e-4);
    CHECK(std::abs(r.w_star[2]) < 1e-4);
    CHECK(r.multipliers[0] == doctest::Approx(2.0).epsilon(1e-2));
    CHECK(r.max_violation <= 1e-6);

    const auto g = grid_oracle(p, -2.0, 2.0, 41);
    REQUIRE(g.found);
    CHECK(std::abs(g.w[0] - 1.0) <= 0.1 + 1e-12);
    CHECK(std::abs(g.w[1]) <= 0.1 + 1e-12);
  }

  TEST_CASE("randomized convex instances against the grid oracle") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 20; ++i) {
      auto p = random_convex(rng);
      p.record_trace = true;
      const auto r = solve(p);
      const auto g = grid_oracle(p, -1.0, 1.0, 200);
      REQUIRE(g.found);
      CHECK(r.max_violation <= p.ctol);
      CHECK(r.objective <= g.value + 0.01 * std::abs(g.value) + 1e-9);
      if (r.status == SolveStatus::converged) CHECK(r.rov <= p.tol);
      for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].violation <= r.trace[k - 1].violation + 1e-12);
      if (p.inequalities[0](p.initial) <= 0.0) CHECK(r.objective <= p.objective(p.initial));

      const auto again = solve(p);
      CHECK((again.w_star - r.w_star).norm() == 0.0);
      CHECK(again.objective == r.objective);
    }
  }

  TEST_CASE("box and bound handling") {
    OptProblem p;
    p.objective = [](const Vec& w) { return (w - vec2(3.0, 3.0)).squaredNorm(); };
    p.initial = Vec::Zero(2);
    p.box = FirstStepBox{vec2(1.0, 0.0), 0.5, -0.1, 0.1};
    p.bounds.push_back(LinearBound{vec2(0.0, 1.0), -1.0, 2.0});
    p.tol = 1e-6;
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::converged);
    CHECK(r.w_star[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(r.w_star[1] == doctest::Approx(2.0).epsilon(1e-6));

    p.box->lb = 0.2;
    CHECK(solve(p).status == SolveStatus::infeasible);

    p.box->lb = -0.1;
    p.bounds.push_back(LinearBound{vec2(1.0, 0.0), 5.0, 6.0});
    CHECK(solve(p).status == SolveStatus::infeasible);
  }

  TEST_CASE("evaluation budget ends with the best iterate") {
    auto p = OptProblem{};
    p.objective = [](const Vec& w) { return std::pow(w[0] - 1.0, 4) + 10.0 * std::pow(w[1] - w[0] * w[0], 2); };
    p.initial = vec2(-1.0, 1.0);
    p.tol = 1e-10;
    p.max_evaluations = 40;
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::max_iter);
    CHECK(r.evaluations <= 40);
    CHECK(r.objective <= p.objective(p.initial));
  }

  TEST_CASE("invalid problems and oracle reports") {
    OptProblem p;
    p.objective = [](const Vec& w) { return w.squaredNorm(); };
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
    p.initial = vec2(std::nan(""), 0.0);
    CHECK_THROWS_AS(solve(p), std::invalid_argument);
    p.initial = Vec::Zero(2);
    p.tol = 0.0;
    CHECK_THROWS_AS(solve(p), std::invalid_argument);

    p.tol = 1e-3;
    p.inequalities.push_back([](const Vec& w) { return 5.0 - w[0]; });
    const auto g = grid_oracle(p, -1.0, 1.0, 11);
    CHECK_FALSE(g.found);
    CHECK(g.report.find("no feasible grid point") != std::string::npos);
    CHECK_THROWS_AS(grid_oracle(p, -1.0, 1.0, 1), std::invalid_argument);
    p.initial = Vec::Zero(4);
    CHECK_THROWS_AS(grid_oracle(p, -1.0, 1.0, 5), std::invalid_argument);
  }

  TEST_CASE("trace csv") {
    std::ostringstream out;
    write_trace_csv(out, {{0, 5, 1.5, 0.25, 0.125}});
    const auto text = out.str();
    CHECK(text.find("outer") == 0);
    CHECK(text.find("1.5") != std::string::npos);
  }
}
