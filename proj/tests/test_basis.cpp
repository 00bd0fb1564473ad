#include <cmath>
#include <random>

#include "doctest.h"
#include "slipctl/basis.hpp"
#include "slipctl/reference.hpp"

using namespace slipctl;

namespace {

BasisSpec explicit_spec(std::initializer_list<double> mu, double sigma, int horizon) {
  BasisSpec s;
  s.n_basis = int(mu.size());
  s.horizon = horizon;
  s.mu = Vec(s.n_basis);
  int j = 0;
  for (double m : mu) s.mu[j++] = m;
  s.sigma = sigma;
  return s;
}

}  // namespace

TEST_SUITE("trajectory_basis") {
  TEST_CASE("eval_basis at and around a center") {
    const auto s = explicit_spec({5.0}, 2.0, 10);
    CHECK(eval_basis(s, 5.0)[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_basis(s, 3.0)[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    const auto pair = explicit_spec({2.0, 8.0}, 2.0, 10);
    const Vec v = eval_basis(pair, 5.0);
    CHECK(v[0] == doctest::Approx(v[1]).epsilon(1e-15));
  }

  TEST_CASE("basis_matrix entries and rank") {
    const Mat phi1 = basis_matrix(explicit_spec({2.0}, 2.0, 3));
    CHECK(phi1(0, 0) == doctest::Approx(std::exp(-0.25)));
    CHECK(phi1(0, 1) == doctest::Approx(1.0));
    CHECK(phi1(0, 2) == doctest::Approx(std::exp(-0.25)));

    for (int n = 2; n <= 8; ++n) {
      const auto spec = BasisSpec::uniform(n, 10);
      const Mat phi = basis_matrix(spec);
      CHECK(phi.rows() == n);
      CHECK(phi.cols() == 10);
      CHECK(phi.minCoeff() > 0.0);
      CHECK(phi.maxCoeff() <= 1.0);
      for (int j = 0; j < n; ++j) CHECK(eval_basis(spec, spec.mu[j])[j] == doctest::Approx(1.0));
      for (int k = 0; k < 10; ++k) CHECK((phi.col(k) - eval_basis(spec, double(k + 1))).norm() == 0.0);
    }
    Eigen::FullPivLU<Mat> lu(basis_matrix(BasisSpec::uniform(2, 10)));
    CHECK(lu.rank() == 2);
  }

  TEST_CASE("uniform centers span the horizon with squared-spacing width") {
    const auto s = BasisSpec::uniform(4, 10);
    CHECK(s.mu[0] == 1.0);
    CHECK(s.mu[3] == 10.0);
    CHECK(s.sigma == doctest::Approx(9.0));
    CHECK_THROWS_AS(BasisSpec::uniform(1, 10), std::invalid_argument);
    CHECK_THROWS_AS(BasisSpec::uniform(9, 10), std::invalid_argument);
    auto bad = explicit_spec({3.0, 2.0}, 1.0, 5);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = explicit_spec({1.0, 2.0}, 0.0, 5);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("trajectory_from_weights is linear") {
    const Mat phi = basis_matrix(BasisSpec::uniform(5, 10));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
      Vec a(5), b(5);
      for (int j = 0; j < 5; ++j) {
        a[j] = n01(rng);
        b[j] = n01(rng);
      }
      const double s = n01(rng);
      CHECK((trajectory_from_weights(phi, Vec(s * a)) - s * trajectory_from_weights(phi, a)).norm() < 1e-12);
      CHECK((trajectory_from_weights(phi, Vec(a + b)) - trajectory_from_weights(phi, a) -
             trajectory_from_weights(phi, b))
                .norm() < 1e-12);
    }
    CHECK(trajectory_from_weights(phi, Vec::Zero(5)).norm() == 0.0);
    Mat row(1, 3);
    row << 0.5, 1.0, 0.5;
    const Vec traj = trajectory_from_weights(row, Vec::Constant(1, 2.0));
    CHECK(traj[0] == 1.0);
    CHECK(traj[1] == 2.0);
    CHECK(traj[2] == 1.0);
    CHECK_THROWS_AS(trajectory_from_weights(phi, Vec::Zero(4)), std::invalid_argument);
  }

  TEST_CASE("fit_weights recovers representable trajectories") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    for (int n = 2; n <= 8; ++n) {
      const Mat phi = basis_matrix(BasisSpec::uniform(n, 10));
      Vec w(n);
      for (int j = 0; j < n; ++j) w[j] = n01(rng);
      const auto fit = fit_weights(trajectory_from_weights(phi, w), phi);
      CHECK(fit.residual_norm < 1e-8);
      CHECK((trajectory_from_weights(phi, fit.w) - trajectory_from_weights(phi, w)).norm() < 1e-8);
    }
    const Mat phi = basis_matrix(BasisSpec::uniform(3, 10));
    CHECK(fit_weights(Vec::Zero(10), phi).w.norm() == 0.0);
    CHECK_THROWS_AS(fit_weights(Vec::Zero(9), phi), std::invalid_argument);
  }

  TEST_CASE("fit_weights residual is orthogonal and matches a grid search") {
    const Mat phi = basis_matrix(BasisSpec::uniform(2, 10));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    Vec ref(10);
    for (int k = 0; k < 10; ++k) ref[k] = u(rng);
    const auto fit = fit_weights(ref, phi);
    const Vec resid = trajectory_from_weights(phi, fit.w) - ref;
    CHECK((phi * resid).norm() < 1e-9);

    // Dense grid around the solution; the least-squares residual must not be beaten.
    double best = std::numeric_limits<double>::infinity();
    const double span = 2.0 * (fit.w.cwiseAbs().maxCoeff() + 1.0);
    const int res = 801;
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < res; ++j) {
        Vec w(2);
        w << fit.w[0] + span * (double(i) / (res - 1) - 0.5), fit.w[1] + span * (double(j) / (res - 1) - 0.5);
        best = std::min(best, (trajectory_from_weights(phi, w) - ref).norm());
      }
    }
    CHECK(fit.residual_norm <= best * (1.0 + 1e-12));
    CHECK(best <= fit.residual_norm * 1.001);
  }

  TEST_CASE("trapezoid profile timing and area") {
    const auto p = trapezoid_profile(0.5, 0.583, 0.4, 0.4);
    CHECK(p.t_cruise == doctest::Approx(0.766).epsilon(1e-3));
    CHECK(p.duration() == doctest::Approx(1.566).epsilon(1e-3));
    CHECK(p.samples[0] == 0.0);
    CHECK(p.samples[p.samples.size() - 1] == 0.0);

    const double path = TaskPath{}.length();
    for (double v = 0.2; v <= 0.8001; v += 0.05) {
      const auto q = trapezoid_by_fraction(v, path, 0.25, 0.25);
      CHECK(std::abs(integrate_samples(q) - path) / path < 1e-9);
      CHECK(q.samples.maxCoeff() <= v + 1e-12);
    }

    const auto tri = trapezoid_profile(0.5, 0.5 * 0.8 / 2.0, 0.4, 0.4);
    CHECK(tri.t_cruise == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(trapezoid_profile(0.5, 0.1, 0.4, 0.4), std::invalid_argument);
    try {
      trapezoid_profile(0.5, 0.1, 0.4, 0.4);
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("0.2") != std::string::npos);
    }
  }

  TEST_CASE("reference windows") {
    const auto p = trapezoid_profile(0.5, 0.583, 0.4, 0.4);
    const long n = long(p.samples.size());
    CHECK(sample_reference_window(p, n + 5, 10).norm() == 0.0);
    const Vec full = sample_reference_window(p, -1, int(n));
    CHECK((full - p.samples).norm() == 0.0);
    const long mid = long((p.t_accel + 0.5 * p.t_cruise) / p.dt);
    const Vec cruise = sample_reference_window(p, mid - 5, 8);
    CHECK((cruise.array() - 0.5).abs().maxCoeff() < 1e-12);
    const Vec tail = sample_reference_window(p, n - 3, 10);
    CHECK(tail.tail(8).norm() == 0.0);
  }

  TEST_CASE("profile JSON round-trip") {
    const auto p = task_profile(0.5);
    const auto q = profile_from_json(to_json(p));
    CHECK(q.v_max == p.v_max);
    CHECK(q.displacement == p.displacement);
    CHECK((q.samples - p.samples).norm() == 0.0);
    CHECK_THROWS(profile_from_json(nlohmann::json::object()));
  }
}
