#include <cmath>
#include <random>

#include "doctest.h"
#include "slipctl/signal_filter.hpp"

using namespace slipctl;

namespace {

TrialLog synthetic_trial(int len, std::uint64_t seed, int slip_from = -1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  TrialLog log;
  for (int k = 0; k < len; ++k) {
    TrialRecord r;
    r.t = k * kControlPeriod;
    for (auto& x : r.tactile) x = 1.0 + 0.1 * n01(rng);
    for (int a = 0; a < kActionDim; ++a) r.action6[std::size_t(a)] = 100.0 * k + a;
    r.slip = slip_from >= 0 && k >= slip_from;
    log.records.push_back(r);
  }
  return log;
}

double variance(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / double(x.size());
}

}  // namespace

TEST_SUITE("signal_filter") {
  TEST_CASE("kalman_update limits") {
    KalmanChannelState s{0.0, 1.0, 0.0, 1e-2};
    double prev_err = 3.0;
    for (int k = 0; k < 50; ++k) {
      const double var_before = s.variance;
      s = kalman_update(s, 3.0);
      CHECK(s.variance <= var_before);
      CHECK(std::abs(3.0 - s.estimate) < prev_err);
      prev_err = std::abs(3.0 - s.estimate);
    }
    CHECK(s.estimate == doctest::Approx(3.0).epsilon(1e-3));

    KalmanChannelState deaf{1.5, 0.1, 1e-3, 1e300};
    CHECK(kalman_update(deaf, 100.0).estimate == doctest::Approx(1.5).epsilon(1e-12));
  }

  TEST_CASE("white noise variance reduction") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> noise(1.0, 0.1);
    for (const double q : {1e-5, KalmanNoise{}.q}) {
      KalmanChannelState s{1.0, 1e-2, q, 1e-2};
      std::vector<double> in, out;
      for (int k = 0; k < 500; ++k) {
        const double z = noise(rng);
        s = kalman_update(s, z);
        in.push_back(z);
        out.push_back(s.estimate);
      }
      CHECK(variance(out) <= 0.5 * variance(in));
    }
  }

  TEST_CASE("gain converges to the Riccati fixed point") {
    for (const auto& [q, r] : {std::pair{1e-5, 1e-2}, std::pair{1e-3, 1e-2}, std::pair{0.5, 0.1}}) {
      KalmanChannelState s{0.0, r, q, r};
      double gain = 0.0;
      for (int k = 0; k < 5000; ++k) {
        const double predicted = s.variance + q;
        gain = predicted / (predicted + r);
        s = kalman_update(s, 0.0);
        CHECK(s.variance >= 0.0);
        CHECK(s.variance <= r);
      }
      CHECK(std::abs(gain - steady_state_gain(q, r)) < 1e-9);
    }
  }

  TEST_CASE("filter_stream initialization and scalar oracle") {
    std::vector<TactileFrame> one(1);
    for (int c = 0; c < kTactileChannels; ++c) one[0].shear[c] = 0.1 * c;
    const auto single = filter_stream(one, 1e-3, 1e-2);
    REQUIRE(single.size() == 1);
    CHECK(single[0].shear == one[0].shear);

    std::vector<TactileFrame> flat(20, one[0]);
    for (const auto& f : filter_stream(flat, 1e-3, 1e-2)) CHECK(f.shear == one[0].shear);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    std::vector<TactileFrame> noisy(200);
    for (auto& f : noisy) {
      for (auto& x : f.shear) x = n01(rng);
    }
    const auto out = filter_stream(noisy, 1e-3, 1e-2);
    for (int c = 0; c < kTactileChannels; ++c) {
      // Independent scalar recursion written out inline.
      double est = noisy[0].shear[c], var = 1e-2;
      for (std::size_t k = 1; k < noisy.size(); ++k) {
        const double p = var + 1e-3;
        const double g = p / (p + 1e-2);
        est += g * (noisy[k].shear[c] - est);
        var = (1.0 - g) * p;
        CHECK(std::abs(out[k].shear[c] - est) < 1e-12);
      }
    }
  }

  TEST_CASE("filtering is causal") {
    auto trial = synthetic_trial(60, 3);
    const Mat before = filtered_tactile(trial);
    for (std::size_t k = 30; k < trial.records.size(); ++k) {
      for (auto& x : trial.records[k].tactile) x += 50.0;
    }
    const Mat after = filtered_tactile(trial);
    CHECK((before.topRows(30) - after.topRows(30)).norm() == 0.0);
    CHECK((before.bottomRows(30) - after.bottomRows(30)).norm() > 1.0);
  }

  TEST_CASE("window counting and alignment") {
    const int c = kDefaultContext, t = kDefaultHorizon;
    CHECK(make_windows(synthetic_trial(c + t - 1, 1), c, t).empty());
    CHECK(make_windows(synthetic_trial(c + t, 1), c, t).size() == 1);
    for (const int len : {25, 47, 120}) {
      CHECK(long(make_windows(synthetic_trial(len, 1), c, t).size()) == len - c - t + 1);
    }
    CHECK(make_windows(synthetic_trial(30, 1), 0, t).empty());

    for (const auto& w : make_windows(synthetic_trial(40, 5), c, t)) CHECK_FALSE((w.label_now || w.label_future));

    const auto trial = synthetic_trial(70, 9, 33);
    const Mat filtered = filtered_tactile(trial);
    for (const auto& w : make_windows(trial, c, t)) {
      const auto k = std::size_t(w.end_tick);
      CHECK(w.tactile.frames.rows() == c);
      CHECK(w.actions.actions.rows() == t + 1);
      CHECK(w.tactile.t_end == trial.records[k].t);
      CHECK(w.label_now == trial.records[k].slip);
      CHECK(w.label_future == trial.records[k + std::size_t(t)].slip);
      CHECK((w.tactile.frames - filtered.middleRows(long(k) - c + 1, c)).norm() == 0.0);
      // Action rows run from the window end to T ticks ahead.
      CHECK(w.actions.actions(0, 0) == 100.0 * double(k));
      CHECK(w.actions.actions(t, 5) == 100.0 * double(k + std::size_t(t)) + 5.0);
    }
  }
}
