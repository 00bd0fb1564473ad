#include "slipctl/signal_filter.hpp"

#include <cmath>

namespace slipctl {

KalmanChannelState kalman_update(KalmanChannelState s, double z) {
  const double predicted = s.variance + s.q_process;
  const double gain = predicted / (predicted + s.r_measure);
  s.estimate += gain * (z - s.estimate);
  s.variance = (1.0 - gain) * predicted;
  return s;
}

double steady_state_gain(double q, double r) {
  // Riccati fixed point of the predicted variance: P^2 - qP - qr = 0.
  const double predicted = 0.5 * (q + std::sqrt(q * q + 4.0 * q * r));
  return predicted / (predicted + r);
}

TactileFrame TactileFilter::push(const TactileFrame& raw) {
  TactileFrame out = raw;
  if (!initialized_) {
    for (int c = 0; c < kTactileChannels; ++c) {
      channels_[c] = KalmanChannelState{raw.shear[c], noise_.r, noise_.q, noise_.r};
    }
    initialized_ = true;
    return out;
  }
  for (int c = 0; c < kTactileChannels; ++c) {
    channels_[c] = kalman_update(channels_[c], raw.shear[c]);
    out.shear[c] = channels_[c].estimate;
  }
  return out;
}

std::vector<TactileFrame> filter_stream(std::span<const TactileFrame> frames, double q, double r) {
  TactileFilter filter(KalmanNoise{q, r});
  std::vector<TactileFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(filter.push(f));
  return out;
}

Mat filtered_tactile(const TrialLog& trial, KalmanNoise noise) {
  TactileFilter filter(noise);
  Mat out(long(trial.records.size()), kTactileChannels);
  for (std::size_t k = 0; k < trial.records.size(); ++k) {
    TactileFrame raw;
    raw.shear = trial.records[k].tactile;
    raw.timestamp = trial.records[k].t;
    const auto f = filter.push(raw);
    for (int c = 0; c < kTactileChannels; ++c) out(long(k), c) = f.shear[c];
  }
  return out;
}

Mat action_rows(const TrialLog& trial) {
  Mat out(long(trial.records.size()), kActionDim);
  for (std::size_t k = 0; k < trial.records.size(); ++k) {
    for (int a = 0; a < kActionDim; ++a) out(long(k), a) = trial.records[k].action6[a];
  }
  return out;
}

std::vector<WindowSample> make_windows(const TrialLog& trial, int context, int horizon, KalmanNoise noise) {
  std::vector<WindowSample> windows;
  const long len = long(trial.records.size());
  if (context < 1 || horizon < 1 || len < context + horizon) return windows;

  const Mat tactile = filtered_tactile(trial, noise);
  const Mat actions = action_rows(trial);
  windows.reserve(std::size_t(len - context - horizon + 1));
  for (long k = context - 1; k + horizon < len; ++k) {
    WindowSample w;
    w.tactile.frames = tactile.middleRows(k - context + 1, context);
    w.tactile.t_end = trial.records[k].t;
    w.actions.actions = actions.middleRows(k, horizon + 1);
    w.label_now = trial.records[k].slip;
    w.label_future = trial.records[k + horizon].slip;
    w.end_tick = k;
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace slipctl
