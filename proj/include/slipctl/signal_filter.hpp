#pragma once

#include <array>
#include <span>
#include <vector>

#include "slipctl/grasp_sim.hpp"
#include "slipctl/types.hpp"

namespace slipctl {

inline constexpr int kDefaultContext = 10;
inline constexpr int kDefaultHorizon = 10;

struct KalmanNoise {
  double q = 1e-3;  // random-walk process variance per tick
  double r = 1e-2;  // measurement variance
};

/// Scalar random-walk Kalman filter state for one tactile channel.
struct KalmanChannelState {
  double estimate = 0.0;
  double variance = 0.0;
  double q_process = 1e-3;
  double r_measure = 1e-2;
};

/// Predict (variance += q) then update with measurement z.
KalmanChannelState kalman_update(KalmanChannelState state, double measurement);

/// Steady-state Kalman gain of the random-walk model.
double steady_state_gain(double q, double r);

/// Online 48-channel filter. The first frame initializes every channel to its measurement.
class TactileFilter {
 public:
  explicit TactileFilter(KalmanNoise noise = {}) : noise_(noise) {}
  TactileFrame push(const TactileFrame& raw);
  bool initialized() const { return initialized_; }

 private:
  KalmanNoise noise_;
  bool initialized_ = false;
  std::array<KalmanChannelState, kTactileChannels> channels_{};
};

std::vector<TactileFrame> filter_stream(std::span<const TactileFrame> frames, double q, double r);

/// Filtered tactile history of a trial, one row per tick (ticks x 48).
Mat filtered_tactile(const TrialLog& trial, KalmanNoise noise = {});
/// Recorded action rows of a trial (ticks x 6).
Mat action_rows(const TrialLog& trial);

struct TactileWindow {
  Mat frames;  // C x 48, oldest first
  double t_end = 0.0;
};

struct ActionWindow {
  Mat actions;  // (T+1) x 6: the command in force at the window end, then the next T
};

struct WindowSample {
  TactileWindow tactile;
  ActionWindow actions;
  bool label_now = false;
  bool label_future = false;
  long end_tick = 0;
};

/// Sliding windows ending at every tick k in [C-1, len-1-T]: frames k-C+1..k,
/// actions k..k+T, label_now = slip[k], label_future = slip[k+T].
/// Trials shorter than C+T give no windows.
std::vector<WindowSample> make_windows(const TrialLog& trial, int context = kDefaultContext,
                                       int horizon = kDefaultHorizon, KalmanNoise noise = {});

}  // namespace slipctl
