#pragma once

#include <string>

#include "json.hpp"
#include "slipctl/types.hpp"

namespace slipctl {

/// Trapezoidal speed reference along a straight task-space path.
///
/// `samples[k]` is the commanded speed at t = k * dt. Samples start and end at
/// zero; the ramp samples are rescaled so that the trapezoidal quadrature of
/// the sequence equals `displacement` while cruise samples stay at v_max.
struct ReferenceProfile {
  double v_max = 0.0;
  double t_accel = 0.0;
  double t_cruise = 0.0;
  double t_decel = 0.0;
  double dt = kControlPeriod;
  double displacement = 0.0;
  Vec samples;

  double duration() const { return t_accel + t_cruise + t_decel; }
  /// Sample at tick k, zero outside the profile.
  double at(long k) const { return (k < 0 || k >= samples.size()) ? 0.0 : samples[k]; }
  /// Continuous-time trapezoid value (no quadrature correction).
  double nominal(double t) const;
};

ReferenceProfile trapezoid_profile(double v_max, double displacement, double t_accel, double t_decel,
                                   double dt = kControlPeriod);

/// Profile whose acceleration and deceleration ramps take the given fractions of the total duration.
ReferenceProfile trapezoid_by_fraction(double v_max, double displacement, double accel_fraction,
                                       double decel_fraction, double dt = kControlPeriod);

/// Samples t_now + 1 .. t_now + horizon, zero-padded past the profile end.
VelocityTrajectory sample_reference_window(const ReferenceProfile& profile, long t_now, int horizon);

/// Trapezoidal-rule integral of the sample sequence.
double integrate_samples(const ReferenceProfile& profile);

/// Straight-line path used by the data collection motion (start/end in the robot base frame).
struct TaskPath {
  Eigen::Vector3d start{0.4, 0.25, 0.3};
  Eigen::Vector3d end{0.1, -0.25, 0.3};

  double length() const { return (end - start).norm(); }
  Eigen::Vector3d direction() const { return (end - start).normalized(); }
};

inline constexpr double kDefaultAccelFraction = 0.05;
inline constexpr double kDefaultDecelFraction = 0.3;

/// The standard task: the straight data-collection path at the given peak speed.
ReferenceProfile task_profile(double v_max, double accel_fraction = kDefaultAccelFraction,
                              double decel_fraction = kDefaultDecelFraction);

nlohmann::json to_json(const ReferenceProfile& profile);
/// Rebuilds the samples from the stored timing; throws on missing keys.
ReferenceProfile profile_from_json(const nlohmann::json& j);

}  // namespace slipctl
