#include "slipctl/reference.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace slipctl {

double ReferenceProfile::nominal(double t) const {
  if (t <= 0.0) return 0.0;
  if (t < t_accel) return v_max * t / t_accel;
  if (t <= t_accel + t_cruise) return v_max;
  const double end = duration();
  if (t < end) return v_max * (end - t) / t_decel;
  return 0.0;
}

ReferenceProfile trapezoid_profile(double v_max, double displacement, double t_accel, double t_decel, double dt) {
  if (!(v_max > 0.0) || !(displacement > 0.0) || !(t_accel > 0.0) || !(t_decel > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("trapezoid_profile: v_max, displacement, ramp times and dt must be positive");
  }
  const double ramp_area = v_max * (t_accel + t_decel) / 2.0;
  // A relative slack keeps the exactly-triangular case feasible under rounding.
  if (ramp_area > displacement * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "trapezoid_profile: displacement " << displacement << " m is below the ramp area; need at least "
        << ramp_area << " m for v_max=" << v_max;
    throw std::invalid_argument(msg.str());
  }

  ReferenceProfile p;
  p.v_max = v_max;
  p.t_accel = t_accel;
  p.t_decel = t_decel;
  p.t_cruise = std::max(0.0, (displacement - ramp_area) / v_max);
  p.dt = dt;
  p.displacement = displacement;

  const long last = static_cast<long>(std::ceil(p.duration() / dt - 1e-9));
  p.samples = Vec::Zero(last + 1);
  double ramp_sum = 0.0;
  double cruise_sum = 0.0;
  for (long k = 1; k < last; ++k) {
    const double t = double(k) * dt;
    const double v = p.nominal(t);
    p.samples[k] = v;
    if (t < t_accel || t > t_accel + p.t_cruise) {
      ramp_sum += v;
    } else {
      cruise_sum += v;
    }
  }
  p.samples[last] = 0.0;

  // Interior samples carry weight dt under the trapezoidal rule (end samples are zero).
  if (ramp_sum > 0.0) {
    const double scale = (displacement / dt - cruise_sum) / ramp_sum;
    for (long k = 1; k < last; ++k) {
      const double t = double(k) * dt;
      if (t < t_accel || t > t_accel + p.t_cruise) p.samples[k] *= scale;
    }
  }
  return p;
}

ReferenceProfile trapezoid_by_fraction(double v_max, double displacement, double accel_fraction,
                                       double decel_fraction, double dt) {
  if (!(accel_fraction > 0.0) || !(decel_fraction > 0.0) || !(accel_fraction + decel_fraction <= 1.0)) {
    throw std::invalid_argument("trapezoid_by_fraction: ramp fractions must be positive and sum to at most 1");
  }
  if (!(v_max > 0.0)) throw std::invalid_argument("trapezoid_by_fraction: v_max must be positive");
  // area = v_max * D * (1 - (fa + fd) / 2)
  const double total = displacement / (v_max * (1.0 - 0.5 * (accel_fraction + decel_fraction)));
  return trapezoid_profile(v_max, displacement, accel_fraction * total, decel_fraction * total, dt);
}

VelocityTrajectory sample_reference_window(const ReferenceProfile& profile, long t_now, int horizon) {
  VelocityTrajectory window(horizon);
  for (int i = 0; i < horizon; ++i) window[i] = profile.at(t_now + 1 + i);
  return window;
}

double integrate_samples(const ReferenceProfile& profile) {
  const auto& s = profile.samples;
  if (s.size() < 2) return 0.0;
  return profile.dt * (s.sum() - 0.5 * (s[0] + s[s.size() - 1]));
}

ReferenceProfile task_profile(double v_max, double accel_fraction, double decel_fraction) {
  return trapezoid_by_fraction(v_max, TaskPath{}.length(), accel_fraction, decel_fraction);
}

nlohmann::json to_json(const ReferenceProfile& profile) {
  return {{"v_max", profile.v_max},   {"t_accel", profile.t_accel}, {"t_cruise", profile.t_cruise},
          {"t_decel", profile.t_decel}, {"dt", profile.dt},           {"displacement", profile.displacement}};
}

ReferenceProfile profile_from_json(const nlohmann::json& j) {
  return trapezoid_profile(j.at("v_max").get<double>(), j.at("displacement").get<double>(),
                           j.at("t_accel").get<double>(), j.at("t_decel").get<double>(), j.at("dt").get<double>());
}

}  // namespace slipctl
