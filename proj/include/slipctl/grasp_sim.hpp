#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slipctl/reference.hpp"
#include "slipctl/types.hpp"

namespace slipctl {

/// Physical constants of the grasped object and the grip.
struct ObjectParams {
  double mass = 0.4;               // kg
  double com_distance = 0.1;       // m, grip axis to center of mass
  double inertia = 0.0;            // kg m^2 about the grip axis
  double friction_coeff = 0.8;
  double grip_normal_force = 20.0;  // N
  double contact_radius = 0.01;     // m, torsional friction lever
  double failure_angle = 45.0;      // deg

  /// Calibrated defaults for the simulated training box.
  static ObjectParams training_box();
  /// Box of the given mass and footprint hanging `com_distance` below the grip axis.
  static ObjectParams box(double mass, double com_distance, double width, double height);

  double friction_torque() const { return friction_coeff * grip_normal_force * contact_radius; }
  /// Largest |ee_accel| that keeps the object stuck at rest at angle theta_deg (gravity included).
  double stick_accel_limit(double theta_deg = 0.0, double gravity = 9.81) const;
  void validate() const;
};

struct TactileConfig {
  double noise_std = 0.1;
  double force_gain = 10.0;      // calibrated force scale
  double rotation_gain = 0.5;    // shear per (rad/s) per taxel pitch
  double gain_spread = 0.1;      // per-taxel gain eta_i ~ U(-spread, spread)
  double taxel_pitch = 0.0047;   // m
};

struct SimConfig {
  double gravity = 9.81;
  double actuator_time_constant = 0.02;  // s, first-order speed lag
  double stick_rate_eps = 1e-3;          // deg/s
  int substeps = 10;
  double tracking_noise = 0.0;   // m/s std of the per-tick realized-command perturbation
  double label_jitter = 0.0;     // deg std of marker noise added before labeling
  int settle_ticks = 15;         // zero-command ticks appended after the profile
  bool stop_on_drop = false;     // end the log at the tick the object fell
  TactileConfig tactile;
};

struct SimState {
  double theta = 0.0;      // deg, rotation about the grip axis from vertical
  double theta_dot = 0.0;  // deg/s
  double ee_speed = 0.0;   // m/s
  double ee_accel = 0.0;   // m/s^2, mean over the last control tick
  double t = 0.0;          // s
  bool dropped = false;
};

struct TactileFrame {
  std::array<double, kTactileChannels> shear{};
  double timestamp = 0.0;
};

/// Advances one control tick: actuator lag, then stick-slip rotation with
/// `config.substeps` semi-implicit Euler substeps. Throws on dt <= 0.
SimState step(const SimState& state, const ObjectParams& params, double commanded_speed, double dt,
              const SimConfig& config = {});

/// Rotational dynamics for one substep of length h under a prescribed end-effector acceleration.
SimState rotation_substep(const SimState& state, const ObjectParams& params, double ee_accel, double h,
                          const SimConfig& config = {});

/// Torque transmitted through the contact [N m]: the external torque while stuck, the friction cap while slipping.
double contact_torque(const SimState& state, const ObjectParams& params, double gravity = 9.81);

/// Per-trial tactile generator; taxel gains are drawn once from the seed, noise continues the same stream.
class TactileSynth {
 public:
  TactileSynth(std::uint64_t seed, TactileConfig config = {}, double gravity = 9.81);
  TactileFrame operator()(const SimState& state, const ObjectParams& params);
  /// The frame without noise.
  TactileFrame expected(const SimState& state, const ObjectParams& params) const;

 private:
  TactileConfig config_;
  double gravity_;
  std::array<double, 16> gain_{};
  std::mt19937_64 rng_;
};

/// 48 channels laid out taxel-major (4x4 grid, row-major), axes (path shear, vertical shear, normal).
TactileFrame synth_tactile(const SimState& state, const ObjectParams& params, std::uint64_t seed,
                           const TactileConfig& config = {});

inline bool slip_label(double theta_deg) { return std::abs(theta_deg) > kSlipThresholdDeg; }

/// Action row for a path speed: (v_x, v_y, 0, 0, 0, 0) along the task path.
std::array<double, kActionDim> embed_action(double speed, const TaskPath& path = {});

struct TrialRecord {
  double t = 0.0;
  double cmd = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  std::array<double, kTactileChannels> tactile{};
  double theta = 0.0;
  bool slip = false;
  std::array<double, kActionDim> action6{};
  // Controller extension; present when a controller produced the command.
  std::optional<double> p_slip;
  std::optional<double> rov;
  std::optional<std::string> status;
  std::optional<double> et_ms;
};

struct TrialMeta {
  std::uint64_t seed = 0;
  std::string controller = "none";
  int n_basis = 0;
  double v_max = 0.0;
  ObjectParams params;
  ReferenceProfile profile;
  bool dropped = false;
  int drop_tick = -1;
};

struct TrialLog {
  TrialMeta meta;
  std::vector<TrialRecord> records;
};

/// What a controller sees at tick k before choosing the command for tick k+1.
struct TickObservation {
  long tick = 0;
  const SimState& state;
  const TactileFrame& tactile;
  const ReferenceProfile& profile;
};

struct PolicyDecision {
  double command = 0.0;
  std::optional<double> p_slip;
  std::optional<double> rov;
  std::optional<std::string> status;
  std::optional<double> et_ms;
};

class CommandPolicy {
 public:
  virtual ~CommandPolicy() = default;
  virtual PolicyDecision decide(const TickObservation& obs) = 0;
  virtual std::string kind() const = 0;
  virtual int n_basis() const { return 0; }
};

/// Runs the profile at the control rate. Without a policy the command is the
/// reference sample for the next tick. Record k holds the state observed at
/// t = k dt and the command that was targeted for that tick.
TrialLog run_trial(const ReferenceProfile& profile, const ObjectParams& params, CommandPolicy* policy,
                   std::uint64_t seed, const SimConfig& config = {});

struct DatasetConfig {
  int n_trials = 660;
  std::vector<double> v_max_grid;  // empty -> default grid
  double mass_min = 0.35, mass_max = 0.45;
  double friction_min = 0.9, friction_max = 1.1;  // multiplier on the default friction coefficient
  double accel_fraction_min = 0.04, accel_fraction_max = 0.25;
  double decel_fraction_min = 0.05, decel_fraction_max = 0.35;
  std::uint64_t seed = 1;
  SimConfig sim;
  ObjectParams base = ObjectParams::training_box();

  static std::vector<double> default_grid();
};

struct DatasetSummary {
  int n_trials = 0;
  long n_ticks = 0;
  long n_slip = 0;
  int n_dropped = 0;
  double slip_fraction() const { return n_ticks ? double(n_slip) / double(n_ticks) : 0.0; }
};

/// In-memory dataset: trial i uses v_max grid[i % size] and seed derive_seed(seed, i).
std::vector<TrialLog> generate_trials(const DatasetConfig& config);
DatasetSummary summarize(const std::vector<TrialLog>& trials);

/// Writes trial_NNNN.jsonl + trial_NNNN.json per trial and summary.json into `dir`.
DatasetSummary gen_dataset(const DatasetConfig& config, const std::string& dir);

/// SplitMix64 mixing of a master seed with a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace slipctl
