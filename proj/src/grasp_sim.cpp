#include "slipctl/grasp_sim.hpp"

#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "slipctl/trial_io.hpp"

namespace slipctl {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double sign(double x) { return (x > 0.0) - (x < 0.0); }

double external_torque(double theta, double ee_accel, const ObjectParams& p, double gravity) {
  const double mr = p.mass * p.com_distance;
  return -mr * gravity * std::sin(theta) - mr * ee_accel * std::cos(theta);
}

}  // namespace

ObjectParams ObjectParams::box(double mass, double com_distance, double width, double height) {
  ObjectParams p;
  p.mass = mass;
  p.com_distance = com_distance;
  p.inertia = mass * com_distance * com_distance + mass * (width * width + height * height) / 12.0;
  return p;
}

ObjectParams ObjectParams::training_box() {
  ObjectParams p = box(0.4, 0.1, 0.15, 0.25);
  p.friction_coeff = 0.75;
  p.grip_normal_force = 8.0;
  p.contact_radius = 0.01;
  p.failure_angle = 10.0;
  return p;
}

double ObjectParams::stick_accel_limit(double theta_deg, double gravity) const {
  const double th = theta_deg * kDeg;
  const double mr = mass * com_distance;
  // |mr g sin th + mr a cos th| <= cap, solved for the larger |a| in the direction that opposes gravity.
  return (friction_torque() + mr * gravity * std::abs(std::sin(th))) / (mr * std::cos(th));
}

void ObjectParams::validate() const {
  if (!(mass > 0.0 && com_distance > 0.0 && inertia > 0.0 && friction_coeff > 0.0 && grip_normal_force > 0.0 &&
        contact_radius > 0.0)) {
    throw std::invalid_argument("object parameters must all be positive");
  }
  if (!(failure_angle > kSlipThresholdDeg)) throw std::invalid_argument("failure angle must exceed the 6 deg slip label");
}

SimState rotation_substep(const SimState& state, const ObjectParams& params, double ee_accel, double h,
                          const SimConfig& config) {
  SimState next = state;
  if (state.dropped) {
    // The object has left the grasp; its last angle stays on record.
    next.theta_dot = 0.0;
    return next;
  }
  const double theta = state.theta * kDeg;
  const double omega = state.theta_dot * kDeg;
  const double eps = config.stick_rate_eps * kDeg;
  const double cap = params.friction_torque();
  const double net = external_torque(theta, ee_accel, params, config.gravity);

  double omega_next = 0.0;
  if (std::abs(omega) < eps) {
    if (std::abs(net) > cap) omega_next = h * (net - sign(net) * cap) / params.inertia;
  } else {
    omega_next = omega + h * (net - sign(omega) * cap) / params.inertia;
    // Re-stick when the rate crosses zero under a torque the contact can hold.
    if (sign(omega_next) != sign(omega) && std::abs(net) <= cap) omega_next = 0.0;
  }

  next.theta_dot = omega_next / kDeg;
  next.theta = (theta + h * omega_next) / kDeg;
  if (std::abs(next.theta) >= params.failure_angle) next.dropped = true;
  return next;
}

SimState step(const SimState& state, const ObjectParams& params, double commanded_speed, double dt,
              const SimConfig& config) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (config.substeps < 1) throw std::invalid_argument("step: need at least one substep");

  const double h = dt / config.substeps;
  const double blend =
      config.actuator_time_constant > 0.0 ? 1.0 - std::exp(-h / config.actuator_time_constant) : 1.0;

  SimState s = state;
  for (int i = 0; i < config.substeps; ++i) {
    const double v_next = s.ee_speed + (commanded_speed - s.ee_speed) * blend;
    const double accel = (v_next - s.ee_speed) / h;
    s = rotation_substep(s, params, accel, h, config);
    s.ee_speed = v_next;
  }
  s.ee_accel = (s.ee_speed - state.ee_speed) / dt;
  s.t = state.t + dt;
  s.dropped = state.dropped || s.dropped;
  return s;
}

double contact_torque(const SimState& state, const ObjectParams& params, double gravity) {
  const double net = external_torque(state.theta * kDeg, state.ee_accel, params, gravity);
  const double cap = params.friction_torque();
  const double omega = state.theta_dot * kDeg;
  if (std::abs(omega) < 1e-9 && std::abs(net) <= cap) return -net;
  return omega != 0.0 ? -sign(omega) * cap : -sign(net) * cap;
}

TactileSynth::TactileSynth(std::uint64_t seed, TactileConfig config, double gravity)
    : config_(config), gravity_(gravity), rng_(seed) {
  std::uniform_real_distribution<double> spread(-config_.gain_spread, config_.gain_spread);
  for (auto& g : gain_) g = config_.gain_spread > 0.0 ? spread(rng_) : 0.0;
}

TactileFrame TactileSynth::expected(const SimState& state, const ObjectParams& params) const {
  TactileFrame frame;
  frame.timestamp = state.t;
  if (state.dropped) {
    frame.shear.fill(0.0);  // nothing left in the grasp
    return frame;
  }
  const double pitch = config_.taxel_pitch;
  const double lever_sq_sum = 40.0 * pitch * pitch;
  const double torque = contact_torque(state, params, gravity_);
  const double omega = state.theta_dot * kDeg;
  const double theta = state.theta * kDeg;
  const double fg = config_.force_gain;

  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col) {
      const int taxel = row * 4 + col;
      const double u = (col - 1.5) * pitch;
      const double v = (row - 1.5) * pitch;
      const double eta = gain_[taxel];
      auto* out = &frame.shear[taxel * 3];
      out[0] = fg * (params.mass * std::abs(state.ee_accel) / 16.0 * (1.0 + eta) - torque * v / lever_sq_sum) -
               config_.rotation_gain * omega * v / pitch;
      out[1] = fg * (params.mass * gravity_ * std::cos(theta) / 16.0 + torque * u / lever_sq_sum) +
               config_.rotation_gain * omega * u / pitch;
      out[2] = fg * params.grip_normal_force / 16.0;
    }
  }
  return frame;
}

TactileFrame TactileSynth::operator()(const SimState& state, const ObjectParams& params) {
  TactileFrame frame = expected(state, params);
  if (config_.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.noise_std);
    for (auto& x : frame.shear) x += noise(rng_);
  }
  return frame;
}

TactileFrame synth_tactile(const SimState& state, const ObjectParams& params, std::uint64_t seed,
                           const TactileConfig& config) {
  TactileSynth synth(seed, config);
  return synth(state, params);
}

std::array<double, kActionDim> embed_action(double speed, const TaskPath& path) {
  const Eigen::Vector3d d = path.direction();
  return {speed * d.x(), speed * d.y(), speed * d.z(), 0.0, 0.0, 0.0};
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(master ^ mix(stream));
}

TrialLog run_trial(const ReferenceProfile& profile, const ObjectParams& params, CommandPolicy* policy,
                   std::uint64_t seed, const SimConfig& config) {
  params.validate();
  TrialLog log;
  log.meta.seed = seed;
  log.meta.controller = policy ? policy->kind() : "none";
  log.meta.n_basis = policy ? policy->n_basis() : 0;
  log.meta.v_max = profile.v_max;
  log.meta.params = params;
  log.meta.profile = profile;

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::normal_distribution<double> unit(0.0, 1.0);
  TactileSynth synth(derive_seed(seed, 2), config.tactile, config.gravity);

  auto make_record = [&](const SimState& s, const TactileFrame& frame, double cmd) {
    TrialRecord r;
    r.t = s.t;
    r.cmd = cmd;
    r.speed = s.ee_speed;
    r.accel = s.ee_accel;
    r.tactile = frame.shear;
    r.theta = s.theta;
    const double observed = config.label_jitter > 0.0 ? s.theta + config.label_jitter * unit(rng) : s.theta;
    r.slip = slip_label(observed);
    r.action6 = embed_action(cmd);
    return r;
  };

  SimState state;
  TactileFrame frame = synth(state, params);
  log.records.reserve(profile.samples.size() + config.settle_ticks);
  log.records.push_back(make_record(state, frame, profile.at(0)));

  const long ticks = long(profile.samples.size()) - 1 + config.settle_ticks;
  for (long k = 0; k < ticks; ++k) {
    PolicyDecision decision;
    if (policy) {
      decision = policy->decide(TickObservation{k, state, frame, profile});
    } else {
      decision.command = profile.at(k + 1);
    }
    double target = decision.command;
    if (config.tracking_noise > 0.0) target += config.tracking_noise * unit(rng);

    state = step(state, params, target, profile.dt, config);
    frame = synth(state, params);
    TrialRecord r = make_record(state, frame, decision.command);
    r.p_slip = decision.p_slip;
    r.rov = decision.rov;
    r.status = decision.status;
    r.et_ms = decision.et_ms;
    log.records.push_back(std::move(r));
    if (state.dropped && log.meta.drop_tick < 0) log.meta.drop_tick = int(k + 1);
    if (state.dropped && config.stop_on_drop) break;
  }
  log.meta.dropped = state.dropped;
  return log;
}

std::vector<double> DatasetConfig::default_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.2 + 0.05 * i);
  return grid;
}

std::vector<TrialLog> generate_trials(const DatasetConfig& config) {
  if (config.n_trials < 1) throw std::invalid_argument("gen_dataset: n_trials must be at least 1");
  const auto grid = config.v_max_grid.empty() ? DatasetConfig::default_grid() : config.v_max_grid;
  const TaskPath path;

  std::vector<TrialLog> trials;
  trials.reserve(config.n_trials);
  for (int i = 0; i < config.n_trials; ++i) {
    const std::uint64_t trial_seed = derive_seed(config.seed, std::uint64_t(i));
    std::mt19937_64 rng(trial_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double mass = config.mass_min + (config.mass_max - config.mass_min) * unit(rng);
    const double friction = config.friction_min + (config.friction_max - config.friction_min) * unit(rng);
    const double accel_frac =
        config.accel_fraction_min + (config.accel_fraction_max - config.accel_fraction_min) * unit(rng);
    const double decel_frac =
        config.decel_fraction_min + (config.decel_fraction_max - config.decel_fraction_min) * unit(rng);

    ObjectParams params = config.base;
    params.inertia *= mass / params.mass;
    params.mass = mass;
    params.friction_coeff *= friction;

    const double v_max = grid[std::size_t(i) % grid.size()];
    const auto profile = trapezoid_by_fraction(v_max, path.length(), accel_frac, decel_frac);
    trials.push_back(run_trial(profile, params, nullptr, derive_seed(trial_seed, 7), config.sim));
  }
  return trials;
}

DatasetSummary summarize(const std::vector<TrialLog>& trials) {
  DatasetSummary s;
  s.n_trials = int(trials.size());
  for (const auto& log : trials) {
    s.n_ticks += long(log.records.size());
    for (const auto& r : log.records) s.n_slip += r.slip ? 1 : 0;
    s.n_dropped += log.meta.dropped ? 1 : 0;
  }
  return s;
}

DatasetSummary gen_dataset(const DatasetConfig& config, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("gen_dataset: cannot create " + dir + ": " + ec.message());

  const auto trials = generate_trials(config);
  for (std::size_t i = 0; i < trials.size(); ++i) write_trial(trials[i], dir, trial_stem(int(i)));

  const auto summary = summarize(trials);
  nlohmann::json j = {{"n_trials", summary.n_trials},
                      {"n_ticks", summary.n_ticks},
                      {"n_slip", summary.n_slip},
                      {"n_dropped", summary.n_dropped},
                      {"slip_fraction", summary.slip_fraction()},
                      {"seed", config.seed}};
  const auto path = (fs::path(dir) / "summary.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("gen_dataset: cannot write " + path);
  out << j.dump(2) << "\n";
  return summary;
}

}  // namespace slipctl
