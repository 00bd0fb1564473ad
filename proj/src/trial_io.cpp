#include "slipctl/trial_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace slipctl {
namespace fs = std::filesystem;

std::string trial_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04d", index);
  return buf;
}

nlohmann::json to_json(const ObjectParams& p) {
  return {{"mass", p.mass},
          {"com_distance", p.com_distance},
          {"inertia", p.inertia},
          {"friction_coeff", p.friction_coeff},
          {"grip_normal_force", p.grip_normal_force},
          {"contact_radius", p.contact_radius},
          {"failure_angle", p.failure_angle}};
}

ObjectParams params_from_json(const nlohmann::json& j) {
  ObjectParams p;
  p.mass = j.at("mass").get<double>();
  p.com_distance = j.at("com_distance").get<double>();
  p.inertia = j.at("inertia").get<double>();
  p.friction_coeff = j.at("friction_coeff").get<double>();
  p.grip_normal_force = j.at("grip_normal_force").get<double>();
  p.contact_radius = j.at("contact_radius").get<double>();
  p.failure_angle = j.at("failure_angle").get<double>();
  return p;
}

nlohmann::json to_json(const TrialRecord& r) {
  nlohmann::json j = {{"t", r.t},         {"cmd", r.cmd},         {"speed", r.speed},
                      {"accel", r.accel}, {"tactile", r.tactile}, {"theta", r.theta},
                      {"slip", r.slip ? 1 : 0}, {"action6", r.action6}};
  if (r.p_slip) j["p_slip"] = *r.p_slip;
  if (r.rov) j["rov"] = *r.rov;
  if (r.status) j["status"] = *r.status;
  if (r.et_ms) j["et_ms"] = *r.et_ms;
  return j;
}

TrialRecord record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.t = j.at("t").get<double>();
  r.cmd = j.at("cmd").get<double>();
  r.speed = j.at("speed").get<double>();
  r.accel = j.at("accel").get<double>();
  r.theta = j.at("theta").get<double>();
  r.slip = j.at("slip").get<int>() != 0;
  const auto& tactile = j.at("tactile");
  const auto& action = j.at("action6");
  if (tactile.size() != r.tactile.size() || action.size() != r.action6.size()) {
    throw std::runtime_error("trial record: expected 48 tactile and 6 action values");
  }
  for (std::size_t i = 0; i < r.tactile.size(); ++i) r.tactile[i] = tactile[i].get<double>();
  for (std::size_t i = 0; i < r.action6.size(); ++i) r.action6[i] = action[i].get<double>();
  if (j.contains("p_slip")) r.p_slip = j["p_slip"].get<double>();
  if (j.contains("rov")) r.rov = j["rov"].get<double>();
  if (j.contains("status")) r.status = j["status"].get<std::string>();
  if (j.contains("et_ms")) r.et_ms = j["et_ms"].get<double>();
  return r;
}

nlohmann::json header_json(const TrialMeta& m) {
  return {{"seed", m.seed},
          {"controller", m.controller},
          {"n_basis", m.n_basis},
          {"v_max", m.v_max},
          {"params", to_json(m.params)},
          {"profile", to_json(m.profile)},
          {"dropped", m.dropped},
          {"drop_tick", m.drop_tick}};
}

TrialMeta meta_from_json(const nlohmann::json& j) {
  TrialMeta m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.controller = j.at("controller").get<std::string>();
  m.n_basis = j.at("n_basis").get<int>();
  m.v_max = j.at("v_max").get<double>();
  m.params = params_from_json(j.at("params"));
  m.profile = profile_from_json(j.at("profile"));
  m.dropped = j.at("dropped").get<bool>();
  m.drop_tick = j.at("drop_tick").get<int>();
  return m;
}

void write_trial(const TrialLog& log, const std::string& dir, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto base = fs::path(dir) / stem;
  const auto jsonl = base.string() + ".jsonl";
  const auto header = base.string() + ".json";

  std::ofstream rec(jsonl);
  if (!rec) throw std::runtime_error("cannot write trial file " + jsonl);
  for (const auto& r : log.records) rec << to_json(r).dump() << '\n';
  if (!rec) throw std::runtime_error("write failed for " + jsonl);

  std::ofstream hdr(header);
  if (!hdr) throw std::runtime_error("cannot write trial header " + header);
  hdr << header_json(log.meta).dump(2) << '\n';
  if (!hdr) throw std::runtime_error("write failed for " + header);
}

TrialLog read_trial(const std::string& jsonl_path) {
  fs::path p(jsonl_path);
  if (p.extension() != ".jsonl") throw std::invalid_argument("trial file must end in .jsonl: " + jsonl_path);
  const auto header_path = fs::path(p).replace_extension(".json").string();

  TrialLog log;
  std::ifstream hdr(header_path);
  if (!hdr) throw std::runtime_error("cannot open trial header " + header_path);
  try {
    log.meta = meta_from_json(nlohmann::json::parse(hdr));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed trial header " + header_path + ": " + e.what());
  }

  std::ifstream rec(jsonl_path);
  if (!rec) throw std::runtime_error("cannot open trial file " + jsonl_path);
  std::string line;
  long line_no = 0;
  while (std::getline(rec, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      log.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(jsonl_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

std::vector<TrialLog> read_trials(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<TrialLog> logs;
  logs.reserve(files.size());
  for (const auto& f : files) logs.push_back(read_trial(f));
  return logs;
}

bool same_trajectory(const TrialLog& a, const TrialLog& b) {
  if (header_json(a.meta) != header_json(b.meta) || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    auto ja = to_json(a.records[i]);
    auto jb = to_json(b.records[i]);
    ja.erase("et_ms");
    jb.erase("et_ms");
    if (ja != jb) return false;
  }
  return true;
}

}  // namespace slipctl
