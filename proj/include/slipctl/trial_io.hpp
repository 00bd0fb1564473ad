#pragma once

#include <string>

#include "json.hpp"
#include "slipctl/grasp_sim.hpp"

namespace slipctl {

// Trial files: <stem>.jsonl holds one record per control tick, <stem>.json the
// metadata header. Doubles are written with round-trip precision.

std::string trial_stem(int index);

nlohmann::json to_json(const ObjectParams& params);
ObjectParams params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrialRecord& record);
TrialRecord record_from_json(const nlohmann::json& j);

nlohmann::json header_json(const TrialMeta& meta);
TrialMeta meta_from_json(const nlohmann::json& j);

/// Writes <dir>/<stem>.jsonl and <dir>/<stem>.json; errors name the failing path.
void write_trial(const TrialLog& log, const std::string& dir, const std::string& stem);
/// Reads the pair written by write_trial; `jsonl_path` must end in .jsonl.
TrialLog read_trial(const std::string& jsonl_path);

/// All *.jsonl trials in a directory, sorted by file name.
std::vector<TrialLog> read_trials(const std::string& dir);

/// Equality of everything except wall-clock timing fields.
bool same_trajectory(const TrialLog& a, const TrialLog& b);

}  // namespace slipctl
