#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slipctl/slip_models.hpp"

namespace slipctl {
namespace {

using nlohmann::json;
using Reason = ModelFormatError::Reason;

json tensors_to_json(std::vector<TensorView> views) {
  json out = json::object();
  for (const auto& t : views) {
    std::vector<double> data;
    data.reserve(std::size_t(t.size()));
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c) data.push_back(t.data[c * t.rows + r]);
    out[t.name] = {{"shape", {t.rows, t.cols}}, {"data", std::move(data)}};
  }
  return out;
}

void write_json(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelFormatError(Reason::io, "cannot write model file " + path);
  out << doc.dump() << '\n';
  if (!out) throw ModelFormatError(Reason::io, "failed writing model file " + path);
}

// Parses the file and checks version and kind; returns the tensor table.
json read_tensors(const std::string& path, ModelKind expected) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError(Reason::io, "cannot open model file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(Reason::parse, path + ": not valid JSON (" + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    throw ModelFormatError(Reason::version, path + ": missing integer format_version");
  }
  const int version = doc["format_version"].get<int>();
  if (version != kModelFormatVersion) {
    throw ModelFormatError(Reason::version, path + ": format_version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kModelFormatVersion) + ")");
  }
  const std::string kind = doc.value("kind", std::string{});
  if (kind != to_string(expected)) {
    throw ModelFormatError(Reason::kind,
                           path + ": model kind '" + kind + "' where '" + to_string(expected) + "' was expected");
  }
  if (!doc.contains("tensors") || !doc["tensors"].is_object()) {
    throw ModelFormatError(Reason::missing_tensor, path + ": no tensors table");
  }
  return doc["tensors"];
}

std::pair<Eigen::Index, Eigen::Index> shape_of(const json& tensors, const std::string& name,
                                               const std::string& path) {
  if (!tensors.contains(name)) throw ModelFormatError(Reason::missing_tensor, path + ": missing tensor " + name);
  const json& shape = tensors[name].value("shape", json());
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_integer() || !shape[1].is_number_integer() ||
      shape[0].get<long>() < 1 || shape[1].get<long>() < 1) {
    throw ModelFormatError(Reason::shape, path + ": tensor " + name + " has a malformed shape");
  }
  return {shape[0].get<long>(), shape[1].get<long>()};
}

void fill(std::vector<TensorView> views, const json& tensors, const std::string& path) {
  for (const auto& t : views) {
    const auto [rows, cols] = shape_of(tensors, t.name, path);
    if (rows != t.rows || cols != t.cols) {
      std::ostringstream msg;
      msg << path << ": tensor " << t.name << " is " << rows << "x" << cols << ", expected " << t.rows << "x"
          << t.cols;
      throw ModelFormatError(Reason::shape, msg.str());
    }
    const json& data = tensors[t.name].value("data", json());
    if (!data.is_array() || Eigen::Index(data.size()) != rows * cols) {
      throw ModelFormatError(Reason::shape, path + ": tensor " + t.name + " data length does not match its shape");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const json& v = data[std::size_t(r * cols + c)];
        if (!v.is_number()) throw ModelFormatError(Reason::parse, path + ": tensor " + t.name + " holds a non-number");
        t.data[c * rows + r] = v.get<double>();
      }
    }
  }
}

// Input width and hidden size from the LSTM input weights.
std::pair<int, int> lstm_dims(const json& tensors, const std::string& path) {
  const auto [hidden, input] = shape_of(tensors, "lstm.W_i", path);
  if (input != kTactileChannels) {
    throw ModelFormatError(Reason::shape, path + ": LSTM input width " + std::to_string(input) + ", expected " +
                                              std::to_string(kTactileChannels));
  }
  return {int(input), int(hidden)};
}

}  // namespace

void save_model(const DetectorModel& m, const std::string& path) {
  DetectorModel copy = m;
  write_json({{"format_version", kModelFormatVersion}, {"kind", "detect"}, {"tensors", tensors_to_json(copy.all_tensors())}},
             path);
}

void save_model(const PredictorModel& m, const std::string& path) {
  PredictorModel copy = m;
  write_json(
      {{"format_version", kModelFormatVersion}, {"kind", "predict"}, {"tensors", tensors_to_json(copy.all_tensors())}},
      path);
}

DetectorModel load_detector(const std::string& path) {
  const json tensors = read_tensors(path, ModelKind::detect);
  const auto [input, hidden] = lstm_dims(tensors, path);
  DetectorModel m;
  m.lstm = LstmParams::zeros(input, hidden);
  m.head_w = Vec::Zero(hidden);
  m.head_b = Vec::Zero(1);
  fill(m.all_tensors(), tensors, path);
  return m;
}

PredictorModel load_predictor(const std::string& path) {
  const json tensors = read_tensors(path, ModelKind::predict);
  const auto [input, hidden] = lstm_dims(tensors, path);
  const auto [action_hidden, action_in] = shape_of(tensors, "action.w", path);
  const auto [fusion_hidden, fusion_in] = shape_of(tensors, "fusion.w", path);
  if (action_in % kActionDim != 0 || action_in < 2 * kActionDim) {
    throw ModelFormatError(Reason::shape, path + ": action.w width must be a multiple of 6 covering at least 2 rows");
  }
  if (fusion_in != hidden + action_hidden) {
    throw ModelFormatError(Reason::shape, path + ": fusion.w width does not match LSTM plus action encoder");
  }
  PredictorModel m;
  m.lstm = LstmParams::zeros(input, hidden);
  m.action_w = Mat::Zero(action_hidden, action_in);
  m.action_b = Vec::Zero(action_hidden);
  m.fusion_w = Mat::Zero(fusion_hidden, fusion_in);
  m.fusion_b = Vec::Zero(fusion_hidden);
  m.head_w = Vec::Zero(fusion_hidden);
  m.head_b = Vec::Zero(1);
  fill(m.all_tensors(), tensors, path);
  return m;
}

}  // namespace slipctl
