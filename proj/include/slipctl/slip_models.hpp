#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slipctl/grasp_sim.hpp"
#include "slipctl/lstm.hpp"
#include "slipctl/signal_filter.hpp"

namespace slipctl {

enum class ModelKind { detect, predict };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Per-feature affine normalization, (x - mean) / scale.
struct InputScaler {
  Vec mean;
  Vec scale;

  static InputScaler identity(int dim) { return {Vec::Zero(dim), Vec::Ones(dim)}; }
  /// Fit on the rows of `samples`; features with near-zero spread keep scale 1.
  static InputScaler fit(const Mat& samples);
  /// Normalizes a row-per-sample matrix and returns it transposed (dim x n).
  Mat apply_columns(const Mat& rows) const;
};

/// Windowed training data kept as per-trial arrays to avoid copying overlapping windows.
struct WindowDataset {
  struct Ref {
    int trial = 0;
    int end = 0;  // last tactile tick of the window
  };

  /// Windows ending before tick C-1 repeat the first frame, as the controllers do at start-up.
  bool pad_start = true;

  int context = kDefaultContext;
  int horizon = kDefaultHorizon;
  std::vector<Mat> tactile;  // ticks x 48, Kalman-filtered
  std::vector<Mat> actions;  // ticks x 6
  std::vector<std::vector<char>> slip;
  std::vector<Ref> windows;

  static WindowDataset build(const std::vector<TrialLog>& trials, int context = kDefaultContext,
                             int horizon = kDefaultHorizon, KalmanNoise noise = {}, bool pad_start = true);
  static WindowDataset from_samples(std::span<const WindowSample> samples);

  std::size_t size() const { return windows.size(); }
  bool label(std::size_t w, ModelKind kind) const;
  Mat tactile_window(std::size_t w) const;
  Mat action_window(std::size_t w) const;  // rows end..end+T

  /// Trial-level split: a shuffled `train_fraction` of trials go to the first set.
  std::pair<WindowDataset, WindowDataset> split_by_trial(double train_fraction, std::uint64_t seed) const;
  long count_positive(ModelKind kind) const;
};

/// Trial-level train/test split. Training windows are padded at the start; test windows
/// are only those with a full context and a full horizon ahead.
struct ClassifierSplit {
  WindowDataset train;
  WindowDataset test;
};
ClassifierSplit make_classifier_split(const std::vector<TrialLog>& trials, double train_fraction, std::uint64_t seed,
                                      int context = kDefaultContext, int horizon = kDefaultHorizon);

/// Normalized mini-batch. tactile[t] is 48 x B; actions is ((T+1)*6) x B (empty for detection).
struct Batch {
  std::vector<Mat> tactile;
  Mat actions;
  Vec labels;
  Vec weights;
  Eigen::Index size() const { return labels.size(); }
};

struct DetectorModel {
  LstmParams lstm;
  Vec head_w;
  Vec head_b;  // size 1
  InputScaler tactile_scaler = InputScaler::identity(kTactileChannels);

  struct Cache {
    LstmCache lstm;
    Mat h;
  };

  static DetectorModel init(int hidden, std::mt19937_64& rng);
  static DetectorModel zeros_like(const DetectorModel& m);
  int hidden_dim() const { return lstm.hidden_dim(); }

  std::vector<TensorView> trainable();
  std::vector<TensorView> all_tensors();
};

struct PredictorModel {
  LstmParams lstm;
  Mat action_w;  // Ha x ((T+1)*6)
  Vec action_b;
  Mat fusion_w;  // Hf x (H + Ha)
  Vec fusion_b;
  Vec head_w;
  Vec head_b;  // size 1
  InputScaler tactile_scaler = InputScaler::identity(kTactileChannels);
  InputScaler action_scaler = InputScaler::identity(kActionDim);

  struct Cache {
    LstmCache lstm;
    Mat h, a, e, he, u;
  };

  static PredictorModel init(int hidden, int action_hidden, int fusion_hidden, int horizon, std::mt19937_64& rng);
  static PredictorModel zeros_like(const PredictorModel& m);
  int horizon() const { return int(action_w.cols()) / kActionDim - 1; }

  std::vector<TensorView> trainable();
  std::vector<TensorView> all_tensors();

  /// Final LSTM state for a tactile window; constant within a control tick.
  Vec encode(const TactileWindow& window) const;
  /// Slip probability from a cached encoding and a raw (T+1) x 6 action block.
  double predict_encoded(const Vec& encoding, const Mat& actions) const;
};

// Batched logits and exact gradients.
Vec forward(const DetectorModel& m, const Batch& batch, DetectorModel::Cache* cache);
Vec forward(const PredictorModel& m, const Batch& batch, PredictorModel::Cache* cache);
void backward(const DetectorModel& m, const Batch& batch, const DetectorModel::Cache& cache, const Vec& dlogits,
              DetectorModel& grad);
void backward(const PredictorModel& m, const Batch& batch, const PredictorModel::Cache& cache, const Vec& dlogits,
              PredictorModel& grad);

inline constexpr double kLogitClamp = 30.0;

struct LossResult {
  double loss = 0.0;
  Vec dlogits;
};

/// Mean of w_b * BCE(sigmoid(z_b), y_b) with logits clamped to +-30.
LossResult weighted_bce(const Vec& logits, const Vec& labels, const Vec& weights);

double detector_forward(const DetectorModel& m, const TactileWindow& window);
double predictor_forward(const PredictorModel& m, const TactileWindow& window, const ActionWindow& actions);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 8;
  double pos_weight = 1.0;  // <= 0 selects sqrt(n_neg / n_pos)
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  int hidden = 64;
  int action_hidden = 32;
  int fusion_hidden = 64;
  double grad_clip = 5.0;  // global-norm clip, <= 0 disables
  double weight_decay = 0.0;  // decoupled, per unit learning rate
  double input_noise = 0.0;   // std of Gaussian noise added to normalized tactile inputs
  double validation_fraction = 0.15;  // trials held out to pick the best epoch by F1, 0 keeps the last
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
};

struct ClassificationReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Scores probabilities against labels at threshold 0.5; F1 is for the slip class.
ClassificationReport score(std::span<const double> probabilities, std::span<const char> labels);

template <class Model>
struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  double pos_weight = 1.0;
  int best_epoch = 0;
};

/// Throws std::invalid_argument when the training set holds a single class.
TrainResult<DetectorModel> train_detector(const WindowDataset& data, const TrainConfig& config);
TrainResult<PredictorModel> train_predictor(const WindowDataset& data, const TrainConfig& config);

/// Runs the classifier on every window of the set.
std::vector<double> predict_all(const DetectorModel& m, const WindowDataset& data);
std::vector<double> predict_all(const PredictorModel& m, const WindowDataset& data);

ClassificationReport evaluate(const DetectorModel& m, const WindowDataset& data);
ClassificationReport evaluate(const PredictorModel& m, const WindowDataset& data);

/// Batch of one for `sample` with unit weight (label per model kind).
Batch single_sample_batch(const DetectorModel& m, const WindowSample& sample);
Batch single_sample_batch(const PredictorModel& m, const WindowSample& sample);

template <class Model>
using GradientFn = std::function<Model(const Model&, const Batch&)>;

/// Exact gradient of the weighted BCE loss on a batch.
DetectorModel loss_gradient(const DetectorModel& m, const Batch& batch);
PredictorModel loss_gradient(const PredictorModel& m, const Batch& batch);

/// Max relative error |a - n| / max(|a|, |n|, 1e-6) between the analytic gradient
/// and central differences (step 1e-5) over every trainable parameter.
double grad_check(const DetectorModel& m, const WindowSample& sample, GradientFn<DetectorModel> analytic = {});
double grad_check(const PredictorModel& m, const WindowSample& sample, GradientFn<PredictorModel> analytic = {});

// Model files: {"format_version":1, "kind":..., "tensors":{name:{"shape":[...],"data":[row-major]}}}.

inline constexpr int kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  enum class Reason { io, parse, version, kind, missing_tensor, shape };
  ModelFormatError(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

void save_model(const DetectorModel& m, const std::string& path);
void save_model(const PredictorModel& m, const std::string& path);
DetectorModel load_detector(const std::string& path);
PredictorModel load_predictor(const std::string& path);

}  // namespace slipctl
