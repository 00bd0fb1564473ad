#include "slipctl/slip_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slipctl {
namespace {

Mat glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }

// Writes (row - mean) / scale into column b of `out`.
template <class Row, class Out>
void normalize_into(const InputScaler& s, const Row& row, Out&& out) {
  out = ((row.transpose() - s.mean).array() / s.scale.array()).matrix();
}

void init_batch(Batch& batch, int context, Eigen::Index size, int action_rows) {
  batch.tactile.assign(std::size_t(context), Mat(kTactileChannels, size));
  batch.actions.resize(action_rows, action_rows > 0 ? size : 0);
  batch.labels.resize(size);
  batch.weights.setOnes(size);
}

// Rows before the start of `frames` repeat row 0.
void fill_tactile(Batch& batch, Eigen::Index b, const InputScaler& s, const Mat& frames, Eigen::Index first) {
  for (std::size_t t = 0; t < batch.tactile.size(); ++t) {
    const Eigen::Index row = std::max<Eigen::Index>(0, first + Eigen::Index(t));
    normalize_into(s, frames.row(row), batch.tactile[t].col(b));
  }
}

void fill_actions(Batch& batch, Eigen::Index b, const InputScaler& s, const Mat& actions, Eigen::Index first,
                  int horizon) {
  for (int j = 0; j < horizon; ++j) {
    normalize_into(s, actions.row(first + j), batch.actions.block(j * kActionDim, b, kActionDim, 1));
  }
}

// Batch drawn from dataset windows; the detector ignores the action block.
template <class Model>
Batch dataset_batch(const Model& m, const WindowDataset& data, std::span<const std::size_t> idx, ModelKind kind,
                    double pos_weight) {
  constexpr bool with_actions = std::is_same_v<Model, PredictorModel>;
  Batch batch;
  init_batch(batch, data.context, Eigen::Index(idx.size()), with_actions ? (data.horizon + 1) * kActionDim : 0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& ref = data.windows[idx[b]];
    const auto col = Eigen::Index(b);
    fill_tactile(batch, col, m.tactile_scaler, data.tactile[std::size_t(ref.trial)], ref.end - data.context + 1);
    if constexpr (with_actions) {
      fill_actions(batch, col, m.action_scaler, data.actions[std::size_t(ref.trial)], ref.end, data.horizon + 1);
    }
    const bool y = data.label(idx[b], kind);
    batch.labels(col) = y ? 1.0 : 0.0;
    batch.weights(col) = y ? pos_weight : 1.0;
  }
  return batch;
}

template <class Model>
constexpr ModelKind kind_of() {
  return std::is_same_v<Model, DetectorModel> ? ModelKind::detect : ModelKind::predict;
}

template <class Model>
Model gradient_impl(const Model& m, const Batch& batch) {
  typename Model::Cache cache;
  const Vec z = forward(m, batch, &cache);
  const auto loss = weighted_bce(z, batch.labels, batch.weights);
  Model grad = Model::zeros_like(m);
  backward(m, batch, cache, loss.dlogits, grad);
  return grad;
}

template <class Model>
double grad_check_impl(const Model& m, const Batch& batch, const GradientFn<Model>& analytic_fn) {
  Model analytic = analytic_fn ? analytic_fn(m, batch) : gradient_impl(m, batch);
  Model work = m;
  auto params = work.trainable();
  auto grads = analytic.trainable();
  const double h = 1e-5;
  auto loss_at = [&] { return weighted_bce(forward(work, batch, nullptr), batch.labels, batch.weights).loss; };

  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].flat();
    const auto g = grads[t].flat();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double saved = p(k);
      p(k) = saved + h;
      const double up = loss_at();
      p(k) = saved - h;
      const double down = loss_at();
      p(k) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(g(k)), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(g(k) - numeric) / denom);
    }
  }
  return worst;
}

struct Adam {
  std::vector<Vec> m, v;
  long step = 0;

  void update(std::vector<TensorView>& params, const std::vector<TensorView>& grads, const TrainConfig& cfg) {
    if (m.empty()) {
      for (const auto& p : params) {
        m.push_back(Vec::Zero(p.size()));
        v.push_back(Vec::Zero(p.size()));
      }
    }
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(step));
    for (std::size_t t = 0; t < params.size(); ++t) {
      const auto g = grads[t].flat();
      if (cfg.weight_decay > 0.0) params[t].flat() *= 1.0 - cfg.learning_rate * cfg.weight_decay;
      m[t] = cfg.beta1 * m[t] + (1.0 - cfg.beta1) * g;
      v[t] = cfg.beta2 * v[t] + (1.0 - cfg.beta2) * g.cwiseAbs2();
      params[t].flat().array() -=
          cfg.learning_rate * (m[t].array() / c1) / ((v[t].array() / c2).sqrt() + cfg.adam_eps);
    }
  }
};

InputScaler fit_tactile_scaler(const WindowDataset& data) {
  Eigen::Index rows = 0;
  for (const auto& t : data.tactile) rows += t.rows();
  Mat all(rows, kTactileChannels);
  Eigen::Index at = 0;
  for (const auto& t : data.tactile) {
    all.middleRows(at, t.rows()) = t;
    at += t.rows();
  }
  return InputScaler::fit(all);
}

InputScaler fit_action_scaler(const WindowDataset& data) {
  Eigen::Index rows = 0;
  for (const auto& a : data.actions) rows += a.rows();
  Mat all(rows, kActionDim);
  Eigen::Index at = 0;
  for (const auto& a : data.actions) {
    all.middleRows(at, a.rows()) = a;
    at += a.rows();
  }
  return InputScaler::fit(all);
}

template <class Model>
ClassificationReport evaluate_impl(const Model& m, const WindowDataset& data);

template <class Model>
TrainResult<Model> train_impl(Model model, const WindowDataset& data, const WindowDataset* validation,
                              const TrainConfig& cfg) {
  constexpr ModelKind kind = kind_of<Model>();
  const long pos = data.count_positive(kind);
  const long neg = long(data.size()) - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("training set has a single class (" + std::to_string(pos) + " slip, " +
                                std::to_string(neg) + " non-slip windows)");
  }
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw std::invalid_argument("batch_size and epochs must be positive");

  TrainResult<Model> out;
  out.pos_weight = cfg.pos_weight > 0.0 ? cfg.pos_weight : std::sqrt(double(neg) / double(pos));

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x5eed));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::normal_distribution<double> noise(0.0, 1.0);
  Adam adam;
  auto params = model.trainable();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::vector<double> probs;
    std::vector<char> labels;
    probs.reserve(order.size());
    labels.reserve(order.size());

    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t n = std::min(order.size() - start, std::size_t(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, n);
      Batch batch = dataset_batch(model, data, idx, kind, out.pos_weight);
      if (cfg.input_noise > 0.0) {
        for (auto& frame : batch.tactile) frame += cfg.input_noise * Mat::NullaryExpr(frame.rows(), frame.cols(), [&] { return noise(rng); });
      }

      typename Model::Cache cache;
      const Vec z = forward(model, batch, &cache);
      const auto loss = weighted_bce(z, batch.labels, batch.weights);
      Model grad = Model::zeros_like(model);
      backward(model, batch, cache, loss.dlogits, grad);
      auto grads = grad.trainable();

      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) sq += g.flat().squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          for (auto& g : grads) g.flat() *= cfg.grad_clip / norm;
        }
      }
      adam.update(params, grads, cfg);

      loss_sum += loss.loss * double(n);
      for (Eigen::Index b = 0; b < z.size(); ++b) {
        probs.push_back(sigmoid(clamp_logit(z(b))));
        labels.push_back(batch.labels(b) > 0.5);
      }
    }
    const auto report = score(probs, labels);
    EpochStats stats{epoch, loss_sum / double(std::max<std::size_t>(order.size(), 1)), report.accuracy, report.f1};
    if (validation) {
      const auto val = evaluate_impl(model, *validation);
      stats.val_accuracy = val.accuracy;
      stats.val_f1 = val.f1;
      if (out.best_epoch == 0 || val.f1 > out.history[std::size_t(out.best_epoch - 1)].val_f1) {
        out.best_epoch = epoch;
        out.model = model;
      }
    }
    out.history.push_back(stats);
  }
  if (!validation || out.best_epoch == 0) {
    out.model = std::move(model);
    out.best_epoch = cfg.epochs;
  }
  return out;
}

template <class Model>
std::vector<double> predict_all_impl(const Model& m, const WindowDataset& data) {
  std::vector<double> probs;
  probs.reserve(data.size());
  std::vector<std::size_t> idx;
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    idx.clear();
    for (std::size_t w = start; w < std::min(data.size(), start + chunk); ++w) idx.push_back(w);
    const Batch batch = dataset_batch(m, data, idx, kind_of<Model>(), 1.0);
    const Vec z = forward(m, batch, nullptr);
    for (Eigen::Index b = 0; b < z.size(); ++b) probs.push_back(sigmoid(clamp_logit(z(b))));
  }
  return probs;
}

template <class Model>
ClassificationReport evaluate_impl(const Model& m, const WindowDataset& data) {
  const auto probs = predict_all_impl(m, data);
  std::vector<char> labels(data.size());
  for (std::size_t w = 0; w < data.size(); ++w) labels[w] = data.label(w, kind_of<Model>());
  return score(probs, labels);
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::detect ? "detect" : "predict"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "detect") return ModelKind::detect;
  if (text == "predict") return ModelKind::predict;
  throw std::invalid_argument("unknown model kind '" + text + "' (expected detect or predict)");
}

InputScaler InputScaler::fit(const Mat& samples) {
  InputScaler s = identity(int(samples.cols()));
  if (samples.rows() < 2) return s;
  s.mean = samples.colwise().mean().transpose();
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const double sd = std::sqrt((samples.col(c).array() - s.mean(c)).square().sum() / double(samples.rows() - 1));
    s.scale(c) = sd > 1e-9 ? sd : 1.0;
  }
  return s;
}

Mat InputScaler::apply_columns(const Mat& rows) const {
  return ((rows.transpose().colwise() - mean).array().colwise() / scale.array()).matrix();
}

WindowDataset WindowDataset::build(const std::vector<TrialLog>& trials, int context, int horizon, KalmanNoise noise,
                                   bool pad_start) {
  if (context < 1 || horizon < 1) throw std::invalid_argument("context and horizon must be at least 1");
  WindowDataset ds;
  ds.context = context;
  ds.horizon = horizon;
  ds.pad_start = pad_start;
  for (const auto& trial : trials) {
    const long len = long(trial.records.size());
    const int id = int(ds.tactile.size());
    ds.tactile.push_back(filtered_tactile(trial, noise));
    ds.actions.push_back(action_rows(trial));
    std::vector<char> slip(trial.records.size());
    for (std::size_t k = 0; k < slip.size(); ++k) slip[k] = trial.records[k].slip;
    ds.slip.push_back(std::move(slip));
    for (long k = pad_start ? 0 : context - 1; k + horizon < len; ++k) ds.windows.push_back({id, int(k)});
  }
  return ds;
}

WindowDataset WindowDataset::from_samples(std::span<const WindowSample> samples) {
  WindowDataset ds;
  if (samples.empty()) return ds;
  ds.context = int(samples.front().tactile.frames.rows());
  ds.horizon = int(samples.front().actions.actions.rows()) - 1;
  const int len = ds.context + ds.horizon;
  for (const auto& s : samples) {
    if (s.tactile.frames.rows() != ds.context || s.actions.actions.rows() != ds.horizon + 1) {
      throw std::invalid_argument("from_samples: window sizes differ");
    }
    Mat tactile = Mat::Zero(len, kTactileChannels);
    tactile.topRows(ds.context) = s.tactile.frames;
    Mat actions = Mat::Zero(len, kActionDim);
    actions.bottomRows(ds.horizon + 1) = s.actions.actions;
    std::vector<char> slip(std::size_t(len), 0);
    slip[std::size_t(ds.context - 1)] = s.label_now;
    slip[std::size_t(len - 1)] = s.label_future;
    ds.windows.push_back({int(ds.tactile.size()), ds.context - 1});
    ds.tactile.push_back(std::move(tactile));
    ds.actions.push_back(std::move(actions));
    ds.slip.push_back(std::move(slip));
  }
  return ds;
}

bool WindowDataset::label(std::size_t w, ModelKind kind) const {
  const auto& ref = windows[w];
  const int tick = kind == ModelKind::detect ? ref.end : ref.end + horizon;
  return slip[std::size_t(ref.trial)][std::size_t(tick)] != 0;
}

Mat WindowDataset::tactile_window(std::size_t w) const {
  const auto& ref = windows[w];
  const Mat& src = tactile[std::size_t(ref.trial)];
  Mat out(context, src.cols());
  for (int r = 0; r < context; ++r) out.row(r) = src.row(std::max(0, ref.end - context + 1 + r));
  return out;
}

Mat WindowDataset::action_window(std::size_t w) const {
  const auto& ref = windows[w];
  return actions[std::size_t(ref.trial)].middleRows(ref.end, horizon + 1);
}

ClassifierSplit make_classifier_split(const std::vector<TrialLog>& trials, double train_fraction, std::uint64_t seed,
                                      int context, int horizon) {
  auto padded = WindowDataset::build(trials, context, horizon, {}, true);
  auto strict = WindowDataset::build(trials, context, horizon, {}, false);
  ClassifierSplit out;
  out.train = std::move(padded.split_by_trial(train_fraction, seed).first);
  out.test = std::move(strict.split_by_trial(train_fraction, seed).second);
  return out;
}

std::pair<WindowDataset, WindowDataset> WindowDataset::split_by_trial(double train_fraction,
                                                                      std::uint64_t seed) const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = tactile.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_train = std::size_t(std::lround(train_fraction * double(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<int> side(n), new_id(n);
  WindowDataset parts[2];
  for (auto& p : parts) {
    p.context = context;
    p.horizon = horizon;
    p.pad_start = pad_start;
  }
  for (std::size_t r = 0; r < n; ++r) {
    const int trial = order[r];
    const int s = r < n_train ? 0 : 1;
    side[std::size_t(trial)] = s;
    new_id[std::size_t(trial)] = int(parts[s].tactile.size());
    parts[s].tactile.push_back(tactile[std::size_t(trial)]);
    parts[s].actions.push_back(actions[std::size_t(trial)]);
    parts[s].slip.push_back(slip[std::size_t(trial)]);
  }
  for (const auto& ref : windows) {
    parts[side[std::size_t(ref.trial)]].windows.push_back({new_id[std::size_t(ref.trial)], ref.end});
  }
  return {std::move(parts[0]), std::move(parts[1])};
}

long WindowDataset::count_positive(ModelKind kind) const {
  long n = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) n += label(w, kind);
  return n;
}

DetectorModel DetectorModel::init(int hidden, std::mt19937_64& rng) {
  DetectorModel m;
  m.lstm = LstmParams::glorot(kTactileChannels, hidden, rng);
  m.head_w = Vec::Zero(hidden);
  m.head_b = Vec::Zero(1);
  return m;
}

DetectorModel DetectorModel::zeros_like(const DetectorModel& m) {
  DetectorModel z = m;
  for (auto& t : z.trainable()) t.flat().setZero();
  return z;
}

std::vector<TensorView> DetectorModel::trainable() {
  auto out = lstm.tensors("lstm.");
  out.push_back(view("head.w", head_w));
  out.push_back(view("head.b", head_b));
  return out;
}

std::vector<TensorView> DetectorModel::all_tensors() {
  auto out = trainable();
  out.push_back(view("tactile_scaler.mean", tactile_scaler.mean));
  out.push_back(view("tactile_scaler.scale", tactile_scaler.scale));
  return out;
}

PredictorModel PredictorModel::init(int hidden, int action_hidden, int fusion_hidden, int horizon,
                                    std::mt19937_64& rng) {
  PredictorModel m;
  m.lstm = LstmParams::glorot(kTactileChannels, hidden, rng);
  m.action_w = glorot(action_hidden, (horizon + 1) * kActionDim, rng);
  m.action_b = Vec::Zero(action_hidden);
  m.fusion_w = glorot(fusion_hidden, hidden + action_hidden, rng);
  m.fusion_b = Vec::Zero(fusion_hidden);
  m.head_w = Vec::Zero(fusion_hidden);
  m.head_b = Vec::Zero(1);
  return m;
}

PredictorModel PredictorModel::zeros_like(const PredictorModel& m) {
  PredictorModel z = m;
  for (auto& t : z.trainable()) t.flat().setZero();
  return z;
}

std::vector<TensorView> PredictorModel::trainable() {
  auto out = lstm.tensors("lstm.");
  out.push_back(view("action.w", action_w));
  out.push_back(view("action.b", action_b));
  out.push_back(view("fusion.w", fusion_w));
  out.push_back(view("fusion.b", fusion_b));
  out.push_back(view("head.w", head_w));
  out.push_back(view("head.b", head_b));
  return out;
}

std::vector<TensorView> PredictorModel::all_tensors() {
  auto out = trainable();
  out.push_back(view("tactile_scaler.mean", tactile_scaler.mean));
  out.push_back(view("tactile_scaler.scale", tactile_scaler.scale));
  out.push_back(view("action_scaler.mean", action_scaler.mean));
  out.push_back(view("action_scaler.scale", action_scaler.scale));
  return out;
}

Vec PredictorModel::encode(const TactileWindow& window) const {
  Batch batch;
  init_batch(batch, int(window.frames.rows()), 1, 0);
  fill_tactile(batch, 0, tactile_scaler, window.frames, 0);
  return lstm_forward_batch(lstm, batch.tactile).col(0);
}

double PredictorModel::predict_encoded(const Vec& encoding, const Mat& actions) const {
  const int rows = horizon() + 1;
  if (actions.rows() != rows || actions.cols() != kActionDim) {
    throw std::invalid_argument("predict_encoded: action block must be " + std::to_string(rows) + " x 6");
  }
  Vec a(rows * kActionDim);
  for (int j = 0; j < rows; ++j) normalize_into(action_scaler, actions.row(j), a.segment(j * kActionDim, kActionDim));
  const Vec e = (action_w * a + action_b).array().tanh().matrix();
  const Eigen::Index H = encoding.size();
  const Vec u = (fusion_w.leftCols(H) * encoding + fusion_w.rightCols(e.size()) * e + fusion_b).array().tanh().matrix();
  return sigmoid(clamp_logit(head_w.dot(u) + head_b(0)));
}

Vec forward(const DetectorModel& m, const Batch& batch, DetectorModel::Cache* cache) {
  Mat h = lstm_forward_batch(m.lstm, batch.tactile, cache ? &cache->lstm : nullptr);
  Vec z = (h.transpose() * m.head_w).array() + m.head_b(0);
  if (cache) cache->h = std::move(h);
  return z;
}

void backward(const DetectorModel& m, const Batch&, const DetectorModel::Cache& cache, const Vec& dlogits,
              DetectorModel& grad) {
  grad.head_w.noalias() += cache.h * dlogits;
  grad.head_b(0) += dlogits.sum();
  const Mat dh = m.head_w * dlogits.transpose();
  lstm_backward_batch(m.lstm, cache.lstm, dh, grad.lstm);
}

Vec forward(const PredictorModel& m, const Batch& batch, PredictorModel::Cache* cache) {
  if (batch.actions.rows() != m.action_w.cols()) {
    throw std::invalid_argument("predictor batch has " + std::to_string(batch.actions.rows()) +
                                " action features, model expects " + std::to_string(m.action_w.cols()));
  }
  Mat h = lstm_forward_batch(m.lstm, batch.tactile, cache ? &cache->lstm : nullptr);
  Mat e = ((m.action_w * batch.actions).colwise() + m.action_b).array().tanh().matrix();
  Mat he(h.rows() + e.rows(), h.cols());
  he << h, e;
  Mat u = ((m.fusion_w * he).colwise() + m.fusion_b).array().tanh().matrix();
  Vec z = (u.transpose() * m.head_w).array() + m.head_b(0);
  if (cache) {
    cache->h = std::move(h);
    cache->a = batch.actions;
    cache->e = std::move(e);
    cache->he = std::move(he);
    cache->u = std::move(u);
  }
  return z;
}

void backward(const PredictorModel& m, const Batch&, const PredictorModel::Cache& cache, const Vec& dlogits,
              PredictorModel& grad) {
  grad.head_w.noalias() += cache.u * dlogits;
  grad.head_b(0) += dlogits.sum();
  const Mat du_pre = ((m.head_w * dlogits.transpose()).array() * (1.0 - cache.u.array().square())).matrix();
  grad.fusion_w.noalias() += du_pre * cache.he.transpose();
  grad.fusion_b += du_pre.rowwise().sum();
  const Mat dhe = m.fusion_w.transpose() * du_pre;
  const Eigen::Index H = cache.h.rows();
  const Mat de_pre = (dhe.bottomRows(dhe.rows() - H).array() * (1.0 - cache.e.array().square())).matrix();
  grad.action_w.noalias() += de_pre * cache.a.transpose();
  grad.action_b += de_pre.rowwise().sum();
  lstm_backward_batch(m.lstm, cache.lstm, dhe.topRows(H), grad.lstm);
}

LossResult weighted_bce(const Vec& logits, const Vec& labels, const Vec& weights) {
  LossResult out;
  const Eigen::Index n = logits.size();
  out.dlogits = Vec::Zero(n);
  if (n == 0) return out;
  for (Eigen::Index b = 0; b < n; ++b) {
    const double z = clamp_logit(logits(b));
    const double y = labels(b);
    // log(1 + e^-|z|) keeps both branches finite for large |z|.
    const double softplus_neg = std::log1p(std::exp(-std::abs(z)));
    const double log_p = std::min(z, 0.0) - softplus_neg;
    const double log_1mp = std::min(-z, 0.0) - softplus_neg;
    out.loss -= weights(b) * (y * log_p + (1.0 - y) * log_1mp);
    if (std::abs(logits(b)) < kLogitClamp) out.dlogits(b) = weights(b) * (sigmoid(z) - y) / double(n);
  }
  out.loss /= double(n);
  return out;
}

double detector_forward(const DetectorModel& m, const TactileWindow& window) {
  Batch batch;
  init_batch(batch, int(window.frames.rows()), 1, 0);
  fill_tactile(batch, 0, m.tactile_scaler, window.frames, 0);
  return sigmoid(clamp_logit(forward(m, batch, nullptr)(0)));
}

double predictor_forward(const PredictorModel& m, const TactileWindow& window, const ActionWindow& actions) {
  return m.predict_encoded(m.encode(window), actions.actions);
}

ClassificationReport score(std::span<const double> probabilities, std::span<const char> labels) {
  if (probabilities.size() != labels.size()) throw std::invalid_argument("score: size mismatch");
  ClassificationReport r;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const bool p = probabilities[k] >= 0.5;
    const bool y = labels[k] != 0;
    r.tp += p && y;
    r.fp += p && !y;
    r.tn += !p && !y;
    r.fn += !p && y;
  }
  const double n = double(labels.size());
  r.accuracy = n > 0 ? double(r.tp + r.tn) / n : 0.0;
  r.precision = r.tp + r.fp > 0 ? double(r.tp) / double(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? double(r.tp) / double(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

// Splits off the validation trials when requested; `fit` is the training part.
struct FitSplit {
  WindowDataset fit, validation;
  bool has_validation = false;
};

FitSplit fit_split(const WindowDataset& data, const TrainConfig& config) {
  FitSplit s;
  if (config.validation_fraction > 0.0 && data.tactile.size() >= 2) {
    auto [fit, val] = data.split_by_trial(1.0 - config.validation_fraction, derive_seed(config.seed, 0xa11d));
    s.fit = std::move(fit);
    s.validation = std::move(val);
    s.has_validation = true;
  } else {
    s.fit = data;
  }
  return s;
}

}  // namespace

TrainResult<DetectorModel> train_detector(const WindowDataset& data, const TrainConfig& config) {
  const FitSplit split = fit_split(data, config);
  std::mt19937_64 rng(config.seed);
  DetectorModel m = DetectorModel::init(config.hidden, rng);
  m.tactile_scaler = fit_tactile_scaler(split.fit);
  return train_impl(std::move(m), split.fit, split.has_validation ? &split.validation : nullptr, config);
}

TrainResult<PredictorModel> train_predictor(const WindowDataset& data, const TrainConfig& config) {
  const FitSplit split = fit_split(data, config);
  std::mt19937_64 rng(config.seed);
  PredictorModel m =
      PredictorModel::init(config.hidden, config.action_hidden, config.fusion_hidden, data.horizon, rng);
  m.tactile_scaler = fit_tactile_scaler(split.fit);
  m.action_scaler = fit_action_scaler(split.fit);
  return train_impl(std::move(m), split.fit, split.has_validation ? &split.validation : nullptr, config);
}

std::vector<double> predict_all(const DetectorModel& m, const WindowDataset& data) {
  return predict_all_impl(m, data);
}
std::vector<double> predict_all(const PredictorModel& m, const WindowDataset& data) {
  return predict_all_impl(m, data);
}

ClassificationReport evaluate(const DetectorModel& m, const WindowDataset& data) { return evaluate_impl(m, data); }
ClassificationReport evaluate(const PredictorModel& m, const WindowDataset& data) { return evaluate_impl(m, data); }

Batch single_sample_batch(const DetectorModel& m, const WindowSample& sample) {
  Batch batch;
  init_batch(batch, int(sample.tactile.frames.rows()), 1, 0);
  fill_tactile(batch, 0, m.tactile_scaler, sample.tactile.frames, 0);
  batch.labels(0) = sample.label_now ? 1.0 : 0.0;
  return batch;
}

Batch single_sample_batch(const PredictorModel& m, const WindowSample& sample) {
  Batch batch;
  init_batch(batch, int(sample.tactile.frames.rows()), 1, int(sample.actions.actions.rows()) * kActionDim);
  fill_tactile(batch, 0, m.tactile_scaler, sample.tactile.frames, 0);
  fill_actions(batch, 0, m.action_scaler, sample.actions.actions, 0, int(sample.actions.actions.rows()));
  batch.labels(0) = sample.label_future ? 1.0 : 0.0;
  return batch;
}

DetectorModel loss_gradient(const DetectorModel& m, const Batch& batch) { return gradient_impl(m, batch); }
PredictorModel loss_gradient(const PredictorModel& m, const Batch& batch) { return gradient_impl(m, batch); }

double grad_check(const DetectorModel& m, const WindowSample& sample, GradientFn<DetectorModel> analytic) {
  return grad_check_impl(m, single_sample_batch(m, sample), analytic);
}

double grad_check(const PredictorModel& m, const WindowSample& sample, GradientFn<PredictorModel> analytic) {
  return grad_check_impl(m, single_sample_batch(m, sample), analytic);
}

}  // namespace slipctl
