#include "slipctl/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace slipctl {
namespace {

Mat glorot_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

}  // namespace

LstmParams LstmParams::zeros(int input_dim, int hidden_dim) {
  LstmParams p;
  for (Mat* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_g}) *w = Mat::Zero(hidden_dim, input_dim);
  for (Mat* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_g}) *u = Mat::Zero(hidden_dim, hidden_dim);
  for (Vec* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) *b = Vec::Zero(hidden_dim);
  return p;
}

LstmParams LstmParams::glorot(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  LstmParams p = zeros(input_dim, hidden_dim);
  for (Mat* w : {&p.W_i, &p.W_f, &p.W_o, &p.W_g}) *w = glorot_matrix(hidden_dim, input_dim, rng);
  for (Mat* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_g}) *u = glorot_matrix(hidden_dim, hidden_dim, rng);
  p.b_f.setOnes();
  return p;
}

std::vector<TensorView> LstmParams::tensors(const std::string& prefix) {
  return {view(prefix + "W_i", W_i), view(prefix + "W_f", W_f), view(prefix + "W_o", W_o),
          view(prefix + "W_g", W_g), view(prefix + "U_i", U_i), view(prefix + "U_f", U_f),
          view(prefix + "U_o", U_o), view(prefix + "U_g", U_g), view(prefix + "b_i", b_i),
          view(prefix + "b_f", b_f), view(prefix + "b_o", b_o), view(prefix + "b_g", b_g)};
}

Mat lstm_forward_batch(const LstmParams& p, std::span<const Mat> inputs, LstmCache* cache) {
  const Eigen::Index hidden = p.hidden_dim();
  if (inputs.empty()) throw std::invalid_argument("lstm_forward: empty sequence");
  const Eigen::Index batch = inputs.front().cols();
  Mat h = Mat::Zero(hidden, batch);
  Mat c = Mat::Zero(hidden, batch);
  if (cache) {
    *cache = LstmCache{};
    cache->h.push_back(h);
    cache->c.push_back(c);
  }
  for (const Mat& x : inputs) {
    if (x.rows() != p.input_dim() || x.cols() != batch) {
      throw std::invalid_argument("lstm_forward: input is " + std::to_string(x.rows()) + " wide, expected " +
                                  std::to_string(p.input_dim()));
    }
    Mat i = sigmoid((p.W_i * x + p.U_i * h).colwise() + p.b_i);
    Mat f = sigmoid((p.W_f * x + p.U_f * h).colwise() + p.b_f);
    Mat o = sigmoid((p.W_o * x + p.U_o * h).colwise() + p.b_o);
    Mat g = ((p.W_g * x + p.U_g * h).colwise() + p.b_g).array().tanh().matrix();
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * c.array().tanh()).matrix();
    if (cache) {
      cache->x.push_back(x);
      cache->i.push_back(std::move(i));
      cache->f.push_back(std::move(f));
      cache->o.push_back(std::move(o));
      cache->g.push_back(std::move(g));
      cache->c.push_back(c);
      cache->h.push_back(h);
    }
  }
  return h;
}

void lstm_backward_batch(const LstmParams& p, const LstmCache& cache, const Mat& dh_final, LstmParams& grad) {
  Mat dh = dh_final;
  Mat dc = Mat::Zero(dh.rows(), dh.cols());
  for (std::size_t step = cache.x.size(); step-- > 0;) {
    const Mat& i = cache.i[step];
    const Mat& f = cache.f[step];
    const Mat& o = cache.o[step];
    const Mat& g = cache.g[step];
    const Mat& c_prev = cache.c[step];
    const Mat& h_prev = cache.h[step];
    const Mat& x = cache.x[step];
    const Eigen::ArrayXXd tanh_c = cache.c[step + 1].array().tanh();

    const Eigen::ArrayXXd d_o = dh.array() * tanh_c;
    dc.array() += dh.array() * o.array() * (1.0 - tanh_c.square());

    const Mat da_i = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
    const Mat da_f = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
    const Mat da_o = (d_o * o.array() * (1.0 - o.array())).matrix();
    const Mat da_g = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();

    grad.W_i.noalias() += da_i * x.transpose();
    grad.W_f.noalias() += da_f * x.transpose();
    grad.W_o.noalias() += da_o * x.transpose();
    grad.W_g.noalias() += da_g * x.transpose();
    grad.U_i.noalias() += da_i * h_prev.transpose();
    grad.U_f.noalias() += da_f * h_prev.transpose();
    grad.U_o.noalias() += da_o * h_prev.transpose();
    grad.U_g.noalias() += da_g * h_prev.transpose();
    grad.b_i += da_i.rowwise().sum();
    grad.b_f += da_f.rowwise().sum();
    grad.b_o += da_o.rowwise().sum();
    grad.b_g += da_g.rowwise().sum();

    dh.noalias() = p.U_i.transpose() * da_i;
    dh.noalias() += p.U_f.transpose() * da_f;
    dh.noalias() += p.U_o.transpose() * da_o;
    dh.noalias() += p.U_g.transpose() * da_g;
    dc = (dc.array() * f.array()).matrix();
  }
}

LstmForward lstm_forward(const LstmParams& p, const Mat& sequence) {
  if (sequence.cols() != p.input_dim()) {
    throw std::invalid_argument("lstm_forward: sequence has " + std::to_string(sequence.cols()) +
                                " features, parameters expect " + std::to_string(p.input_dim()));
  }
  std::vector<Mat> steps;
  steps.reserve(std::size_t(sequence.rows()));
  for (Eigen::Index t = 0; t < sequence.rows(); ++t) steps.push_back(sequence.row(t).transpose());
  LstmForward out;
  out.h = lstm_forward_batch(p, steps, &out.cache).col(0);
  return out;
}

}  // namespace slipctl
