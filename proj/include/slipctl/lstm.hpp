#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "slipctl/types.hpp"

namespace slipctl {

/// Named view of one parameter tensor; storage is Eigen column-major.
struct TensorView {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Vec> flat() const { return {data, size()}; }
};

inline TensorView view(std::string name, Mat& m) { return {std::move(name), m.data(), m.rows(), m.cols()}; }
inline TensorView view(std::string name, Vec& v) { return {std::move(name), v.data(), v.size(), 1}; }

/// Single-layer LSTM cell parameters, one block per gate (input, forget, output, candidate).
struct LstmParams {
  Mat W_i, W_f, W_o, W_g;  // H x D
  Mat U_i, U_f, U_o, U_g;  // H x H
  Vec b_i, b_f, b_o, b_g;  // H

  int input_dim() const { return int(W_i.cols()); }
  int hidden_dim() const { return int(W_i.rows()); }

  static LstmParams zeros(int input_dim, int hidden_dim);
  /// Uniform Glorot initialization; forget-gate bias starts at 1.
  static LstmParams glorot(int input_dim, int hidden_dim, std::mt19937_64& rng);

  std::vector<TensorView> tensors(const std::string& prefix);
};

/// Activations kept for backpropagation through time; every matrix is H x B
/// (x is D x B). h and c hold C+1 entries with the zero initial state first.
struct LstmCache {
  std::vector<Mat> x, i, f, o, g, c, h;
};

/// Batched forward pass over C time steps, each input D x B. Returns the final hidden state (H x B).
Mat lstm_forward_batch(const LstmParams& p, std::span<const Mat> inputs, LstmCache* cache = nullptr);

/// Accumulates dL/dparams into `grad` given dL/dh_final (H x B).
void lstm_backward_batch(const LstmParams& p, const LstmCache& cache, const Mat& dh_final, LstmParams& grad);

struct LstmForward {
  Vec h;
  LstmCache cache;
};

/// Single sequence, one row per time step (C x D); throws std::invalid_argument on width mismatch.
LstmForward lstm_forward(const LstmParams& p, const Mat& sequence);

inline Mat sigmoid(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace slipctl
