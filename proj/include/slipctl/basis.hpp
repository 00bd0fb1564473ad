#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "slipctl/types.hpp"

namespace slipctl {

/// Gaussian radial-basis layout over a horizon of `horizon` control steps.
///
/// phi_j(t) = exp(-(t - mu_j)^2 / (2 sigma)); sigma is in squared time-step
/// units because the exponent denominator is 2*sigma, not 2*sigma^2.
struct BasisSpec {
  int n_basis = 0;
  int horizon = 0;
  Vec mu;
  double sigma = 1.0;

  /// Centers at 1 + (j-1)(T-1)/(N-1); sigma defaults to the squared spacing.
  static BasisSpec uniform(int n_basis, int horizon, std::optional<double> sigma = std::nullopt);

  /// Throws std::invalid_argument when centers are unsorted, sigma <= 0, or sizes disagree.
  void validate() const;
};

template <typename Scalar>
VectorX<Scalar> eval_basis(const BasisSpec& spec, Scalar t) {
  const auto d = spec.mu.template cast<Scalar>().array() - t;
  return (-(d * d) / Scalar(2.0 * spec.sigma)).exp().matrix();
}

/// N x T matrix; column k holds eval_basis(spec, k + 1).
template <typename Scalar = double>
MatrixX<Scalar> basis_matrix(const BasisSpec& spec) {
  spec.validate();
  MatrixX<Scalar> phi(spec.n_basis, spec.horizon);
  for (int k = 0; k < spec.horizon; ++k) phi.col(k) = eval_basis<Scalar>(spec, Scalar(k + 1));
  return phi;
}

/// Velocity sequence Phi^T w.
template <typename DerivedPhi, typename DerivedW>
VectorX<typename DerivedPhi::Scalar> trajectory_from_weights(const Eigen::MatrixBase<DerivedPhi>& phi,
                                                             const Eigen::MatrixBase<DerivedW>& w) {
  if (phi.rows() != w.size()) {
    throw std::invalid_argument("trajectory_from_weights: basis has " + std::to_string(phi.rows()) +
                                " rows but weight vector has " + std::to_string(w.size()) + " entries");
  }
  return phi.transpose() * w;
}

struct WeightFit {
  WeightVector w;
  double residual_norm = 0.0;
  bool rank_deficient = false;
};

/// Least-squares weights for a reference sequence. Rank-deficient bases yield
/// the minimum-norm solution with `rank_deficient` set.
WeightFit fit_weights(const VelocityTrajectory& reference, const Mat& phi);

}  // namespace slipctl
