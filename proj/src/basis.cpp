#include "slipctl/basis.hpp"

#include <cmath>
#include <string>

namespace slipctl {

BasisSpec BasisSpec::uniform(int n_basis, int horizon, std::optional<double> sigma) {
  if (n_basis < 2 || n_basis > 8) {
    throw std::invalid_argument("basis count must lie in [2, 8], got " + std::to_string(n_basis));
  }
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2 steps");

  BasisSpec spec;
  spec.n_basis = n_basis;
  spec.horizon = horizon;
  const double spacing = double(horizon - 1) / double(n_basis - 1);
  spec.mu = Vec::LinSpaced(n_basis, 1.0, double(horizon));
  spec.sigma = sigma.value_or(spacing * spacing);
  spec.validate();
  return spec;
}

void BasisSpec::validate() const {
  if (n_basis < 1) throw std::invalid_argument("basis needs at least one function");
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  if (mu.size() != n_basis) throw std::invalid_argument("center count does not match n_basis");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("basis width sigma must be positive");
  for (Eigen::Index j = 1; j < mu.size(); ++j) {
    if (!(mu[j] > mu[j - 1])) throw std::invalid_argument("basis centers must be strictly increasing");
  }
}

WeightFit fit_weights(const VelocityTrajectory& reference, const Mat& phi) {
  if (reference.size() != phi.cols()) {
    throw std::invalid_argument("fit_weights: reference length " + std::to_string(reference.size()) +
                                " does not match horizon " + std::to_string(phi.cols()));
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(phi.transpose());
  WeightFit fit;
  fit.w = cod.solve(reference);
  fit.rank_deficient = cod.rank() < phi.rows();
  fit.residual_norm = (phi.transpose() * fit.w - reference).norm();
  return fit;
}

}  // namespace slipctl
