#pragma once

#include <Eigen/Dense>

namespace slipctl {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Decision variables of the trajectory optimizers, one weight per basis function.
using WeightVector = Eigen::VectorXd;
// Speed along the fixed task-space path, one value per horizon step [m/s].
using VelocityTrajectory = Eigen::VectorXd;

inline constexpr int kTactileChannels = 48;
inline constexpr int kActionDim = 6;
inline constexpr double kControlRateHz = 30.0;
inline constexpr double kControlPeriod = 1.0 / kControlRateHz;
inline constexpr double kSlipThresholdDeg = 6.0;

}  // namespace slipctl
