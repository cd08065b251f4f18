#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "maskmesh/types.hpp"

namespace maskmesh {

struct SmoothingConfig {
  double process_noise = 1e-3;      // q
  double measurement_noise = 1e-2;  // r
  bool enabled = true;
  bool unwrap_rotations = true;

  bool operator==(const SmoothingConfig&) const = default;

  /// Throws InvalidConfig unless q and r are finite and positive.
  void validate() const;
};

/// Fixed-interval (Rauch-Tung-Striebel) smoothing of one scalar channel under a
/// constant-velocity model. State starts at (first sample, zero velocity) with
/// covariance diag(r, 1); process noise is q times the integrated white-noise
/// acceleration covariance for a unit step.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> kalman_smooth(
    const Eigen::MatrixBase<Derived>& series, const SmoothingConfig& config) {
  using Scalar = typename Derived::Scalar;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
  using Out = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  config.validate();
  const Eigen::Index n = series.size();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "cannot smooth an empty series");
  if (!series.allFinite()) throw Error(ErrorCode::NonFiniteInput, "series holds non-finite values");

  const Scalar q = static_cast<Scalar>(config.process_noise);
  const Scalar r = static_cast<Scalar>(config.measurement_noise);
  Mat2 F;
  F << 1, 1, 0, 1;
  Mat2 Q;
  Q << q / 3, q / 2, q / 2, q;

  std::vector<Vec2> x_pred(n), x_filt(n);
  std::vector<Mat2> P_pred(n), P_filt(n);

  Vec2 x(series(0), Scalar(0));
  Mat2 P = Mat2::Zero();
  P(0, 0) = r;
  P(1, 1) = Scalar(1);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k > 0) {
      x = F * x;
      P = F * P * F.transpose() + Q;
    }
    x_pred[k] = x;
    P_pred[k] = P;
    const Scalar innovation = series(k) - x(0);
    const Scalar s = P(0, 0) + r;
    const Vec2 gain = P.col(0) / s;
    x += gain * innovation;
    P -= gain * P.row(0);
    x_filt[k] = x;
    P_filt[k] = P;
  }

  Out out(n);
  Vec2 x_next = x_filt[n - 1];
  out(n - 1) = x_next(0);
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const Mat2 C = P_filt[k] * F.transpose() * P_pred[k + 1].inverse();
    x_next = x_filt[k] + C * (x_next - x_pred[k + 1]);
    out(k) = x_next(0);
  }
  return out;
}

/// Shifts samples by multiples of 2π so consecutive differences lie in (-π, π].
Eigen::VectorXd unwrap_angles(const Eigen::VectorXd& angles);

/// Maps each angle to (-π, π].
Eigen::VectorXd wrap_angles(const Eigen::VectorXd& angles);

/// Smooths pose and hand channels independently over each run of consecutive
/// present frames. Shape, camera and skeleton are left untouched.
MeshTrajectory smooth_trajectory(const MeshTrajectory& trajectory, const SmoothingConfig& config);

/// Copies shape and skeleton from the earliest present frame into every present frame.
MeshTrajectory lock_shape(const MeshTrajectory& trajectory);

}  // namespace maskmesh
