#include "maskmesh/smoothing.hpp"

#include <numbers>

namespace maskmesh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Segment {
  std::size_t begin;
  std::size_t end;  // exclusive
};

std::vector<Segment> present_segments(const MeshTrajectory& trajectory) {
  std::vector<Segment> out;
  const auto& params = trajectory.params;
  for (std::size_t t = 0; t < params.size();) {
    if (!params[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < params.size() && params[end]) ++end;
    out.push_back({t, end});
    t = end;
  }
  return out;
}

template <typename Block>
void smooth_block(MeshTrajectory& traj, const Segment& seg, Eigen::Index dims, Block block,
                  const std::set<int>& angular, const SmoothingConfig& config) {
  const auto len = static_cast<Eigen::Index>(seg.end - seg.begin);
  for (Eigen::Index c = 0; c < dims; ++c) {
    Eigen::VectorXd series(len);
    for (Eigen::Index k = 0; k < len; ++k) series(k) = block(*traj.params[seg.begin + k])(c);
    const bool rotation = config.unwrap_rotations && angular.count(static_cast<int>(c)) > 0;
    Eigen::VectorXd smoothed =
        rotation ? wrap_angles(kalman_smooth(unwrap_angles(series), config)) : kalman_smooth(series, config);
    for (Eigen::Index k = 0; k < len; ++k) block(*traj.params[seg.begin + k])(c) = smoothed(k);
  }
}

}  // namespace

void SmoothingConfig::validate() const {
  if (!(std::isfinite(process_noise) && process_noise > 0.0) ||
      !(std::isfinite(measurement_noise) && measurement_noise > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "smoothing noise parameters must be finite and positive");
  }
}

Eigen::VectorXd unwrap_angles(const Eigen::VectorXd& angles) {
  Eigen::VectorXd out = angles;
  double offset = 0.0;
  for (Eigen::Index k = 1; k < angles.size(); ++k) {
    const double step = angles(k) - angles(k - 1);
    offset -= kTwoPi * std::ceil((step - std::numbers::pi) / kTwoPi);
    out(k) = angles(k) + offset;
  }
  return out;
}

Eigen::VectorXd wrap_angles(const Eigen::VectorXd& angles) {
  return angles.unaryExpr([](double a) {
    double w = a - kTwoPi * std::ceil((a - std::numbers::pi) / kTwoPi);
    if (w <= -std::numbers::pi) w += kTwoPi;
    return w;
  });
}

MeshTrajectory smooth_trajectory(const MeshTrajectory& trajectory, const SmoothingConfig& config) {
  config.validate();
  MeshTrajectory out = trajectory;
  if (!config.enabled) return out;
  const std::set<int> no_angles;
  for (const Segment& seg : present_segments(out)) {
    smooth_block(out, seg, out.layout.pose, [](MhrParams& p) -> Vector& { return p.pose; },
                 out.layout.rotation_channels, config);
    smooth_block(out, seg, out.layout.hands, [](MhrParams& p) -> Vector& { return p.hands; },
                 no_angles, config);
  }
  require_finite(out, "smoothing");
  return out;
}

MeshTrajectory lock_shape(const MeshTrajectory& trajectory) {
  MeshTrajectory out = trajectory;
  const auto first = std::find_if(out.params.begin(), out.params.end(),
                                  [](const auto& p) { return p.has_value(); });
  if (first == out.params.end()) return out;
  const Vector shape = (*first)->shape;
  const Vector skeleton = (*first)->skeleton;
  for (auto& p : out.params) {
    if (!p) continue;
    p->shape = shape;
    p->skeleton = skeleton;
  }
  return out;
}

}  // namespace maskmesh
