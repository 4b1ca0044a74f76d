#pragma once

#include <stdexcept>
#include <vector>

#include "head3d/canonical.hpp"
#include "head3d/geometry.hpp"
#include "head3d/image.hpp"

namespace head3d {

/// The target carries no usable photometric gradient; the pose is not
/// identifiable.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PoseSolverOptions {
  /// Rotation pivot of the solved parameters (head center), meters.
  double pivot_depth = 1.0;
  /// Central-difference step, radians for angles and meters for translation.
  double fd_step = 1e-4;
  int levels = 3;
  /// Gaussian pre-blur per level (finest first), in that level's pixels.
  /// Washes out the periodic part of the texture at coarse levels.
  std::vector<double> level_blur = {0.0, 1.0, 2.0};
  int max_iterations = 50;
  double initial_damping = 1e-3;
  double min_step = 1e-6;
  double min_improvement = 1e-10;
  double degenerate_singular_value = 1e-10;
};

struct PoseEstimate {
  Pose pose;
  EulerPose params;  ///< head-centric parameters about options.pivot_depth
  double residual = 0.0;  ///< final mean squared photometric error at full resolution
  bool converged = false;
  int iterations = 0;
  /// Cost after every accepted step, per pyramid level (coarse first); the
  /// first entry of each level is its starting cost.
  std::vector<std::vector<double>> cost_history;
};

/// Levenberg-Marquardt over (yaw, pitch, roll, tx, ty, tz) minimizing the
/// mean squared difference between the canonical head re-posed to the target and
/// the masked target. Canonical points facing away from the camera at the
/// current pose are down-weighted smoothly.
PoseEstimate estimate_pose_photometric(const CanonicalHead& canonical, const Image& target, const Mask& target_mask,
                                       const CameraIntrinsics& K, const Pose& init,
                                       const PoseSolverOptions& options = {});

/// Photometric cost of one pose at full resolution (same definition the
/// solver minimizes).
double photometric_cost(const CanonicalHead& canonical, const Image& target, const Mask& target_mask,
                        const CameraIntrinsics& K, const Pose& pose);

}  // namespace head3d
