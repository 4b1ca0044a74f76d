#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "head3d/geometry.hpp"
#include "head3d/video.hpp"

namespace head3d {

/// Rigid textured ellipsoid head in front of a textured background plane.
/// The head center sits on the optical axis at `head_distance`; poses
/// rotate about that center.
struct SyntheticScene {
  double head_distance = 1.0;
  Eigen::Vector3d semi_axes{0.06, 0.075, 0.07};  ///< x (width), y (height), z (depth)
  bool symmetric = false;                         ///< mirror the texture about the head's x = 0 plane
  double checker_period = 0.03;                   ///< meters on the head surface
  double checker_contrast = 0.15;
  double background_depth = 2.0;
  double background_period = 0.05;
};

SyntheticScene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SyntheticScene& scene);

/// Frame count and pose keys interpolated linearly in Euler angles and
/// translation. Keys are spread evenly over the frames.
struct TrajectorySpec {
  std::vector<EulerPose> keys;
  int frames = 1;
};

struct Render {
  Image rgb;
  DepthMap depth;  ///< valid on every pixel (head or background)
  Mask head;
};

/// Head color at a point given in head-local coordinates (meters, relative
/// to the ellipsoid center, before posing).
Eigen::Vector3d head_texture(const SyntheticScene& scene, const Eigen::Vector3d& local);
Eigen::Vector3d background_texture(const SyntheticScene& scene, double x, double y);

/// Camera-space pose of the head for Euler head parameters.
Pose scene_pose(const SyntheticScene& scene, const EulerPose& e);

/// Per-pixel analytic ray casting.
Render render_frame(const SyntheticScene& scene, const Pose& pose, const CameraIntrinsics& K,
                    Exec exec = Exec::parallel);

std::vector<EulerPose> interpolate_trajectory(const TrajectorySpec& trajectory);

/// One render per interpolated pose, with depth restricted to the head mask
/// and the ground-truth pose attached.
VideoSequence render_sequence(const SyntheticScene& scene, const TrajectorySpec& trajectory,
                              const CameraIntrinsics& K, Exec exec = Exec::parallel);

}  // namespace head3d
