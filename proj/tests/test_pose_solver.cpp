#include <doctest.h>

#include <chrono>
#include <random>

#include "head3d/pose_solver.hpp"
#include "head3d/synth.hpp"
#include "head3d/video.hpp"
#include "test_support.hpp"

using namespace head3d;
using head3d::testing::default_camera;

namespace {

CanonicalHead oracle_canonical(const SyntheticScene& scene) {
  const CameraIntrinsics K = default_camera();
  std::vector<Image> frames;
  std::vector<Mask> masks;
  std::vector<DepthMap> depths;
  std::vector<Pose> poses;
  for (double yaw : {-20.0, -10.0, 0.0, 10.0, 20.0}) {
    const Pose p = scene_pose(scene, {yaw, 0.0, 0.0, Eigen::Vector3d::Zero()});
    const Render r = render_frame(scene, p, K);
    frames.push_back(r.rgb);
    masks.push_back(r.head);
    depths.push_back(mask_depth(r.depth, r.head));
    poses.push_back(p);
  }
  return estimate_canonical(frames, masks, depths, poses, K);
}

struct PoseError {
  double rotation_deg;
  double translation_m;
};

PoseError pose_error(const PoseEstimate& est, const EulerPose& truth) {
  const Pose gt = head_pose(truth, 1.0);
  return {rotation_angle_deg(est.pose.R.transpose() * gt.R), (est.params.t - truth.t).norm()};
}

}  // namespace

TEST_CASE("pose solver: ground-truth init stays put") {
  const SyntheticScene scene;
  const CameraIntrinsics K = default_camera();
  const CanonicalHead canon = oracle_canonical(scene);
  const EulerPose truth{7.0, -4.0, 2.0, Eigen::Vector3d(0.01, -0.005, 0.02)};
  const Render target = render_frame(scene, head_pose(truth, 1.0), K);
  const PoseEstimate est =
      estimate_pose_photometric(canon, target.rgb, target.head, K, head_pose(truth, 1.0));
  CHECK(est.residual < 1e-4);
  const PoseError e = pose_error(est, truth);
  CHECK(e.rotation_deg < 0.05);
  CHECK(e.translation_m < 1e-3);
}

TEST_CASE("pose solver: recovers a 10 degree yaw from identity") {
  const SyntheticScene scene;
  const CameraIntrinsics K = default_camera();
  const CanonicalHead canon = oracle_canonical(scene);
  const EulerPose truth{10.0, 0.0, 0.0, Eigen::Vector3d::Zero()};
  const Render target = render_frame(scene, head_pose(truth, 1.0), K);
  const PoseEstimate est = estimate_pose_photometric(canon, target.rgb, target.head, K, Pose::identity());
  CHECK(est.params.yaw == doctest::Approx(10.0).epsilon(0.05));
  CHECK(std::abs(est.params.yaw - 10.0) < 0.5);
  CHECK(pose_error(est, truth).translation_m < 0.01);
  CHECK(est.cost_history.size() == 3);
  for (const auto& level : est.cost_history)
    for (std::size_t i = 1; i < level.size(); ++i) CHECK(level[i] <= level[i - 1]);
}

TEST_CASE("pose solver: random poses within 20 degrees") {
  const SyntheticScene scene;
  const CameraIntrinsics K = default_camera();
  const CanonicalHead canon = oracle_canonical(scene);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ang(-20.0, 20.0);
  int good = 0;
  double worst_time = 0.0;
  const int cases = 12;
  for (int i = 0; i < cases; ++i) {
    const EulerPose truth{ang(rng), ang(rng), 0.0, Eigen::Vector3d::Zero()};
    const Render target = render_frame(scene, head_pose(truth, 1.0), K);
    const auto t0 = std::chrono::steady_clock::now();
    const PoseEstimate est = estimate_pose_photometric(canon, target.rgb, target.head, K, Pose::identity());
    worst_time = std::max(worst_time, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const PoseError e = pose_error(est, truth);
    MESSAGE("yaw " << truth.yaw << " pitch " << truth.pitch << " -> rot err " << e.rotation_deg << " deg, t err "
                   << e.translation_m << " m, " << est.iterations << " it");
    if (e.rotation_deg < 0.5 && e.translation_m < 0.01) ++good;
  }
  CHECK(good >= cases - 1);
  CHECK(worst_time < 2.0);
}

TEST_CASE("pose solver: textureless target is degenerate") {
  const SyntheticScene scene;
  const CameraIntrinsics K = default_camera();
  const CanonicalHead canon = oracle_canonical(scene);
  const Image flat(K.width, K.height, 3, 0.5f);
  CHECK_THROWS_AS(estimate_pose_photometric(canon, flat, Mask(K.width, K.height, true), K, Pose::identity()),
                  DegenerateInputError);
}

TEST_CASE("pose solver: input validation") {
  const CameraIntrinsics K = default_camera();
  CanonicalHead empty{Image(K.width, K.height, 3), DepthMap(K.width, K.height), Mask(K.width, K.height)};
  const Image target(K.width, K.height, 3, 0.3f);
  CHECK_THROWS_AS(estimate_pose_photometric(empty, target, Mask(K.width, K.height, true), K, Pose::identity()),
                  DegenerateInputError);
  CHECK_THROWS_AS(estimate_pose_photometric(empty, Image(4, 4, 3), Mask(4, 4), K, Pose::identity()),
                  std::invalid_argument);
}
