#include "head3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>

namespace head3d {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double soft_checker(double x, double y, double period) {
  return 0.5 * std::tanh(3.0 * std::sin(kTwoPi * x / period) * std::sin(kTwoPi * y / period));
}

}  // namespace

SyntheticScene scene_from_json(const nlohmann::json& j) {
  SyntheticScene s;
  s.head_distance = j.value("head_distance", s.head_distance);
  if (j.contains("semi_axes")) {
    const auto& a = j.at("semi_axes");
    if (!a.is_array() || a.size() != 3) throw std::invalid_argument("scene: semi_axes must hold 3 numbers");
    s.semi_axes = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  }
  s.symmetric = j.value("symmetric", s.symmetric);
  s.checker_period = j.value("checker_period", s.checker_period);
  s.checker_contrast = j.value("checker_contrast", s.checker_contrast);
  s.background_depth = j.value("background_depth", s.background_depth);
  s.background_period = j.value("background_period", s.background_period);
  if (s.semi_axes.minCoeff() <= 0.0 || s.head_distance <= s.semi_axes.z() ||
      s.background_depth <= s.head_distance + s.semi_axes.z() || s.checker_period <= 0.0 ||
      s.background_period <= 0.0) {
    throw std::invalid_argument("scene: inconsistent geometry");
  }
  return s;
}

nlohmann::json scene_to_json(const SyntheticScene& s) {
  return {{"head_distance", s.head_distance},
          {"semi_axes", {s.semi_axes.x(), s.semi_axes.y(), s.semi_axes.z()}},
          {"symmetric", s.symmetric},
          {"checker_period", s.checker_period},
          {"checker_contrast", s.checker_contrast},
          {"background_depth", s.background_depth},
          {"background_period", s.background_period}};
}

Eigen::Vector3d head_texture(const SyntheticScene& scene, const Eigen::Vector3d& local) {
  const Eigen::Vector3d& ax = scene.semi_axes;
  const double x = scene.symmetric ? std::abs(local.x()) : local.x();
  const double y = local.y(), z = local.z();
  Eigen::Vector3d c(0.55 + 0.22 * x / ax.x(), 0.45 + 0.18 * y / ax.y(), 0.40 + 0.12 * z / ax.z());
  const double k = scene.checker_contrast * soft_checker(x, y, scene.checker_period);
  c += k * Eigen::Vector3d(1.0, 0.8, 0.6);
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::Vector3d background_texture(const SyntheticScene& scene, double x, double y) {
  const double p = scene.background_period;
  const double s = 0.5 + 0.5 * std::cos(kTwoPi * x / p) * std::cos(kTwoPi * y / (1.7 * p));
  return {0.15 + 0.1 * s, 0.25 + 0.15 * s, 0.45 + 0.2 * s};
}

Pose scene_pose(const SyntheticScene& scene, const EulerPose& e) { return head_pose(e, scene.head_distance); }

Render render_frame(const SyntheticScene& scene, const Pose& pose, const CameraIntrinsics& K, Exec exec) {
  const int w = K.width, h = K.height;
  if (w < 1 || h < 1) throw std::invalid_argument("render_frame: intrinsics carry no image size");
  Render out{Image(w, h, 3), DepthMap(w, h), Mask(w, h)};
  const Eigen::Vector3d center(0.0, 0.0, scene.head_distance);
  const Eigen::Matrix3d rt = pose.R.transpose();
  // Ray origin in canonical coordinates relative to the head center, scaled
  // so the ellipsoid becomes the unit sphere.
  const Eigen::Vector3d inv_axes = scene.semi_axes.cwiseInverse();
  const Eigen::Vector3d origin = -(rt * pose.t) - center;
  const Eigen::Vector3d o = origin.cwiseProduct(inv_axes);
  const double oo = o.squaredNorm();

  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d dir = K.ray(u, v);
      const Eigen::Vector3d d_local = rt * dir;
      const Eigen::Vector3d d = d_local.cwiseProduct(inv_axes);
      const double a = d.squaredNorm(), b = 2.0 * o.dot(d), c = oo - 1.0;
      const double disc = b * b - 4.0 * a * c;
      double s_hit = -1.0;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double s0 = (-b - sq) / (2.0 * a), s1 = (-b + sq) / (2.0 * a);
        s_hit = s0 > 0.0 ? s0 : (s1 > 0.0 ? s1 : -1.0);
      }
      Eigen::Vector3d color;
      if (s_hit > 0.0) {
        const Eigen::Vector3d local = origin + s_hit * d_local;
        color = head_texture(scene, local);
        out.depth.set(u, v, s_hit);  // dir has unit z, so the ray parameter is the depth
        out.head.set(u, v, true);
      } else {
        const double s = scene.background_depth;
        color = background_texture(scene, s * dir.x(), s * dir.y());
        out.depth.set(u, v, s);
      }
      for (int k = 0; k < 3; ++k) out.rgb.at(u, v, k) = static_cast<float>(color[k]);
    }
  });
  return out;
}

std::vector<EulerPose> interpolate_trajectory(const TrajectorySpec& trajectory) {
  if (trajectory.frames < 1) throw std::invalid_argument("trajectory: frame count must be >= 1");
  if (trajectory.keys.empty()) throw std::invalid_argument("trajectory: at least one key required");
  const auto& keys = trajectory.keys;
  const int m = trajectory.frames;
  std::vector<EulerPose> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    if (keys.size() == 1 || m == 1) {
      out.push_back(keys.front());
      continue;
    }
    const double pos = static_cast<double>(i) * (keys.size() - 1) / (m - 1);
    const std::size_t k = std::min(static_cast<std::size_t>(std::floor(pos)), keys.size() - 2);
    const double a = pos - k;
    const EulerPose& p = keys[k];
    const EulerPose& q = keys[k + 1];
    EulerPose e;
    e.yaw = (1 - a) * p.yaw + a * q.yaw;
    e.pitch = (1 - a) * p.pitch + a * q.pitch;
    e.roll = (1 - a) * p.roll + a * q.roll;
    e.t = (1 - a) * p.t + a * q.t;
    out.push_back(e);
  }
  return out;
}

VideoSequence render_sequence(const SyntheticScene& scene, const TrajectorySpec& trajectory,
                              const CameraIntrinsics& K, Exec exec) {
  VideoSequence seq;
  for (const EulerPose& e : interpolate_trajectory(trajectory)) {
    const Pose pose = scene_pose(scene, e);
    Render r = render_frame(scene, pose, K, exec);
    Frame f;
    f.depth = mask_depth(r.depth, r.head);
    f.rgb = std::move(r.rgb);
    f.mask = std::move(r.head);
    f.pose = pose;
    seq.push_back(std::move(f));
  }
  return seq;
}

}  // namespace head3d
