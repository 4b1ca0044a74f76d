#pragma once

#include <cmath>
#include <random>

#include "head3d/geometry.hpp"
#include "head3d/image.hpp"

namespace head3d::testing {

inline CameraIntrinsics default_camera() { return intrinsics_from_fov(128, 128, 10.0); }

inline Image random_image(std::mt19937& rng, int w, int h, int c) {
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  Image img(w, h, c);
  for (float& x : img.values()) x = dist(rng);
  return img;
}

inline Pose random_pose(std::mt19937& rng, double max_deg, double max_t) {
  std::uniform_real_distribution<double> ang(-max_deg, max_deg);
  std::uniform_real_distribution<double> tr(-1.0, 1.0);
  Eigen::Vector3d t(tr(rng), tr(rng), tr(rng));
  if (t.norm() > 0.0) t *= max_t * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / t.norm();
  return pose_from_euler(ang(rng), ang(rng), ang(rng), t);
}

inline double mean_abs_diff(const Image& a, const Image& b, const Mask& m) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      if (!m.at(u, v)) continue;
      for (int c = 0; c < a.channels(); ++c) sum += std::abs(a.at(u, v, c) - b.at(u, v, c));
      ++n;
    }
  return n ? sum / (n * a.channels()) : 0.0;
}

}  // namespace head3d::testing
