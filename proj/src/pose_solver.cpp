#include "head3d/pose_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace head3d {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMaxDamping = 1e12;
constexpr double kMinCoverage = 0.5;

using Params = Eigen::Matrix<double, 6, 1>;

struct Point {
  Eigen::Vector3d X;  ///< canonical camera-space position
  Eigen::Vector3d n;  ///< outward normal
  double rgb[3];
  double base_weight;  ///< reliability in the canonical view itself
};

struct Level {
  CameraIntrinsics K;
  Image target;  ///< [rgb * mask, mask]
  std::vector<Point> points;
};

double smoothstep(double a, double b, double x) {
  const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

DepthMap downsample_depth(const DepthMap& d) {
  DepthMap out(d.width() / 2, d.height() / 2);
  for (int v = 0; v < out.height(); ++v)
    for (int u = 0; u < out.width(); ++u) {
      double sum = 0.0;
      bool ok = true;
      for (int k = 0; k < 4 && ok; ++k) {
        const int x = 2 * u + (k & 1), y = 2 * v + (k >> 1);
        ok = d.valid(x, y);
        sum += d.at(x, y);
      }
      if (ok) out.set(u, v, 0.25 * sum);
    }
  return out;
}

Level make_level(const Image& rgb, const DepthMap& depth, const Image& target, const CameraIntrinsics& K) {
  Level L{K, target, {}};
  const int w = depth.width(), h = depth.height();
  auto X = [&](int u, int v) { return Eigen::Vector3d(depth.at(u, v) * K.ray(u, v)); };
  auto ok = [&](int u, int v) { return u >= 0 && v >= 0 && u < w && v < h && depth.valid(u, v); };
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!depth.valid(u, v)) continue;
      // Silhouette pixels (any 4-neighbor missing) mix head and background
      // and carry blended depth; points seen at grazing angles are
      // unreliable too. Both get zero weight, independent of the pose.
      if (!ok(u + 1, v) || !ok(u - 1, v) || !ok(u, v + 1) || !ok(u, v - 1)) continue;
      Point p;
      p.X = X(u, v);
      Eigen::Vector3d n = (X(u + 1, v) - X(u - 1, v)).cross(X(u, v + 1) - X(u, v - 1));
      if (n.dot(p.X) > 0.0) n = -n;
      if (n.norm() == 0.0) continue;
      p.n = n.normalized();
      p.base_weight = smoothstep(0.3, 0.5, -p.n.dot(p.X.normalized()));
      if (p.base_weight == 0.0) continue;
      for (int c = 0; c < 3; ++c) p.rgb[c] = rgb.at(u, v, c);
      L.points.push_back(p);
    }
  return L;
}

Pose pose_of(const Params& p, double pivot) {
  EulerPose e{p[0] * kRadToDeg, p[1] * kRadToDeg, p[2] * kRadToDeg, Eigen::Vector3d(p[3], p[4], p[5])};
  return head_pose(e, pivot);
}

Params params_of(const Pose& pose, double pivot) {
  const EulerPose e = head_pose_params(pose, pivot);
  Params p;
  p << e.yaw / kRadToDeg, e.pitch / kRadToDeg, e.roll / kRadToDeg, e.t.x(), e.t.y(), e.t.z();
  return p;
}

// Base weight times a factor fading out points as they turn edge-on.
std::vector<double> visibility(const Level& L, const Pose& pose) {
  std::vector<double> w(L.points.size());
  for (std::size_t i = 0; i < L.points.size(); ++i) {
    const Point& p = L.points[i];
    const Eigen::Vector3d x = pose.apply(p.X);
    const double facing = -(pose.R * p.n).dot(x) / x.norm();
    w[i] = p.base_weight * smoothstep(0.3, 0.6, facing);
  }
  return w;
}

// Weighted residuals sqrt(w) * (target(projected canonical point) - canonical rgb);
// returns sum r^2 / (3 sum w).
double residuals(const Level& L, const Pose& pose, const std::vector<double>& w, Eigen::VectorXd* r) {
  const std::size_t n = L.points.size();
  if (r) r->resize(static_cast<Eigen::Index>(3 * n));
  double sum = 0.0;
  double s[4];
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = L.points[i];
    const Eigen::Vector3d x = pose.apply(p.X);
    const double sw = std::sqrt(w[i]);
    if (x.z() <= kBehindCameraZ) {
      for (int c = 0; c < 4; ++c) s[c] = 0.0;
    } else {
      const Pixel q{L.K.f * x.x() / x.z() + L.K.cu, L.K.f * x.y() / x.z() + L.K.cv};
      bilinear_sample_into(L.target, q, s);
    }
    // Coverage-normalized color; fades to zero once the sample leaves the
    // target head, which keeps the silhouette in the cost.
    const double coverage = std::max(s[3], kMinCoverage);
    for (int c = 0; c < 3; ++c) s[c] /= coverage;
    for (int c = 0; c < 3; ++c) {
      const double ri = sw * (s[c] - p.rgb[c]);
      if (r) (*r)[static_cast<Eigen::Index>(3 * i + c)] = ri;
      sum += ri * ri;
    }
  }
  double wsum = 0.0;
  for (double x : w) wsum += x;
  return wsum > 0.0 ? sum / (3.0 * wsum) : 0.0;
}

double cost_at(const Level& L, const Pose& pose) { return residuals(L, pose, visibility(L, pose), nullptr); }

std::vector<Level> build_pyramid(const CanonicalHead& canonical, const Image& target, const Mask& target_mask,
                                 const CameraIntrinsics& K, const PoseSolverOptions& options, int levels) {
  DepthMap depth = canonical.depth;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (!canonical.valid.at(u, v)) depth.invalidate(u, v);
  Image rgb = canonical.rgb, tgt(target.width(), target.height(), 4);
  for (int v = 0; v < target.height(); ++v)
    for (int u = 0; u < target.width(); ++u) {
      if (!target_mask.at(u, v)) continue;
      for (int c = 0; c < 3; ++c) tgt.at(u, v, c) = target.at(u, v, c);
      tgt.at(u, v, 3) = 1.0f;
    }
  CameraIntrinsics k = K;
  std::vector<Level> pyr;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      if (rgb.width() < 8 || rgb.height() < 8) break;
      rgb = downsample2(rgb);
      tgt = downsample2(tgt);
      depth = downsample_depth(depth);
      k = k.half();
    }
    const double sigma = l < static_cast<int>(options.level_blur.size()) ? options.level_blur[l] : 0.0;
    if (sigma > 0.0) {
      pyr.push_back(make_level(masked_gaussian_blur(rgb, depth.mask(), sigma), depth,
                               gaussian_blur(tgt, sigma), k));
    } else {
      pyr.push_back(make_level(rgb, depth, tgt, k));
    }
  }
  std::reverse(pyr.begin(), pyr.end());
  return pyr;
}

}  // namespace

double photometric_cost(const CanonicalHead& canonical, const Image& target, const Mask& target_mask,
                        const CameraIntrinsics& K, const Pose& pose) {
  return cost_at(build_pyramid(canonical, target, target_mask, K, {}, 1).front(), pose);
}

PoseEstimate estimate_pose_photometric(const CanonicalHead& canonical, const Image& target, const Mask& target_mask,
                                       const CameraIntrinsics& K, const Pose& init,
                                       const PoseSolverOptions& options) {
  require_same_size(canonical.rgb, target, "estimate_pose_photometric");
  require_same_size(target, target_mask, "estimate_pose_photometric");
  if (target.channels() != 3 || canonical.rgb.channels() != 3)
    throw std::invalid_argument("estimate_pose_photometric: RGB images required");
  if (options.levels < 1 || options.max_iterations < 1)
    throw std::invalid_argument("estimate_pose_photometric: need at least one level and iteration");
  const std::vector<Level> pyramid = build_pyramid(canonical, target, target_mask, K, options, options.levels);
  if (pyramid.back().points.empty()) throw DegenerateInputError("canonical head has no valid depth");

  const double pivot = options.pivot_depth, hstep = options.fd_step;
  Params p = params_of(init, pivot);
  PoseEstimate out;
  bool converged = false;

  for (const Level& L : pyramid) {
    std::vector<double> costs;
    double cost = cost_at(L, pose_of(p, pivot));
    costs.push_back(cost);
    double mu = options.initial_damping;
    converged = false;
    int it = 0;
    bool first = true;
    while (it < options.max_iterations && !converged) {
      // Visibility weights stay frozen across the Jacobian columns.
      const std::vector<double> w = visibility(L, pose_of(p, pivot));
      Eigen::VectorXd r, rp, rm;
      residuals(L, pose_of(p, pivot), w, &r);
      Eigen::MatrixXd J(r.size(), 6);
      for (int k = 0; k < 6; ++k) {
        Params a = p, b = p;
        a[k] += hstep;
        b[k] -= hstep;
        residuals(L, pose_of(a, pivot), w, &rp);
        residuals(L, pose_of(b, pivot), w, &rm);
        J.col(k) = (rp - rm) / (2.0 * hstep);
      }
      if (first) {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        if (svd.singularValues().minCoeff() < options.degenerate_singular_value)
          throw DegenerateInputError("photometric Jacobian is rank deficient (textureless target?)");
        first = false;
      }
      const Eigen::Matrix<double, 6, 6> A = J.transpose() * J;
      const Params g = J.transpose() * r;
      bool accepted = false;
      while (!accepted && it < options.max_iterations) {
        Eigen::Matrix<double, 6, 6> M = A;
        for (int k = 0; k < 6; ++k) M(k, k) += mu * std::max(A(k, k), 1e-12);
        const Params delta = M.ldlt().solve(-g);
        ++it;
        if (!delta.allFinite() || delta.norm() < options.min_step) {
          converged = true;
          break;
        }
        const Params trial = p + delta;
        const double trial_cost = cost_at(L, pose_of(trial, pivot));
        if (trial_cost < cost) {
          const double improvement = cost - trial_cost;
          if (improvement < options.min_improvement) {
            converged = true;
            break;
          }
          p = trial;
          cost = trial_cost;
          costs.push_back(cost);
          mu = std::max(mu * 0.5, 1e-12);
          accepted = true;
        } else {
          mu *= 10.0;
          if (mu > kMaxDamping) {
            converged = true;
            break;
          }
        }
      }
    }
    out.iterations += it;
    out.cost_history.push_back(std::move(costs));
  }

  out.pose = pose_of(p, pivot);
  out.params = head_pose_params(out.pose, pivot);
  out.residual = out.cost_history.back().back();
  out.converged = converged;
  return out;
}

}  // namespace head3d
