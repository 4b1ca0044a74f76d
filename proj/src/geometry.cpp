#include "head3d/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace head3d {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

WarpedPixel project(const Eigen::Vector3d& x, const CameraIntrinsics& K) {
  WarpedPixel out;
  out.depth = x.z();
  if (!(x.z() > kBehindCameraZ)) return out;
  out.pixel = {K.f * x.x() / x.z() + K.cu, K.f * x.y() / x.z() + K.cv};
  out.valid = std::isfinite(out.pixel.u) && std::isfinite(out.pixel.v);
  return out;
}

void require_positive_depth(double depth) {
  if (!(depth > 0.0)) throw std::invalid_argument("warp: depth must be positive");
}

}  // namespace

CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg) {
  if (width < 2 || height < 2) throw std::invalid_argument("intrinsics_from_fov: width and height must be >= 2");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw std::invalid_argument("intrinsics_from_fov: fov must be in (0, 180)");
  CameraIntrinsics K;
  K.width = width;
  K.height = height;
  K.cu = (width - 1) / 2.0;
  K.cv = (height - 1) / 2.0;
  K.f = (width - 1) / (2.0 * std::tan(fov_deg * kDegToRad / 2.0));
  return K;
}

CameraIntrinsics CameraIntrinsics::half() const {
  CameraIntrinsics k;
  k.width = std::max(1, width / 2);
  k.height = std::max(1, height / 2);
  k.f = f / 2.0;
  k.cu = (cu - 0.5) / 2.0;
  k.cv = (cv - 0.5) / 2.0;
  return k;
}

Eigen::Matrix3d rotation_from_euler(double yaw_deg, double pitch_deg, double roll_deg) {
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(yaw_deg * kDegToRad, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(pitch_deg * kDegToRad, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(roll_deg * kDegToRad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz * rx * ry;
}

void euler_from_rotation(const Eigen::Matrix3d& R, double& yaw_deg, double& pitch_deg, double& roll_deg) {
  // Third row of Rz*Rx*Ry is (-cos p sin y, sin p, cos p cos y); second
  // column is (-sin r cos p, cos r cos p, sin p).
  pitch_deg = std::asin(std::clamp(R(2, 1), -1.0, 1.0)) / kDegToRad;
  yaw_deg = std::atan2(-R(2, 0), R(2, 2)) / kDegToRad;
  roll_deg = std::atan2(-R(0, 1), R(1, 1)) / kDegToRad;
}

Pose pose_from_euler(double yaw_deg, double pitch_deg, double roll_deg, const Eigen::Vector3d& t) {
  return {rotation_from_euler(yaw_deg, pitch_deg, roll_deg), t};
}

Pose head_pose(const EulerPose& e, double pivot_depth) {
  const Eigen::Vector3d pivot(0.0, 0.0, pivot_depth);
  Pose p;
  p.R = rotation_from_euler(e.yaw, e.pitch, e.roll);
  p.t = pivot - p.R * pivot + e.t;
  return p;
}

EulerPose head_pose_params(const Pose& p, double pivot_depth) {
  const Eigen::Vector3d pivot(0.0, 0.0, pivot_depth);
  EulerPose e;
  euler_from_rotation(p.R, e.yaw, e.pitch, e.roll);
  e.t = p.t - (pivot - p.R * pivot);
  return e;
}

Pose pose_compose(const Pose& a, const Pose& b) { return {a.R * b.R, a.R * b.t + a.t}; }

Pose pose_inverse(const Pose& p) {
  const Eigen::Matrix3d rt = p.R.transpose();
  return {rt, -(rt * p.t)};
}

Pose orthonormalize(const Pose& p) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(p.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, p.t};
}

double rotation_angle_deg(const Eigen::Matrix3d& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) / kDegToRad;
}

double max_orthonormality_error(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

WarpedPixel warp_pixel_to_canonical(Pixel q, double depth, const Pose& pose, const CameraIntrinsics& K) {
  require_positive_depth(depth);
  const Eigen::Vector3d x = depth * K.ray(q.u, q.v);
  return project(pose.R.transpose() * (x - pose.t), K);
}

WarpedPixel warp_pixel_to_target(Pixel qc, double depth, const Pose& pose, const CameraIntrinsics& K) {
  require_positive_depth(depth);
  return project(depth * (pose.R * K.ray(qc.u, qc.v)) + pose.t, K);
}

FlowField::FlowField(int width, int height) : width_(width), height_(height), mask_(width, height, false) {
  targets_.resize(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) targets_[idx(u, v)] = {static_cast<double>(u), static_cast<double>(v)};
}

FlowField FlowField::zero(int width, int height) { return constant(width, height, 0.0, 0.0); }

FlowField FlowField::constant(int width, int height, double du, double dv) {
  FlowField f(width, height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) f.set_target(u, v, {u + du, v + dv});
  return f;
}

namespace {

template <typename WarpFn>
FlowField flow_from_depth(const DepthMap& depth, Exec exec, WarpFn&& warp) {
  FlowField flow(depth.width(), depth.height());
  for_each_row(depth.height(), exec, [&](int v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v)) continue;
      const WarpedPixel w = warp(Pixel{static_cast<double>(u), static_cast<double>(v)}, depth.at(u, v));
      if (w.valid) flow.set_target(u, v, w.pixel);
    }
  });
  return flow;
}

}  // namespace

FlowField backward_flow_field(const DepthMap& canonical_depth, const Pose& pose, const CameraIntrinsics& K,
                              Exec exec) {
  return flow_from_depth(canonical_depth, exec,
                         [&](Pixel q, double d) { return warp_pixel_to_target(q, d, pose, K); });
}

FlowField canonical_flow_field(const DepthMap& depth, const Pose& pose, const CameraIntrinsics& K, Exec exec) {
  return flow_from_depth(depth, exec, [&](Pixel q, double d) { return warp_pixel_to_canonical(q, d, pose, K); });
}

namespace {

struct Footprint {
  int u0, u1, v0, v1;
  double fu, fv;
  bool clamped_u, clamped_v;
};

Footprint footprint(int width, int height, Pixel p) {
  Footprint fp{};
  auto axis = [](double x, int n, int& i0, int& i1, double& frac, bool& clamped) {
    clamped = !(x > 0.0 && x < n - 1);
    const double xc = std::clamp(std::isfinite(x) ? x : 0.0, 0.0, static_cast<double>(n - 1));
    if (n == 1) {
      i0 = i1 = 0;
      frac = 0.0;
      return;
    }
    i0 = std::min(static_cast<int>(std::floor(xc)), n - 2);
    i1 = i0 + 1;
    frac = xc - i0;
  };
  axis(p.u, width, fp.u0, fp.u1, fp.fu, fp.clamped_u);
  axis(p.v, height, fp.v0, fp.v1, fp.fv, fp.clamped_v);
  return fp;
}

}  // namespace

void bilinear_sample_into(const Image& img, Pixel p, std::span<double> out) {
  const Footprint fp = footprint(img.width(), img.height(), p);
  const double w00 = (1.0 - fp.fu) * (1.0 - fp.fv), w10 = fp.fu * (1.0 - fp.fv);
  const double w01 = (1.0 - fp.fu) * fp.fv, w11 = fp.fu * fp.fv;
  const auto a = img.pixel(fp.u0, fp.v0), b = img.pixel(fp.u1, fp.v0);
  const auto c = img.pixel(fp.u0, fp.v1), d = img.pixel(fp.u1, fp.v1);
  for (int k = 0; k < img.channels(); ++k) {
    out[k] = w00 * a[k] + w10 * b[k] + w01 * c[k] + w11 * d[k];
  }
}

std::vector<double> bilinear_sample(const Image& img, Pixel p) {
  std::vector<double> out(img.channels());
  bilinear_sample_into(img, p, out);
  return out;
}

SampleGradient bilinear_sample_gradient(const Image& img, Pixel p) {
  const Footprint fp = footprint(img.width(), img.height(), p);
  SampleGradient g;
  g.value = bilinear_sample(img, p);
  g.d_du.assign(img.channels(), 0.0);
  g.d_dv.assign(img.channels(), 0.0);
  const auto a = img.pixel(fp.u0, fp.v0), b = img.pixel(fp.u1, fp.v0);
  const auto c = img.pixel(fp.u0, fp.v1), d = img.pixel(fp.u1, fp.v1);
  for (int k = 0; k < img.channels(); ++k) {
    if (!fp.clamped_u) g.d_du[k] = (1.0 - fp.fv) * (b[k] - a[k]) + fp.fv * (d[k] - c[k]);
    if (!fp.clamped_v) g.d_dv[k] = (1.0 - fp.fu) * (c[k] - a[k]) + fp.fu * (d[k] - b[k]);
  }
  return g;
}

WarpedImage warp_image_backward(const Image& img, const FlowField& flow, Exec exec) {
  require_same_size(img, flow, "warp_image_backward");
  WarpedImage out{Image(img.width(), img.height(), img.channels()), Mask(img.width(), img.height())};
  const double w = img.width(), h = img.height();
  for_each_row(img.height(), exec, [&](int v) {
    std::vector<double> value(img.channels());
    for (int u = 0; u < img.width(); ++u) {
      if (!flow.valid(u, v)) continue;
      const Pixel p = flow.target(u, v);
      if (!(p.u > -1.0 && p.u < w && p.v > -1.0 && p.v < h)) continue;
      bilinear_sample_into(img, p, value);
      auto dst = out.image.pixel(u, v);
      for (int k = 0; k < img.channels(); ++k) dst[k] = static_cast<float>(value[k]);
      out.valid.set(u, v, true);
    }
  });
  return out;
}

namespace {

void rasterize_triangle(const Pixel& a, const Pixel& b, const Pixel& c, int w, int h, std::vector<char>& covered) {
  const double area = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
  if (std::abs(area) < 1e-12) return;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.u, b.u, c.u}))));
  const int x1 = std::min(w - 1, static_cast<int>(std::floor(std::max({a.u, b.u, c.u}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.v, b.v, c.v}))));
  const int y1 = std::min(h - 1, static_cast<int>(std::floor(std::max({a.v, b.v, c.v}))));
  const double s = area > 0 ? 1.0 : -1.0;
  auto edge = [](const Pixel& p, const Pixel& q, double x, double y) {
    return (q.u - p.u) * (y - p.v) - (q.v - p.v) * (x - p.u);
  };
  constexpr double eps = 1e-9;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (s * edge(a, b, x, y) >= -eps && s * edge(b, c, x, y) >= -eps && s * edge(c, a, x, y) >= -eps)
        covered[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
}

std::vector<char> rasterize_coverage(const std::vector<WarpedPixel>& dest, const DepthMap& depth, int w, int h,
                                     double max_gap) {
  std::vector<char> covered(static_cast<std::size_t>(w) * h, 0);
  for (int v = 0; v + 1 < h; ++v) {
    for (int u = 0; u + 1 < w; ++u) {
      const int idx[4] = {v * w + u, v * w + u + 1, (v + 1) * w + u, (v + 1) * w + u + 1};
      bool ok = true;
      double zlo = std::numeric_limits<double>::infinity(), zhi = -zlo;
      for (int i : idx) {
        if (!depth.valid(i % w, i / w) || !dest[i].valid) {
          ok = false;
          break;
        }
        zlo = std::min(zlo, dest[i].depth);
        zhi = std::max(zhi, dest[i].depth);
      }
      if (!ok || zhi - zlo > max_gap) continue;
      const Pixel& p00 = dest[idx[0]].pixel;
      const Pixel& p10 = dest[idx[1]].pixel;
      const Pixel& p01 = dest[idx[2]].pixel;
      const Pixel& p11 = dest[idx[3]].pixel;
      rasterize_triangle(p00, p10, p11, w, h, covered);
      rasterize_triangle(p00, p11, p01, w, h, covered);
    }
  }
  return covered;
}

}  // namespace

SplatResult forward_warp_image(const Image& img, const DepthMap& depth, const Pose& pose, const CameraIntrinsics& K,
                               const SplatOptions& opts, Exec exec) {
  require_same_size(img, depth, "forward_warp_image");
  const int w = img.width(), h = img.height(), ch = img.channels();

  // Destination of every source pixel; pure per pixel.
  std::vector<WarpedPixel> dest(static_cast<std::size_t>(w) * h);
  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (!depth.valid(u, v)) continue;
      dest[static_cast<std::size_t>(v) * w + u] = warp_pixel_to_canonical(
          {static_cast<double>(u), static_cast<double>(v)}, depth.at(u, v), pose, K);
    }
  });

  struct Tap {
    int index;
    double weight;
  };
  auto taps = [&](const WarpedPixel& d, Tap (&out)[4]) {
    const int x0 = static_cast<int>(std::floor(d.pixel.u)), y0 = static_cast<int>(std::floor(d.pixel.v));
    const double fx = d.pixel.u - x0, fy = d.pixel.v - y0;
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    for (int k = 0; k < 4; ++k) {
      const bool inside = xs[k] >= 0 && xs[k] < w && ys[k] >= 0 && ys[k] < h;
      out[k] = {inside ? ys[k] * w + xs[k] : -1, ws[k]};
    }
  };
  auto usable = [&](const WarpedPixel& d) {
    return d.valid && d.pixel.u > -1.0 && d.pixel.u < w && d.pixel.v > -1.0 && d.pixel.v < h;
  };

  // Pass 1: nearest surface per destination pixel.
  std::vector<double> zmin(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  for (const WarpedPixel& d : dest) {
    if (!usable(d)) continue;
    Tap t[4];
    taps(d, t);
    for (const Tap& tap : t)
      if (tap.index >= 0 && tap.weight >= opts.min_depth_test_weight) zmin[tap.index] = std::min(zmin[tap.index], d.depth);
  }

  // Pass 2: blend contributions that lie on the nearest surface.
  std::vector<double> wsum(static_cast<std::size_t>(w) * h, 0.0), zsum(wsum.size(), 0.0);
  std::vector<double> csum(wsum.size() * ch, 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const WarpedPixel& d = dest[static_cast<std::size_t>(v) * w + u];
      if (!usable(d)) continue;
      Tap t[4];
      taps(d, t);
      const auto src = img.pixel(u, v);
      for (const Tap& tap : t) {
        if (tap.index < 0 || tap.weight <= 0.0 || d.depth > zmin[tap.index] + opts.z_tolerance) continue;
        wsum[tap.index] += tap.weight;
        zsum[tap.index] += tap.weight * d.depth;
        for (int k = 0; k < ch; ++k) csum[static_cast<std::size_t>(tap.index) * ch + k] += tap.weight * src[k];
      }
    }
  }

  std::vector<char> covered;
  if (opts.mesh_coverage) covered = rasterize_coverage(dest, depth, w, h, opts.mesh_max_depth_gap);

  SplatResult out{Image(w, h, ch), DepthMap(w, h), Mask(w, h)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      if (wsum[i] < opts.hit_threshold) continue;
      if (opts.mesh_coverage && !covered[i]) continue;
      out.hit.set(u, v, true);
      out.depth.set(u, v, zsum[i] / wsum[i]);
      for (int k = 0; k < ch; ++k) out.image.at(u, v, k) = static_cast<float>(csum[i * ch + k] / wsum[i]);
    }
  }
  fill_holes_nearest(out.image, out.hit);
  return out;
}

void fill_holes_nearest(Image& img, const Mask& mask) {
  require_same_size(img, mask, "fill_holes_nearest");
  const int w = img.width(), h = img.height();
  std::vector<int> source(static_cast<std::size_t>(w) * h, -1);
  std::deque<int> queue;
  for (int i = 0; i < w * h; ++i) {
    if (mask.values()[i]) {
      source[i] = i;
      queue.push_back(i);
    }
  }
  if (queue.empty()) return;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const int u = i % w, v = i / w;
    const int nb[4][2] = {{u - 1, v}, {u + 1, v}, {u, v - 1}, {u, v + 1}};
    for (const auto& n : nb) {
      if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
      const int j = n[1] * w + n[0];
      if (source[j] >= 0) continue;
      source[j] = source[i];
      queue.push_back(j);
    }
  }
  for (int i = 0; i < w * h; ++i) {
    if (mask.values()[i]) continue;
    const int s = source[i];
    for (int k = 0; k < img.channels(); ++k) img.values()[static_cast<std::size_t>(i) * img.channels() + k] =
        img.values()[static_cast<std::size_t>(s) * img.channels() + k];
  }
}

}  // namespace head3d
