#pragma once

#include <Eigen/Core>
#include <vector>

#include "head3d/exec.hpp"
#include "head3d/image.hpp"

namespace head3d {

/// Subpixel location; u = column, v = row, pixel centers at integers.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole camera with square pixels and the principal point at the image
/// center.
struct CameraIntrinsics {
  double f = 1.0;
  double cu = 0.0;
  double cv = 0.0;
  int width = 0;
  int height = 0;

  /// Ray through a pixel with unit z component.
  Eigen::Vector3d ray(double u, double v) const { return {(u - cu) / f, (v - cv) / f, 1.0}; }

  /// Intrinsics of the 2x box-downsampled image (pixel i covers 2i, 2i+1).
  CameraIntrinsics half() const;
};

CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg);

/// Rigid transform mapping canonical camera-space points X_c to X = R X_c + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + t; }
};

/// Head pose in Euler form. Angles in degrees, translation in meters.
struct EulerPose {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// R = R_z(roll) * R_x(pitch) * R_y(yaw), right-handed about the camera axes
/// (x right, y down, z forward). The translation is copied unchanged.
Pose pose_from_euler(double yaw_deg, double pitch_deg, double roll_deg, const Eigen::Vector3d& t);
Eigen::Matrix3d rotation_from_euler(double yaw_deg, double pitch_deg, double roll_deg);
/// Inverse of rotation_from_euler; pitch in [-90, 90].
void euler_from_rotation(const Eigen::Matrix3d& R, double& yaw_deg, double& pitch_deg, double& roll_deg);

/// Rotation about a pivot at `pivot_depth` meters on the optical axis, then
/// a translation of `e.t`. The resulting camera-space transform is
/// {R, pivot - R pivot + t}.
Pose head_pose(const EulerPose& e, double pivot_depth);
/// Inverse of head_pose for a fixed pivot.
EulerPose head_pose_params(const Pose& p, double pivot_depth);

/// Applies b first, then a.
Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);
/// Projects R back onto SO(3) (nearest rotation in Frobenius norm).
Pose orthonormalize(const Pose& p);
/// Geodesic angle of a rotation, degrees.
double rotation_angle_deg(const Eigen::Matrix3d& R);
double max_orthonormality_error(const Eigen::Matrix3d& R);

/// Result of a per-pixel warp. `depth` is the z of the transformed point in
/// the destination camera; `valid` is false when that point is behind the
/// camera (z <= 1e-6 m).
struct WarpedPixel {
  Pixel pixel;
  double depth = 0.0;
  bool valid = false;
};

inline constexpr double kBehindCameraZ = 1e-6;

/// Reference pixel to canonical pixel: q_c ~ K R^T (d K^-1 q - t).
/// Throws std::invalid_argument for d <= 0.
WarpedPixel warp_pixel_to_canonical(Pixel q, double depth, const Pose& pose, const CameraIntrinsics& K);
/// Canonical pixel to target pixel: q ~ K (d_c R K^-1 q_c + t).
WarpedPixel warp_pixel_to_target(Pixel qc, double depth, const Pose& pose, const CameraIntrinsics& K);

/// Dense backward flow stored on the destination grid. The field keeps the
/// absolute sampling position of every destination pixel, so
/// `target(u,v)` is exactly what the producing warp computed and
/// `displacement(u,v) = target(u,v) - (u,v)`.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);

  static FlowField zero(int width, int height);
  static FlowField constant(int width, int height, double du, double dv);

  int width() const { return width_; }
  int height() const { return height_; }

  Pixel target(int u, int v) const { return targets_[idx(u, v)]; }
  Pixel displacement(int u, int v) const {
    const Pixel p = targets_[idx(u, v)];
    return {p.u - u, p.v - v};
  }
  bool valid(int u, int v) const { return mask_.at(u, v); }
  const Mask& mask() const { return mask_; }

  void set_target(int u, int v, Pixel p) {
    targets_[idx(u, v)] = p;
    mask_.set(u, v, true);
  }
  void invalidate(int u, int v) {
    targets_[idx(u, v)] = {static_cast<double>(u), static_cast<double>(v)};
    mask_.set(u, v, false);
  }

 private:
  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width_ + u; }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> targets_;
  Mask mask_;
};

/// For every canonical pixel with valid depth, the location it lands at in
/// the posed frame (warp_pixel_to_target). Invalid where the depth is
/// invalid or the point falls behind the camera.
FlowField backward_flow_field(const DepthMap& canonical_depth, const Pose& pose, const CameraIntrinsics& K,
                              Exec exec = Exec::parallel);

/// Flow on a posed grid pointing into the canonical frame
/// (warp_pixel_to_canonical of every valid pixel of `depth`).
FlowField canonical_flow_field(const DepthMap& depth, const Pose& pose, const CameraIntrinsics& K,
                               Exec exec = Exec::parallel);

/// Bilinear interpolation with border clamping. Values of all channels are
/// written to `out` (size = channels).
void bilinear_sample_into(const Image& img, Pixel p, std::span<double> out);
std::vector<double> bilinear_sample(const Image& img, Pixel p);

struct SampleGradient {
  std::vector<double> value;
  std::vector<double> d_du;
  std::vector<double> d_dv;
};
/// Value and coordinate partial derivatives; derivatives vanish along an
/// axis where the coordinate is clamped.
SampleGradient bilinear_sample_gradient(const Image& img, Pixel p);

struct WarpedImage {
  Image image;
  Mask valid;
};

/// out[p] = sample(img, flow.target(p)). Invalid (and zero) where the flow
/// is invalid or the 2x2 footprint lies entirely outside the image.
WarpedImage warp_image_backward(const Image& img, const FlowField& flow, Exec exec = Exec::parallel);

struct SplatOptions {
  /// Contributions within this distance of the nearest surface are blended.
  double z_tolerance = 0.01;
  /// A destination pixel counts as hit once its splat weight reaches this.
  double hit_threshold = 0.3;
  /// Contributions lighter than this do not take part in the z test.
  double min_depth_test_weight = 1e-3;
  /// Also require the destination pixel center to lie inside the projected
  /// surface: the triangles spanned by 2x2 blocks of valid source pixels
  /// whose depths differ by at most mesh_max_depth_gap. Keeps silhouettes
  /// from growing by the splat footprint. Isolated source pixels hit nothing.
  bool mesh_coverage = true;
  double mesh_max_depth_gap = 0.05;
};

struct SplatResult {
  Image image;     ///< splatted RGB; holes filled from the nearest hit pixel
  DepthMap depth;  ///< splatted destination depth; invalid in holes
  Mask hit;
};

/// Scatters every valid source pixel to its warp_pixel_to_canonical
/// destination with bilinear weights, resolving collisions with a z-buffer.
/// Passing the inverse pose splats canonical content into a posed view.
SplatResult forward_warp_image(const Image& img, const DepthMap& depth, const Pose& pose, const CameraIntrinsics& K,
                               const SplatOptions& opts = {}, Exec exec = Exec::parallel);

/// Fills every false pixel of `mask` with the value of the nearest true
/// pixel (4-connected breadth-first order). Leaves the image unchanged if
/// the mask is empty.
void fill_holes_nearest(Image& img, const Mask& mask);

}  // namespace head3d
