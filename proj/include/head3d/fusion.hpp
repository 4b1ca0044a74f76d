#pragma once

#include "head3d/canonical.hpp"
#include "head3d/feature_map.hpp"
#include "head3d/geometry.hpp"
#include "head3d/image.hpp"

namespace head3d {

/// Per-pixel weights of the canonical-head, reference and decoder branches.
/// Single-channel maps; the three sum to one at every pixel.
struct AttentionMaps {
  FeatureMap head;
  FeatureMap ref;
  FeatureMap dec;
};

/// Per-pixel softmax over the three logit maps.
AttentionMaps normalize_attention(const FeatureMap& head_logits, const FeatureMap& ref_logits,
                                  const FeatureMap& dec_logits, Exec exec = Exec::parallel);

struct FusionInputs {
  Image e_head;
  Image e_ref;
  Image e_dec;
  FlowField flow_head;  ///< driving grid -> transformed canonical head
  FlowField flow_ref;   ///< driving grid -> reference frame
};

/// a_head * W(e_head, flow_head) + a_ref * W(e_ref, flow_ref) + a_dec * e_dec.
Image fuse(const FusionInputs& inputs, const AttentionMaps& attention, Exec exec = Exec::parallel);

/// Canonical head re-posed into a target view: depth and coverage
/// by forward splatting, colors by backward sampling the canonical image.
struct TransformedHead {
  Image rgb;
  DepthMap depth;
  Mask valid;
};
TransformedHead transform_canonical(const CanonicalHead& canonical, const Pose& pose, const CameraIntrinsics& K,
                                    const SplatOptions& splat = {}, Exec exec = Exec::parallel);

/// Flow on the grid of view `from` (with depth `depth`) pointing at the same
/// surface points seen from view `to`; both poses map canonical space into
/// their camera.
FlowField relative_pose_flow(const DepthMap& depth, const Pose& from, const Pose& to, const CameraIntrinsics& K,
                             Exec exec = Exec::parallel);

struct SubjectView {
  const Image& rgb;
  const DepthMap& depth;  ///< head depth (invalid off the head)
  const Pose& pose;
  const Mask& mask;
};

struct DrivingView {
  const Pose& pose;
  const DepthMap& depth;  ///< head depth in the driving view (invalid off the head)
  const Mask& head_valid;  ///< pixels the transformed canonical head covers
};

struct OracleFusionOptions {
  double logit = 4.0;
  /// Reference and canonical branches share head pixels below this relative
  /// rotation.
  double agree_deg = 2.0;
  /// Max depth mismatch for a reference pixel to count as the same surface.
  double occlusion_tolerance = 0.01;
  /// Disables the canonical-head branch entirely.
  bool disable_canonical_head = false;
};

struct FusionPrediction {
  FlowField flow_head;
  FlowField flow_ref;
  AttentionMaps attention;
  /// Driving pixels that neither the head nor the visible reference
  /// background explains.
  Mask disoccluded;
};

/// Geometry oracle standing in for the learned flow/attention predictor.
FusionPrediction oracle_fusion_predictor(const SubjectView& subject, const DrivingView& driving,
                                         const CameraIntrinsics& K, const OracleFusionOptions& options = {},
                                         Exec exec = Exec::parallel);

/// Inpainting prior: Gaussian blur (mask-normalized) of the reference
/// background warped into the driving view; nearest fill where the blur
/// reaches no source pixel.
Image decoder_feature(const Image& warped_reference, const Mask& source_mask, double sigma = 4.0);

/// Mean of the mean absolute difference at scales 1, 1/2, 1/4.
double frame_recon_loss(const Image& predicted, const Image& target);

/// Blue-to-red heat map of a single-channel attention map in [0,1].
Image attention_heatmap(const FeatureMap& attention);

}  // namespace head3d
