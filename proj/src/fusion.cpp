#include "head3d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace head3d {

AttentionMaps normalize_attention(const FeatureMap& head_logits, const FeatureMap& ref_logits,
                                  const FeatureMap& dec_logits, Exec exec) {
  if (!head_logits.same_shape(ref_logits) || !head_logits.same_shape(dec_logits) || head_logits.channels() != 1)
    throw std::invalid_argument("normalize_attention: logit maps must be single-channel and equally sized");
  const int w = head_logits.width(), h = head_logits.height();
  AttentionMaps a{FeatureMap(w, h, 1), FeatureMap(w, h, 1), FeatureMap(w, h, 1)};
  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const double l0 = head_logits.at(u, v, 0), l1 = ref_logits.at(u, v, 0), l2 = dec_logits.at(u, v, 0);
      const double m = std::max({l0, l1, l2});
      const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m), e2 = std::exp(l2 - m);
      const double z = e0 + e1 + e2;
      a.head.at(u, v, 0) = e0 / z;
      a.ref.at(u, v, 0) = e1 / z;
      a.dec.at(u, v, 0) = e2 / z;
    }
  });
  return a;
}

Image fuse(const FusionInputs& in, const AttentionMaps& a, Exec exec) {
  if (!in.e_head.same_shape(in.e_ref) || !in.e_head.same_shape(in.e_dec))
    throw std::invalid_argument("fuse: feature maps differ in shape");
  require_same_size(in.e_head, a.head, "fuse");
  require_same_size(in.e_head, a.ref, "fuse");
  require_same_size(in.e_head, a.dec, "fuse");
  const WarpedImage wh = warp_image_backward(in.e_head, in.flow_head, exec);
  const WarpedImage wr = warp_image_backward(in.e_ref, in.flow_ref, exec);
  const int w = in.e_head.width(), h = in.e_head.height(), ch = in.e_head.channels();
  Image out(w, h, ch);
  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const double ah = a.head.at(u, v, 0), ar = a.ref.at(u, v, 0), ad = a.dec.at(u, v, 0);
      for (int c = 0; c < ch; ++c) {
        const double x = ah * wh.image.at(u, v, c) + ar * wr.image.at(u, v, c) + ad * in.e_dec.at(u, v, c);
        out.at(u, v, c) = static_cast<float>(x);
      }
    }
  });
  return out;
}

TransformedHead transform_canonical(const CanonicalHead& canonical, const Pose& pose, const CameraIntrinsics& K,
                                    const SplatOptions& splat, Exec exec) {
  require_same_size(canonical.rgb, canonical.depth, "transform_canonical");
  require_same_size(canonical.rgb, canonical.valid, "transform_canonical");
  const int w = canonical.rgb.width(), h = canonical.rgb.height();
  DepthMap source = canonical.depth;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (!canonical.valid.at(u, v)) source.invalidate(u, v);
  const SplatResult s = forward_warp_image(canonical.rgb, source, pose_inverse(pose), K, splat, exec);
  const FlowField to_canonical = canonical_flow_field(s.depth, pose, K, exec);

  TransformedHead out{Image(w, h, canonical.rgb.channels()), DepthMap(w, h), Mask(w, h)};
  for_each_row(h, exec, [&](int v) {
    std::vector<double> sample(canonical.rgb.channels());
    for (int u = 0; u < w; ++u) {
      if (!s.hit.at(u, v) || !to_canonical.valid(u, v)) continue;
      const Pixel q = to_canonical.target(u, v);
      const int nu = static_cast<int>(std::lround(q.u)), nv = static_cast<int>(std::lround(q.v));
      if (nu < 0 || nv < 0 || nu >= w || nv >= h || !canonical.valid.at(nu, nv)) continue;
      bilinear_sample_into(canonical.rgb, q, sample);
      for (int c = 0; c < canonical.rgb.channels(); ++c) out.rgb.at(u, v, c) = static_cast<float>(sample[c]);
      out.depth.set(u, v, s.depth.at(u, v));
      out.valid.set(u, v, true);
    }
  });
  return out;
}

FlowField relative_pose_flow(const DepthMap& depth, const Pose& from, const Pose& to, const CameraIntrinsics& K,
                             Exec exec) {
  return backward_flow_field(depth, pose_compose(to, pose_inverse(from)), K, exec);
}

Image decoder_feature(const Image& warped_reference, const Mask& source_mask, double sigma) {
  Image coverage;
  Image out = masked_gaussian_blur(warped_reference, source_mask, sigma, &coverage);
  Mask reached(out.width(), out.height());
  for (int v = 0; v < out.height(); ++v)
    for (int u = 0; u < out.width(); ++u) reached.set(u, v, coverage.at(u, v, 0) > 1e-3f);
  fill_holes_nearest(out, reached);
  return out;
}

FusionPrediction oracle_fusion_predictor(const SubjectView& subject, const DrivingView& driving,
                                         const CameraIntrinsics& K, const OracleFusionOptions& options,
                                         Exec exec) {
  require_same_size(subject.rgb, subject.depth, "oracle_fusion_predictor");
  require_same_size(subject.rgb, subject.mask, "oracle_fusion_predictor");
  require_same_size(subject.rgb, driving.depth, "oracle_fusion_predictor");
  require_same_size(subject.rgb, driving.head_valid, "oracle_fusion_predictor");
  const int w = subject.rgb.width(), h = subject.rgb.height();
  const Pose rel = pose_compose(subject.pose, pose_inverse(driving.pose));
  const bool poses_agree = rotation_angle_deg(rel.R) < options.agree_deg;
  const Pose rel_inverse = pose_inverse(rel);

  FusionPrediction out;
  out.flow_head = relative_pose_flow(driving.depth, driving.pose, driving.pose, K, exec);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (!driving.head_valid.at(u, v)) out.flow_head.invalidate(u, v);
  out.flow_ref = FlowField(w, h);
  out.disoccluded = Mask(w, h);
  FeatureMap lh(w, h, 1), lr(w, h, 1), ld(w, h, 1);

  const double L = options.logit;
  for_each_row(h, exec, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const bool head = driving.depth.valid(u, v);
      bool ref_ok = false;
      if (head) {
        const WarpedPixel wp = warp_pixel_to_target({double(u), double(v)}, driving.depth.at(u, v), rel, K);
        if (wp.valid && wp.pixel.u > -0.5 && wp.pixel.v > -0.5 && wp.pixel.u < w - 0.5 && wp.pixel.v < h - 0.5) {
          const int x = static_cast<int>(std::lround(wp.pixel.u)), y = static_cast<int>(std::lround(wp.pixel.v));
          ref_ok = subject.mask.at(x, y) && subject.depth.valid(x, y) &&
                   std::abs(subject.depth.at(x, y) - wp.depth) < options.occlusion_tolerance;
          if (ref_ok) out.flow_ref.set_target(u, v, wp.pixel);
        }
      } else {
        // Static camera and background: zero flow off the head.
        out.flow_ref.set_target(u, v, {double(u), double(v)});
      }
      // Off the transformed head the reference may still show the same head
      // point at the same pixel (driving pose close to the reference pose).
      bool ref_static = false;
      if (!head && subject.mask.at(u, v) && subject.depth.valid(u, v)) {
        const WarpedPixel back =
            warp_pixel_to_target({double(u), double(v)}, subject.depth.at(u, v), rel_inverse, K);
        ref_static = back.valid && std::hypot(back.pixel.u - u, back.pixel.v - v) < 0.5;
      }
      const bool hidden_background = !head && subject.mask.at(u, v) && !ref_static;
      const bool use_head = head && driving.head_valid.at(u, v) && !options.disable_canonical_head;
      const bool use_ref = (!head && !hidden_background) ||
                           (head && ref_ok && (poses_agree || options.disable_canonical_head));
      const bool use_dec = hidden_background || (head && !use_head && !use_ref);
      out.disoccluded.set(u, v, hidden_background);
      lh.at(u, v, 0) = use_head ? L : -L;
      lr.at(u, v, 0) = use_ref ? L : -L;
      ld.at(u, v, 0) = use_dec ? L : -L;
    }
  });
  out.attention = normalize_attention(lh, lr, ld, exec);
  return out;
}

double frame_recon_loss(const Image& predicted, const Image& target) {
  if (!predicted.same_shape(target)) throw std::invalid_argument("frame_recon_loss: shape mismatch");
  Image a = predicted, b = target;
  double total = 0.0;
  for (int s = 0; s < 3; ++s) {
    if (s > 0) {
      a = downsample2(a);
      b = downsample2(b);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) sum += std::abs(double(a.values()[i]) - b.values()[i]);
    total += sum / static_cast<double>(a.values().size());
  }
  return total / 3.0;
}

Image attention_heatmap(const FeatureMap& attention) {
  Image out(attention.width(), attention.height(), 3);
  for (int v = 0; v < attention.height(); ++v)
    for (int u = 0; u < attention.width(); ++u) {
      const double x = std::clamp(attention.at(u, v, 0), 0.0, 1.0);
      out.at(u, v, 0) = static_cast<float>(std::clamp(2.0 * x, 0.0, 1.0));
      out.at(u, v, 1) = static_cast<float>(1.0 - std::abs(2.0 * x - 1.0));
      out.at(u, v, 2) = static_cast<float>(std::clamp(2.0 - 2.0 * x, 0.0, 1.0));
    }
  return out;
}

}  // namespace head3d
