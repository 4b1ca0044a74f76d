#include "head3d/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "head3d/video.hpp"

namespace head3d {

CanonicalHead mean_canonical(const std::vector<Image>& frames, const std::vector<DepthMap>& depths,
                             const std::vector<Pose>& poses, const CameraIntrinsics& K, const SplatOptions& splat,
                             Exec exec) {
  if (frames.empty()) throw std::invalid_argument("mean_canonical: no frames");
  if (depths.size() != frames.size() || poses.size() != frames.size())
    throw std::invalid_argument("mean_canonical: frames, depths and poses differ in count");
  const int w = frames.front().width(), h = frames.front().height(), ch = frames.front().channels();
  std::vector<double> rgb_sum(static_cast<std::size_t>(w) * h * ch, 0.0);
  std::vector<double> depth_sum(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<int> rgb_count(static_cast<std::size_t>(w) * h, 0), depth_count(rgb_count);

  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames.front())) throw std::invalid_argument("mean_canonical: frames differ in size");
    const SplatResult s = forward_warp_image(frames[i], depths[i], poses[i], K, splat, exec);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const std::size_t p = static_cast<std::size_t>(v) * w + u;
        if (!s.hit.at(u, v)) continue;
        for (int c = 0; c < ch; ++c) rgb_sum[p * ch + c] += s.image.at(u, v, c);
        ++rgb_count[p];
        if (s.depth.valid(u, v)) {
          depth_sum[p] += s.depth.at(u, v);
          ++depth_count[p];
        }
      }
  }

  CanonicalHead out{Image(w, h, ch), DepthMap(w, h), Mask(w, h)};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const std::size_t p = static_cast<std::size_t>(v) * w + u;
      if (rgb_count[p] == 0) continue;
      for (int c = 0; c < ch; ++c) out.rgb.at(u, v, c) = static_cast<float>(rgb_sum[p * ch + c] / rgb_count[p]);
      out.valid.set(u, v, true);
      if (depth_count[p] > 0) out.depth.set(u, v, depth_sum[p] / depth_count[p]);
    }
  fill_holes_nearest(out.rgb, out.valid);
  return out;
}

FeatureMap encode_head(const Image& rgb, const Mask& mask) {
  require_same_size(rgb, mask, "encode_head");
  const int ch = rgb.channels();
  FeatureMap out(rgb.width(), rgb.height(), ch + 1);
  for (int v = 0; v < rgb.height(); ++v)
    for (int u = 0; u < rgb.width(); ++u) {
      if (!mask.at(u, v)) continue;
      for (int c = 0; c < ch; ++c) out.at(u, v, c) = rgb.at(u, v, c);
      out.at(u, v, ch) = 1.0;
    }
  return out;
}

namespace {

constexpr double kMinResolutionWeight = 1e-3;

// Central differences where both neighbors carry flow, one-sided otherwise.
bool flow_derivative(const FlowField& flow, int u, int v, int du, int dv, Pixel& d) {
  const int w = flow.width(), h = flow.height();
  auto ok = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && flow.valid(x, y); };
  const bool fwd = ok(u + du, v + dv), bwd = ok(u - du, v - dv);
  if (!fwd && !bwd) return false;
  const Pixel a = fwd ? flow.target(u + du, v + dv) : flow.target(u, v);
  const Pixel b = bwd ? flow.target(u - du, v - dv) : flow.target(u, v);
  const double span = (fwd && bwd) ? 2.0 : 1.0;
  d = {(a.u - b.u) / span, (a.v - b.v) / span};
  return true;
}

double resolution_weight(const FlowField& flow, int u, int v, double power) {
  if (power == 0.0) return 1.0;
  Pixel du, dv;
  if (!flow_derivative(flow, u, v, 1, 0, du) || !flow_derivative(flow, u, v, 0, 1, dv)) return 1.0;
  const double det = std::abs(du.u * dv.v - dv.u * du.v);
  return std::max(std::pow(std::min(det, 1.0), power), kMinResolutionWeight);
}

}  // namespace

FeatureMap warp_reference_feature(const FeatureMap& encoded, const DepthMap& reference_depth,
                                  const DepthMap& canonical_depth, const Pose& pose, const CameraIntrinsics& K,
                                  const CanonicalConfig& config, Exec exec) {
  require_same_size(encoded, reference_depth, "warp_reference_feature");
  require_same_size(encoded, canonical_depth, "warp_reference_feature");
  const int w = encoded.width(), h = encoded.height(), ch = encoded.channels(), m_ch = ch - 1;
  const FlowField flow = backward_flow_field(canonical_depth, pose, K, exec);
  FeatureMap out(w, h, ch);

  for_each_row(h, exec, [&](int v) {
    std::vector<double> s(ch);
    for (int u = 0; u < w; ++u) {
      if (!flow.valid(u, v)) continue;
      const Pixel q = flow.target(u, v);
      if (!(q.u > -1.0 && q.u < w && q.v > -1.0 && q.v < h)) continue;
      // Visibility: some footprint pixel of the reference must see the same
      // surface point.
      const double z = warp_pixel_to_target({double(u), double(v)}, canonical_depth.at(u, v), pose, K).depth;
      bool visible = false;
      const int u0 = static_cast<int>(std::floor(q.u)), v0 = static_cast<int>(std::floor(q.v));
      for (int dv = 0; dv <= 1 && !visible; ++dv)
        for (int du = 0; du <= 1 && !visible; ++du) {
          const int x = u0 + du, y = v0 + dv;
          if (x < 0 || y < 0 || x >= w || y >= h || !reference_depth.valid(x, y)) continue;
          visible = std::abs(reference_depth.at(x, y) - z) < config.occlusion_tolerance;
        }
      if (!visible) continue;

      // Bilinear sample of the encoded map (border clamped).
      const double qu = std::clamp(q.u, 0.0, double(w - 1)), qv = std::clamp(q.v, 0.0, double(h - 1));
      const int x0 = std::min(static_cast<int>(qu), w - 1), y0 = std::min(static_cast<int>(qv), h - 1);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fu = qu - x0, fv = qv - y0;
      for (int c = 0; c < ch; ++c) {
        s[c] = (1 - fu) * (1 - fv) * encoded.at(x0, y0, c) + fu * (1 - fv) * encoded.at(x1, y0, c) +
               (1 - fu) * fv * encoded.at(x0, y1, c) + fu * fv * encoded.at(x1, y1, c);
      }
      const double coverage = s[m_ch];
      if (coverage < config.min_mask_coverage) continue;
      const double weight = resolution_weight(flow, u, v, config.resolution_weight_power);
      for (int c = 0; c < m_ch; ++c) out.at(u, v, c) = weight * s[c] / coverage;
      out.at(u, v, m_ch) = weight;
    }
  });
  return out;
}

Image decode_head(const FeatureMap& hidden, double encoder_scale, const Image& fallback, const Mask& valid) {
  require_same_size(hidden, fallback, "decode_head");
  require_same_size(hidden, valid, "decode_head");
  const int ch = hidden.channels() - 1;
  if (ch != fallback.channels()) throw std::invalid_argument("decode_head: channel mismatch");
  constexpr double kLimit = 1.0 - 1e-15;
  auto atanh_safe = [&](double x) { return std::atanh(std::clamp(x, -kLimit, kLimit)); };
  const double unit = std::tanh(encoder_scale);
  Image out = fallback;
  for (int v = 0; v < hidden.height(); ++v)
    for (int u = 0; u < hidden.width(); ++u) {
      if (!valid.at(u, v)) continue;
      const double weight = atanh_safe(hidden.at(u, v, ch));
      if (weight < 0.5 * std::tanh(encoder_scale * kMinResolutionWeight)) continue;
      for (int c = 0; c < ch; ++c) {
        const double mean_squashed = atanh_safe(hidden.at(u, v, c)) / weight * unit;
        const double x = atanh_safe(mean_squashed) / encoder_scale;
        out.at(u, v, c) = static_cast<float>(std::clamp(x, 0.0, 1.0));
      }
    }
  return out;
}

CanonicalHead estimate_canonical(const std::vector<Image>& frames, const std::vector<Mask>& masks,
                                 const std::vector<DepthMap>& depths, const std::vector<Pose>& poses,
                                 const CameraIntrinsics& K, const CanonicalConfig& config, Exec exec) {
  if (frames.empty()) throw std::invalid_argument("estimate_canonical: no reference frames");
  if (masks.size() != frames.size() || depths.size() != frames.size() || poses.size() != frames.size())
    throw std::invalid_argument("estimate_canonical: frames, masks, depths and poses differ in count");
  std::vector<Image> heads;
  std::vector<DepthMap> head_depths;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require_same_size(frames[i], masks[i], "estimate_canonical");
    require_same_size(frames[i], depths[i], "estimate_canonical");
    heads.push_back(apply_mask(frames[i], masks[i]));
    head_depths.push_back(mask_depth(depths[i], masks[i]));
  }
  CanonicalHead mean = mean_canonical(heads, head_depths, poses, K, config.splat, exec);

  const ConvLSTMCell cell =
      config.cell ? *config.cell : ConvLSTMCell::pass_through(frames.front().channels() + 1, config.encoder_scale);
  std::vector<FeatureMap> warped;
  warped.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    warped.push_back(warp_reference_feature(encode_head(frames[i], masks[i]), head_depths[i], mean.depth, poses[i], K,
                                            config, exec));
  }
  const FeatureMap hidden = aggregate_recurrent(warped, cell, exec);
  if (hidden.channels() != frames.front().channels() + 1)
    throw std::invalid_argument("estimate_canonical: cell must produce rgb + weight channels");

  CanonicalHead out;
  out.rgb = decode_head(hidden, config.encoder_scale, mean.rgb, mean.valid);
  out.depth = std::move(mean.depth);
  out.valid = std::move(mean.valid);
  return out;
}

double symmetry_loss(const Image& img) {
  const int w = img.width(), ch = img.channels();
  double sum = 0.0;
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < ch; ++c) sum += std::abs(double(img.at(u, v, c)) - img.at(w - 1 - u, v, c));
  return sum / static_cast<double>(img.values().size());
}

double depth_smoothness_loss(const DepthMap& depth, const Image& img) {
  require_same_size(depth, img, "depth_smoothness_loss");
  const int ch = img.channels();
  auto term = [&](int du, int dv) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int v = 0; v + dv < depth.height(); ++v)
      for (int u = 0; u + du < depth.width(); ++u) {
        if (!depth.valid(u, v) || !depth.valid(u + du, v + dv)) continue;
        double g = 0.0;
        for (int c = 0; c < ch; ++c) g += std::abs(double(img.at(u + du, v + dv, c)) - img.at(u, v, c));
        sum += std::abs(depth.at(u + du, v + dv) - depth.at(u, v)) * std::exp(-g / ch);
        ++n;
      }
    return n ? sum / static_cast<double>(n) : 0.0;
  };
  return term(1, 0) + term(0, 1);
}

double head_recon_loss(const Image& predicted, const Image& target) {
  if (!predicted.same_shape(target)) throw std::invalid_argument("head_recon_loss: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.values().size(); ++i)
    sum += std::abs(double(predicted.values()[i]) - target.values()[i]);
  return sum / static_cast<double>(predicted.values().size());
}

GeoLossTerms geo_loss_terms(const Image& reconstructed, const Image& target, const Image& canonical_rgb,
                            const DepthMap& canonical_depth) {
  return {head_recon_loss(reconstructed, target), symmetry_loss(canonical_rgb),
          depth_smoothness_loss(canonical_depth, canonical_rgb)};
}

double geo_loss(const Image& reconstructed, const Image& target, const Image& canonical_rgb,
                const DepthMap& canonical_depth, const GeoLossWeights& weights) {
  if (weights.symmetry < 0.0 || weights.depth_smoothness < 0.0)
    throw std::invalid_argument("geo_loss: weights must be non-negative");
  return geo_loss_terms(reconstructed, target, canonical_rgb, canonical_depth).total(weights);
}

}  // namespace head3d
