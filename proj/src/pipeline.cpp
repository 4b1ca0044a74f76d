#include "head3d/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace head3d {

namespace {

const Frame& require_oracle(const Frame& f, const char* what) {
  if (!f.depth || !f.pose || !f.mask) throw std::invalid_argument(std::string(what) + ": frame lacks depth, pose or mask");
  return f;
}

void check_in_front(const CanonicalHead& canonical, const Pose& pose, const CameraIntrinsics& K) {
  for (int v = 0; v < canonical.depth.height(); ++v)
    for (int u = 0; u < canonical.depth.width(); ++u) {
      if (!canonical.valid.at(u, v) || !canonical.depth.valid(u, v)) continue;
      const Eigen::Vector3d x = pose.apply(canonical.depth.at(u, v) * K.ray(u, v));
      if (x.z() <= kBehindCameraZ) throw std::invalid_argument("pose puts the head behind the camera");
    }
}

}  // namespace

ReferenceChoice select_references(int frame_count, const TransferConfig& config) {
  if (config.n < 1) throw std::invalid_argument("reference count must be >= 1");
  if (frame_count < config.n) throw std::invalid_argument("subject has fewer frames than the reference count");
  ReferenceChoice c;
  if (config.sampling == ReferenceSampling::seeded_random) {
    std::mt19937 rng(config.seed);
    std::vector<int> all(frame_count);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    c.references.assign(all.begin(), all.begin() + config.n);
    std::sort(c.references.begin(), c.references.end());
    c.s_ref = std::uniform_int_distribution<int>(0, frame_count - 1)(rng);
    return c;
  }
  c.s_ref = (frame_count - 1) / 2;
  if (config.n == 1) {
    c.references = {c.s_ref};
    return c;
  }
  for (int k = 0; k < config.n; ++k)
    c.references.push_back(static_cast<int>(std::lround(static_cast<double>(k) * (frame_count - 1) / (config.n - 1))));
  return c;
}

CanonicalHead build_canonical(const VideoSequence& subject, const std::vector<int>& references,
                              const CameraIntrinsics& K, const TransferConfig& config) {
  std::vector<Image> frames;
  std::vector<Mask> masks;
  std::vector<DepthMap> depths;
  std::vector<Pose> poses;
  for (int i : references) {
    const Frame& f = require_oracle(subject.at(i), "build_canonical");
    frames.push_back(f.rgb);
    masks.push_back(*f.mask);
    depths.push_back(mask_depth(*f.depth, *f.mask));
    poses.push_back(*f.pose);
  }
  if (config.use_mean_canonical) {
    std::vector<Image> heads;
    for (std::size_t i = 0; i < frames.size(); ++i) heads.push_back(apply_mask(frames[i], masks[i]));
    return mean_canonical(heads, depths, poses, K, config.canonical.splat, config.exec);
  }
  return estimate_canonical(frames, masks, depths, poses, K, config.canonical, config.exec);
}

SynthesizedFrame synthesize_view(const CanonicalHead& canonical, const Frame& reference, const Pose& pose,
                                 const CameraIntrinsics& K, const TransferConfig& config) {
  require_oracle(reference, "synthesize_view");
  check_in_front(canonical, pose, K);
  SynthesizedFrame out;
  out.head = transform_canonical(canonical, pose, K, config.splat, config.exec);
  const DepthMap ref_depth = mask_depth(*reference.depth, *reference.mask);
  OracleFusionOptions fopts = config.fusion;
  fopts.disable_canonical_head = fopts.disable_canonical_head || config.disable_canonical_head;
  out.prediction = oracle_fusion_predictor({reference.rgb, ref_depth, *reference.pose, *reference.mask},
                                           {pose, out.head.depth, out.head.valid}, K, fopts, config.exec);

  const WarpedImage warped = warp_image_backward(reference.rgb, out.prediction.flow_ref, config.exec);
  Mask background(K.width, K.height);
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u)
      background.set(u, v, !out.head.depth.valid(u, v) && !reference.mask->at(u, v) && warped.valid.at(u, v));

  FusionInputs in{out.head.rgb, reference.rgb, decoder_feature(warped.image, background, config.decoder_sigma),
                  out.prediction.flow_head, out.prediction.flow_ref};
  out.rgb = clamp01(fuse(in, out.prediction.attention, config.exec));
  out.valid = ~out.prediction.disoccluded;
  return out;
}

Image novel_view(const CanonicalHead& canonical, const Pose& pose, const Frame& reference, const CameraIntrinsics& K,
                 const TransferConfig& config) {
  return synthesize_view(canonical, reference, pose, K, config).rgb;
}

TransferResult transfer(const VideoSequence& subject, const VideoSequence& driving, const TransferConfig& config,
                        const CameraIntrinsics& K) {
  validate_sequence(subject);
  validate_sequence(driving);
  if (subject.front().rgb.width() != K.width || subject.front().rgb.height() != K.height ||
      driving.front().rgb.width() != K.width || driving.front().rgb.height() != K.height)
    throw std::invalid_argument("transfer: frame size differs from the camera intrinsics");

  TransferResult res;
  res.choice = select_references(static_cast<int>(subject.size()), config);
  res.canonical = build_canonical(subject, res.choice.references, K, config);
  const Frame& reference = require_oracle(subject.at(res.choice.s_ref), "transfer");

  std::optional<Pose> previous;
  for (const Frame& d : driving) {
    FrameReport report;
    Frame out;
    try {
      if (config.estimator == PoseEstimator::oracle) {
        if (!d.pose) throw std::runtime_error("driving frame has no pose for the oracle estimator");
        report.pose = *d.pose;
      } else {
        if (!d.mask) throw std::runtime_error("driving frame has no head mask for the photometric estimator");
        // Track from the previous frame's estimate.
        report.estimate = estimate_pose_photometric(res.canonical, d.rgb, *d.mask, K,
                                                    previous.value_or(Pose::identity()), config.solver);
        report.pose = report.estimate->pose;
        previous = report.pose;
      }
      SynthesizedFrame s = synthesize_view(res.canonical, reference, report.pose, K, config);
      out.rgb = std::move(s.rgb);
      out.mask = std::move(s.valid);
      out.pose = report.pose;
    } catch (const std::exception& e) {
      report.flagged = true;
      report.error = e.what();
      out.rgb = reference.rgb;
      out.mask = Mask(K.width, K.height, true);
    }
    res.frames.push_back(std::move(out));
    res.reports.push_back(std::move(report));
  }
  return res;
}

double masked_mse(const Image& a, const Image& b, const Mask& mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("masked_mse: shape mismatch");
  require_same_size(a, mask, "masked_mse");
  double sum = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < a.height(); ++v)
    for (int u = 0; u < a.width(); ++u) {
      if (!mask.at(u, v)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = double(a.at(u, v, c)) - b.at(u, v, c);
        sum += d * d;
      }
      n += a.channels();
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double metric_mse(const VideoSequence& a, const VideoSequence& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("metric_mse: sequences differ in length");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].rgb.same_shape(b[i].rgb)) throw std::invalid_argument("metric_mse: frame size mismatch");
    for (std::size_t k = 0; k < a[i].rgb.values().size(); ++k) {
      const double d = double(a[i].rgb.values()[k]) - b[i].rgb.values()[k];
      sum += d * d;
    }
    n += a[i].rgb.values().size();
  }
  return sum / static_cast<double>(n);
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double metric_psnr(const VideoSequence& a, const VideoSequence& b) { return psnr_from_mse(metric_mse(a, b)); }

TrajectorySpec default_ablation_trajectory() {
  TrajectorySpec t;
  for (double yaw : {-20.0, 20.0, -20.0}) t.keys.push_back({yaw, 0.0, 0.0, Eigen::Vector3d::Zero()});
  t.frames = 40;
  return t;
}

AblationReport ablation_run(const SyntheticScene& scene, const TrajectorySpec& trajectory,
                            const std::vector<int>& n_values, const CameraIntrinsics& K, const TransferConfig& base) {
  if (n_values.empty()) throw std::invalid_argument("ablation_run: no reference counts");
  const VideoSequence video = render_sequence(scene, trajectory, K, base.exec);
  AblationReport report;
  auto run = [&](const std::string& label, int n, bool mean, bool no_head) {
    TransferConfig cfg = base;
    cfg.n = n;
    cfg.use_mean_canonical = mean;
    cfg.disable_canonical_head = no_head;
    cfg.estimator = PoseEstimator::oracle;
    const TransferResult r = transfer(video, video, cfg, K);
    AblationRow row{label, n, mean, no_head, metric_mse(r.frames, video), 0.0, kPsnrCap};
    row.psnr = psnr_from_mse(row.mse);
    for (std::size_t i = 0; i < video.size(); ++i)
      row.min_frame_psnr =
          std::min(row.min_frame_psnr, psnr_from_mse(masked_mse(r.frames[i].rgb, video[i].rgb, *r.frames[i].mask)));
    report.rows.push_back(row);
  };
  for (int n : n_values) run("N=" + std::to_string(n), n, false, false);
  const int n_max = *std::max_element(n_values.begin(), n_values.end());
  run("mean canonical (N=" + std::to_string(n_max) + ")", n_max, true, false);
  run("no canonical head (N=" + std::to_string(n_max) + ")", n_max, false, true);
  return report;
}

}  // namespace head3d
