// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "head3d/pipeline.hpp"
#include "test_support.hpp"

using namespace head3d;
using head3d::testing::default_camera;
using head3d::testing::random_image;
using head3d::testing::random_pose;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const SyntheticScene kScene;

const VideoSequence& ablation_video() {
  static const VideoSequence v = render_sequence(kScene, default_ablation_trajectory(), default_camera());
  return v;
}

Outcome geometry_round_trip() {
  const CameraIntrinsics K = default_camera();
  std::mt19937 rng(1001);
  std::uniform_real_distribution<double> px(0.0, 127.0), dd(0.8, 1.2);
  double worst = 0.0;
  bool all_valid = true;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng, 30.0, 0.2);
    const Pixel q{px(rng), px(rng)};
    const WarpedPixel c = warp_pixel_to_canonical(q, dd(rng), p, K);
    const WarpedPixel back = warp_pixel_to_target(c.pixel, c.depth, p, K);
    all_valid = all_valid && c.valid && back.valid;
    worst = std::max({worst, std::abs(back.pixel.u - q.u), std::abs(back.pixel.v - q.v)});
  }
  const double secs = seconds_since(t0);
  return {all_valid && worst < 1e-6 && secs < 1.0, fmt("max error %.3g px (tol 1e-6), %.4f s (limit 1 s)", worst, secs)};
}

Outcome intrinsics() {
  const CameraIntrinsics k = intrinsics_from_fov(128, 128, 10.0);
  const double expected = 127.0 / (2.0 * std::tan(5.0 * std::acos(-1.0) / 180.0));
  const double rel = std::abs(k.f - expected) / expected;
  return {k.cu == 63.5 && k.cv == 63.5 && rel < 1e-9,
          fmt("c = (%.17g, %.17g), f = %.12f, relative error %.3g (tol 1e-9)", k.cu, k.cv, k.f, rel)};
}

Outcome flow_consistency() {
  const CameraIntrinsics K = default_camera();
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> dd(0.8, 1.2);
  double dev = 0.0;
  for (int n = 0; n < 20; ++n) {
    DepthMap d(K.width, K.height);
    for (int v = 0; v < K.height; ++v)
      for (int u = 0; u < K.width; ++u) d.set(u, v, dd(rng));
    const Pose p = random_pose(rng, 30.0, 0.2);
    const FlowField f = backward_flow_field(d, p, K);
    for (int v = 0; v < K.height; ++v)
      for (int u = 0; u < K.width; ++u) {
        const WarpedPixel w = warp_pixel_to_target({double(u), double(v)}, d.at(u, v), p, K);
        // The field stores grid + flow as absolute targets.
        dev = std::max({dev, std::abs(f.target(u, v).u - w.pixel.u), std::abs(f.target(u, v).v - w.pixel.v)});
      }
  }
  return {dev == 0.0, fmt("max deviation %.3g over 20 configurations (tol 0)", dev)};
}

Outcome self_reconstruction() {
  const CameraIntrinsics K = default_camera();
  const VideoSequence& video = ablation_video();
  TransferConfig cfg;
  cfg.n = 5;
  cfg.exec = Exec::serial;
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  const TransferResult r = transfer(video, video, cfg, K);
  const double secs = seconds_since(t0);
  omp_set_num_threads(threads);
  double worst = kPsnrCap;
  bool ok = r.frames.size() == 40 && K.width == 128 && K.height == 128;
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    ok = ok && !r.reports[i].flagged && r.frames[i].mask.has_value();
    if (!r.frames[i].mask) continue;
    worst = std::min(worst, psnr_from_mse(masked_mse(r.frames[i].rgb, video[i].rgb, *r.frames[i].mask)));
  }
  return {ok && worst >= 30.0 && secs < 60.0,
          fmt("40 frames, worst PSNR %.2f dB (min 30), %.1f s single-threaded (limit 60 s)", worst, secs)};
}

Outcome photometric_recovery() {
  const CameraIntrinsics K = default_camera();
  std::vector<Image> frames;
  std::vector<Mask> masks;
  std::vector<DepthMap> depths;
  std::vector<Pose> poses;
  for (double yaw : {-20.0, -10.0, 0.0, 10.0, 20.0}) {
    const Pose p = head_pose({yaw}, kScene.head_distance);
    const Render r = render_frame(kScene, p, K);
    frames.push_back(r.rgb);
    masks.push_back(r.head);
    depths.push_back(mask_depth(r.depth, r.head));
    poses.push_back(p);
  }
  const CanonicalHead canon = estimate_canonical(frames, masks, depths, poses, K);
  PoseSolverOptions opts;
  opts.pivot_depth = kScene.head_distance;

  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> ang(-20.0, 20.0), tr(-0.01, 0.01);
  int good = 0;
  double worst_time = 0.0;
  for (int i = 0; i < 25; ++i) {
    const EulerPose truth{ang(rng), ang(rng), 0.0, Eigen::Vector3d(tr(rng), tr(rng), tr(rng))};
    const Pose gt = head_pose(truth, kScene.head_distance);
    const Render target = render_frame(kScene, gt, K);
    const auto t0 = Clock::now();
    const PoseEstimate est = estimate_pose_photometric(canon, target.rgb, target.head, K, Pose::identity(), opts);
    worst_time = std::max(worst_time, seconds_since(t0));
    const double rot = rotation_angle_deg(est.pose.R.transpose() * gt.R);
    const double trans = (est.params.t - truth.t).norm();
    if (rot < 0.5 && trans < 0.01) ++good;
  }
  return {good >= 24 && worst_time < 2.0,
          fmt("%d/25 within 0.5 deg and 0.01 m (need 24), slowest solve %.2f s (limit 2 s)", good, worst_time)};
}

Outcome ablation_trend() {
  const AblationReport rep = ablation_run(kScene, default_ablation_trajectory(), {1, 5}, default_camera());
  const AblationRow *n1 = nullptr, *n5 = nullptr, *mean = nullptr, *no_head = nullptr;
  for (const AblationRow& row : rep.rows) {
    if (row.use_mean_canonical) mean = &row;
    else if (row.disable_canonical_head) no_head = &row;
    else if (row.n == 1) n1 = &row;
    else if (row.n == 5) n5 = &row;
  }
  if (!n1 || !n5 || !mean || !no_head) return {false, "ablation report is missing variants"};
  const bool pass = n5->mse <= n1->mse && n5->mse <= mean->mse && n5->mse <= no_head->mse;
  return {pass, fmt("mse N=5 %.6g, N=1 %.6g, mean canonical %.6g, no canonical head %.6g", n5->mse, n1->mse,
                    mean->mse, no_head->mse)};
}

Outcome attention_fusion() {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> logit(-60.0, 60.0);
  FeatureMap a(1000, 1, 1), b(1000, 1, 1), c(1000, 1, 1);
  for (auto* m : {&a, &b, &c})
    for (double& x : m->values()) x = logit(rng);
  const AttentionMaps att = normalize_attention(a, b, c);
  double sum_err = 0.0;
  for (int u = 0; u < 1000; ++u)
    sum_err = std::max(sum_err, std::abs(att.head.at(u, 0, 0) + att.ref.at(u, 0, 0) + att.dec.at(u, 0, 0) - 1.0));

  const int w = 24, h = 18;
  FusionInputs in{random_image(rng, w, h, 3), random_image(rng, w, h, 3), random_image(rng, w, h, 3),
                  FlowField::constant(w, h, 0.6, -0.35), FlowField::constant(w, h, -1.2, 0.4)};
  const FeatureMap one(w, h, 1, 1.0), zero(w, h, 1, 0.0);
  const bool one_hot = fuse(in, {one, zero, zero}).values() == warp_image_backward(in.e_head, in.flow_head).image.values() &&
                       fuse(in, {zero, one, zero}).values() == warp_image_backward(in.e_ref, in.flow_ref).image.values() &&
                       fuse(in, {zero, zero, one}).values() == in.e_dec.values();

  in.flow_head = FlowField::zero(w, h);
  in.flow_ref = FlowField::zero(w, h);
  std::normal_distribution<double> nd(0.0, 3.0);
  FeatureMap la(w, h, 1), lb(w, h, 1), lc(w, h, 1);
  for (auto* m : {&la, &lb, &lc})
    for (double& x : m->values()) x = nd(rng);
  const Image mix = fuse(in, normalize_attention(la, lb, lc));
  double bound_violation = 0.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int k = 0; k < 3; ++k) {
        const float x = in.e_head.at(u, v, k), y = in.e_ref.at(u, v, k), z = in.e_dec.at(u, v, k);
        const float m = mix.at(u, v, k);
        bound_violation = std::max({bound_violation, double(std::min({x, y, z}) - m), double(m - std::max({x, y, z}))});
      }
  return {sum_err <= 1e-6 && one_hot && bound_violation <= 1e-6,
          fmt("sum-to-one error %.3g (tol 1e-6), one-hot %s, convex bound violation %.3g (tol 1e-6)", sum_err,
              one_hot ? "bit-exact" : "MISMATCH", std::max(0.0, bound_violation))};
}

Outcome losses() {
  std::mt19937 rng(12);
  const Image img = random_image(rng, 11, 9, 3);
  Image mirrored = img;
  for (int v = 0; v < 9; ++v)
    for (int u = 0; u < 11; ++u)
      for (int c = 0; c < 3; ++c) mirrored.at(u, v, c) = img.at(std::min(u, 10 - u), v, c);
  const double sym = symmetry_loss(mirrored);

  const double flat = depth_smoothness_loss(DepthMap(11, 9, 1.1, true), img);
  DepthMap d(11, 9);
  std::uniform_real_distribution<double> dd(0.8, 1.2);
  for (int v = 0; v < 9; ++v)
    for (int u = 0; u < 11; ++u)
      if ((u + 2 * v) % 7 != 0) d.set(u, v, dd(rng));
  const double base = depth_smoothness_loss(d, img);
  double scale_err = 0.0;
  for (double alpha : {0.25, 3.0, 7.5}) {
    DepthMap s = d;
    for (double& x : s.values()) x *= alpha;
    scale_err = std::max(scale_err, std::abs(depth_smoothness_loss(s, img) - alpha * base));
  }

  const Image recon = random_image(rng, 11, 9, 3), target = random_image(rng, 11, 9, 3);
  const double expected = head_recon_loss(recon, target) + 0.1 * symmetry_loss(img) + 0.1 * depth_smoothness_loss(d, img);
  const GeoLossWeights w;
  const double total = geo_loss(recon, target, img, d);
  const bool exact = w.symmetry == 0.1 && w.depth_smoothness == 0.1 && total == expected;
  return {sym == 0.0 && flat == 0.0 && scale_err <= 1e-9 && exact,
          fmt("mirrored symmetry %.3g, constant smoothness %.3g, scale error %.3g (tol 1e-9), weighted sum %s", sym,
              flat, scale_err, exact ? "exact" : "MISMATCH")};
}

Outcome novel_view_checks() {
  const CameraIntrinsics K = default_camera();
  const VideoSequence& video = ablation_video();
  const TransferConfig cfg;
  const ReferenceChoice choice = select_references(static_cast<int>(video.size()), cfg);
  const CanonicalHead canonical = build_canonical(video, choice.references, K, cfg);
  const Frame& ref = video[choice.s_ref];

  std::vector<double> cols;
  for (int yaw = -30; yaw <= 30; yaw += 5) {
    const SynthesizedFrame s = synthesize_view(canonical, ref, head_pose({double(yaw)}, kScene.head_distance), K, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (int v = 0; v < K.height; ++v)
      for (int u = 0; u < K.width; ++u)
        if (s.head.valid.at(u, v)) {
          sum += u;
          ++n;
        }
    cols.push_back(n ? sum / n : std::nan(""));
  }
  const double sign = cols.back() > cols.front() ? 1.0 : -1.0;
  bool monotone = cols.size() == 13;
  for (std::size_t i = 1; i < cols.size(); ++i) monotone = monotone && sign * (cols[i] - cols[i - 1]) > 0.0;

  const SynthesizedFrame id = synthesize_view(canonical, ref, Pose::identity(), K, cfg);
  const double mae = head3d::testing::mean_abs_diff(id.rgb, canonical.rgb, id.head.valid);
  return {monotone && mae < 0.01, fmt("centroid column %.2f -> %.2f %s, identity MAE %.3g (tol 0.01)", cols.front(),
                                      cols.back(), monotone ? "strictly monotone" : "NOT monotone", mae)};
}

Outcome sampling_gradient() {
  std::mt19937 rng(6);
  const Image a = random_image(rng, 20, 16, 3);
  std::uniform_int_distribution<int> cu(1, 17), cv(1, 13);
  std::uniform_real_distribution<double> frac(0.01, 0.99);
  const double h = 1e-4;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Pixel p{cu(rng) + frac(rng), cv(rng) + frac(rng)};
    const SampleGradient g = bilinear_sample_gradient(a, p);
    for (int c = 0; c < 3; ++c) {
      const double du = (bilinear_sample(a, {p.u + h, p.v})[c] - bilinear_sample(a, {p.u - h, p.v})[c]) / (2 * h);
      const double dv = (bilinear_sample(a, {p.u, p.v + h})[c] - bilinear_sample(a, {p.u, p.v - h})[c]) / (2 * h);
      worst = std::max({worst, std::abs(g.d_du[c] - du), std::abs(g.d_dv[c] - dv)});
    }
  }
  return {worst < 1e-3, fmt("max gradient error %.3g at 100 interior points (tol 1e-3)", worst)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"geometry round trip", geometry_round_trip},
      {"intrinsics from field of view", intrinsics},
      {"flow and warp consistency", flow_consistency},
      {"synthetic self-reconstruction", self_reconstruction},
      {"photometric pose recovery", photometric_recovery},
      {"ablation trend", ablation_trend},
      {"attention and fusion", attention_fusion},
      {"loss suite", losses},
      {"novel-view monotonicity", novel_view_checks},
      {"sampling gradient", sampling_gradient},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %-32s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(std::size(criteria)) - failures, std::size(criteria));
  return failures;
}
