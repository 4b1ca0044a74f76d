#pragma once

#include <optional>
#include <string>
#include <vector>

#include "head3d/canonical.hpp"
#include "head3d/fusion.hpp"
#include "head3d/pose_solver.hpp"
#include "head3d/synth.hpp"
#include "head3d/video.hpp"

namespace head3d {

enum class PoseEstimator { oracle, photometric };
enum class ReferenceSampling { uniform, seeded_random };

struct TransferConfig {
  int n = 5;
  /// Use the plain mean canonical frame instead of recurrent aggregation.
  bool use_mean_canonical = false;
  /// Drop the transformed canonical head from fusion.
  bool disable_canonical_head = false;
  PoseEstimator estimator = PoseEstimator::oracle;
  ReferenceSampling sampling = ReferenceSampling::uniform;
  unsigned seed = 0;
  double decoder_sigma = 4.0;
  CanonicalConfig canonical;
  SplatOptions splat;
  OracleFusionOptions fusion;
  PoseSolverOptions solver;
  Exec exec = Exec::parallel;
};

struct ReferenceChoice {
  std::vector<int> references;  ///< ascending frame indices
  int s_ref = 0;
};

/// Uniform: N evenly spaced frames (the middle one for N = 1) and the
/// middle frame as s_ref. Seeded random: a reproducible draw of both.
ReferenceChoice select_references(int frame_count, const TransferConfig& config);

/// Subject frames must carry depth, pose and mask.
CanonicalHead build_canonical(const VideoSequence& subject, const std::vector<int>& references,
                              const CameraIntrinsics& K, const TransferConfig& config);

struct SynthesizedFrame {
  Image rgb;
  Mask valid;  ///< pixels explained by the head or the visible background
  TransformedHead head;
  FusionPrediction prediction;
};

/// Re-poses the canonical head, predicts flows and attention against the
/// reference frame and fuses. Throws std::invalid_argument when the pose
/// puts part of the head behind the camera.
SynthesizedFrame synthesize_view(const CanonicalHead& canonical, const Frame& reference, const Pose& pose,
                                 const CameraIntrinsics& K, const TransferConfig& config);

/// Pose-controllable novel view (same path as transfer).
Image novel_view(const CanonicalHead& canonical, const Pose& pose, const Frame& reference, const CameraIntrinsics& K,
                 const TransferConfig& config = {});

struct FrameReport {
  Pose pose;  ///< driving pose used (estimated or oracle)
  bool flagged = false;
  std::string error;
  std::optional<PoseEstimate> estimate;
};

struct TransferResult {
  VideoSequence frames;  ///< rgb plus mask = valid pixels, pose = driving pose
  std::vector<FrameReport> reports;
  CanonicalHead canonical;
  ReferenceChoice choice;
};

/// Frame-by-frame motion transfer. A frame whose pose cannot be obtained is
/// flagged and replaced by the reference frame.
TransferResult transfer(const VideoSequence& subject, const VideoSequence& driving, const TransferConfig& config,
                        const CameraIntrinsics& K);

inline constexpr double kPsnrCap = 99.0;

double metric_mse(const VideoSequence& a, const VideoSequence& b);
double metric_psnr(const VideoSequence& a, const VideoSequence& b);
double psnr_from_mse(double mse);
/// Mean squared error over the pixels of `mask` (all channels).
double masked_mse(const Image& a, const Image& b, const Mask& mask);

struct AblationRow {
  std::string label;
  int n = 0;
  bool use_mean_canonical = false;
  bool disable_canonical_head = false;
  double mse = 0.0;
  double psnr = 0.0;
  double min_frame_psnr = 0.0;  ///< over each frame's valid mask
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

/// Yaw -20 -> 20 -> -20 over 40 frames.
TrajectorySpec default_ablation_trajectory();

/// Self-reconstruction on the rendered trajectory for each N (full model)
/// plus the mean-canonical and no-canonical-head variants at the largest N.
AblationReport ablation_run(const SyntheticScene& scene, const TrajectorySpec& trajectory,
                            const std::vector<int>& n_values, const CameraIntrinsics& K,
                            const TransferConfig& base = {});

}  // namespace head3d
