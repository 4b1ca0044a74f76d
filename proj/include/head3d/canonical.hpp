#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "head3d/feature_map.hpp"
#include "head3d/geometry.hpp"
#include "head3d/image.hpp"

namespace head3d {

/// Canonical-pose head: RGB, depth and the pixels either is defined on.
struct CanonicalHead {
  Image rgb;
  DepthMap depth;
  Mask valid;
};

// ---------------------------------------------------------------------------
// ConvLSTM

enum class Gate : int { input = 0, forget = 1, output = 2, candidate = 3 };

/// One convolutional LSTM layer. Every gate convolves the concatenation
/// [input, previous hidden] with a kernel x kernel same-padded filter.
class ConvLSTMCell {
 public:
  ConvLSTMCell(int kernel, int input_channels, int hidden_channels);

  /// Gates that accumulate a running sum of the scaled, tanh-squashed input
  /// channels wherever the last (weight) channel is positive. Expects
  /// premultiplied inputs [c_0 * w, ..., c_{n-1} * w, w] and has
  /// hidden = input channels.
  static ConvLSTMCell pass_through(int input_channels, double input_scale, int kernel = 3);
  static ConvLSTMCell random(int kernel, int input_channels, int hidden_channels, std::mt19937& rng,
                             double scale = 0.5);

  int kernel() const { return kernel_; }
  int input_channels() const { return input_channels_; }
  int hidden_channels() const { return hidden_channels_; }
  int concat_channels() const { return input_channels_ + hidden_channels_; }

  double& weight(Gate g, int out, int in, int ky, int kx) { return weights_[weight_index(g, out, in, ky, kx)]; }
  double weight(Gate g, int out, int in, int ky, int kx) const { return weights_[weight_index(g, out, in, ky, kx)]; }
  double& bias(Gate g, int out) { return biases_[static_cast<int>(g) * hidden_channels_ + out]; }
  double bias(Gate g, int out) const { return biases_[static_cast<int>(g) * hidden_channels_ + out]; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& biases() { return biases_; }
  const std::vector<double>& biases() const { return biases_; }

  /// Flat binary: one JSON header line, then little-endian float64 weights
  /// followed by biases.
  void save(const std::filesystem::path& path) const;
  static ConvLSTMCell load(const std::filesystem::path& path);

 private:
  std::size_t weight_index(Gate g, int out, int in, int ky, int kx) const {
    return ((((static_cast<std::size_t>(g) * hidden_channels_ + out) * concat_channels() + in) * kernel_ + ky) *
                kernel_ +
            kx);
  }

  int kernel_;
  int input_channels_;
  int hidden_channels_;
  std::vector<double> weights_;  ///< [gate][out][in][ky][kx]
  std::vector<double> biases_;   ///< [gate][out]
};

struct AggregatorState {
  FeatureMap h;
  FeatureMap c;

  static AggregatorState zeros(int width, int height, int hidden_channels);
};

/// Post-activation gate maps of one step (i, f, o in (0,1), g in (-1,1)).
struct GateActivations {
  FeatureMap input, forget, output, candidate;
};

GateActivations convlstm_gates(const ConvLSTMCell& cell, const FeatureMap& input, const AggregatorState& state,
                               Exec exec = Exec::parallel);
AggregatorState convlstm_step(const ConvLSTMCell& cell, const FeatureMap& input, const AggregatorState& state,
                              Exec exec = Exec::parallel);
/// Folds convlstm_step over the list from the zero state and returns the
/// final hidden map.
FeatureMap aggregate_recurrent(const std::vector<FeatureMap>& warped_features, const ConvLSTMCell& cell,
                               Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// Canonical estimation

/// Forward-warps every frame into canonical space and averages RGB and
/// depth per pixel over the frames that hit it. Validity is the union of
/// the hit masks. Frames are used as given (mask them beforehand).
CanonicalHead mean_canonical(const std::vector<Image>& frames, const std::vector<DepthMap>& depths,
                             const std::vector<Pose>& poses, const CameraIntrinsics& K,
                             const SplatOptions& splat = {}, Exec exec = Exec::parallel);

struct CanonicalConfig {
  /// Scale applied before the candidate tanh; the decoder inverts it. Small
  /// values keep the tanh close to linear so weighted sums stay unbiased.
  double encoder_scale = 0.02;
  /// Max |reference depth - reprojected depth| for a canonical point to
  /// count as visible in a reference frame.
  double occlusion_tolerance = 0.01;
  /// Minimum interpolated head-mask coverage of a backward sample.
  double min_mask_coverage = 0.5;
  /// Samples are weighted by min(1, |det J|)^p, J being the Jacobian of the
  /// canonical-to-reference map, so views that see a region foreshortened
  /// count less. p = 0 gives a plain average.
  double resolution_weight_power = 2.0;
  SplatOptions splat;
  /// Optional replacement cell; must take 4 input channels and produce 4
  /// hidden channels. Default: ConvLSTMCell::pass_through(4, encoder_scale).
  std::optional<ConvLSTMCell> cell;
};

/// Head-image encoder: [rgb * mask, mask].
FeatureMap encode_head(const Image& rgb, const Mask& mask);
/// Warps an encoded reference onto the canonical grid and keeps the
/// samples that are visible in that reference. Output is premultiplied
/// [rgb * w, w] with w the resolution weight (0 where not visible).
FeatureMap warp_reference_feature(const FeatureMap& encoded, const DepthMap& reference_depth,
                                  const DepthMap& canonical_depth, const Pose& pose, const CameraIntrinsics& K,
                                  const CanonicalConfig& config, Exec exec = Exec::parallel);
/// Decoder matching ConvLSTMCell::pass_through: recovers the mean color
/// from the accumulated hidden map; `fallback` where nothing accumulated.
Image decode_head(const FeatureMap& hidden, double encoder_scale, const Image& fallback, const Mask& valid);

/// Mean canonical depth and validity, reference heads backward-warped onto
/// the canonical grid, aggregated by the ConvLSTM and decoded.
CanonicalHead estimate_canonical(const std::vector<Image>& frames, const std::vector<Mask>& masks,
                                 const std::vector<DepthMap>& depths, const std::vector<Pose>& poses,
                                 const CameraIntrinsics& K, const CanonicalConfig& config = {},
                                 Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// Losses

struct GeoLossWeights {
  double symmetry = 0.1;
  double depth_smoothness = 0.1;
};

/// Mean absolute difference between the image and its horizontal flip.
double symmetry_loss(const Image& img);
/// Edge-aware first-order smoothness. Each direction's forward-difference
/// term is averaged over the pixel pairs where both depths are valid, then
/// the two directions are summed.
double depth_smoothness_loss(const DepthMap& depth, const Image& img);
/// Mean absolute difference. Throws on shape mismatch.
double head_recon_loss(const Image& predicted, const Image& target);

struct GeoLossTerms {
  double reconstruction = 0.0;
  double symmetry = 0.0;
  double smoothness = 0.0;
  double total(const GeoLossWeights& w) const {
    return reconstruction + w.symmetry * symmetry + w.depth_smoothness * smoothness;
  }
};

GeoLossTerms geo_loss_terms(const Image& reconstructed, const Image& target, const Image& canonical_rgb,
                            const DepthMap& canonical_depth);
double geo_loss(const Image& reconstructed, const Image& target, const Image& canonical_rgb,
                const DepthMap& canonical_depth, const GeoLossWeights& weights = {});

}  // namespace head3d
