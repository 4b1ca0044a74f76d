#pragma once

#include <optional>
#include <vector>

#include "head3d/geometry.hpp"
#include "head3d/image.hpp"

namespace head3d {

/// One video frame with optional per-frame geometry and head mask.
struct Frame {
  Image rgb;
  std::optional<DepthMap> depth;
  std::optional<Pose> pose;
  std::optional<Mask> mask;
};

using VideoSequence = std::vector<Frame>;

/// Throws std::invalid_argument if the sequence is empty or its frames and
/// sidecars disagree in size.
void validate_sequence(const VideoSequence& seq);

/// Depth restricted to a mask (invalid outside).
DepthMap mask_depth(const DepthMap& depth, const Mask& mask);

}  // namespace head3d
