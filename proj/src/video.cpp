#include "head3d/video.hpp"

#include <stdexcept>

namespace head3d {

void validate_sequence(const VideoSequence& seq) {
  if (seq.empty()) throw std::invalid_argument("video sequence is empty");
  const Image& first = seq.front().rgb;
  for (const Frame& f : seq) {
    if (f.rgb.width() != first.width() || f.rgb.height() != first.height() || f.rgb.channels() != first.channels())
      throw std::invalid_argument("video sequence: frames differ in size");
    if (f.depth && !f.depth->same_shape(f.rgb)) throw std::invalid_argument("video sequence: depth size mismatch");
    if (f.mask && !f.mask->same_shape(f.rgb)) throw std::invalid_argument("video sequence: mask size mismatch");
  }
}

DepthMap mask_depth(const DepthMap& depth, const Mask& mask) {
  require_same_size(depth, mask, "mask_depth");
  DepthMap out = depth;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (!mask.at(u, v)) out.invalidate(u, v);
  return out;
}

}  // namespace head3d
