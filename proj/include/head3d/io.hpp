#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "head3d/canonical.hpp"
#include "head3d/geometry.hpp"
#include "head3d/image.hpp"
#include "head3d/video.hpp"

namespace head3d {

/// Raised on unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit PNG of a 1, 3 or 4 channel image; values are clamped to [0,1] and
/// rounded to the nearest level.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes, int channels = 3);
void write_png(const std::filesystem::path& path, const Image& img);
/// Converts to `channels` (1, 3 or 4) on load.
Image read_png(const std::filesystem::path& path, int channels = 3);

/// Masks are stored as 0/255 grayscale; any level above 127 reads as set.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_png(const std::filesystem::path& path);

/// Single-channel little-endian PFM. Invalid pixels are written as 0 and
/// any non-positive or non-finite value reads back as invalid.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

/// Grayscale rendering for display: nearest valid depth white, farthest
/// dark gray, invalid black.
Image depth_visualization(const DepthMap& depth);

/// {"R": [[r00, r01, r02], [..], [..]], "t": [x, y, z]}.
nlohmann::json pose_to_json(const Pose& pose);
/// Accepts the matrix form (R nested 3x3 or flat 9) or Euler form
/// {"yaw", "pitch", "roll" in degrees, "t"}. Euler poses rotate about the
/// camera origin unless a "pivot" depth is given.
Pose pose_from_json(const nlohmann::json& j);

struct VideoCamera {
  int width = 128;
  int height = 128;
  double fov_deg = 10.0;
};

/// Directory layout: frame_0000.png ... plus optional depth_NNNN.pfm,
/// mask_NNNN.png, poses.json (array, null for unknown poses) and
/// camera.json.
VideoSequence read_video(const std::filesystem::path& dir);
void write_video(const std::filesystem::path& dir, const VideoSequence& seq,
                 const VideoCamera* camera = nullptr);
/// camera.json of a video directory, if present.
std::optional<VideoCamera> read_video_camera(const std::filesystem::path& dir);

struct Session {
  CanonicalHead canonical;
  Frame reference;
  CameraIntrinsics K;
  double fov_deg = 10.0;
  /// Depth of the head center on the optical axis; user poses rotate
  /// about it.
  double pivot_depth = 1.0;
  std::string created;  ///< ISO-8601 UTC
};

/// canonical_rgb.png, canonical_depth.pfm, canonical_valid.png,
/// reference_rgb.png, reference_depth.pfm, reference_mask.png, meta.json.
void save_session(const std::filesystem::path& dir, const Session& session);
Session load_session(const std::filesystem::path& dir);

std::string utc_timestamp();

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Aligned plain-text table; all-numeric columns are right-aligned.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace head3d
