#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace head3d {

/// Row-major interleaved raster. RGB frames carry values in [0,1]; feature
/// maps reuse the same container with an arbitrary channel count.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  float& at(int u, int v, int c) { return data_[index(u, v, c)]; }
  float at(int u, int v, int c) const { return data_[index(u, v, c)]; }

  std::span<float> pixel(int u, int v) { return {data_.data() + index(u, v, 0), static_cast<std::size_t>(channels_)}; }
  std::span<const float> pixel(int u, int v) const {
    return {data_.data() + index(u, v, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Per-pixel boolean raster.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  bool at(int u, int v) const { return data_[static_cast<std::size_t>(v) * width_ + u] != 0; }
  void set(int u, int v, bool value) { data_[static_cast<std::size_t>(v) * width_ + u] = value ? 1 : 0; }

  std::size_t count() const;
  std::vector<std::uint8_t>& values() { return data_; }
  const std::vector<std::uint8_t>& values() const { return data_; }

  bool same_shape(const Image& img) const { return width_ == img.width() && height_ == img.height(); }
  bool same_shape(const Mask& m) const { return width_ == m.width_ && height_ == m.height_; }

  Mask operator|(const Mask& other) const;
  Mask operator&(const Mask& other) const;
  Mask operator~() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Metric depth in meters with a validity mask. Stored in double so that
/// backprojection round trips stay well below a micro-pixel.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0, bool valid = false);

  int width() const { return width_; }
  int height() const { return height_; }

  double at(int u, int v) const { return values_[static_cast<std::size_t>(v) * width_ + u]; }
  bool valid(int u, int v) const { return mask_.at(u, v); }
  void set(int u, int v, double depth);
  void invalidate(int u, int v);

  const Mask& mask() const { return mask_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Image& img) const { return width_ == img.width() && height_ == img.height(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  Mask mask_;
};

/// Raises std::invalid_argument unless the rasters share width and height.
template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

Image flip_horizontal(const Image& img);
/// Multiplies every channel by the mask (zero outside).
Image apply_mask(const Image& img, const Mask& mask);
/// 2x box downsampling; odd trailing rows/columns are dropped.
Image downsample2(const Image& img);
Image clamp01(const Image& img);
/// Separable Gaussian with clamped borders; sigma in pixels, 0 copies.
Image gaussian_blur(const Image& img, double sigma);
/// Normalized convolution: blur(img * mask) / blur(mask). Zero where the
/// blurred mask vanishes; `coverage`, if given, receives blur(mask).
Image masked_gaussian_blur(const Image& img, const Mask& mask, double sigma, Image* coverage = nullptr);

}  // namespace head3d
