#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "head3d/image.hpp"

namespace head3d {

/// Double-precision multi-channel map used by the recurrent aggregator.
/// Interleaved layout, same indexing as Image.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1) throw std::invalid_argument("FeatureMap: empty shape");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  static FeatureMap from_image(const Image& img);
  Image to_image() const;

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }

  double& at(int u, int v, int c) { return data_[index(u, v, c)]; }
  double at(int u, int v, int c) const { return data_[index(u, v, c)]; }
  std::span<const double> pixel(int u, int v) const {
    return {data_.data() + index(u, v, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

 private:
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * width_ + u) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

inline FeatureMap FeatureMap::from_image(const Image& img) {
  FeatureMap f(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < img.values().size(); ++i) f.data_[i] = img.values()[i];
  return f;
}

inline Image FeatureMap::to_image() const {
  Image img(width_, height_, channels_);
  for (std::size_t i = 0; i < data_.size(); ++i) img.values()[i] = static_cast<float>(data_[i]);
  return img;
}

}  // namespace head3d
