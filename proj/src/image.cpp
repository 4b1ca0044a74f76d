#include "head3d/image.hpp"

#include <algorithm>
#include <cmath>

#include "head3d/exec.hpp"

namespace head3d {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1 || channels < 1) {
    throw std::invalid_argument("Image: width, height and channels must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("Mask: width and height must be >= 1");
  data_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask Mask::operator|(const Mask& other) const {
  require_same_size(*this, other, "Mask::operator|");
  Mask out(width_, height_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = (data_[i] | other.data_[i]);
  return out;
}

Mask Mask::operator&(const Mask& other) const {
  require_same_size(*this, other, "Mask::operator&");
  Mask out(width_, height_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = (data_[i] & other.data_[i]);
  return out;
}

Mask Mask::operator~() const {
  Mask out(width_, height_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] ? 0 : 1;
  return out;
}

DepthMap::DepthMap(int width, int height, double fill, bool valid)
    : width_(width), height_(height), mask_(width, height, valid) {
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

void DepthMap::set(int u, int v, double depth) {
  values_[static_cast<std::size_t>(v) * width_ + u] = depth;
  mask_.set(u, v, depth > 0.0);
}

void DepthMap::invalidate(int u, int v) {
  values_[static_cast<std::size_t>(v) * width_ + u] = 0.0;
  mask_.set(u, v, false);
}

Image flip_horizontal(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  const int w = img.width();
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < img.channels(); ++c) out.at(u, v, c) = img.at(w - 1 - u, v, c);
  return out;
}

Image apply_mask(const Image& img, const Mask& mask) {
  require_same_size(img, mask, "apply_mask");
  Image out = img;
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      if (!mask.at(u, v))
        for (int c = 0; c < img.channels(); ++c) out.at(u, v, c) = 0.0f;
  return out;
}

Image downsample2(const Image& img) {
  const int w = std::max(1, img.width() / 2);
  const int h = std::max(1, img.height() / 2);
  Image out(w, h, img.channels());
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < img.channels(); ++c) {
        const int u0 = std::min(2 * u, img.width() - 1), u1 = std::min(2 * u + 1, img.width() - 1);
        const int v0 = std::min(2 * v, img.height() - 1), v1 = std::min(2 * v + 1, img.height() - 1);
        out.at(u, v, c) = 0.25f * (img.at(u0, v0, c) + img.at(u1, v0, c) + img.at(u0, v1, c) + img.at(u1, v1, c));
      }
  return out;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (float& x : out.values()) x = std::clamp(x, 0.0f, 1.0f);
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: negative sigma");
  if (sigma == 0.0) return img;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& x : k) x /= total;
  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<double> tmp(img.values().size());
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(std::clamp(u + i, 0, w - 1), v, c);
        tmp[(static_cast<std::size_t>(v) * w + u) * ch + c] = acc;
      }
  Image out(w, h, ch);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[i + r] * tmp[(static_cast<std::size_t>(std::clamp(v + i, 0, h - 1)) * w + u) * ch + c];
        out.at(u, v, c) = static_cast<float>(acc);
      }
  return out;
}

Image masked_gaussian_blur(const Image& img, const Mask& mask, double sigma, Image* coverage) {
  require_same_size(img, mask, "masked_gaussian_blur");
  const int ch = img.channels();
  Image stacked(img.width(), img.height(), ch + 1);
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      if (!mask.at(u, v)) continue;
      for (int c = 0; c < ch; ++c) stacked.at(u, v, c) = img.at(u, v, c);
      stacked.at(u, v, ch) = 1.0f;
    }
  const Image b = gaussian_blur(stacked, sigma);
  Image out(img.width(), img.height(), ch);
  if (coverage) *coverage = Image(img.width(), img.height(), 1);
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const float m = b.at(u, v, ch);
      if (coverage) coverage->at(u, v, 0) = m;
      if (m <= 1e-6f) continue;
      for (int c = 0; c < ch; ++c) out.at(u, v, c) = b.at(u, v, c) / m;
    }
  return out;
}

void set_thread_count(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#else
  (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace head3d
