#include "head3d/io.hpp"

#include <png.h>

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

namespace head3d {

namespace fs = std::filesystem;

namespace {

std::uint32_t png_format(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw std::invalid_argument("png: channel count must be 1, 3 or 4");
  }
}

std::vector<std::uint8_t> quantize(const Image& img) {
  std::vector<std::uint8_t> out(img.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float x = img.values()[i];
    const float c = std::isfinite(x) ? std::clamp(x, 0.0f, 1.0f) : 0.0f;
    out[i] = static_cast<std::uint8_t>(std::lround(c * 255.0f));
  }
  return out;
}

Image to_image(const std::vector<std::uint8_t>& bytes, int w, int h, int channels) {
  Image img(w, h, channels);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.values()[i] = bytes[i] / 255.0f;
  return img;
}

Image finish_read(png_image& image, int channels) {
  image.format = png_format(channels);
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png: " + msg);
  }
  return to_image(buffer, static_cast<int>(image.width), static_cast<int>(image.height), channels);
}

std::string frame_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, i, ext);
  return buf;
}

Image mask_image(const Mask& mask) {
  Image img(mask.width(), mask.height(), 1);
  for (int v = 0; v < mask.height(); ++v)
    for (int u = 0; u < mask.width(); ++u) img.at(u, v, 0) = mask.at(u, v) ? 1.0f : 0.0f;
  return img;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw std::invalid_argument("png: empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = png_format(img.channels());
  const std::vector<std::uint8_t> pixels = quantize(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("png: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("png: ") + image.message);
  out.resize(size);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, int channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw IoError(std::string("png: ") + image.message);
  return finish_read(image, channels);
}

void write_png(const fs::path& path, const Image& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot write " + path.string());
}

Image read_png(const fs::path& path, int channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError(path.string() + ": " + image.message);
  return finish_read(image, channels);
}

void write_mask_png(const fs::path& path, const Mask& mask) { write_png(path, mask_image(mask)); }

Mask read_mask_png(const fs::path& path) {
  const Image img = read_png(path, 1);
  Mask m(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) m.set(u, v, img.at(u, v, 0) > 127.5f / 255.0f);
  return m;
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "Pf\n" << depth.width() << ' ' << depth.height() << "\n-1.0\n";
  std::vector<float> row(depth.width());
  // PFM stores the bottom row first.
  for (int v = depth.height() - 1; v >= 0; --v) {
    for (int u = 0; u < depth.width(); ++u)
      row[u] = depth.valid(u, v) ? static_cast<float>(depth.at(u, v)) : 0.0f;
    if constexpr (std::endian::native == std::endian::big) {
      for (float& x : row) x = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(x)));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw IoError("cannot write " + path.string());
}

DepthMap read_pfm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  f >> magic >> w >> h >> scale;
  if (!f || magic != "Pf" || w < 1 || h < 1 || scale == 0.0)
    throw IoError(path.string() + ": not a single-channel PFM");
  f.get();  // the single whitespace byte ending the header
  const bool little = scale < 0.0;
  DepthMap d(w, h);
  std::vector<std::uint32_t> row(w);
  for (int v = h - 1; v >= 0; --v) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
    if (!f) throw IoError(path.string() + ": truncated PFM");
    for (int u = 0; u < w; ++u) {
      std::uint32_t bits = row[u];
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      const float x = std::bit_cast<float>(bits);
      if (std::isfinite(x) && x > 0.0f) d.set(u, v, x);
    }
  }
  return d;
}

Image depth_visualization(const DepthMap& depth) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (depth.valid(u, v)) {
        lo = std::min(lo, depth.at(u, v));
        hi = std::max(hi, depth.at(u, v));
      }
  Image img(depth.width(), depth.height(), 1);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (depth.valid(u, v)) img.at(u, v, 0) = static_cast<float>(1.0 - 0.8 * (depth.at(u, v) - lo) / span);
  return img;
}

nlohmann::json pose_to_json(const Pose& pose) {
  nlohmann::json R = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) R.push_back({pose.R(r, 0), pose.R(r, 1), pose.R(r, 2)});
  return {{"R", R}, {"t", {pose.t.x(), pose.t.y(), pose.t.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw IoError("pose: expected an object");
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    if (j.contains("t")) {
      const auto& jt = j.at("t");
      if (!jt.is_array() || jt.size() != 3) throw IoError("pose: t must hold 3 numbers");
      t = {jt[0].get<double>(), jt[1].get<double>(), jt[2].get<double>()};
    }
    if (j.contains("R")) {
      const auto& jr = j.at("R");
      std::vector<double> flat;
      for (const auto& row : jr) {
        if (row.is_array())
          for (const auto& x : row) flat.push_back(x.get<double>());
        else
          flat.push_back(row.get<double>());
      }
      if (flat.size() != 9) throw IoError("pose: R must hold 9 numbers");
      Pose p;
      for (int k = 0; k < 9; ++k) p.R(k / 3, k % 3) = flat[k];
      p.t = t;
      if (max_orthonormality_error(p.R) > 1e-6 || p.R.determinant() < 0.0) throw IoError("pose: R is not a rotation");
      return p;
    }
    if (j.contains("yaw") || j.contains("pitch") || j.contains("roll")) {
      const EulerPose e{j.value("yaw", 0.0), j.value("pitch", 0.0), j.value("roll", 0.0), t};
      if (j.contains("pivot")) return head_pose(e, j.at("pivot").get<double>());
      return pose_from_euler(e.yaw, e.pitch, e.roll, e.t);
    }
    throw IoError("pose: needs R or yaw/pitch/roll");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("pose: ") + e.what());
  }
}

VideoSequence read_video(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  nlohmann::json poses;
  if (fs::exists(dir / "poses.json")) {
    poses = read_json(dir / "poses.json");
    if (!poses.is_array()) throw IoError("poses.json: expected an array");
  }
  VideoSequence seq;
  for (std::size_t i = 0; fs::exists(dir / frame_name("frame", i, "png")); ++i) {
    Frame f;
    f.rgb = read_png(dir / frame_name("frame", i, "png"), 3);
    if (const fs::path p = dir / frame_name("depth", i, "pfm"); fs::exists(p)) f.depth = read_pfm(p);
    if (const fs::path p = dir / frame_name("mask", i, "png"); fs::exists(p)) f.mask = read_mask_png(p);
    if (i < poses.size() && !poses[i].is_null()) f.pose = pose_from_json(poses[i]);
    seq.push_back(std::move(f));
  }
  if (seq.empty()) throw IoError(dir.string() + ": no frame_0000.png");
  try {
    validate_sequence(seq);
  } catch (const std::invalid_argument& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return seq;
}

void write_video(const fs::path& dir, const VideoSequence& seq, const VideoCamera* camera) {
  fs::create_directories(dir);
  nlohmann::json poses = nlohmann::json::array();
  bool any_pose = false;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Frame& f = seq[i];
    write_png(dir / frame_name("frame", i, "png"), f.rgb);
    if (f.depth) write_pfm(dir / frame_name("depth", i, "pfm"), *f.depth);
    if (f.mask) write_mask_png(dir / frame_name("mask", i, "png"), *f.mask);
    poses.push_back(f.pose ? pose_to_json(*f.pose) : nlohmann::json());
    any_pose = any_pose || f.pose.has_value();
  }
  if (any_pose) write_json(dir / "poses.json", poses);
  if (camera)
    write_json(dir / "camera.json", {{"width", camera->width}, {"height", camera->height}, {"fov", camera->fov_deg}});
}

std::optional<VideoCamera> read_video_camera(const fs::path& dir) {
  if (!fs::exists(dir / "camera.json")) return std::nullopt;
  const nlohmann::json j = read_json(dir / "camera.json");
  try {
    return VideoCamera{j.at("width").get<int>(), j.at("height").get<int>(), j.at("fov").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("camera.json: ") + e.what());
  }
}

void save_session(const fs::path& dir, const Session& s) {
  if (!s.reference.depth || !s.reference.mask || !s.reference.pose)
    throw std::invalid_argument("session: reference frame lacks depth, mask or pose");
  fs::create_directories(dir);
  write_png(dir / "canonical_rgb.png", s.canonical.rgb);
  write_pfm(dir / "canonical_depth.pfm", s.canonical.depth);
  write_mask_png(dir / "canonical_valid.png", s.canonical.valid);
  write_png(dir / "reference_rgb.png", s.reference.rgb);
  write_pfm(dir / "reference_depth.pfm", *s.reference.depth);
  write_mask_png(dir / "reference_mask.png", *s.reference.mask);
  write_json(dir / "meta.json", {{"format", "head3d-session"},
                                 {"width", s.K.width},
                                 {"height", s.K.height},
                                 {"fov", s.fov_deg},
                                 {"pivot_depth", s.pivot_depth},
                                 {"created", s.created},
                                 {"reference_pose", pose_to_json(*s.reference.pose)}});
}

Session load_session(const fs::path& dir) {
  const nlohmann::json meta = read_json(dir / "meta.json");
  Session s;
  try {
    if (meta.value("format", "") != "head3d-session") throw IoError("meta.json: not a session");
    s.fov_deg = meta.at("fov").get<double>();
    s.K = intrinsics_from_fov(meta.at("width").get<int>(), meta.at("height").get<int>(), s.fov_deg);
    s.pivot_depth = meta.value("pivot_depth", 1.0);
    s.created = meta.value("created", "");
    s.reference.pose = pose_from_json(meta.at("reference_pose"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("meta.json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("meta.json: ") + e.what());
  }
  s.canonical.rgb = read_png(dir / "canonical_rgb.png", 3);
  s.canonical.depth = read_pfm(dir / "canonical_depth.pfm");
  s.canonical.valid = read_mask_png(dir / "canonical_valid.png");
  s.reference.rgb = read_png(dir / "reference_rgb.png", 3);
  s.reference.depth = read_pfm(dir / "reference_depth.pfm");
  s.reference.mask = read_mask_png(dir / "reference_mask.png");
  for (const Mask* m : {&s.canonical.valid, &*s.reference.mask})
    if (m->width() != s.K.width || m->height() != s.K.height) throw IoError("session: raster size differs from meta.json");
  if (!s.canonical.depth.same_shape(s.canonical.rgb) || !s.reference.depth->same_shape(s.reference.rgb) ||
      !s.canonical.valid.same_shape(s.canonical.rgb) || !s.reference.mask->same_shape(s.reference.rgb))
    throw IoError("session: raster sizes disagree");
  return s;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("cannot write " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto numeric = [](const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
  };
  // A column is right-aligned when every body cell in it is a number.
  std::vector<bool> right(width.size(), !rows.empty());
  for (const auto& r : rows)
    for (std::size_t c = 0; c < width.size(); ++c) right[c] = right[c] && c < r.size() && numeric(r[c]);
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c) out << "  ";
      out << (right[c] ? pad + cell : cell + pad);
    }
    std::string text = out.str();
    text.erase(text.find_last_not_of(' ') + 1);
    out.str(text);
    out.seekp(0, std::ios::end);
    out << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace head3d
