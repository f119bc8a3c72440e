#include "dvpmvs/scene_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dvp {
namespace fs = std::filesystem;

namespace layout {
std::string image(int id) { return "images/" + std::to_string(id) + ".png"; }
std::string corrected_image(int id) {
  return "corrected/" + std::to_string(id) + ".png";
}
std::string mono_depth(int id) {
  return "priors/" + std::to_string(id) + "_depth.pfm";
}
std::string mono_normal(int id) {
  return "priors/" + std::to_string(id) + "_normal.pfm";
}
std::string edge_map(int id) {
  return "priors/" + std::to_string(id) + "_edges.png";
}
std::string highlight_mask(int id) {
  return "priors/" + std::to_string(id) + "_highlight.png";
}
}  // namespace layout

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <typename T>
T byteswap_value(T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
}

struct PfmHeader {
  int channels = 0;
  int width = 0;
  int height = 0;
  bool little_endian = true;
};

PfmHeader read_pfm_header(std::istream& in, const fs::path& path) {
  std::string magic;
  in >> magic;
  PfmHeader h;
  if (magic == "Pf") {
    h.channels = 1;
  } else if (magic == "PF") {
    h.channels = 3;
  } else {
    throw IoError("not a PFM file: " + path.string());
  }
  double scale = 0.0;
  in >> h.width >> h.height >> scale;
  if (!in || h.width <= 0 || h.height <= 0 || scale == 0.0) {
    throw IoError("malformed PFM header: " + path.string());
  }
  h.little_endian = scale < 0.0;
  // Exactly one whitespace byte separates the header from the data.
  in.get();
  return h;
}

std::vector<float> read_pfm_data(const fs::path& path, int expected_channels,
                                 int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const PfmHeader h = read_pfm_header(in, path);
  if (h.channels != expected_channels) {
    throw IoError("unexpected channel count in " + path.string());
  }
  const size_t count =
      static_cast<size_t>(h.width) * h.height * static_cast<size_t>(h.channels);
  std::vector<float> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw IoError("truncated PFM data: " + path.string());
  const bool host_little = std::endian::native == std::endian::little;
  if (h.little_endian != host_little) {
    for (auto& v : raw) v = byteswap_value(v);
  }
  width = h.width;
  height = h.height;
  return raw;
}

void write_pfm_data(const float* rows_top_first, int width, int height,
                    int channels, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << (channels == 1 ? "Pf" : "PF") << '\n'
      << width << ' ' << height << '\n'
      << "-1.0" << '\n';
  const size_t row_len = static_cast<size_t>(width) * channels;
  std::vector<float> row(row_len);
  const bool host_little = std::endian::native == std::endian::little;
  for (int y = height - 1; y >= 0; --y) {
    std::memcpy(row.data(), rows_top_first + static_cast<size_t>(y) * row_len,
                row_len * sizeof(float));
    if (!host_little) {
      for (auto& v : row) v = byteswap_value(v);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row_len * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

struct PngPixels {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel
};

PngPixels read_png_rgb(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  PngPixels px;
  px.width = static_cast<int>(image.width);
  px.height = static_cast<int>(image.height);
  px.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return px;
}

PngPixels read_png_gray(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  PngPixels px;
  px.width = static_cast<int>(image.width);
  px.height = static_cast<int>(image.height);
  px.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return px;
}

void write_png_raw(const std::vector<std::uint8_t>& gray, int width,
                   int height, const fs::path& path) {
  ensure_parent(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, gray.data(), 0,
                               nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.f, 1.f);
  return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

void check_shape(const char* what, int view_id, int w, int h,
                 const CameraView& cam) {
  if (w != cam.width || h != cam.height) {
    std::ostringstream os;
    os << "view " << view_id << ": " << what << " is " << w << "x" << h
       << " but the image is " << cam.width << "x" << cam.height;
    throw ValidationError(os.str());
  }
}

// Ply scalar property types.
enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

PlyType parse_ply_type(const std::string& t, const fs::path& path) {
  static const std::map<std::string, PlyType> types = {
      {"char", PlyType::kI8},     {"int8", PlyType::kI8},
      {"uchar", PlyType::kU8},    {"uint8", PlyType::kU8},
      {"short", PlyType::kI16},   {"int16", PlyType::kI16},
      {"ushort", PlyType::kU16},  {"uint16", PlyType::kU16},
      {"int", PlyType::kI32},     {"int32", PlyType::kI32},
      {"uint", PlyType::kU32},    {"uint32", PlyType::kU32},
      {"float", PlyType::kF32},   {"float32", PlyType::kF32},
      {"double", PlyType::kF64},  {"float64", PlyType::kF64},
  };
  const auto it = types.find(t);
  if (it == types.end()) {
    throw IoError("unsupported PLY property type '" + t + "' in " +
                  path.string());
  }
  return it->second;
}

size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kI8:
    case PlyType::kU8:
      return 1;
    case PlyType::kI16:
    case PlyType::kU16:
      return 2;
    case PlyType::kI32:
    case PlyType::kU32:
    case PlyType::kF32:
      return 4;
    case PlyType::kF64:
      return 8;
  }
  return 0;
}

template <typename T>
double load_scalar(const char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) v = byteswap_value(v);
  return static_cast<double>(v);
}

double decode_ply_scalar(PlyType t, const char* p, bool swap) {
  switch (t) {
    case PlyType::kI8:
      return load_scalar<std::int8_t>(p, false);
    case PlyType::kU8:
      return load_scalar<std::uint8_t>(p, false);
    case PlyType::kI16:
      return load_scalar<std::int16_t>(p, swap);
    case PlyType::kU16:
      return load_scalar<std::uint16_t>(p, swap);
    case PlyType::kI32:
      return load_scalar<std::int32_t>(p, swap);
    case PlyType::kU32:
      return load_scalar<std::uint32_t>(p, swap);
    case PlyType::kF32:
      return load_scalar<float>(p, swap);
    case PlyType::kF64:
      return load_scalar<double>(p, swap);
  }
  return 0.0;
}

}  // namespace

int Scene::index_of(int view_id) const {
  for (size_t i = 0; i < views.size(); ++i) {
    if (views[i].camera.id == view_id) return static_cast<int>(i);
  }
  throw ValidationError("unknown view id " + std::to_string(view_id));
}

void validate_camera(const CameraView& view) {
  const std::string who = "view " + std::to_string(view.id) + ": ";
  if (std::abs(view.K(2, 2) - 1.0) > 1e-12 || view.K(2, 0) != 0.0 ||
      view.K(2, 1) != 0.0) {
    throw ValidationError(who + "intrinsic matrix must have last row [0 0 1]");
  }
  if (!(view.K(0, 0) > 0.0 && view.K(1, 1) > 0.0)) {
    throw ValidationError(who + "focal lengths must be positive");
  }
  const double ortho_err =
      (view.R.transpose() * view.R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= 1e-6) || view.R.determinant() < 0.0) {
    throw ValidationError(who + "rotation is not orthonormal");
  }
  if (!view.T.allFinite()) {
    throw ValidationError(who + "translation is not finite");
  }
  if (view.width < 32 || view.height < 32) {
    throw ValidationError(who + "image must be at least 32x32");
  }
}

std::vector<CameraView> parse_cameras(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<CameraView> views;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    CameraView v;
    double fx, fy, cx, cy;
    ls >> v.id >> fx >> fy >> cx >> cy;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ls >> v.R(r, c);
    }
    ls >> v.T.x() >> v.T.y() >> v.T.z() >> v.width >> v.height >>
        v.image_path;
    std::string extra;
    if (ls.fail() || (ls >> extra)) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": expected 'id fx fy cx cy r11..r33 t1 t2 t3 width "
                       "height image_path'");
    }
    v.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    for (const auto& other : views) {
      if (other.id == v.id) {
        throw ParseError(file.string() + ":" + std::to_string(line_no) +
                         ": duplicate view id " + std::to_string(v.id));
      }
    }
    views.push_back(std::move(v));
  }
  return views;
}

std::string format_camera_line(const CameraView& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << v.id << ' ' << v.K(0, 0) << ' ' << v.K(1, 1) << ' ' << v.K(0, 2) << ' '
     << v.K(1, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << ' ' << v.R(r, c);
  }
  os << ' ' << v.T.x() << ' ' << v.T.y() << ' ' << v.T.z() << ' ' << v.width
     << ' ' << v.height << ' ' << v.image_path;
  return os.str();
}

void orient_normals_toward_camera(Grid<Vec3f>& normals, const Mat3& K) {
  const Mat3 K_inv = K.inverse();
  for (int y = 0; y < normals.height(); ++y) {
    for (int x = 0; x < normals.width(); ++x) {
      const Vec3 ray = K_inv * Vec3(x, y, 1.0);
      Vec3f& n = normals(x, y);
      if (n.cast<double>().dot(ray) > 0.0) n = -n;
    }
  }
}

Scene load_scene(const fs::path& dir) {
  Scene scene;
  scene.root = dir;
  std::vector<CameraView> cameras = parse_cameras(dir / layout::kCameras);
  if (cameras.empty()) {
    throw ValidationError("scene " + dir.string() + " has no views");
  }
  for (auto& cam : cameras) {
    validate_camera(cam);
    SceneView sv;
    const int id = cam.id;
    cam.image = read_png_intensity(dir / cam.image_path);
    check_shape("image", id, cam.image.width(), cam.image.height(), cam);
    const fs::path corrected = dir / layout::corrected_image(id);
    if (fs::exists(corrected)) {
      cam.corrected_image = read_png_intensity(corrected);
      check_shape("corrected image", id, cam.corrected_image.width(),
                  cam.corrected_image.height(), cam);
      cam.has_corrected = true;
    } else {
      cam.corrected_image = cam.image;
    }

    PriorBundle& pb = sv.priors;
    pb.mono_depth = read_pfm(dir / layout::mono_depth(id));
    check_shape("mono depth", id, pb.mono_depth.width(),
                pb.mono_depth.height(), cam);
    for (float d : pb.mono_depth.values()) {
      if (!(d >= 0.f) || !std::isfinite(d)) {
        throw ValidationError("view " + std::to_string(id) +
                              ": mono depth must be finite and nonnegative");
      }
    }
    pb.mono_normal = read_pfm3(dir / layout::mono_normal(id));
    check_shape("mono normal", id, pb.mono_normal.width(),
                pb.mono_normal.height(), cam);
    for (const Vec3f& n : pb.mono_normal.values()) {
      if (!(std::abs(n.norm() - 1.f) <= 1e-4f)) {
        throw ValidationError("view " + std::to_string(id) +
                              ": mono normal is not unit length");
      }
    }
    orient_normals_toward_camera(pb.mono_normal, cam.K);
    const fs::path edges = dir / layout::edge_map(id);
    if (fs::exists(edges)) {
      pb.edge_map = read_png_mask(edges);
      check_shape("edge map", id, pb.edge_map.width(), pb.edge_map.height(),
                  cam);
    }
    const fs::path highlight = dir / layout::highlight_mask(id);
    if (fs::exists(highlight)) {
      pb.highlight_mask = read_png_mask(highlight);
      check_shape("highlight mask", id, pb.highlight_mask.width(),
                  pb.highlight_mask.height(), cam);
    } else {
      pb.highlight_mask = Mask(cam.width, cam.height, 0);
    }
    sv.camera = std::move(cam);
    scene.views.push_back(std::move(sv));
  }

  const fs::path meta = dir / layout::kMetadata;
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(meta.string() + ": " + e.what());
    }
    if (j.contains("depth_min") && j.contains("depth_max")) {
      DepthRange r{j["depth_min"].get<double>(), j["depth_max"].get<double>()};
      if (!r.valid()) {
        throw ValidationError(meta.string() + ": invalid depth range");
      }
      scene.depth_range = r;
    }
  }
  return scene;
}

void save_scene(const Scene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / layout::kCameras, std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / layout::kCameras).string());
    out << "# id fx fy cx cy r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3 "
           "width height image_path\n";
    for (const auto& v : scene.views) out << format_camera_line(v.camera) << '\n';
  }
  for (const auto& v : scene.views) {
    const int id = v.camera.id;
    write_png_intensity(v.camera.image, dir / v.camera.image_path);
    if (v.camera.has_corrected) {
      write_png_intensity(v.camera.corrected_image,
                          dir / layout::corrected_image(id));
    }
    write_pfm(v.priors.mono_depth, dir / layout::mono_depth(id));
    write_pfm3(v.priors.mono_normal, dir / layout::mono_normal(id));
    if (!v.priors.edge_map.empty()) {
      write_png_mask(v.priors.edge_map, dir / layout::edge_map(id));
    }
    const auto& hl = v.priors.highlight_mask;
    if (!hl.empty() &&
        std::any_of(hl.values().begin(), hl.values().end(),
                    [](std::uint8_t m) { return m != 0; })) {
      write_png_mask(hl, dir / layout::highlight_mask(id));
    }
  }
  if (scene.depth_range) {
    nlohmann::json j;
    j["schema"] = 1;
    j["depth_min"] = scene.depth_range->min;
    j["depth_max"] = scene.depth_range->max;
    std::ofstream out(dir / layout::kMetadata, std::ios::trunc);
    out << j.dump(2) << '\n';
  }
}

Grid<float> read_pfm(const fs::path& path) {
  int w = 0, h = 0;
  std::vector<float> raw = read_pfm_data(path, 1, w, h);
  Grid<float> g(w, h);
  for (int y = 0; y < h; ++y) {
    // File rows run bottom to top.
    const float* src = raw.data() + static_cast<size_t>(h - 1 - y) * w;
    for (int x = 0; x < w; ++x) g(x, y) = src[x];
  }
  return g;
}

Grid<Vec3f> read_pfm3(const fs::path& path) {
  int w = 0, h = 0;
  std::vector<float> raw = read_pfm_data(path, 3, w, h);
  Grid<Vec3f> g(w, h);
  for (int y = 0; y < h; ++y) {
    const float* src = raw.data() + static_cast<size_t>(h - 1 - y) * w * 3;
    for (int x = 0; x < w; ++x) {
      g(x, y) = Vec3f(src[3 * x], src[3 * x + 1], src[3 * x + 2]);
    }
  }
  return g;
}

void write_pfm(const Grid<float>& map, const fs::path& path) {
  write_pfm_data(map.values().data(), map.width(), map.height(), 1, path);
}

void write_pfm3(const Grid<Vec3f>& map, const fs::path& path) {
  std::vector<float> flat(map.size() * 3);
  for (size_t i = 0; i < map.size(); ++i) {
    flat[3 * i] = map[i].x();
    flat[3 * i + 1] = map[i].y();
    flat[3 * i + 2] = map[i].z();
  }
  write_pfm_data(flat.data(), map.width(), map.height(), 3, path);
}

Grid<float> read_png_intensity(const fs::path& path) {
  const PngPixels px = read_png_rgb(path);
  Grid<float> g(px.width, px.height);
  for (size_t i = 0; i < g.size(); ++i) {
    const int sum = px.rgb[3 * i] + px.rgb[3 * i + 1] + px.rgb[3 * i + 2];
    g[i] = static_cast<float>(sum) / (3.f * 255.f);
  }
  return g;
}

Mask read_png_mask(const fs::path& path) {
  const PngPixels px = read_png_gray(path);
  Mask m(px.width, px.height);
  for (size_t i = 0; i < m.size(); ++i) m[i] = px.rgb[i] != 0 ? 1 : 0;
  return m;
}

Grid<std::uint8_t> read_png_gray8(const fs::path& path) {
  const PngPixels px = read_png_gray(path);
  Grid<std::uint8_t> m(px.width, px.height);
  for (size_t i = 0; i < m.size(); ++i) m[i] = px.rgb[i];
  return m;
}

void write_png_intensity(const Grid<float>& image, const fs::path& path) {
  std::vector<std::uint8_t> gray(image.size());
  for (size_t i = 0; i < image.size(); ++i) gray[i] = quantize(image[i]);
  write_png_raw(gray, image.width(), image.height(), path);
}

void write_png_mask(const Mask& mask, const fs::path& path) {
  std::vector<std::uint8_t> gray(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) gray[i] = mask[i] ? 255 : 0;
  write_png_raw(gray, mask.width(), mask.height(), path);
}

void write_png_gray8(const Grid<std::uint8_t>& image, const fs::path& path) {
  std::vector<std::uint8_t> gray(image.values().begin(), image.values().end());
  write_png_raw(gray, image.width(), image.height(), path);
}

void save_depth_normal(const DepthNormalResult& result, const fs::path& dir,
                       int view_id) {
  for (float d : result.depth.values()) {
    if (std::isnan(d)) {
      throw ValidationError("view " + std::to_string(view_id) +
                            ": depth map contains NaN");
    }
  }
  if (!result.normal.same_shape(result.depth) ||
      !result.cost.same_shape(result.depth) ||
      !result.reliable.same_shape(result.depth)) {
    throw ValidationError("view " + std::to_string(view_id) +
                          ": result maps differ in size");
  }
  const std::string stem = std::to_string(view_id);
  fs::create_directories(dir);
  write_pfm(result.depth, dir / (stem + ".depth.pfm"));
  write_pfm3(result.normal, dir / (stem + ".normal.pfm"));
  write_pfm(result.cost, dir / (stem + ".cost.pfm"));
  write_png_mask(result.reliable, dir / (stem + ".reliable.png"));
}

DepthNormalResult load_depth_normal(const fs::path& dir, int view_id) {
  const std::string stem = std::to_string(view_id);
  DepthNormalResult r;
  r.depth = read_pfm(dir / (stem + ".depth.pfm"));
  r.normal = read_pfm3(dir / (stem + ".normal.pfm"));
  r.cost = read_pfm(dir / (stem + ".cost.pfm"));
  r.reliable = read_png_mask(dir / (stem + ".reliable.png"));
  if (!r.normal.same_shape(r.depth) || !r.cost.same_shape(r.depth) ||
      !r.reliable.same_shape(r.depth)) {
    throw ValidationError("view " + stem + ": result maps differ in size");
  }
  return r;
}

void save_point_cloud(const std::vector<CloudPoint>& points,
                      const fs::path& path, PlyFormat format) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n"
                                      : "format binary_little_endian 1.0\n")
      << "element vertex " << points.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  if (format == PlyFormat::kAscii) {
    out << std::setprecision(9);
    for (const auto& p : points) {
      out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z()
          << ' ' << p.normal.x() << ' ' << p.normal.y() << ' ' << p.normal.z()
          << ' ' << int(p.color[0]) << ' ' << int(p.color[1]) << ' '
          << int(p.color[2]) << '\n';
    }
  } else {
    const bool swap = std::endian::native != std::endian::little;
    char record[27];
    for (const auto& p : points) {
      const float f[6] = {p.position.x(), p.position.y(), p.position.z(),
                          p.normal.x(),   p.normal.y(),   p.normal.z()};
      for (int k = 0; k < 6; ++k) {
        const float v = swap ? byteswap_value(f[k]) : f[k];
        std::memcpy(record + 4 * k, &v, 4);
      }
      std::memcpy(record + 24, p.color.data(), 3);
      out.write(record, sizeof(record));
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<CloudPoint> load_point_cloud(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError("not a PLY file: " + path.string());

  enum class Fmt { kAscii, kLittle, kBig } fmt = Fmt::kAscii;
  size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  struct Prop {
    std::string name;
    PlyType type;
  };
  std::vector<Prop> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") {
        fmt = Fmt::kAscii;
      } else if (f == "binary_little_endian") {
        fmt = Fmt::kLittle;
      } else if (f == "binary_big_endian") {
        fmt = Fmt::kBig;
      } else {
        throw IoError("unknown PLY format '" + f + "' in " + path.string());
      }
    } else if (tok == "element") {
      std::string name;
      size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        if (seen_vertex) throw IoError("duplicate vertex element in " + path.string());
        in_vertex = true;
        seen_vertex = true;
        vertex_count = count;
      } else {
        if (!seen_vertex) {
          throw IoError("PLY elements before 'vertex' are not supported: " +
                        path.string());
        }
        in_vertex = false;
      }
    } else if (tok == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ls >> type;
      if (type == "list") {
        throw IoError("list properties on vertices are not supported: " +
                      path.string());
      }
      ls >> name;
      props.push_back({name, parse_ply_type(type, path)});
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!in) throw IoError("truncated PLY header: " + path.string());

  auto index_of = [&](const char* name) -> int {
    for (size_t i = 0; i < props.size(); ++i) {
      if (props[i].name == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) {
    throw IoError("PLY vertices lack x/y/z: " + path.string());
  }
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  const int ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");

  std::vector<CloudPoint> points(vertex_count);
  std::vector<double> values(props.size());
  size_t record_size = 0;
  for (const auto& p : props) record_size += ply_type_size(p.type);
  std::vector<char> record(record_size);
  const bool swap = (fmt == Fmt::kLittle) != (std::endian::native == std::endian::little);
  for (size_t i = 0; i < vertex_count; ++i) {
    if (fmt == Fmt::kAscii) {
      for (auto& v : values) in >> v;
    } else {
      in.read(record.data(), static_cast<std::streamsize>(record_size));
      size_t off = 0;
      for (size_t k = 0; k < props.size(); ++k) {
        values[k] = decode_ply_scalar(props[k].type, record.data() + off, swap);
        off += ply_type_size(props[k].type);
      }
    }
    if (!in) throw IoError("truncated PLY data: " + path.string());
    CloudPoint& cp = points[i];
    cp.position = Vec3f(float(values[ix]), float(values[iy]), float(values[iz]));
    if (inx >= 0 && iny >= 0 && inz >= 0) {
      cp.normal = Vec3f(float(values[inx]), float(values[iny]), float(values[inz]));
    }
    if (ir >= 0 && ig >= 0 && ib >= 0) {
      cp.color = {static_cast<std::uint8_t>(values[ir]),
                  static_cast<std::uint8_t>(values[ig]),
                  static_cast<std::uint8_t>(values[ib])};
    }
  }
  return points;
}

}  // namespace dvp
