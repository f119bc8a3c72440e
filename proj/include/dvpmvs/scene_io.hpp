#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dvpmvs/grid.hpp"
#include "dvpmvs/types.hpp"

namespace dvp {

// One calibrated image. Extrinsics map world to camera: X_c = R·X_w + T.
struct CameraView {
  int id = 0;
  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 T = Vec3::Zero();
  int width = 0;
  int height = 0;
  std::string image_path;  // relative to the scene root

  Grid<float> image;            // intensity in [0, 1]
  Grid<float> corrected_image;  // highlight-removed; copy of image if absent
  bool has_corrected = false;

  Vec3 center() const { return -R.transpose() * T; }
  Mat3 K_inv() const { return K.inverse(); }
};

// Throws ValidationError when K, R or the dimensions break the invariants.
void validate_camera(const CameraView& view);

// Monocular priors for one view, all at the view's resolution.
struct PriorBundle {
  Grid<float> mono_depth;
  Grid<Vec3f> mono_normal;  // camera space, oriented toward the camera
  Mask edge_map;
  Mask highlight_mask;
};

struct DepthNormalResult {
  Grid<float> depth;
  Grid<Vec3f> normal;
  Grid<float> cost;
  Mask reliable;
  bool degenerate = false;  // nothing was reconstructed (e.g. fully masked)
};

struct SceneView {
  CameraView camera;
  PriorBundle priors;
};

struct Scene {
  std::filesystem::path root;
  std::vector<SceneView> views;
  std::optional<DepthRange> depth_range;  // from scene.json when present

  int index_of(int view_id) const;
};

// Scene directory layout, relative to the root.
namespace layout {
inline constexpr const char* kCameras = "cameras.txt";
inline constexpr const char* kMetadata = "scene.json";
std::string image(int id);
std::string corrected_image(int id);
std::string mono_depth(int id);
std::string mono_normal(int id);
std::string edge_map(int id);
std::string highlight_mask(int id);
}  // namespace layout

Scene load_scene(const std::filesystem::path& dir);
void save_scene(const Scene& scene, const std::filesystem::path& dir);

// Parses the camera text file. Image pixels are not loaded.
std::vector<CameraView> parse_cameras(const std::filesystem::path& file);
std::string format_camera_line(const CameraView& view);

// Flips normals whose z-dot against the viewing ray is positive, so every
// normal faces its camera.
void orient_normals_toward_camera(Grid<Vec3f>& normals, const Mat3& K);

// PFM: single channel ("Pf") for scalar maps, three channels ("PF") for
// normals. Written little-endian (negative scale), bottom row first.
Grid<float> read_pfm(const std::filesystem::path& path);
Grid<Vec3f> read_pfm3(const std::filesystem::path& path);
void write_pfm(const Grid<float>& map, const std::filesystem::path& path);
void write_pfm3(const Grid<Vec3f>& map, const std::filesystem::path& path);

// 8-bit PNG. Color inputs collapse to (r+g+b)/3.
Grid<float> read_png_intensity(const std::filesystem::path& path);
Mask read_png_mask(const std::filesystem::path& path);
void write_png_intensity(const Grid<float>& image,
                         const std::filesystem::path& path);
void write_png_mask(const Mask& mask, const std::filesystem::path& path);
// Raw 8-bit gray values (no 0/255 mapping), e.g. label indices.
void write_png_gray8(const Grid<std::uint8_t>& image,
                     const std::filesystem::path& path);
Grid<std::uint8_t> read_png_gray8(const std::filesystem::path& path);

// Depth/normal/cost as PFM, reliability as PNG:
//   <dir>/<id>.depth.pfm, <id>.normal.pfm, <id>.cost.pfm, <id>.reliable.png
void save_depth_normal(const DepthNormalResult& result,
                       const std::filesystem::path& dir, int view_id);
DepthNormalResult load_depth_normal(const std::filesystem::path& dir,
                                    int view_id);

struct CloudPoint {
  Vec3f position = Vec3f::Zero();
  Vec3f normal = Vec3f::Zero();
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

enum class PlyFormat { kAscii, kBinaryLittleEndian };

void save_point_cloud(const std::vector<CloudPoint>& points,
                      const std::filesystem::path& path,
                      PlyFormat format = PlyFormat::kBinaryLittleEndian);
// Reads x/y/z plus optional nx/ny/nz and red/green/blue vertex properties.
std::vector<CloudPoint> load_point_cloud(const std::filesystem::path& path);

}  // namespace dvp
