#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dvpmvs/edge_prior.hpp"
#include "dvpmvs/scene_io.hpp"

namespace dvp {

enum class Texture { kChecker, kNoise, kConstant };

// Dark line painted on a plane, in the plane's (u, v) coordinates.
struct Stroke {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  double width = 0.0;
  float value = 0.1f;
};

// Axis-aligned (u, v) box rendered with a constant value.
struct FlatPatch {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();
  float value = 0.5f;
};

// Plane through `origin` spanned by the unit axes u and v. half_u/half_v ≤ 0
// leave that direction unbounded.
struct PlaneSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 0.0;
  double half_v = 0.0;
  Texture texture = Texture::kNoise;
  float albedo = 0.5f;
  double cell = 0.05;  // checker square or noise lattice spacing, world units
  std::vector<Stroke> strokes;
  std::vector<FlatPatch> flat;

  Vec3 normal() const { return axis_u.cross(axis_v).normalized(); }
};

struct CameraPose {
  Vec3 center = Vec3::Zero();
  Vec3 target = Vec3::UnitZ();
};

// Saturated disk of `radius_px` around the projection of `center` in each
// listed view.
struct SpecularDisk {
  Vec3 center = Vec3::Zero();
  double radius_px = 20.0;
  std::vector<int> view_ids;
};

struct PriorNoise {
  double depth_rel = 0.0;  // σ of the multiplicative depth error
  double normal_deg = 0.0;
};

struct SceneSpec {
  std::string name;
  int width = 640;
  int height = 480;
  double focal = 500.0;
  std::vector<CameraPose> cameras;
  std::vector<PlaneSpec> planes;
  std::vector<SpecularDisk> disks;
  PriorNoise noise;
  std::uint64_t seed = 1;
  int gt_stride = 2;        // GT cloud sampling step, px
  int gt_min_visible = 2;   // other views that must see a GT cloud point
};

// Throws ValidationError when the spec breaks its invariants (size, cameras
// that see nothing).
void validate_spec(const SceneSpec& spec);

struct GroundTruth {
  std::vector<Grid<float>> depth;     // 0 where no plane is hit
  std::vector<Grid<Vec3f>> normal;    // camera space, facing the camera
  std::vector<LabelMap> plane;        // plane index, −1 where none
  std::vector<std::vector<Mask>> visible;  // [view][source k], sources in scene order without the view
  std::vector<Mask> edges;            // plane-id discontinuities
  std::vector<CloudPoint> cloud;
};

struct RenderedScene {
  Scene scene;
  GroundTruth gt;
};

RenderedScene render(const SceneSpec& spec, int threads = 1);

// Scene layout plus gt/: <id>.depth.pfm, <id>.normal.pfm, <id>.planes.png
// (index + 1), <id>.edges.png, <id>.visible_<k>.png, cloud.ply.
void save_rendered(const RenderedScene& rendered, const std::filesystem::path& dir);
GroundTruth load_ground_truth(const std::filesystem::path& dir, const Scene& scene);

// Point where the camera ray through p first meets a plane; plane −1 if none.
struct RayHit {
  double t = 0.0;
  int plane = -1;
  Vec2 uv = Vec2::Zero();
};
RayHit cast_ray(const std::vector<PlaneSpec>& planes, const Vec3& origin,
                const Vec3& direction);

CameraView make_camera(int id, const CameraPose& pose, int width, int height,
                       double focal);

std::vector<std::string> fixture_names();
SceneSpec fixture(const std::string& name);  // throws ValidationError if unknown
std::vector<SceneSpec> standard_fixtures();

}  // namespace dvp
