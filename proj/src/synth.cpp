#include "dvpmvs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dvpmvs/geometry.hpp"
#include "dvpmvs/parallel.hpp"
#include "dvpmvs/solver.hpp"

namespace dvp {
namespace {

constexpr double kNoiseAmplitude = 0.3;
constexpr double kCheckerAmplitude = 0.15;

double lattice01(std::uint64_t seed, int plane, std::int64_t i, std::int64_t j) {
  PixelRng rng(pixel_seed(static_cast<std::int64_t>(seed), plane, static_cast<int>(i),
                          0, j));
  return rng.uniform();
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

// Surface intensity; `fine` adds the checker/noise texture on top of the
// albedo, strokes and flat patches.
double surface_value(const PlaneSpec& pl, int index, const Vec2& uv,
                     std::uint64_t seed, bool fine) {
  for (const auto& s : pl.strokes) {
    if (segment_distance(uv, s.a, s.b) <= 0.5 * s.width) return s.value;
  }
  for (const auto& f : pl.flat) {
    if (uv.x() >= f.min.x() && uv.x() <= f.max.x() && uv.y() >= f.min.y() &&
        uv.y() <= f.max.y()) {
      return f.value;
    }
  }
  double v = pl.albedo;
  if (!fine) return v;
  const double gu = uv.x() / pl.cell, gv = uv.y() / pl.cell;
  if (pl.texture == Texture::kChecker) {
    const auto parity = (static_cast<std::int64_t>(std::floor(gu)) +
                         static_cast<std::int64_t>(std::floor(gv))) & 1;
    v += parity ? kCheckerAmplitude : -kCheckerAmplitude;
  } else if (pl.texture == Texture::kNoise) {
    const auto i = static_cast<std::int64_t>(std::floor(gu));
    const auto j = static_cast<std::int64_t>(std::floor(gv));
    const double fu = gu - static_cast<double>(i), fv = gv - static_cast<double>(j);
    const double n00 = lattice01(seed, index, i, j);
    const double n10 = lattice01(seed, index, i + 1, j);
    const double n01 = lattice01(seed, index, i, j + 1);
    const double n11 = lattice01(seed, index, i + 1, j + 1);
    const double n = (1 - fv) * ((1 - fu) * n00 + fu * n10) + fv * ((1 - fu) * n01 + fu * n11);
    v += kNoiseAmplitude * (2.0 * n - 1.0);
  }
  return std::clamp(v, 0.0, 1.0);
}

float quantize8(double v) {
  return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
}

}  // namespace

RayHit cast_ray(const std::vector<PlaneSpec>& planes, const Vec3& origin,
                const Vec3& direction) {
  RayHit best;
  best.t = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < planes.size(); ++k) {
    const PlaneSpec& pl = planes[k];
    const Vec3 n = pl.normal();
    const double denom = n.dot(direction);
    if (std::abs(denom) < 1e-12) continue;
    const double t = n.dot(pl.origin - origin) / denom;
    if (!(t > 1e-9) || t >= best.t) continue;
    const Vec3 rel = origin + t * direction - pl.origin;
    const Vec2 uv(rel.dot(pl.axis_u), rel.dot(pl.axis_v));
    if (pl.half_u > 0.0 && std::abs(uv.x()) > pl.half_u) continue;
    if (pl.half_v > 0.0 && std::abs(uv.y()) > pl.half_v) continue;
    best.t = t;
    best.plane = static_cast<int>(k);
    best.uv = uv;
  }
  if (best.plane < 0) best.t = 0.0;
  return best;
}

CameraView make_camera(int id, const CameraPose& pose, int width, int height,
                       double focal) {
  CameraView cam;
  cam.id = id;
  cam.width = width;
  cam.height = height;
  cam.K << focal, 0, (width - 1) / 2.0, 0, focal, (height - 1) / 2.0, 0, 0, 1;
  // World y points down, like the image rows.
  const Vec3 z = (pose.target - pose.center).normalized();
  Vec3 x = Vec3::UnitY().cross(z);
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  cam.R.row(0) = x.transpose();
  cam.R.row(1) = y.transpose();
  cam.R.row(2) = z.transpose();
  cam.T = -cam.R * pose.center;
  cam.image_path = layout::image(id);
  return cam;
}

void validate_spec(const SceneSpec& spec) {
  if (spec.width < 32 || spec.height < 32 || spec.width > 1024 || spec.height > 1024) {
    throw ValidationError("synth: resolution must lie within 32..1024 per side");
  }
  if (spec.cameras.size() < 2) throw ValidationError("synth: need at least two cameras");
  if (spec.planes.empty()) throw ValidationError("synth: need at least one plane");
  if (!(spec.focal > 0.0)) throw ValidationError("synth: focal must be > 0");
  for (const auto& pl : spec.planes) {
    if (std::abs(pl.axis_u.norm() - 1.0) > 1e-9 || std::abs(pl.axis_v.norm() - 1.0) > 1e-9 ||
        std::abs(pl.axis_u.dot(pl.axis_v)) > 1e-9) {
      throw ValidationError("synth: plane axes must be orthonormal");
    }
    if (!(pl.cell > 0.0)) throw ValidationError("synth: texture cell must be > 0");
  }
}

RenderedScene render(const SceneSpec& spec, int threads) {
  validate_spec(spec);
  const int n = static_cast<int>(spec.cameras.size());
  const int w = spec.width, h = spec.height;
  RenderedScene out;
  auto& scene = out.scene;
  auto& gt = out.gt;
  for (int v = 0; v < n; ++v) {
    SceneView sv;
    sv.camera = make_camera(v, spec.cameras[v], w, h, spec.focal);
    scene.views.push_back(std::move(sv));
  }
  const bool any_disk = !spec.disks.empty();

  for (int v = 0; v < n; ++v) {
    auto& cam = scene.views[v].camera;
    auto& pri = scene.views[v].priors;
    const Mat3 K_inv = cam.K_inv();
    const Mat3 Rt = cam.R.transpose();
    const Vec3 C = cam.center();
    cam.image = Grid<float>(w, h, 0.f);
    cam.corrected_image = Grid<float>(w, h, 0.f);
    cam.has_corrected = any_disk;
    Grid<float> structure(w, h, 0.f);
    pri.mono_depth = Grid<float>(w, h, 0.f);
    pri.mono_normal = Grid<Vec3f>(w, h, Vec3f(0.f, 0.f, -1.f));
    pri.highlight_mask = Mask(w, h, 0);
    Grid<float> depth(w, h, 0.f);
    Grid<Vec3f> normal(w, h, Vec3f(0.f, 0.f, -1.f));
    LabelMap plane(w, h, -1);

    std::vector<Vec2> disk_centers;
    std::vector<double> disk_radii;
    for (const auto& d : spec.disks) {
      if (std::find(d.view_ids.begin(), d.view_ids.end(), v) == d.view_ids.end()) continue;
      const Projection p = project(d.center, cam);
      if (p.depth > 0.0) {
        disk_centers.push_back(p.pixel);
        disk_radii.push_back(d.radius_px);
      }
    }

    parallel_for(0, h, threads, [&](int y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.0, sum_structure = 0.0;
        for (int s = 0; s < 4; ++s) {
          const Vec2 p(x + ((s & 1) ? 0.25 : -0.25), y + ((s & 2) ? 0.25 : -0.25));
          const Vec3 dir = Rt * pixel_ray(K_inv, p);
          const RayHit hit = cast_ray(spec.planes, C, dir);
          if (hit.plane < 0) continue;
          const auto& pl = spec.planes[hit.plane];
          sum += surface_value(pl, hit.plane, hit.uv, spec.seed, true);
          sum_structure += surface_value(pl, hit.plane, hit.uv, spec.seed, false);
        }
        const float value = quantize8(0.25 * sum);
        cam.corrected_image(x, y) = value;
        cam.image(x, y) = value;
        structure(x, y) = quantize8(0.25 * sum_structure);
        for (size_t k = 0; k < disk_centers.size(); ++k) {
          if ((Vec2(x, y) - disk_centers[k]).norm() <= disk_radii[k]) {
            cam.image(x, y) = 1.f;
            pri.highlight_mask(x, y) = 1;
          }
        }

        const Vec3 ray = pixel_ray(K_inv, Vec2(x, y));
        const RayHit hit = cast_ray(spec.planes, C, Rt * ray);
        if (hit.plane < 0) continue;
        depth(x, y) = static_cast<float>(hit.t);
        Vec3 nc = cam.R * spec.planes[hit.plane].normal();
        if (nc.dot(ray) > 0.0) nc = -nc;
        normal(x, y) = nc.cast<float>();
        plane(x, y) = hit.plane;

        PixelRng rng(pixel_seed(static_cast<std::int64_t>(spec.seed), v, 7, 0,
                                static_cast<std::int64_t>(y) * w + x));
        pri.mono_depth(x, y) =
            static_cast<float>(hit.t * std::max(0.05, 1.0 + spec.noise.depth_rel * rng.normal()));
        Vec3 mn = nc;
        if (spec.noise.normal_deg > 0.0) {
          Vec3 axis = rng.unit_vector();
          axis -= axis.dot(nc) * nc;
          if (axis.norm() > 1e-9) {
            const double a = spec.noise.normal_deg * std::numbers::pi / 180.0 * rng.normal();
            mn = Eigen::AngleAxisd(a, axis.normalized()) * nc;
          }
        }
        if (mn.dot(ray) > 0.0) mn = -mn;
        pri.mono_normal(x, y) = mn.normalized().cast<float>();
      }
    });
    if (std::all_of(plane.values().begin(), plane.values().end(),
                    [](std::int32_t p) { return p < 0; })) {
      throw ValidationError("synth: camera " + std::to_string(v) + " sees no plane");
    }
    pri.edge_map = roberts_edges(structure, 0.0, 0.005);
    if (!any_disk) cam.corrected_image = Grid<float>();

    Mask edges(w, h, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int p = plane(x, y);
        if ((x + 1 < w && plane(x + 1, y) != p) || (y + 1 < h && plane(x, y + 1) != p)) {
          edges(x, y) = 1;
        }
      }
    }
    gt.depth.push_back(std::move(depth));
    gt.normal.push_back(std::move(normal));
    gt.plane.push_back(std::move(plane));
    gt.edges.push_back(std::move(edges));
  }

  // Cross-view visibility by casting from each source camera.
  gt.visible.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& cam_i = scene.views[i].camera;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto& cam_j = scene.views[j].camera;
      const Vec3 Cj = cam_j.center();
      Mask vis(w, h, 0);
      parallel_for(0, h, threads, [&](int y) {
        for (int x = 0; x < w; ++x) {
          const float d = gt.depth[i](x, y);
          if (!(d > 0.f)) continue;
          const Vec3 X = back_project(Vec2(x, y), d, cam_i);
          const Projection pj = project(X, cam_j);
          if (!(pj.depth > 0.0)) continue;
          const double u = pj.pixel.x(), v = pj.pixel.y();
          if (!(u >= -0.5 && v >= -0.5 && u < w - 0.5 && v < h - 0.5)) continue;
          const RayHit hit = cast_ray(spec.planes, Cj, X - Cj);
          if (hit.plane >= 0 && hit.t >= 1.0 - 1e-6) vis(x, y) = 1;
        }
      });
      gt.visible[i].push_back(std::move(vis));
    }
  }

  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& cam = scene.views[i].camera;
    const Mat3 Rt = cam.R.transpose();
    for (float d : gt.depth[i].values()) {
      if (d > 0.f) {
        dmin = std::min<double>(dmin, d);
        dmax = std::max<double>(dmax, d);
      }
    }
    for (int y = 0; y < h; y += spec.gt_stride) {
      for (int x = 0; x < w; x += spec.gt_stride) {
        const float d = gt.depth[i](x, y);
        if (!(d > 0.f)) continue;
        int seen = 0;
        for (const auto& m : gt.visible[i]) seen += m(x, y);
        if (seen < spec.gt_min_visible) continue;
        CloudPoint p;
        p.position = back_project(Vec2(x, y), d, cam).cast<float>();
        p.normal = (Rt * gt.normal[i](x, y).cast<double>()).cast<float>();
        const auto g = static_cast<std::uint8_t>(std::lround(cam.image(x, y) * 255.f));
        p.color = {g, g, g};
        gt.cloud.push_back(p);
      }
    }
  }
  scene.depth_range = DepthRange{0.8 * dmin, 1.25 * dmax};
  return out;
}

void save_rendered(const RenderedScene& rendered, const std::filesystem::path& dir) {
  save_scene(rendered.scene, dir);
  const auto gt_dir = dir / "gt";
  std::filesystem::create_directories(gt_dir);
  const auto& gt = rendered.gt;
  for (size_t i = 0; i < rendered.scene.views.size(); ++i) {
    const std::string id = std::to_string(rendered.scene.views[i].camera.id);
    write_pfm(gt.depth[i], gt_dir / (id + ".depth.pfm"));
    write_pfm3(gt.normal[i], gt_dir / (id + ".normal.pfm"));
    Grid<std::uint8_t> planes(gt.plane[i].width(), gt.plane[i].height(), 0);
    for (size_t k = 0; k < planes.size(); ++k) {
      planes[k] = static_cast<std::uint8_t>(std::clamp(gt.plane[i][k] + 1, 0, 255));
    }
    write_png_gray8(planes, gt_dir / (id + ".planes.png"));
    write_png_mask(gt.edges[i], gt_dir / (id + ".edges.png"));
    for (size_t k = 0; k < gt.visible[i].size(); ++k) {
      write_png_mask(gt.visible[i][k],
                     gt_dir / (id + ".visible_" + std::to_string(k) + ".png"));
    }
  }
  save_point_cloud(gt.cloud, gt_dir / "cloud.ply");
}

GroundTruth load_ground_truth(const std::filesystem::path& dir, const Scene& scene) {
  GroundTruth gt;
  const auto gt_dir = dir / "gt";
  const size_t n = scene.views.size();
  for (size_t i = 0; i < n; ++i) {
    const std::string id = std::to_string(scene.views[i].camera.id);
    gt.depth.push_back(read_pfm(gt_dir / (id + ".depth.pfm")));
    gt.normal.push_back(read_pfm3(gt_dir / (id + ".normal.pfm")));
    const auto planes = read_png_gray8(gt_dir / (id + ".planes.png"));
    LabelMap labels(planes.width(), planes.height(), -1);
    for (size_t k = 0; k < planes.size(); ++k) labels[k] = static_cast<int>(planes[k]) - 1;
    gt.plane.push_back(std::move(labels));
    gt.edges.push_back(read_png_mask(gt_dir / (id + ".edges.png")));
    std::vector<Mask> vis;
    for (size_t k = 0; k + 1 < n; ++k) {
      vis.push_back(read_png_mask(gt_dir / (id + ".visible_" + std::to_string(k) + ".png")));
    }
    gt.visible.push_back(std::move(vis));
  }
  gt.cloud = load_point_cloud(gt_dir / "cloud.ply");
  return gt;
}

namespace {

PlaneSpec wall(const Vec3& origin, double yaw_deg, Texture texture, float albedo,
               double cell) {
  PlaneSpec p;
  const double a = yaw_deg * std::numbers::pi / 180.0;
  p.origin = origin;
  p.axis_u = Vec3(std::cos(a), 0.0, std::sin(a));
  p.axis_v = Vec3::UnitY();
  p.texture = texture;
  p.albedo = albedo;
  p.cell = cell;
  return p;
}

std::vector<CameraPose> arc(int count, double spread, const Vec3& target,
                            double lift = 0.0) {
  std::vector<CameraPose> poses;
  for (int k = 0; k < count; ++k) {
    const double s = count > 1 ? -spread + 2.0 * spread * k / (count - 1) : 0.0;
    poses.push_back({Vec3(s, (k % 2 ? -lift : 0.0), 0.0), target});
  }
  return poses;
}

SceneSpec planar3() {
  SceneSpec s;
  s.name = "planar3";
  s.width = 640;
  s.height = 480;
  s.focal = 500.0;
  s.cameras = arc(5, 0.5, Vec3(0.0, 0.2, 6.0), 0.1);
  s.planes.push_back(wall(Vec3(0.0, 0.0, 7.0), 8.0, Texture::kNoise, 0.5f, 0.04));
  PlaneSpec floor;
  floor.origin = Vec3(0.0, 1.6, 0.0);
  floor.axis_u = Vec3::UnitX();
  floor.axis_v = Vec3::UnitZ();
  floor.texture = Texture::kNoise;
  floor.albedo = 0.45f;
  floor.cell = 0.03;
  s.planes.push_back(floor);
  PlaneSpec panel = wall(Vec3(-1.2, -0.2, 4.8), 35.0, Texture::kNoise, 0.55f, 0.03);
  panel.half_u = 1.0;
  panel.half_v = 1.3;
  s.planes.push_back(panel);
  s.noise = {0.005, 2.0};
  s.seed = 11;
  return s;
}

SceneSpec textureless_wall() {
  SceneSpec s;
  s.name = "textureless_wall";
  s.width = 320;
  s.height = 240;
  s.focal = 300.0;
  s.cameras = arc(5, 0.3, Vec3(0.0, 0.0, 4.0), 0.05);
  PlaneSpec w = wall(Vec3(0.0, 0.0, 4.0), 6.0, Texture::kNoise, 0.5f, 0.04);
  // About 160 px square in the central view.
  w.flat.push_back({Vec2(-1.07, -1.07), Vec2(1.07, 1.07), 0.5f});
  s.planes.push_back(w);
  s.noise = {0.005, 2.0};
  s.seed = 12;
  return s;
}

SceneSpec occluder() {
  SceneSpec s;
  s.name = "occluder";
  s.width = 320;
  s.height = 240;
  s.focal = 300.0;
  s.cameras = arc(3, 0.4, Vec3(0.0, 0.0, 5.0));
  s.planes.push_back(wall(Vec3(0.0, 0.0, 5.0), 0.0, Texture::kNoise, 0.5f, 0.05));
  PlaneSpec front = wall(Vec3(0.2, 0.0, 3.0), 0.0, Texture::kNoise, 0.6f, 0.03);
  front.half_u = 0.5;
  front.half_v = 0.6;
  s.planes.push_back(front);
  s.noise = {0.005, 2.0};
  s.seed = 13;
  return s;
}

SceneSpec specular_disk() {
  SceneSpec s;
  s.name = "specular_disk";
  s.width = 320;
  s.height = 240;
  s.focal = 300.0;
  s.cameras = arc(5, 0.3, Vec3(0.0, 0.0, 4.0), 0.05);
  s.planes.push_back(wall(Vec3(0.0, 0.0, 4.0), 6.0, Texture::kNoise, 0.5f, 0.04));
  // The highlight drifts across the wall from view to view.
  for (int v = 0; v < 5; ++v) {
    s.disks.push_back({Vec3(-0.2 + 0.1 * v, 0.0, 4.0), 24.0, {v}});
  }
  s.noise = {0.005, 2.0};
  s.seed = 14;
  return s;
}

SceneSpec far_depth() {
  SceneSpec s;
  s.name = "far_depth";
  s.width = 320;
  s.height = 240;
  s.focal = 300.0;
  s.cameras = arc(5, 1.5, Vec3(0.0, 0.0, 40.0), 0.2);
  s.planes.push_back(wall(Vec3(0.0, 0.0, 40.0), 10.0, Texture::kNoise, 0.5f, 0.4));
  s.noise = {0.005, 2.0};
  s.seed = 15;
  return s;
}

SceneSpec crease() {
  SceneSpec s;
  s.name = "crease";
  s.width = 640;
  s.height = 480;
  s.focal = 500.0;
  s.cameras = arc(3, 0.3, Vec3(0.0, 0.0, 5.0));
  // Concave 90° corner along x = 0, z = 5; both walls share one albedo, so
  // only the painted strokes produce image edges.
  const double r = std::sqrt(0.5);
  PlaneSpec a;  // left wall, u runs from the crease toward −x
  a.origin = Vec3(0.0, 0.0, 5.0);
  a.axis_u = Vec3(-r, 0.0, -r);
  a.axis_v = Vec3::UnitY();
  a.texture = Texture::kConstant;
  a.albedo = 0.5f;
  PlaneSpec b = a;  // right wall, u runs toward +x
  b.axis_u = Vec3(r, 0.0, -r);
  const double px = 5.0 / 500.0;  // world size of one pixel at the crease
  // Crease line with a gap (the neck erosion has to cut).
  a.strokes.push_back({Vec2(1.0 * px, -10.0), Vec2(1.0 * px, 0.6), 1.2 * px, 0.1f});
  a.strokes.push_back({Vec2(1.0 * px, 0.6 + 8.0 * px), Vec2(1.0 * px, 10.0), 1.2 * px, 0.1f});
  // Horizontal line cutting the right wall into two coplanar regions.
  b.strokes.push_back({Vec2(-2.0 * px, 0.9), Vec2(10.0, 0.9), 1.2 * px, 0.1f});
  s.planes = {a, b};
  s.noise = {0.003, 1.0};
  s.seed = 16;
  return s;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"planar3", "textureless_wall", "occluder", "specular_disk", "far_depth",
          "crease"};
}

SceneSpec fixture(const std::string& name) {
  if (name == "planar3") return planar3();
  if (name == "textureless_wall") return textureless_wall();
  if (name == "occluder") return occluder();
  if (name == "specular_disk") return specular_disk();
  if (name == "far_depth") return far_depth();
  if (name == "crease") return crease();
  std::string valid;
  for (const auto& n : fixture_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ValidationError("unknown fixture '" + name + "' (valid: " + valid + ")");
}

std::vector<SceneSpec> standard_fixtures() {
  std::vector<SceneSpec> out;
  for (const auto& n : fixture_names()) out.push_back(fixture(n));
  return out;
}

}  // namespace dvp
