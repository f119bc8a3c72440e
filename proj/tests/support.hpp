#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "dvpmvs/scene_io.hpp"
#include "dvpmvs/synth.hpp"

namespace dvp::test {

inline CameraView pinhole(int id, double f, int w, int h, const Mat3& R,
                          const Vec3& T) {
  CameraView v;
  v.id = id;
  v.K << f, 0, (w - 1) / 2.0, 0, f, (h - 1) / 2.0, 0, 0, 1;
  v.R = R;
  v.T = T;
  v.width = w;
  v.height = h;
  return v;
}

// Camera j of a rectified rig: center shifted by +b along x.
inline CameraView shifted(int id, double f, int w, int h, double b) {
  return pinhole(id, f, w, h, Mat3::Identity(), Vec3(-b, 0, 0));
}

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis(u(rng), u(rng), u(rng));
  if (axis.norm() < 1e-6) axis = Vec3::UnitY();
  return Eigen::AngleAxisd(max_angle * u(rng), axis.normalized()).toRotationMatrix();
}

// Camera at `center` with rotation R (world → camera).
inline CameraView posed(int id, double f, int w, int h, const Mat3& R,
                        const Vec3& center) {
  return pinhole(id, f, w, h, R, -R * center);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dvpmvs_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Smooth random texture: sum of a few sinusoids, values in about [0.1, 0.9].
inline Grid<float> wavy_image(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double fx[4], fy[4], ph[4];
  for (int k = 0; k < 4; ++k) {
    fx[k] = 0.05 + 0.3 * u(rng);
    fy[k] = 0.05 + 0.3 * u(rng);
    ph[k] = 6.28 * u(rng);
  }
  Grid<float> g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += std::sin(fx[k] * x + fy[k] * y + ph[k]);
      g(x, y) = static_cast<float>(0.5 + 0.1 * s);
    }
  }
  return g;
}

}  // namespace dvp::test
