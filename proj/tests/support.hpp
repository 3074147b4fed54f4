// Shared fixtures: the canonical tactile rig and throwaway directories.
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gelflow/geometry.hpp"

namespace testsupport {

// Reference pinhole: 440 px image over the 30 mm gel at 30 mm depth.
inline gelflow::PinholeCamerad canonical_camera() {
  gelflow::PinholeCamerad cam;
  cam.focal = gelflow::default_focal(-30.0);
  cam.center = gelflow::Vec2d(220.0, 220.0);
  cam.image_size = gelflow::Vec2d(440.0, 440.0);
  return cam;
}

// Gel frame to pinhole frame: half turn about x, gel footprint centered,
// bottom of the layer (gel z = 0) on the plane z = -30 that fills the image.
inline gelflow::RigidTransformd canonical_gel_to_pinhole() {
  gelflow::RigidTransformd t;
  t.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  t.translation = gelflow::Vec3d(-15.0, 15.0, -30.0);
  return t;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag = "gelflow") {
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsupport
