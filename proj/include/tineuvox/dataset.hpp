#pragma once

#include <string>
#include <vector>

#include "tineuvox/image.hpp"

namespace tnv {

/// One posed, timestamped training image.
struct FrameRecord {
  Image image;        // linear [0,1], alpha already composited
  Mat4d pose = Mat4d::Identity();  // camera-to-world
  double focal = 0;   // pixels
  double time = 0;    // in [0,1]
  std::string name;   // file_path, for error messages
};

struct Dataset {
  std::vector<FrameRecord> train, val, test;

  const std::vector<FrameRecord>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw invalid_input("unknown split '" + name + "' (expected train|val|test)");
  }
};

/// Loads a D-NeRF-layout directory: transforms_{train,val,test}.json next
/// to per-frame PNGs. focal = 0.5*W / tan(0.5*camera_angle_x); a missing
/// per-frame "time" defaults to 0 with a warning; times are clamped to
/// [0,1]; alpha is composited onto `background`. Malformed entries raise
/// parse errors naming the frame.
Dataset load_dnerf(const std::string& dir, const Vec3<float>& background);

/// Loads a single camera pose: either a 16-number whitespace/comma text
/// file (row-major 4x4) or a JSON file with a "transform_matrix" key.
Mat4d load_pose(const std::string& path);

}  // namespace tnv
