#include "tineuvox/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace tnv {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Mat4d parse_pose_array(const json& mat, const std::string& where) {
  if (!mat.is_array() || mat.size() != 4)
    throw parse_error(where + ": 'transform_matrix' must be a 4x4 array");
  Mat4d pose;
  for (int r = 0; r < 4; ++r) {
    const auto& row = mat[r];
    if (!row.is_array() || row.size() != 4)
      throw parse_error(where + ": 'transform_matrix' must be a 4x4 array");
    for (int c = 0; c < 4; ++c) {
      if (!row[c].is_number()) throw parse_error(where + ": non-numeric pose entry");
      pose(r, c) = row[c].get<double>();
    }
  }
  const Mat3d rot = pose.topLeftCorner<3, 3>();
  if ((rot * rot.transpose() - Mat3d::Identity()).cwiseAbs().maxCoeff() > 1e-4)
    throw parse_error(where + ": pose rotation block is not orthonormal");
  return pose;
}

std::string resolve_image_path(const fs::path& dir, std::string file_path) {
  fs::path p(file_path);
  if (!p.has_extension()) p += ".png";
  return (dir / p).lexically_normal().string();
}

void load_split(const fs::path& dir, const std::string& split, const Vec3<float>& background,
                std::vector<FrameRecord>& out) {
  const fs::path json_path = dir / ("transforms_" + split + ".json");
  if (!fs::exists(json_path)) return;

  std::ifstream f(json_path);
  if (!f) throw io_error("cannot open '" + json_path.string() + "'");
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw parse_error("'" + json_path.string() + "': " + e.what());
  }

  const std::string where_file = json_path.filename().string();
  if (!doc.contains("camera_angle_x") || !doc["camera_angle_x"].is_number())
    throw parse_error(where_file + ": missing numeric 'camera_angle_x'");
  const double angle_x = doc["camera_angle_x"].get<double>();
  if (!(angle_x > 0) || angle_x >= 3.15)
    throw parse_error(where_file + ": 'camera_angle_x' out of range (0, pi)");
  if (!doc.contains("frames") || !doc["frames"].is_array())
    throw parse_error(where_file + ": missing 'frames' array");

  for (std::size_t i = 0; i < doc["frames"].size(); ++i) {
    const auto& fr = doc["frames"][i];
    const std::string where = where_file + " frame " + std::to_string(i);
    if (!fr.is_object()) throw parse_error(where + ": frame must be an object");
    if (!fr.contains("file_path") || !fr["file_path"].is_string())
      throw parse_error(where + ": missing 'file_path'");
    if (!fr.contains("transform_matrix")) throw parse_error(where + ": missing 'transform_matrix'");

    FrameRecord rec;
    rec.name = fr["file_path"].get<std::string>();
    rec.pose = parse_pose_array(fr["transform_matrix"], where + " ('" + rec.name + "')");
    if (fr.contains("time")) {
      if (!fr["time"].is_number()) throw parse_error(where + ": non-numeric 'time'");
      rec.time = std::clamp(fr["time"].get<double>(), 0.0, 1.0);
    } else {
      std::cerr << "[tnv] warning: " << where << " has no 'time'; defaulting to 0\n";
      rec.time = 0.0;
    }

    const std::string img_path = resolve_image_path(dir, rec.name);
    try {
      rec.image = load_png(img_path, background);
    } catch (const TnvError& e) {
      throw parse_error(where + ": cannot load image '" + img_path + "': " + e.what());
    }
    rec.focal = 0.5 * rec.image.width / std::tan(0.5 * angle_x);
    out.push_back(std::move(rec));
  }
}

}  // namespace

Dataset load_dnerf(const std::string& dir, const Vec3<float>& background) {
  const fs::path root(dir);
  if (!fs::exists(root)) throw io_error("dataset directory '" + dir + "' does not exist");
  Dataset ds;
  load_split(root, "train", background, ds.train);
  load_split(root, "val", background, ds.val);
  load_split(root, "test", background, ds.test);
  if (ds.train.empty() && ds.val.empty() && ds.test.empty())
    throw parse_error("no transforms_{train,val,test}.json found in '" + dir + "'");
  return ds;
}

Mat4d load_pose(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open pose file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();

  if (text.find('{') != std::string::npos) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw parse_error("'" + path + "': " + e.what());
    }
    if (!doc.contains("transform_matrix"))
      throw parse_error("'" + path + "': missing 'transform_matrix'");
    return parse_pose_array(doc["transform_matrix"], "'" + path + "'");
  }

  std::string cleaned = text;
  for (char& ch : cleaned)
    if (ch == ',' || ch == '[' || ch == ']') ch = ' ';
  std::stringstream ss(cleaned);
  Mat4d pose;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(ss >> pose(r, c)))
        throw parse_error("'" + path + "': expected 16 numbers for a 4x4 pose");
  const Mat3d rot = pose.topLeftCorner<3, 3>();
  if ((rot * rot.transpose() - Mat3d::Identity()).cwiseAbs().maxCoeff() > 1e-4)
    throw parse_error("'" + path + "': pose rotation block is not orthonormal");
  return pose;
}

}  // namespace tnv
