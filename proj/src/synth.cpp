#include "tineuvox/synth.hpp"

#include <Eigen/Geometry>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tineuvox/threads.hpp"

namespace tnv {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

Vec3d json_vec3(const ordered_json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw config_error(where + ": expected [x, y, z]");
  for (int i = 0; i < 3; ++i)
    if (!v[i].is_number()) throw config_error(where + ": non-numeric component");
  return Vec3d(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

double json_num(const ordered_json& v, const std::string& where) {
  if (!v.is_number()) throw config_error(where + ": expected a number");
  return v.get<double>();
}

MotionPath parse_motion(const ordered_json& m, const std::string& where) {
  MotionPath path;
  for (const auto& [key, value] : m.items()) {
    if (key == "base") path.base = json_vec3(value, where + ".base");
    else if (key == "linear") path.linear = json_vec3(value, where + ".linear");
    else if (key == "quadratic") path.quadratic = json_vec3(value, where + ".quadratic");
    else if (key == "sin_amp") path.sin_amp = json_vec3(value, where + ".sin_amp");
    else if (key == "sin_freq") path.sin_freq = json_num(value, where + ".sin_freq");
    else if (key == "sin_phase") path.sin_phase = json_num(value, where + ".sin_phase");
    else throw config_error(where + ": unknown key '" + key + "'");
  }
  return path;
}

Primitive parse_primitive(const ordered_json& p, const std::string& where) {
  Primitive prim;
  bool has_type = false;
  for (const auto& [key, value] : p.items()) {
    if (key == "type") {
      const std::string t = value.is_string() ? value.get<std::string>() : "";
      if (t == "sphere") prim.type = Primitive::Type::sphere;
      else if (t == "box") prim.type = Primitive::Type::box;
      else throw config_error(where + ": type must be 'sphere' or 'box'");
      has_type = true;
    } else if (key == "radius") prim.radius = json_num(value, where + ".radius");
    else if (key == "half_extents") prim.half_extents = json_vec3(value, where + ".half_extents");
    else if (key == "density") prim.density = json_num(value, where + ".density");
    else if (key == "albedo") prim.albedo = json_vec3(value, where + ".albedo");
    else if (key == "center") prim.center = parse_motion(value, where + ".center");
    else throw config_error(where + ": unknown key '" + key + "'");
  }
  if (!has_type) throw config_error(where + ": missing 'type'");
  if (!(prim.density > 0)) throw config_error(where + ": density must be positive");
  if (prim.type == Primitive::Type::sphere && !(prim.radius > 0))
    throw config_error(where + ": radius must be positive");
  if (prim.type == Primitive::Type::box && !(prim.half_extents.minCoeff() > 0))
    throw config_error(where + ": half_extents must be positive");
  for (int k = 0; k < 3; ++k)
    if (prim.albedo[k] < 0 || prim.albedo[k] > 1)
      throw config_error(where + ": albedo components must be in [0,1]");
  return prim;
}

ordered_json pose_to_json(const Mat4d& pose) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < 4; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < 4; ++c) row.push_back(pose(r, c));
    rows.push_back(row);
  }
  return rows;
}

struct SplitPlan {
  std::string name;
  int count = 0;
  double sphere_offset = 0;  // rotation of the camera distribution
  bool endpoint_times = false;
};

void write_split(const SceneSpec& spec, const SplitPlan& plan, int width, int height,
                 const fs::path& out_dir) {
  const double fov = spec.fov_x_deg * 3.14159265358979323846 / 180.0;
  const double focal = 0.5 * width / std::tan(0.5 * fov);

  fs::create_directories(out_dir / plan.name);
  ordered_json doc;
  doc["camera_angle_x"] = fov;
  doc["frames"] = ordered_json::array();

  for (int i = 0; i < plan.count; ++i) {
    const double time =
        plan.endpoint_times
            ? (plan.count > 1 ? static_cast<double>(i) / (plan.count - 1) : 0.0)
            : (i + 0.5) / plan.count;
    const Vec3d eye = spec.camera_radius * fibonacci_dir(i, plan.count, plan.sphere_offset);
    const Mat4d pose = look_at_pose(eye, Vec3d::Zero(), Vec3d(0, 0, 1));

    char name[32];
    std::snprintf(name, sizeof(name), "r_%03d", i);
    const std::string rel = "./" + plan.name + "/" + name;

    const Image img = render_oracle_frame(spec, pose, focal, width, height, time);
    save_png(img, (out_dir / plan.name / (std::string(name) + ".png")).string());

    ordered_json frame;
    frame["file_path"] = rel;
    frame["time"] = time;
    frame["transform_matrix"] = pose_to_json(pose);
    doc["frames"].push_back(frame);
  }

  atomic_write_file((out_dir / ("transforms_" + plan.name + ".json")).string(), doc.dump(2) + "\n");
}

}  // namespace

void SceneSpec::validate() const {
  if (!(bbox_min.x() < bbox_max.x() && bbox_min.y() < bbox_max.y() && bbox_min.z() < bbox_max.z()))
    throw config_error("scene spec: bbox_min must be < bbox_max");
  if (background != "black" && background != "white")
    throw config_error("scene spec: background must be 'black' or 'white'");
  if (!(camera_radius > 0)) throw config_error("scene spec: camera_radius must be positive");
  if (!(fov_x_deg > 0) || fov_x_deg >= 180) throw config_error("scene spec: fov_x_deg out of range");
  for (std::size_t k = 0; k < primitives.size(); ++k) {
    const auto& p = primitives[k];
    const Vec3d ext = p.extent();
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      const Vec3d c = p.center.at(t);
      for (int a = 0; a < 3; ++a)
        if (c[a] - ext[a] < bbox_min[a] || c[a] + ext[a] > bbox_max[a])
          throw config_error("scene spec: primitive " + std::to_string(k) +
                             " leaves the bbox at t = " + std::to_string(t));
    }
  }
}

SceneSpec parse_scene_spec(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("scene spec: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("scene spec: top level must be an object");
  SceneSpec spec;
  for (const auto& [key, value] : doc.items()) {
    if (key == "bbox_min") spec.bbox_min = json_vec3(value, "bbox_min");
    else if (key == "bbox_max") spec.bbox_max = json_vec3(value, "bbox_max");
    else if (key == "background") spec.background = value.is_string() ? value.get<std::string>() : "";
    else if (key == "camera_radius") spec.camera_radius = json_num(value, "camera_radius");
    else if (key == "fov_x_deg") spec.fov_x_deg = json_num(value, "fov_x_deg");
    else if (key == "primitives") {
      if (!value.is_array()) throw config_error("scene spec: 'primitives' must be an array");
      for (std::size_t i = 0; i < value.size(); ++i)
        spec.primitives.push_back(parse_primitive(value[i], "primitive " + std::to_string(i)));
    } else {
      throw config_error("scene spec: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open scene spec '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scene_spec(buf.str());
}

Mat4d look_at_pose(const Vec3d& eye, const Vec3d& target, const Vec3d& up) {
  const Vec3d z = (eye - target).normalized();  // camera looks down -z
  Vec3d x = up.cross(z);
  if (x.norm() < 1e-6) x = Vec3d(0, 1, 0).cross(z);
  x.normalize();
  const Vec3d y = z.cross(x);
  Mat4d pose = Mat4d::Identity();
  pose.block<3, 1>(0, 0) = x;
  pose.block<3, 1>(0, 1) = y;
  pose.block<3, 1>(0, 2) = z;
  pose.block<3, 1>(0, 3) = eye;
  return pose;
}

Vec3d fibonacci_dir(int i, int n, double offset) {
  const double golden_angle = 2.39996322972865332;  // 2*pi*(2 - phi)
  const double theta = golden_angle * i + offset;
  const double z = 1.0 - 2.0 * (i + 0.5) / n;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3d(r * std::cos(theta), r * std::sin(theta), z);
}

Image render_oracle_frame(const SceneSpec& spec, const Mat4d& pose, double focal, int width,
                          int height, double time) {
  const double diag = (spec.bbox_max - spec.bbox_min).norm();
  const double step = diag / 1200.0;
  const Vec3<float> bg = spec.background_color();
  Image img(width, height);
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  ThreadPool::instance().parallel_for(total, [&](std::int64_t begin, std::int64_t end, int) {
    for (std::int64_t px = begin; px < end; ++px) {
      const int row = static_cast<int>(px / width);
      const int col = static_cast<int>(px % width);
      const Ray ray = generate_ray(pose, focal, width, height, row, col);
      const auto [c, trans] =
          quadrature_render_ray(ray, spec.bbox_min, spec.bbox_max, step,
                                [&](const Vec3d& x) { return spec.sigma_at(x, time); },
                                [&](const Vec3d& x) { return spec.color_at(x, time); });
      for (int k = 0; k < 3; ++k)
        img.at(row, col, k) = static_cast<float>(c[k]) + static_cast<float>(trans) * bg[k];
    }
  });
  return img;
}

void synth_scene(const SceneSpec& spec, int cameras, int width, int height, std::uint64_t seed,
                 const std::string& out_dir) {
  spec.validate();
  if (cameras < 1) throw config_error("synth_scene: camera count must be >= 1");
  if (width < 1 || height < 1) throw config_error("synth_scene: resolution must be positive");

  // The seed rotates the camera distributions; held-out splits sit at
  // different rotations and between training times.
  Rng rng(seed);
  const double base_offset = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const int held_out = std::max(2, cameras / 5);

  const fs::path root(out_dir);
  fs::create_directories(root);
  write_split(spec, {"train", cameras, base_offset, true}, width, height, root);
  write_split(spec, {"val", held_out, base_offset + 0.7, false}, width, height, root);
  write_split(spec, {"test", held_out, base_offset + 1.9, false}, width, height, root);
}

}  // namespace tnv
