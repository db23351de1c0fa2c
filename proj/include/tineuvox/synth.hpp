#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tineuvox/dataset.hpp"
#include "tineuvox/render.hpp"

namespace tnv {

/// Time-parameterized trajectory:
/// base + linear*t + quadratic*t^2 + sin_amp * sin(2*pi*sin_freq*t + sin_phase).
struct MotionPath {
  Vec3d base = Vec3d::Zero();
  Vec3d linear = Vec3d::Zero();
  Vec3d quadratic = Vec3d::Zero();
  Vec3d sin_amp = Vec3d::Zero();
  double sin_freq = 1.0;
  double sin_phase = 0.0;

  Vec3d at(double t) const {
    const double s = std::sin(2.0 * 3.14159265358979323846 * sin_freq * t + sin_phase);
    return base + t * linear + t * t * quadratic + s * sin_amp;
  }
};

/// Constant-density, constant-albedo primitive moving along a MotionPath.
struct Primitive {
  enum class Type { sphere, box };
  Type type = Type::sphere;
  double radius = 0.5;                      // sphere
  Vec3d half_extents = Vec3d(0.5, 0.5, 0.5);  // box
  double density = 20.0;
  Vec3d albedo = Vec3d(1, 1, 1);
  MotionPath center;

  bool contains(const Vec3d& x, double t) const {
    const Vec3d c = center.at(t);
    if (type == Type::sphere) return (x - c).squaredNorm() <= radius * radius;
    return std::abs(x.x() - c.x()) <= half_extents.x() &&
           std::abs(x.y() - c.y()) <= half_extents.y() &&
           std::abs(x.z() - c.z()) <= half_extents.z();
  }

  /// Per-axis reach from the center, for bbox containment checks.
  Vec3d extent() const {
    return type == Type::sphere ? Vec3d(radius, radius, radius) : half_extents;
  }
};

/// Analytic dynamic scene: closed-form density/color fields that double
/// as the ground-truth oracle for synthesized datasets.
struct SceneSpec {
  Vec3d bbox_min = Vec3d(-1.5, -1.5, -1.5);
  Vec3d bbox_max = Vec3d(1.5, 1.5, 1.5);
  std::string background = "black";  // "black" | "white"
  double camera_radius = 4.0;
  double fov_x_deg = 50.0;
  std::vector<Primitive> primitives;

  double sigma_at(const Vec3d& x, double t) const {
    double s = 0;
    for (const auto& p : primitives)
      if (p.contains(x, t)) s += p.density;
    return s;
  }

  /// Density-weighted albedo blend of the primitives containing x.
  Vec3d color_at(const Vec3d& x, double t) const {
    double s = 0;
    Vec3d c = Vec3d::Zero();
    for (const auto& p : primitives)
      if (p.contains(x, t)) {
        s += p.density;
        c += p.density * p.albedo;
      }
    return s > 0 ? Vec3d(c / s) : Vec3d::Zero();
  }

  Vec3<float> background_color() const {
    return background == "white" ? Vec3<float>::Ones() : Vec3<float>::Zero();
  }

  /// Config errors when a trajectory can leave the bbox for t in [0,1].
  void validate() const;
};

SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::string& path);

/// Reference renderer: uniform midpoint quadrature of the compositing sum
/// against arbitrary field functors; `step` is an upper bound on the
/// sample spacing. Returns (color without background, residual
/// transmittance).
template <class SigmaFn, class ColorFn>
std::pair<Vec3d, double> quadrature_render_ray(const Ray& ray, const Vec3d& bbox_min,
                                               const Vec3d& bbox_max, double step, SigmaFn&& sigma_fn,
                                               ColorFn&& color_fn) {
  const auto hit = ray_bbox_intersect(ray, bbox_min, bbox_max);
  if (!hit) return {Vec3d::Zero(), 1.0};
  const double length = hit->second - hit->first;
  const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
  const double delta = length / n;
  Vec3d c = Vec3d::Zero();
  double trans = 1.0;
  for (int i = 0; i < n; ++i) {
    const Vec3d x = ray.origin + (hit->first + (i + 0.5) * delta) * ray.dir;
    const double a = sigma_fn(x) * delta;
    c += trans * (-std::expm1(-a)) * color_fn(x);
    trans *= std::exp(-a);
  }
  return {c, trans};
}

/// Camera-to-world pose looking from `eye` toward `target` (camera -z),
/// with `up` fixing the roll.
Mat4d look_at_pose(const Vec3d& eye, const Vec3d& target, const Vec3d& up);

/// i-th of n near-uniform unit directions (Fibonacci sphere), rotated by
/// `offset` radians about z.
Vec3d fibonacci_dir(int i, int n, double offset);

/// Renders one ground-truth frame of the scene by quadrature
/// (step = bbox diagonal / 1200), composited on the spec's background.
Image render_oracle_frame(const SceneSpec& spec, const Mat4d& pose, double focal, int width,
                          int height, double time);

/// Writes a loadable dataset: train/val/test splits with Fibonacci-sphere
/// cameras and evenly spaced times (val/test times fall between training
/// times). Deterministic in (spec, cameras, resolution, seed).
void synth_scene(const SceneSpec& spec, int cameras, int width, int height, std::uint64_t seed,
                 const std::string& out_dir);

}  // namespace tnv
