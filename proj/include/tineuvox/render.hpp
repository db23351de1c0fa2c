#pragma once

#include <Eigen/LU>
#include <cmath>
#include <optional>
#include <vector>

#include "tineuvox/image.hpp"
#include "tineuvox/model.hpp"
#include "tineuvox/threads.hpp"

namespace tnv {

struct Ray {
  Vec3d origin = Vec3d::Zero();
  Vec3d dir = Vec3d(0, 0, -1);  // unit length
};

/// Pinhole ray through the pixel center of (row, col); the camera looks
/// down -z in its own frame, y up, and pose is camera-to-world.
inline Ray generate_ray(const Mat4d& pose, double focal, int width, int height, int row,
                        int col) {
  const Mat3d rot = pose.topLeftCorner<3, 3>();
  if (std::abs(rot.determinant()) < 1e-12) throw invalid_input("singular camera pose");
  Vec3d dir_cam((col + 0.5 - 0.5 * width) / focal, -(row + 0.5 - 0.5 * height) / focal, -1.0);
  Ray ray;
  ray.dir = (rot * dir_cam).normalized();
  ray.origin = pose.topRightCorner<3, 1>();
  return ray;
}

/// Slab intersection with [bbox_min, bbox_max]; near end clipped to the
/// ray start. Empty when the ray misses or the box is fully behind.
inline std::optional<std::pair<double, double>> ray_bbox_intersect(const Ray& ray,
                                                                   const Vec3d& bbox_min,
                                                                   const Vec3d& bbox_max) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.dir[a];
    if (std::abs(d) < 1e-9) {
      if (ray.origin[a] < bbox_min[a] || ray.origin[a] > bbox_max[a]) return std::nullopt;
      continue;
    }
    double ta = (bbox_min[a] - ray.origin[a]) / d;
    double tb = (bbox_max[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  return std::make_pair(t0, t1);
}

/// Equally spaced samples from bbox entry to exit: positions at
/// entry + i*step, every delta = step except a shorter final one.
struct SampledSegment {
  std::vector<double> ts;      // parameter of each sample
  std::vector<double> deltas;  // delta_i > 0, sums to the segment length
};

inline SampledSegment sample_points(const Ray& ray, const Vec3d& bbox_min, const Vec3d& bbox_max,
                                    double step) {
  SampledSegment seg;
  if (!(step > 0)) throw invalid_input("sample step must be positive");
  const auto hit = ray_bbox_intersect(ray, bbox_min, bbox_max);
  if (!hit) return seg;
  const double t0 = hit->first, t1 = hit->second;
  const int n = static_cast<int>(std::ceil((t1 - t0) / step));
  if (n <= 0) return seg;
  seg.ts.resize(n);
  seg.deltas.resize(n);
  for (int i = 0; i < n; ++i) {
    seg.ts[i] = t0 + i * step;
    seg.deltas[i] = (i + 1 < n) ? step : t1 - seg.ts[i];
  }
  return seg;
}

/// Emission-absorption compositing of one ray:
/// C = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i, T_1 = 1.
/// Returns the composited color and the residual transmittance.
template <class T>
std::pair<Vec3<T>, T> composite(const std::vector<T>& sigmas, const std::vector<Vec3<T>>& colors,
                                const std::vector<T>& deltas) {
  Vec3<T> c = Vec3<T>::Zero();
  T trans = T(1);
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const T a = sigmas[i] * deltas[i];
    c += trans * static_cast<T>(-std::expm1(-static_cast<double>(a))) * colors[i];
    trans *= static_cast<T>(std::exp(-static_cast<double>(a)));
  }
  return {c, trans};
}

template <class T>
struct RenderOptions {
  double alpha_threshold = 1e-4;
  Vec3<T> background = Vec3<T>::Zero();
  double step = 0;  // 0 selects 0.5 * min voxel edge
};

template <class T>
RenderOptions<T> render_options_from(const TrainConfig& cfg) {
  RenderOptions<T> o;
  o.alpha_threshold = cfg.alpha_threshold;
  o.background = cfg.white_background() ? Vec3<T>::Ones() : Vec3<T>::Zero();
  return o;
}

/// Pipeline view: one shared read-only grid plus the networks to run
/// (and, in backward, to accumulate gradients into). Training workers
/// pair the master grid with their own network replicas so gradient
/// accumulation stays race-free and deterministic.
template <class T>
struct ModelView {
  const TrainConfig* cfg = nullptr;
  const VoxelGrid<T>* grid = nullptr;
  TimeNet<T>* time_net = nullptr;
  DeformNet<T>* deform_net = nullptr;
  RadianceNet<T>* radiance_net = nullptr;
  PeSpec pe_x, pe_d, pe_t, pe_f;

  ModelView() = default;
  explicit ModelView(Model<T>& m)
      : cfg(&m.cfg), grid(&m.grid), time_net(&m.time_net), deform_net(&m.deform_net),
        radiance_net(&m.radiance_net), pe_x(m.pe_x), pe_d(m.pe_d), pe_t(m.pe_t), pe_f(m.pe_f) {}
  /// Inference-only adapter: forward passes never mutate the networks.
  explicit ModelView(const Model<T>& m) : ModelView(const_cast<Model<T>&>(m)) {}
};

/// Everything one ray's forward pass produces, retained for reverse mode.
/// One instance per worker, reused across rays.
template <class T>
struct RayWorkspace {
  int n = 0;  // samples on the current ray

  std::vector<Vec3d> pos;       // original sample positions
  std::vector<Vec3d> deformed;  // after offsets + bbox clamp
  VecX<T> deltas;
  MatX<T> gamma_p;  // PE of original positions
  VecX<T> dir_pe;   // PE of the (per-ray) view direction

  typename TimeNet<T>::Tape time_tape;
  typename DeformNet<T>::Tape deform_tape;
  Eigen::Matrix<bool, 3, Eigen::Dynamic> clamp_pass;  // false where clamped

  MatX<T> feat;     // grid features at deformed positions (M*C x n)
  MatX<T> gamma_v;  // PE of feat
  typename RadianceNet<T>::Tape rad_tape;

  VecX<T> sigma, alpha, weight;
  VecX<T> trans;  // T_i, size n+1; trans[n] = residual transmittance
  MatX<T> color;  // 3 x n; zero for filtered samples
  std::vector<int> color_cols;

  Vec3<T> c_hat = Vec3<T>::Zero();  // compositing sum, background excluded
  T t_last = T(1);
};

/// Full differentiable forward pass of one ray at time `time`.
/// Chain: encode time -> deform -> multi-distance interpolation -> PE ->
/// radiance -> compositing, with alpha-threshold filtering of the color
/// branch. Fills `ws`; c_hat excludes the background term.
template <class T>
void render_ray_forward(const ModelView<T>& mv, const Ray& ray, double time,
                        const RenderOptions<T>& opts, RayWorkspace<T>& ws) {
  if (std::abs(ray.dir.norm() - 1.0) > 1e-6) throw invalid_input("ray direction must be unit");
  if (!(opts.alpha_threshold >= 0.0) || opts.alpha_threshold >= 1.0)
    throw config_error("alpha threshold must be in [0, 1)");

  const VoxelGrid<T>& grid = *mv.grid;
  const double step = opts.step > 0 ? opts.step : 0.5 * grid.min_voxel_edge();
  const SampledSegment seg = sample_points(ray, grid.bbox_min(), grid.bbox_max(), step);
  const int n = static_cast<int>(seg.ts.size());
  ws.n = n;
  ws.c_hat = Vec3<T>::Zero();
  ws.t_last = T(1);
  if (n == 0) return;

  ws.pos.resize(n);
  ws.deltas.resize(n);
  MatX<T> pos_mat(3, n);
  for (int i = 0; i < n; ++i) {
    ws.pos[i] = ray.origin + seg.ts[i] * ray.dir;
    ws.deltas[i] = static_cast<T>(seg.deltas[i]);
    pos_mat.col(i) = ws.pos[i].template cast<T>();
  }

  positional_encode<T>(pos_mat, mv.pe_x, ws.gamma_p);

  MatX<T> time_in(1, 1);
  time_in(0, 0) = static_cast<T>(time);
  MatX<T> gamma_t;
  positional_encode<T>(time_in, mv.pe_t, gamma_t);
  mv.time_net->forward(gamma_t.col(0), ws.time_tape);
  const VecX<T>& t_emb = ws.time_tape.out;

  MatX<T> dir_mat = ray.dir.cast<T>();
  MatX<T> dir_pe_mat;
  positional_encode<T>(dir_mat, mv.pe_d, dir_pe_mat);
  ws.dir_pe = dir_pe_mat.col(0);

  const int gx = static_cast<int>(ws.gamma_p.rows());
  const int ct = static_cast<int>(t_emb.size());
  MatX<T> deform_in(gx + ct, n);
  deform_in.topRows(gx) = ws.gamma_p;
  deform_in.bottomRows(ct).colwise() = t_emb;
  mv.deform_net->forward(deform_in, ws.deform_tape);

  ws.deformed.resize(n);
  ws.clamp_pass.resize(3, n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double q = ws.pos[i][a] + static_cast<double>(ws.deform_tape.out(a, i));
      const double lo = grid.bbox_min()[a], hi = grid.bbox_max()[a];
      ws.clamp_pass(a, i) = (q > lo && q < hi);
      ws.deformed[i][a] = std::clamp(q, lo, hi);
    }
  }

  ws.feat.resize(grid.feature_dim(), n);
  for (int i = 0; i < n; ++i) grid.interpolate(ws.deformed[i], ws.feat.col(i).data());

  positional_encode<T>(ws.feat, mv.pe_f, ws.gamma_v);

  const int gv = static_cast<int>(ws.gamma_v.rows());
  MatX<T> trunk_in(gv + ct + gx, n);
  trunk_in.topRows(gv) = ws.gamma_v;
  trunk_in.middleRows(gv, ct).colwise() = t_emb;
  trunk_in.bottomRows(gx) = ws.gamma_p;
  mv.radiance_net->forward_density(trunk_in, ws.rad_tape);

  const T shift = static_cast<T>(mv.cfg->sigma_shift);
  ws.sigma.resize(n);
  ws.alpha.resize(n);
  ws.weight.resize(n);
  ws.trans.resize(n + 1);
  ws.trans[0] = T(1);
  for (int i = 0; i < n; ++i) {
    ws.sigma[i] = softplus(ws.rad_tape.raw_sigma(0, i) + shift);
    const double a = static_cast<double>(ws.sigma[i]) * static_cast<double>(ws.deltas[i]);
    ws.alpha[i] = static_cast<T>(-std::expm1(-a));
    ws.weight[i] = ws.trans[i] * ws.alpha[i];
    ws.trans[i + 1] = ws.trans[i] * static_cast<T>(std::exp(-a));
  }

  ws.color_cols.clear();
  for (int i = 0; i < n; ++i)
    if (static_cast<double>(ws.alpha[i]) > opts.alpha_threshold) ws.color_cols.push_back(i);

  ws.color.setZero(3, n);
  ws.rad_tape.color_cols.clear();  // workspace is reused across rays
  if (!ws.color_cols.empty()) {
    mv.radiance_net->forward_color(ws.color_cols, ws.dir_pe, ws.rad_tape);
    for (std::size_t j = 0; j < ws.color_cols.size(); ++j) {
      const int i = ws.color_cols[j];
      for (int k = 0; k < 3; ++k)
        ws.color(k, i) = sigmoid(ws.rad_tape.logits(k, static_cast<Eigen::Index>(j)));
    }
  }

  Vec3<T> c = Vec3<T>::Zero();
  for (int i = 0; i < n; ++i) c += ws.weight[i] * ws.color.col(i);
  ws.c_hat = c;
  ws.t_last = ws.trans[n];
}

template <class T>
void render_ray_forward(const Model<T>& model, const Ray& ray, double time,
                        const RenderOptions<T>& opts, RayWorkspace<T>& ws) {
  render_ray_forward(ModelView<T>(model), ray, time, opts, ws);
}

/// Reverse-mode of render_ray_forward. `d_c_hat` / `d_t_last` are the
/// upstream gradients of the compositing outputs; `d_weight` (length n)
/// and `d_color` (3 x n) carry per-sample loss terms and may be empty.
/// Network gradients accumulate into the view's networks, grid gradients
/// into `sink` (callers merge per-worker sinks in worker order).
template <class T>
void render_ray_backward(const ModelView<T>& mv, RayWorkspace<T>& ws, const Vec3<T>& d_c_hat,
                         T d_t_last, const VecX<T>& d_weight, const MatX<T>& d_color,
                         GridGrads<T>& sink) {
  const int n = ws.n;
  if (n == 0) return;
  const bool has_dw = d_weight.size() > 0;
  const bool has_dc = d_color.size() > 0;

  // Total per-weight gradients, then the transmittance-chain reverse scan:
  // with a_i = sigma_i delta_i,
  //   dL/da_i = gw_i T_{i+1} - sum_{k>i} gw_k w_k - dL/dT_last * T_last.
  VecX<T> gw(n);
  for (int i = 0; i < n; ++i) {
    gw[i] = d_c_hat.dot(ws.color.col(i));
    if (has_dw) gw[i] += d_weight[i];
  }
  const T shift = static_cast<T>(mv.cfg->sigma_shift);
  MatX<T> d_raw(1, n);
  T suffix = T(0);
  for (int i = n - 1; i >= 0; --i) {
    const T da = gw[i] * ws.trans[i + 1] - suffix - d_t_last * ws.trans[n];
    suffix += gw[i] * ws.weight[i];
    const T dsigma = da * ws.deltas[i];
    d_raw(0, i) = dsigma * d_softplus(ws.rad_tape.raw_sigma(0, i) + shift);
  }

  MatX<T> d_logits(3, static_cast<Eigen::Index>(ws.color_cols.size()));
  for (std::size_t j = 0; j < ws.color_cols.size(); ++j) {
    const int i = ws.color_cols[j];
    Vec3<T> dc = d_c_hat * ws.weight[i];
    if (has_dc) dc += d_color.col(i);
    for (int k = 0; k < 3; ++k)
      d_logits(k, static_cast<Eigen::Index>(j)) = dc[k] * d_sigmoid_from_y(ws.color(k, i));
  }

  const MatX<T> d_trunk_in = mv.radiance_net->backward(ws.rad_tape, d_raw, d_logits);
  const int gv = static_cast<int>(ws.gamma_v.rows());
  const int ct = mv.cfg->ct;

  // gamma(p) rows feed geometry only (no learnable upstream): dropped.
  VecX<T> d_t_emb = d_trunk_in.middleRows(gv, ct).rowwise().sum();

  MatX<T> d_feat = MatX<T>::Zero(ws.feat.rows(), ws.feat.cols());
  positional_encode_backward<T>(ws.gamma_v, mv.pe_f, d_trunk_in.topRows(gv), d_feat);

  MatX<T> d_offsets(3, n);
  for (int i = 0; i < n; ++i) {
    Vec3<T> dp = Vec3<T>::Zero();
    mv.grid->interpolate_backward(ws.deformed[i], d_feat.col(i).data(), sink, &dp);
    for (int a = 0; a < 3; ++a) d_offsets(a, i) = ws.clamp_pass(a, i) ? dp[a] : T(0);
  }

  const MatX<T> d_deform_in = mv.deform_net->backward(ws.deform_tape, d_offsets);
  d_t_emb += d_deform_in.bottomRows(ct).rowwise().sum();

  mv.time_net->backward(ws.time_tape, d_t_emb);
}

/// Convenience single-ray render: composited color (background applied)
/// plus residual transmittance.
template <class T>
std::pair<Vec3<T>, T> render_ray(const ModelView<T>& mv, const Ray& ray, double time,
                                 const RenderOptions<T>& opts, RayWorkspace<T>& ws) {
  render_ray_forward(mv, ray, time, opts, ws);
  return {Vec3<T>(ws.c_hat + ws.t_last * opts.background), ws.t_last};
}

template <class T>
std::pair<Vec3<T>, T> render_ray(const Model<T>& model, const Ray& ray, double time,
                                 const RenderOptions<T>& opts, RayWorkspace<T>& ws) {
  return render_ray(ModelView<T>(model), ray, time, opts, ws);
}

/// Renders a full frame. Every ray is computed independently, so the
/// output is bitwise identical for any chunk size or worker count;
/// chunk_size only sets the work granularity.
template <class T>
Image render_image(const Model<T>& model, const Mat4d& pose, double focal, int width, int height,
                   double time, const RenderOptions<T>& opts, int chunk_size = 4096) {
  if (chunk_size < 1) throw invalid_input("chunk_size must be >= 1");
  const ModelView<T> mv(model);
  Image img(width, height);
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  ThreadPool::instance().parallel_for(total, [&](std::int64_t begin, std::int64_t end, int) {
    RayWorkspace<T> ws;
    for (std::int64_t chunk = begin; chunk < end; chunk += chunk_size) {
      const std::int64_t stop = std::min(end, chunk + chunk_size);
      for (std::int64_t i = chunk; i < stop; ++i) {
        const int row = static_cast<int>(i / width);
        const int col = static_cast<int>(i % width);
        const auto [c, t_last] =
            render_ray(mv, generate_ray(pose, focal, width, height, row, col), time, opts, ws);
        for (int k = 0; k < 3; ++k) img.at(row, col, k) = static_cast<float>(c[k]);
      }
    }
  });
  return img;
}

}  // namespace tnv
