#include "tineuvox/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "tineuvox/loss.hpp"
#include "tineuvox/model.hpp"
#include "tineuvox/render.hpp"

namespace tnv {
namespace {

constexpr double kFdStep = 1e-5;
constexpr double kTol = 1e-4;
constexpr double kDenomFloor = 1e-3;
constexpr double kKinkMargin = 1e-3;  // min |preactivation| / cell-fraction distance
constexpr int kRays = 3;
constexpr int kMaxAttempts = 50;

struct Scene {
  std::vector<Ray> rays;
  std::vector<double> times;
  std::vector<Vec3d> targets;
};

Scene draw_scene(Rng& rng, const Vec3d& lo, const Vec3d& hi) {
  Scene sc;
  const Vec3d center = 0.5 * (lo + hi);
  for (int r = 0; r < kRays; ++r) {
    Ray ray;
    // Interior origins: the first sample then sits at the origin rather
    // than pinned onto a bbox wall (an interpolation kink).
    for (int a = 0; a < 3; ++a)
      ray.origin[a] = center[a] + rng.uniform(-0.3, 0.3) * (hi[a] - lo[a]);
    Vec3d u(rng.normal(), rng.normal(), rng.normal());
    ray.dir = u.normalized();
    sc.rays.push_back(ray);
    sc.times.push_back(rng.uniform(0.05, 0.95));
    sc.targets.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  }
  return sc;
}

/// Distance of the nearest ReLU preactivation from zero, recomputed from
/// the layer and its taped input (tapes store post-activation values).
double min_abs_preact(const LinearLayer<double>& l, const MatX<double>& in) {
  const MatX<double> z = (l.weight * in).colwise() + l.bias;
  return z.cwiseAbs().minCoeff();
}

/// Finite differences are valid wherever the chain is locally smooth.
/// Piecewise-linear kinks sit at ReLU zero crossings, sub-lattice cell
/// faces, the stride-coverage boundary, and the bbox walls; a point deep
/// inside a clamp region (beyond a wall / past the coverage) is fine, the
/// field is locally constant there. Rejects scenes with any sample within
/// kKinkMargin of a kink.
bool scene_avoids_kinks(const Model<double>& model, const RayWorkspace<double>& ws) {
  if (ws.n == 0) return false;
  double m = min_abs_preact(model.time_net.l1, MatX<double>(ws.time_tape.in));
  m = std::min(m, min_abs_preact(model.deform_net.l1, ws.deform_tape.in));
  m = std::min(m, min_abs_preact(model.deform_net.l2, ws.deform_tape.h1));
  m = std::min(m, min_abs_preact(model.radiance_net.trunk1, ws.rad_tape.in));
  m = std::min(m, min_abs_preact(model.radiance_net.trunk2, ws.rad_tape.h1));
  if (ws.rad_tape.color_in.cols() > 0)
    m = std::min(m, min_abs_preact(model.radiance_net.color1, ws.rad_tape.color_in));
  if (m < kKinkMargin) return false;

  const VoxelGrid<double>& grid = model.grid;
  const Vec3d lo = grid.bbox_min(), hi = grid.bbox_max();
  const int n_verts[3] = {grid.nx(), grid.ny(), grid.nz()};
  for (int i = 0; i < ws.n; ++i) {
    for (int a = 0; a < 3; ++a) {
      // Pre-clamp coordinate; ws.deformed holds the clamped point.
      const double q = ws.pos[i][a] + ws.deform_tape.out(a, i);
      if (std::abs(q - lo[a]) < kKinkMargin || std::abs(q - hi[a]) < kKinkMargin) return false;
      if (q < lo[a] || q > hi[a]) continue;  // deep outside: locally constant
      const double u = (q - lo[a]) / (hi[a] - lo[a]) * (n_verts[a] - 1);
      for (int s : grid.effective_strides()) {
        const double us = u / s;
        const int verts = (n_verts[a] - 1) / s + 1;
        const double dist = us > verts - 1
                                ? us - (verts - 1)
                                : std::min(us - std::floor(us), std::floor(us) + 1.0 - us);
        if (dist < kKinkMargin) return false;
      }
    }
  }
  return true;
}

}  // namespace

TrainConfig gradcheck_default_config() {
  TrainConfig cfg;
  cfg.grid_nx = cfg.grid_ny = cfg.grid_nz = 8;
  cfg.cv = 2;
  cfg.strides = {1, 2};
  cfg.ch = 16;
  cfg.pe_x = 2;
  cfg.pe_d = 1;
  cfg.pe_t = 2;
  cfg.pe_f = 1;
  cfg.ct = encoded_voxel_feature_dim(cfg.cv, cfg.pe_f);
  cfg.total_iters = 1;
  cfg.upscale_iters.clear();
  cfg.half_precision_last = 0;
  cfg.checkpoint_every = 0;
  cfg.alpha_threshold = 0;
  return cfg;
}

GradCheckReport run_gradcheck(const TrainConfig& cfg, std::uint64_t seed) {
  GradCheckReport report;
  Model<double> model(cfg);

  RenderOptions<double> opts;
  opts.alpha_threshold = 0;
  opts.background = Vec3<double>::Zero();
  // Interior origins exit after roughly half a box width: ~4 samples.
  opts.step = 0.12 * (model.grid.bbox_max() - model.grid.bbox_min()).norm();

  const double inv_rays = 1.0 / kRays;
  Scene scene;
  std::vector<RayWorkspace<double>> ws(kRays);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    report.attempts = attempt + 1;
    Rng rng(seed + static_cast<std::uint64_t>(attempt));
    model.init_weights(rng);
    // Zero-initialized output layers would leave whole paths at exactly
    // zero; perturb everything so every gradient is exercised.
    for (auto* l : model.all_net_layers()) {
      for (Eigen::Index i = 0; i < l->weight.size(); ++i)
        l->weight.data()[i] += 0.1 * rng.normal();
      for (Eigen::Index i = 0; i < l->bias.size(); ++i) l->bias.data()[i] += 0.1 * rng.normal();
    }
    for (std::size_t i = 0; i < model.grid.num_values(); ++i)
      model.grid.set_value(i, 0.5 * rng.normal());
    scene = draw_scene(rng, model.grid.bbox_min(), model.grid.bbox_max());

    bool clean = true;
    for (int r = 0; r < kRays && clean; ++r) {
      render_ray_forward(ModelView<double>(model), scene.rays[r], scene.times[r], opts, ws[r]);
      clean = scene_avoids_kinks(model, ws[r]);
    }
    if (clean) break;
    if (attempt + 1 == kMaxAttempts)
      throw numeric_error("gradcheck could not draw a kink-free scene");
  }

  const auto eval_loss = [&]() {
    RayWorkspace<double> w;
    RayLoss<double> rl;
    double total = 0;
    for (int r = 0; r < kRays; ++r) {
      render_ray_forward(ModelView<double>(model), scene.rays[r], scene.times[r], opts, w);
      compute_ray_loss<double>(w, scene.targets[r].cast<double>(), opts.background, cfg.lambda_all,
                               cfg.lambda_bg, inv_rays, rl);
      total += inv_rays * (rl.photo + cfg.lambda_all * rl.all_pts + cfg.lambda_bg * rl.bg);
    }
    return total;
  };

  // Analytic gradients for the same total loss.
  model.zero_net_grads();
  model.grid.grads.reset(model.grid.num_values(), model.grid.num_strides(), false);
  {
    const ModelView<double> mv(model);
    RayLoss<double> rl;
    for (int r = 0; r < kRays; ++r) {
      render_ray_forward(mv, scene.rays[r], scene.times[r], opts, ws[r]);
      compute_ray_loss<double>(ws[r], scene.targets[r].cast<double>(), opts.background,
                               cfg.lambda_all, cfg.lambda_bg, inv_rays, rl);
      render_ray_backward(mv, ws[r], rl.d_c_hat, rl.d_t_last, rl.d_weight, rl.d_color,
                          model.grid.grads);
    }
  }

  struct ParamRef {
    double* p;
    double analytic;
    std::string name;
  };
  std::vector<ParamRef> params;
  std::vector<double> grid_copy(model.grid.num_values());
  for (std::size_t i = 0; i < model.grid.num_values(); ++i) grid_copy[i] = model.grid.value(i);

  const auto layers = model.all_net_layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    LinearLayer<double>* l = layers[li];
    for (Eigen::Index i = 0; i < l->weight.size(); ++i)
      params.push_back({l->weight.data() + i, l->dweight.data()[i],
                        "layer" + std::to_string(li) + ".weight[" + std::to_string(i) + "]"});
    for (Eigen::Index i = 0; i < l->bias.size(); ++i)
      params.push_back({l->bias.data() + i, l->dbias.data()[i],
                        "layer" + std::to_string(li) + ".bias[" + std::to_string(i) + "]"});
  }

  report.ok = true;
  const auto check = [&](double analytic, double fd, const std::string& name) {
    const double denom = std::max({kDenomFloor, std::abs(analytic), std::abs(fd)});
    const double err = std::abs(analytic - fd) / denom;
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_param = name;
    }
    if (err > kTol) report.ok = false;
    ++report.checked;
  };

  for (const ParamRef& pr : params) {
    const double saved = *pr.p;
    *pr.p = saved + kFdStep;
    const double lp = eval_loss();
    *pr.p = saved - kFdStep;
    const double lm = eval_loss();
    *pr.p = saved;
    check(pr.analytic, (lp - lm) / (2.0 * kFdStep), pr.name);
  }
  for (std::size_t i = 0; i < grid_copy.size(); ++i) {
    model.grid.set_value(i, grid_copy[i] + kFdStep);
    const double lp = eval_loss();
    model.grid.set_value(i, grid_copy[i] - kFdStep);
    const double lm = eval_loss();
    model.grid.set_value(i, grid_copy[i]);
    check(model.grid.grads.total[i], (lp - lm) / (2.0 * kFdStep),
          "voxels[" + std::to_string(i) + "]");
  }

  return report;
}

}  // namespace tnv
