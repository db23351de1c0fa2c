#pragma once

#include <cmath>

#include "tineuvox/render.hpp"

namespace tnv {

/// Per-batch loss values; total = photo + lambda_all*all_pts +
/// lambda_bg*bg_entropy. All terms are channel-mean conventions so the
/// lambda weights are comparable.
struct LossBreakdown {
  double photo = 0, all_pts = 0, bg_entropy = 0, total = 0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    photo += o.photo;
    all_pts += o.all_pts;
    bg_entropy += o.bg_entropy;
    total += o.total;
    return *this;
  }
};

/// Mean over batch rays of the channel-mean squared color error.
template <class T>
double photometric_loss(const MatX<T>& pred, const MatX<T>& target) {
  if (pred.rows() != 3 || target.rows() != 3 || pred.cols() != target.cols())
    throw invalid_input("photometric_loss: shape mismatch");
  if (pred.cols() == 0) throw invalid_input("photometric_loss: empty batch");
  double sum = 0;
  for (Eigen::Index r = 0; r < pred.cols(); ++r)
    sum += (pred.col(r) - target.col(r)).template cast<double>().squaredNorm() / 3.0;
  return sum / static_cast<double>(pred.cols());
}

inline constexpr double kEntropyClamp = 1e-6;

/// Binary entropy of the residual transmittance, -T log T - (1-T) log(1-T),
/// with T clamped to [eps, 1-eps].
inline double bg_entropy(double t_last) {
  const double t = std::clamp(t_last, kEntropyClamp, 1.0 - kEntropyClamp);
  return -t * std::log(t) - (1.0 - t) * std::log(1.0 - t);
}

/// d bg_entropy / d t_last; zero in the clamped regions.
inline double d_bg_entropy(double t_last) {
  if (t_last <= kEntropyClamp || t_last >= 1.0 - kEntropyClamp) return 0.0;
  return std::log((1.0 - t_last) / t_last);
}

/// Per-ray loss terms and the upstream gradients they induce on the ray's
/// render outputs. `inv_rays` = 1/batch size (losses are batch means).
template <class T>
struct RayLoss {
  double photo = 0, all_pts = 0, bg = 0;
  Vec3<T> d_c_hat = Vec3<T>::Zero();
  T d_t_last = T(0);
  VecX<T> d_weight;  // empty when lambda_all = 0
  MatX<T> d_color;   // empty when lambda_all = 0
};

/// Photometric + all-points + background-entropy terms for one ray.
/// The prediction compared against the target is c_hat + t_last*background.
/// Filtered samples (color branch skipped) are excluded from the
/// all-points term: their color was never produced.
template <class T>
void compute_ray_loss(const RayWorkspace<T>& ws, const Vec3<T>& target, const Vec3<T>& background,
                      double lambda_all, double lambda_bg, double inv_rays, RayLoss<T>& out) {
  const Vec3<T> pred = ws.c_hat + ws.t_last * background;
  const Vec3<T> diff = pred - target;
  out.photo = diff.template cast<double>().squaredNorm() / 3.0;

  const T photo_scale = static_cast<T>(2.0 * inv_rays / 3.0);
  out.d_c_hat = photo_scale * diff;
  out.d_t_last = photo_scale * diff.dot(background);

  out.bg = bg_entropy(static_cast<double>(ws.t_last));
  out.d_t_last += static_cast<T>(lambda_bg * inv_rays * d_bg_entropy(static_cast<double>(ws.t_last)));

  out.all_pts = 0;
  if (lambda_all > 0 && ws.n > 0) {
    out.d_weight.setZero(ws.n);
    out.d_color.setZero(3, ws.n);
    const T wscale = static_cast<T>(lambda_all * inv_rays / 3.0);
    const T cscale = static_cast<T>(lambda_all * inv_rays * 2.0 / 3.0);
    for (const int i : ws.color_cols) {
      const Vec3<T> cdiff = ws.color.col(i) - target;
      const double sq = cdiff.template cast<double>().squaredNorm();
      out.all_pts += static_cast<double>(ws.weight[i]) * sq / 3.0;
      out.d_weight[i] = static_cast<T>(sq) * wscale;
      out.d_color.col(i) = cscale * ws.weight[i] * cdiff;
    }
  } else {
    out.d_weight.resize(0);
    out.d_color.resize(3, 0);
  }
}

}  // namespace tnv
