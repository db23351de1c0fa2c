#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tineuvox/grid.hpp"
#include "tineuvox/mlp.hpp"

namespace tnv {

/// Exponential decay reaching 0.1x the base at total_iters:
/// lr(iter) = base * 0.1^(iter/total).
inline double lr_schedule(double base_lr, std::int64_t iter, std::int64_t total_iters) {
  if (total_iters <= 0) throw config_error("lr_schedule: total_iters must be > 0");
  return base_lr * std::pow(0.1, static_cast<double>(iter) / static_cast<double>(total_iters));
}

/// One Adam parameter group: beta = (0.9, 0.99), eps = 1e-8, bias
/// correction, moments in working precision.
template <class T>
struct AdamGroup {
  std::string id;
  double base_lr = 0;
  std::vector<T> m, v;
  std::int64_t step_count = 0;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.99;
  static constexpr double kEps = 1e-8;

  AdamGroup() = default;
  AdamGroup(std::string group_id, double lr, std::size_t n) : id(std::move(group_id)), base_lr(lr) {
    reset(n);
  }

  /// Zeroed moments, e.g. after a grid upscale changes parameter shapes.
  void reset(std::size_t n) {
    m.assign(n, T(0));
    v.assign(n, T(0));
    step_count = 0;
  }

  /// Core update over n scalars addressed by functors; grads are checked
  /// for NaN up front so a poisoned batch never corrupts parameters.
  template <class GetParam, class SetParam, class GetGrad>
  void step(std::size_t n, double lr, GetParam get_p, SetParam set_p, GetGrad get_g) {
    if (n != m.size()) throw state_error("adam group '" + id + "': moment/parameter size mismatch");
    for (std::size_t i = 0; i < n; ++i)
      if (std::isnan(static_cast<double>(get_g(i))))
        throw numeric_error("NaN gradient in parameter group '" + id + "'");
    ++step_count;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < n; ++i) {
      const double g = static_cast<double>(get_g(i));
      const double mi = kBeta1 * static_cast<double>(m[i]) + (1.0 - kBeta1) * g;
      const double vi = kBeta2 * static_cast<double>(v[i]) + (1.0 - kBeta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + kEps);
      set_p(i, static_cast<T>(static_cast<double>(get_p(i)) - update));
    }
  }
};

/// Adam step over a set of network layers (serialization order: weight
/// then bias per layer). Grads are zeroed after the update.
template <class T>
void adam_step_layers(AdamGroup<T>& group, const std::vector<LinearLayer<T>*>& layers, double lr) {
  std::vector<T*> params, grads;
  for (auto* l : layers) {
    T* w = l->weight.data();
    T* dw = l->dweight.data();
    for (Eigen::Index i = 0; i < l->weight.size(); ++i) {
      params.push_back(w + i);
      grads.push_back(dw + i);
    }
    T* b = l->bias.data();
    T* db = l->dbias.data();
    for (Eigen::Index i = 0; i < l->bias.size(); ++i) {
      params.push_back(b + i);
      grads.push_back(db + i);
    }
  }
  group.step(
      params.size(), lr, [&](std::size_t i) { return *params[i]; },
      [&](std::size_t i, T val) { *params[i] = val; }, [&](std::size_t i) { return *grads[i]; });
  for (auto* l : layers) l->zero_grad();
}

/// Adam step over the voxel grid. Reads/writes through the grid's value
/// accessors so the half-precision storage phase rounds updated values
/// through 16 bits while moments stay in working precision.
template <class T>
void adam_step_voxels(AdamGroup<T>& group, VoxelGrid<T>& grid, double lr) {
  group.step(
      grid.num_values(), lr, [&](std::size_t i) { return grid.value(i); },
      [&](std::size_t i, T val) { grid.set_value(i, val); },
      [&](std::size_t i) { return grid.grads.total[i]; });
  grid.grads.zero();
}

}  // namespace tnv
