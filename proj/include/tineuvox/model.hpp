#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "tineuvox/config.hpp"
#include "tineuvox/encoding.hpp"
#include "tineuvox/grid.hpp"
#include "tineuvox/mlp.hpp"

namespace tnv {

/// PE output dim of one stride's feature vector; the time-embedding dim
/// must equal it (20 for 4 channels, 30 for 6, at 2 frequencies).
inline int encoded_voxel_feature_dim(int cv, int pe_f) { return cv * (2 * pe_f + 1); }

/// Complete learnable state: feature grid plus the three networks, with
/// the positional-encoding specs they were built for.
template <class T>
struct Model {
  TrainConfig cfg;
  VoxelGrid<T> grid;
  TimeNet<T> time_net;
  DeformNet<T> deform_net;
  RadianceNet<T> radiance_net;
  PeSpec pe_x, pe_d, pe_t, pe_f;

  Model() = default;

  /// Builds the grid at an explicit current resolution (training starts
  /// below the configured base and upscales toward it).
  Model(const TrainConfig& config, int nx, int ny, int nz) : cfg(config) {
    validate_train_config(cfg);
    if (cfg.ct != encoded_voxel_feature_dim(cfg.cv, cfg.pe_f))
      throw config_error("time-embedding dim inconsistent with encoded voxel-feature dim");
    pe_x = PeSpec{cfg.pe_x, true};
    pe_d = PeSpec{cfg.pe_d, true};
    pe_t = PeSpec{cfg.pe_t, true};
    pe_f = PeSpec{cfg.pe_f, true};
    grid = VoxelGrid<T>(cfg.cv, nx, ny, nz, cfg.bbox_min, cfg.bbox_max, cfg.strides);
    const int gx = pe_x.out_dim(3);
    const int gt = pe_t.out_dim(1);
    const int gd = pe_d.out_dim(3);
    const int gv = pe_f.out_dim(grid.feature_dim());
    time_net = TimeNet<T>(gt, cfg.ch, cfg.ct);
    deform_net = DeformNet<T>(gx + cfg.ct, cfg.ch);
    radiance_net = RadianceNet<T>(gv + cfg.ct + gx, cfg.ch, gd);
  }

  explicit Model(const TrainConfig& config)
      : Model(config, config.grid_nx, config.grid_ny, config.grid_nz) {}

  /// Network weight init in a fixed order so a seed pins every parameter.
  void init_weights(Rng& rng) {
    time_net.init(rng);
    deform_net.init(rng);
    radiance_net.init(rng);
  }

  /// Layers in serialization order.
  std::vector<LinearLayer<T>*> all_net_layers() {
    std::vector<LinearLayer<T>*> out;
    for (auto* l : time_net.layers()) out.push_back(l);
    for (auto* l : deform_net.layers()) out.push_back(l);
    for (auto* l : radiance_net.layers()) out.push_back(l);
    return out;
  }
  std::vector<const LinearLayer<T>*> all_net_layers() const {
    std::vector<const LinearLayer<T>*> out;
    for (const auto* l : time_net.layers()) out.push_back(l);
    for (const auto* l : deform_net.layers()) out.push_back(l);
    for (const auto* l : radiance_net.layers()) out.push_back(l);
    return out;
  }

  void zero_net_grads() {
    time_net.zero_grad();
    deform_net.zero_grad();
    radiance_net.zero_grad();
  }

  std::size_t voxel_param_count() const { return grid.num_values(); }
  std::size_t net_param_count() const {
    return time_net.param_count() + deform_net.param_count() + radiance_net.param_count();
  }

  void log_param_counts(std::ostream& os) const {
    os << "[tnv] parameters: voxels " << voxel_param_count() << " (" << grid.nx() << "x"
       << grid.ny() << "x" << grid.nz() << "x" << grid.channels() << "), time net "
       << time_net.param_count() << ", deform net " << deform_net.param_count()
       << ", radiance net " << radiance_net.param_count() << ", total "
       << voxel_param_count() + net_param_count() << "\n";
  }

  /// Swaps in an upscaled grid (same bbox/strides, doubled vertices).
  void upscale(int target_nx, int target_ny, int target_nz) {
    VoxelGrid<T> next = upscale_grid(grid);
    if (next.nx() > target_nx || next.ny() > target_ny || next.nz() > target_nz) {
      next = grid.resampled(std::min(2 * grid.nx(), target_nx), std::min(2 * grid.ny(), target_ny),
                            std::min(2 * grid.nz(), target_nz));
    }
    grid = std::move(next);
  }
};

}  // namespace tnv
