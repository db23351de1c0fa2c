#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tineuvox/common.hpp"

namespace tnv {

/// Full training/architecture configuration. Serialized as flat
/// `key = value` text; every key matches the field name exactly.
struct TrainConfig {
  // Voxel grid (vertices per axis at the final resolution).
  int grid_nx = 100, grid_ny = 100, grid_nz = 100;
  int cv = 4;  // feature channels per vertex
  std::vector<int> strides = {1, 2, 4};
  Vec3d bbox_min = Vec3d(-1.5, -1.5, -1.5);
  Vec3d bbox_max = Vec3d(1.5, 1.5, 1.5);

  // Networks.
  int ch = 64;  // hidden width
  int ct = 20;  // time-embedding dim; must equal cv * (2*pe_f + 1)
  int pe_x = 10, pe_d = 4, pe_t = 8, pe_f = 2;  // PE frequency counts
  double sigma_shift = -2.0;

  // Optimization.
  std::int64_t total_iters = 20000;
  int batch_rays = 4096;
  double lr_voxels = 8e-2, lr_deform = 6e-4, lr_mlps = 8e-4;
  double lambda_all = 1e-2, lambda_bg = 1e-3;
  std::vector<std::int64_t> upscale_iters = {2000, 4000, 6000};
  std::int64_t half_precision_last = 1000;

  // Rendering.
  double alpha_threshold = 1e-4;
  std::string background = "black";  // "black" | "white"

  // Bookkeeping.
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 1000;
  std::int64_t val_every = 0;  // 0 disables periodic validation PSNR

  bool white_background() const { return background == "white"; }
};

/// Parses `key = value` lines ('#' comments, blank lines allowed).
/// Unknown keys and malformed values raise config errors naming the key.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

/// Canonical text form; parse(serialize(c)) == c and the text is stable,
/// so configs embedded in checkpoints compare bytewise.
std::string serialize_train_config(const TrainConfig& c);

/// Throws config errors for violated invariants (dimension arithmetic,
/// schedule ordering, value ranges).
void validate_train_config(const TrainConfig& c);

/// Vertices per axis in effect at `iter`: starts at ceil(n/8) and doubles
/// at each configured upscale iteration, capped at n.
int grid_resolution_at(int base_n, const std::vector<std::int64_t>& upscale_iters,
                       std::int64_t iter);

}  // namespace tnv
