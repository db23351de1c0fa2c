#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tineuvox/model.hpp"
#include "tineuvox/optim.hpp"

namespace tnv {

/// Everything a training checkpoint holds. Round-trips bit-exactly:
/// save(load(f)) produces a byte-identical file.
struct Checkpoint {
  std::int64_t iteration = 0;
  Model<float> model;
  std::string rng_state;
  bool has_optimizer = false;
  AdamGroup<float> opt_voxels, opt_deform, opt_mlps;
  std::vector<double> stride_grad_norms;  // per-stride grid gradient L2 norms
};

/// Binary layout (little-endian): magic "TNVC", u32 version 1, u64
/// iteration, config text, RNG state text, a "TNVX" grid block (u32
/// version/channels/nx/ny/nz/dtype with 0 = f32 and 1 = f16, 6 x f64
/// bbox, stride list, values ordered c -> x -> y -> z with z fastest),
/// the network layers in order (u32 out/in, column-major f32 weights,
/// f32 biases), optional Adam state per group, and per-stride gradient
/// norms. Writes are atomic.
void save_checkpoint(const std::string& path, std::int64_t iteration, const Model<float>& model,
                     const std::string& rng_state, const AdamGroup<float>* opt_voxels,
                     const AdamGroup<float>* opt_deform, const AdamGroup<float>* opt_mlps,
                     const std::vector<double>& stride_grad_norms);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace tnv
