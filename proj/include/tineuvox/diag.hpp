#pragma once

#include <string>

#include "tineuvox/checkpoint.hpp"

namespace tnv {

/// Writes training diagnostics for a checkpoint into `out_dir`:
/// stride_grads.csv (per-stride grid gradient L2 norms recorded at the
/// last checkpointed iteration) and deform_field.csv (deformation offsets
/// sampled on a 5x5x5 lattice at five timestamps). A checkpoint without
/// recorded gradient norms (never trained) raises a state error.
void write_diagnostics(const Checkpoint& ck, const std::string& out_dir);

}  // namespace tnv
