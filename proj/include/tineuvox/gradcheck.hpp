#pragma once

#include <cstdint>
#include <string>

#include "tineuvox/config.hpp"

namespace tnv {

struct GradCheckReport {
  bool ok = false;
  double max_rel_err = 0;
  std::string worst_param;
  std::size_t checked = 0;  // parameters compared
  int attempts = 0;         // configurations drawn until one avoided all kinks
};

/// Small config sized for an exhaustive finite-difference sweep
/// (8^3 x 2 grid, width-16 networks, ~4 samples per ray).
TrainConfig gradcheck_default_config();

/// Compares every parameter's analytic gradient of the total loss against
/// central finite differences (double precision, h = 1e-5) on a seeded
/// random model and a handful of random rays. Scenes are redrawn until no
/// sample sits near a ReLU kink, sub-lattice cell face, or bbox clamp,
/// where finite differences are invalid. Passes when
/// |analytic - fd| <= 1e-4 * max(1e-3, |analytic|, |fd|) for all
/// parameters.
GradCheckReport run_gradcheck(const TrainConfig& cfg, std::uint64_t seed);

}  // namespace tnv
