#pragma once

#include <cmath>

#include "tineuvox/common.hpp"

namespace tnv {

/// Frequency encoding spec: L sin/cos octaves, optionally keeping the raw
/// input channel. Output dimension per input channel is 2L + include_input.
struct PeSpec {
  int num_freqs = 0;
  bool include_input = true;

  int block_dim() const { return 2 * num_freqs + (include_input ? 1 : 0); }
  int out_dim(int input_dim) const { return input_dim * block_dim(); }
};

/// Per input channel emits (x, sin(2^0 x), cos(2^0 x), ..., sin(2^{L-1} x),
/// cos(2^{L-1} x)); channel blocks are concatenated in input order.
/// Columns of `in` are independent vectors. Throws on non-finite input.
template <class T>
void positional_encode(const Eigen::Ref<const MatX<T>>& in, const PeSpec& spec, MatX<T>& out) {
  if (!in.allFinite()) throw invalid_input("positional_encode: non-finite input");
  const int d = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  const int block = spec.block_dim();
  out.resize(static_cast<Eigen::Index>(d) * block, cols);
  for (int c = 0; c < d; ++c) {
    const int base = c * block;
    if (spec.include_input) out.row(base) = in.row(c);
    T freq = T(1);
    for (int k = 0; k < spec.num_freqs; ++k) {
      const int r = base + (spec.include_input ? 1 : 0) + 2 * k;
      out.row(r) = (in.row(c).array() * freq).sin();
      out.row(r + 1) = (in.row(c).array() * freq).cos();
      freq *= T(2);
    }
  }
}

template <class T>
MatX<T> positional_encode(const Eigen::Ref<const MatX<T>>& in, const PeSpec& spec) {
  MatX<T> out;
  positional_encode<T>(in, spec, out);
  return out;
}

/// Reverse-mode companion. Uses the forward output (the sin and cos values
/// are each other's derivatives up to the 2^k factor), so nothing is
/// recomputed. Accumulates into `din`, which must be presized to in's shape.
template <class T>
void positional_encode_backward(const Eigen::Ref<const MatX<T>>& forward_out, const PeSpec& spec,
                                const Eigen::Ref<const MatX<T>>& dout, MatX<T>& din) {
  const int block = spec.block_dim();
  const int d = static_cast<int>(din.rows());
  for (int c = 0; c < d; ++c) {
    const int base = c * block;
    if (spec.include_input) din.row(c) += dout.row(base);
    T freq = T(1);
    for (int k = 0; k < spec.num_freqs; ++k) {
      const int r = base + (spec.include_input ? 1 : 0) + 2 * k;
      // d/dx sin(fx) = f cos(fx);  d/dx cos(fx) = -f sin(fx)
      din.row(c) += freq * (dout.row(r).cwiseProduct(forward_out.row(r + 1)) -
                            dout.row(r + 1).cwiseProduct(forward_out.row(r)));
      freq *= T(2);
    }
  }
}

}  // namespace tnv
