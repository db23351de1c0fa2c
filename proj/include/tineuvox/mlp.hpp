#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tineuvox/common.hpp"
#include "tineuvox/encoding.hpp"

namespace tnv {

template <class T>
inline T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
inline T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// d softplus(x)/dx.
template <class T>
inline T d_softplus(T x) {
  return sigmoid(x);
}

/// d sigmoid/dx expressed through the forward value y = sigmoid(x).
template <class T>
inline T d_sigmoid_from_y(T y) {
  return y * (T(1) - y);
}

/// Dense affine map y = Wx + b over column batches, with accumulating
/// reverse-mode gradients.
template <class T>
struct LinearLayer {
  MatX<T> weight;   // out x in
  VecX<T> bias;     // out
  MatX<T> dweight;
  VecX<T> dbias;

  LinearLayer() = default;
  LinearLayer(int out, int in)
      : weight(MatX<T>::Zero(out, in)), bias(VecX<T>::Zero(out)),
        dweight(MatX<T>::Zero(out, in)), dbias(VecX<T>::Zero(out)) {}

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
  std::size_t param_count() const { return weight.size() + bias.size(); }

  /// Fan-in-scaled uniform init, U(-sqrt(6/in), +sqrt(6/in)); biases zero.
  void init_kaiming(Rng& rng) {
    const double bound = std::sqrt(6.0 / in_dim());
    for (Eigen::Index j = 0; j < weight.cols(); ++j)
      for (Eigen::Index i = 0; i < weight.rows(); ++i)
        weight(i, j) = static_cast<T>(rng.uniform(-bound, bound));
    bias.setZero();
  }

  void zero_grad() {
    dweight.setZero();
    dbias.setZero();
  }

  template <class XIn, class YOut>
  void forward(const XIn& x, YOut&& y) const {
    if (x.rows() != weight.cols()) throw invalid_input("linear_forward: input dim mismatch");
    y.noalias() = weight * x;
    y.colwise() += bias;
  }

  /// Accumulates dW += dy x^T, db += row-sums of dy; writes dx = W^T dy.
  template <class XIn, class DyIn, class DxOut>
  void backward(const XIn& x, const DyIn& dy, DxOut&& dx) {
    if (x.rows() != weight.cols() || dy.rows() != weight.rows() || x.cols() != dy.cols())
      throw invalid_input("linear_backward: shape mismatch");
    dweight.noalias() += dy * x.transpose();
    dbias.noalias() += dy.rowwise().sum();
    dx.noalias() = weight.transpose() * dy;
  }
};

/// In-place ReLU; returns masked upstream for backward via relu_backward.
template <class M>
inline void relu_inplace(M&& m) {
  m = m.cwiseMax(typename std::decay_t<M>::Scalar(0));
}

/// Zeroes upstream where the post-activation value is zero.
template <class Post, class D>
inline void relu_backward_inplace(const Post& post, D&& d) {
  using T = typename std::decay_t<D>::Scalar;
  d.array() *= (post.array() > T(0)).template cast<T>();
}

/// Two-layer time network: t-embedding = l2(relu(l1(gamma(t)))).
/// The final layer initializes to zero so a fresh model's embedding is the
/// zero vector for every time stamp and renders are time-independent.
template <class T>
struct TimeNet {
  LinearLayer<T> l1, l2;

  TimeNet() = default;
  TimeNet(int in_dim, int hidden, int out_dim) : l1(hidden, in_dim), l2(out_dim, hidden) {}

  void init(Rng& rng) {
    l1.init_kaiming(rng);
    l2.weight.setZero();
    l2.bias.setZero();
  }

  int out_dim() const { return l2.out_dim(); }
  std::vector<LinearLayer<T>*> layers() { return {&l1, &l2}; }
  std::vector<const LinearLayer<T>*> layers() const { return {&l1, &l2}; }
  std::size_t param_count() const { return l1.param_count() + l2.param_count(); }
  void zero_grad() {
    l1.zero_grad();
    l2.zero_grad();
  }

  struct Tape {
    VecX<T> in, h, out;
  };

  void forward(const VecX<T>& gamma_t, Tape& tape) const {
    tape.in = gamma_t;
    l1.forward(tape.in, tape.h);
    relu_inplace(tape.h);
    l2.forward(tape.h, tape.out);
  }

  /// Returns d(loss)/d(gamma_t); parameter grads accumulate.
  VecX<T> backward(const Tape& tape, const VecX<T>& dout) {
    VecX<T> dh(l1.out_dim()), din(l1.in_dim());
    l2.backward(tape.h, dout, dh);
    relu_backward_inplace(tape.h, dh);
    l1.backward(tape.in, dh, din);
    return din;
  }
};

/// Three-layer deformation network mapping concat(gamma(p), t-embedding)
/// to additive world-space coordinate offsets. The final layer initializes
/// to zero so the initial deformation is exactly the identity.
template <class T>
struct DeformNet {
  LinearLayer<T> l1, l2, l3;

  DeformNet() = default;
  DeformNet(int in_dim, int hidden) : l1(hidden, in_dim), l2(hidden, hidden), l3(3, hidden) {}

  void init(Rng& rng) {
    l1.init_kaiming(rng);
    l2.init_kaiming(rng);
    l3.weight.setZero();
    l3.bias.setZero();
  }

  std::vector<LinearLayer<T>*> layers() { return {&l1, &l2, &l3}; }
  std::vector<const LinearLayer<T>*> layers() const { return {&l1, &l2, &l3}; }
  std::size_t param_count() const {
    return l1.param_count() + l2.param_count() + l3.param_count();
  }
  void zero_grad() {
    l1.zero_grad();
    l2.zero_grad();
    l3.zero_grad();
  }

  struct Tape {
    MatX<T> in, h1, h2, out;  // post-activation values
  };

  /// in: (|gamma(p)| + C_t) x n. out: 3 x n offsets.
  void forward(const MatX<T>& in, Tape& tape) const {
    tape.in = in;
    l1.forward(tape.in, tape.h1);
    relu_inplace(tape.h1);
    l2.forward(tape.h1, tape.h2);
    relu_inplace(tape.h2);
    l3.forward(tape.h2, tape.out);
  }

  /// Returns d(loss)/d(in); parameter grads accumulate.
  MatX<T> backward(const Tape& tape, const MatX<T>& dout) {
    MatX<T> dh2, dh1, din;
    l3.backward(tape.h2, dout, dh2);
    relu_backward_inplace(tape.h2, dh2);
    l2.backward(tape.h1, dh2, dh1);
    relu_backward_inplace(tape.h1, dh1);
    l1.backward(tape.in, dh1, din);
    return din;
  }
};

/// Radiance network: a shared trunk on concat(gamma(v), t-embedding,
/// gamma(p)) feeding a direction-independent density head and a color
/// branch that additionally sees gamma(d).
template <class T>
struct RadianceNet {
  LinearLayer<T> trunk1, trunk2;  // ReLU after each
  LinearLayer<T> density;         // hidden -> 1, raw (pre-softplus)
  LinearLayer<T> color1, color2;  // ReLU after color1; color2 emits rgb logits

  RadianceNet() = default;
  RadianceNet(int trunk_in, int hidden, int dir_pe_dim)
      : trunk1(hidden, trunk_in), trunk2(hidden, hidden), density(1, hidden),
        color1(hidden, hidden + dir_pe_dim), color2(3, hidden) {}

  void init(Rng& rng) {
    trunk1.init_kaiming(rng);
    trunk2.init_kaiming(rng);
    density.init_kaiming(rng);
    color1.init_kaiming(rng);
    color2.init_kaiming(rng);
  }

  int trunk_in_dim() const { return trunk1.in_dim(); }
  int dir_pe_dim() const { return color1.in_dim() - trunk2.out_dim(); }
  std::vector<LinearLayer<T>*> layers() { return {&trunk1, &trunk2, &density, &color1, &color2}; }
  std::vector<const LinearLayer<T>*> layers() const {
    return {&trunk1, &trunk2, &density, &color1, &color2};
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* l : layers()) n += l->param_count();
    return n;
  }
  void zero_grad() {
    for (auto* l : layers()) l->zero_grad();
  }

  struct Tape {
    MatX<T> in, h1, h2;          // trunk (post-activation)
    MatX<T> raw_sigma;           // 1 x n
    MatX<T> color_in, c1, logits;  // color branch over the unmasked subset
    std::vector<int> color_cols;   // sample index per color-branch column
  };

  /// Trunk + density head over all n samples; writes raw (pre-softplus)
  /// densities. The color branch runs separately on the filtered subset.
  void forward_density(const MatX<T>& in, Tape& tape) const {
    tape.in = in;
    trunk1.forward(tape.in, tape.h1);
    relu_inplace(tape.h1);
    trunk2.forward(tape.h1, tape.h2);
    relu_inplace(tape.h2);
    density.forward(tape.h2, tape.raw_sigma);
  }

  /// Color branch for the sample columns listed in `cols`; dir_pe is one
  /// encoded direction shared by the whole ray. Emits raw logits.
  void forward_color(const std::vector<int>& cols, const VecX<T>& dir_pe, Tape& tape) const {
    tape.color_cols = cols;
    const int n = static_cast<int>(cols.size());
    const int h = trunk2.out_dim();
    tape.color_in.resize(color1.in_dim(), n);
    for (int j = 0; j < n; ++j) {
      tape.color_in.col(j).head(h) = tape.h2.col(cols[j]);
      tape.color_in.col(j).tail(dir_pe.size()) = dir_pe;
    }
    color1.forward(tape.color_in, tape.c1);
    relu_inplace(tape.c1);
    color2.forward(tape.c1, tape.logits);
  }

  /// Reverse-mode through both heads and the trunk. d_raw_sigma: 1 x n,
  /// d_logits: 3 x |color_cols|. Returns d(loss)/d(trunk input).
  MatX<T> backward(const Tape& tape, const MatX<T>& d_raw_sigma, const MatX<T>& d_logits) {
    const int h = trunk2.out_dim();
    MatX<T> dh2(h, tape.in.cols());
    density.backward(tape.h2, d_raw_sigma, dh2);

    if (!tape.color_cols.empty()) {
      MatX<T> dc1, dcolor_in;
      color2.backward(tape.c1, d_logits, dc1);
      relu_backward_inplace(tape.c1, dc1);
      color1.backward(tape.color_in, dc1, dcolor_in);
      for (std::size_t j = 0; j < tape.color_cols.size(); ++j)
        dh2.col(tape.color_cols[j]) += dcolor_in.col(static_cast<Eigen::Index>(j)).head(h);
    }

    relu_backward_inplace(tape.h2, dh2);
    MatX<T> dh1, din;
    trunk2.backward(tape.h1, dh2, dh1);
    relu_backward_inplace(tape.h1, dh1);
    trunk1.backward(tape.in, dh1, din);
    return din;
  }
};

}  // namespace tnv
