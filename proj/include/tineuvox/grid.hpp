#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "tineuvox/common.hpp"
#include "tineuvox/half.hpp"

namespace tnv {

/// Gradient accumulator matching a grid's value layout. Scatter targets
/// either one total buffer or, when per-stride attribution is enabled,
/// one buffer per stride (total is then their vertex-wise sum in stride
/// order). Workers keep their own instance and merge in worker order.
template <class T>
struct GridGrads {
  std::vector<T> total;
  std::vector<std::vector<T>> per_stride;
  bool touched = false;

  void reset(std::size_t n, int num_strides, bool track_per_stride) {
    total.assign(n, T(0));
    per_stride.clear();
    if (track_per_stride) per_stride.assign(num_strides, std::vector<T>(n, T(0)));
    touched = false;
  }

  void zero() {
    std::fill(total.begin(), total.end(), T(0));
    for (auto& g : per_stride) std::fill(g.begin(), g.end(), T(0));
    touched = false;
  }

  bool per_stride_enabled() const { return !per_stride.empty(); }

  void add(int stride_index, std::size_t i, T v) {
    if (per_stride_enabled())
      per_stride[stride_index][i] += v;
    else
      total[i] += v;
    touched = true;
  }

  /// Folds per-stride buffers into `total` (stride order per vertex).
  void finalize_total() {
    if (!per_stride_enabled()) return;
    std::fill(total.begin(), total.end(), T(0));
    for (const auto& g : per_stride)
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
  }

  void merge(const GridGrads& other) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += other.total[i];
    for (std::size_t m = 0; m < per_stride.size(); ++m)
      for (std::size_t i = 0; i < per_stride[m].size(); ++i)
        per_stride[m][i] += other.per_stride[m][i];
    touched = touched || other.touched;
  }

  std::vector<double> stride_norms() const {
    std::vector<double> norms;
    for (const auto& g : per_stride) {
      double s = 0;
      for (T v : g) s += static_cast<double>(v) * static_cast<double>(v);
      norms.push_back(std::sqrt(s));
    }
    return norms;
  }
};

/// Dense learnable feature grid over a world-space axis-aligned box.
/// "Resolution N" means N vertices per axis; vertex (0,0,0) sits at
/// bbox_min and (Nx-1,Ny-1,Nz-1) at bbox_max. Values are stored
/// channel-fastest in memory; serialization transposes to the documented
/// z-fastest layout. Storage is f32/f64 until quantize_half() switches it
/// to IEEE binary16 (reads widen, writes round through 16 bits).
template <class T>
class VoxelGrid {
 public:
  VoxelGrid() = default;

  VoxelGrid(int channels, int nx, int ny, int nz, const Vec3d& bbox_min, const Vec3d& bbox_max,
            std::vector<int> strides)
      : channels_(channels), nx_(nx), ny_(ny), nz_(nz), bbox_min_(bbox_min), bbox_max_(bbox_max),
        strides_(std::move(strides)) {
    if (channels_ < 1) throw config_error("voxel grid needs at least one channel");
    if (nx_ < 2 || ny_ < 2 || nz_ < 2) throw config_error("voxel grid needs >= 2 vertices per axis");
    for (int a = 0; a < 3; ++a)
      if (!(bbox_min_[a] < bbox_max_[a])) throw config_error("voxel grid bbox_min must be < bbox_max");
    if (strides_.empty()) throw config_error("voxel grid needs at least one stride");
    for (std::size_t i = 0; i < strides_.size(); ++i) {
      if (strides_[i] < 1) throw config_error("voxel grid strides must be positive");
      if (i > 0 && strides_[i] <= strides_[i - 1])
        throw config_error("voxel grid strides must be strictly increasing");
    }
    // Strides larger than the current lattice allows are clamped to
    // N_min-1 so the stride count (and downstream feature dims) is
    // resolution-independent during progressive upscaling.
    const int max_stride = std::min({nx_, ny_, nz_}) - 1;
    effective_strides_ = strides_;
    for (int& s : effective_strides_) s = std::min(s, max_stride);
    data_.assign(num_values(), T(0));  // voxels initialize to zero
    grads.reset(num_values(), num_strides(), false);
  }

  int channels() const { return channels_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  const Vec3d& bbox_min() const { return bbox_min_; }
  const Vec3d& bbox_max() const { return bbox_max_; }
  const std::vector<int>& strides() const { return strides_; }
  const std::vector<int>& effective_strides() const { return effective_strides_; }
  int num_strides() const { return static_cast<int>(strides_.size()); }
  int feature_dim() const { return num_strides() * channels_; }

  std::size_t num_values() const {
    return static_cast<std::size_t>(channels_) * nx_ * ny_ * nz_;
  }

  Vec3d voxel_size() const {
    return Vec3d((bbox_max_.x() - bbox_min_.x()) / (nx_ - 1),
                 (bbox_max_.y() - bbox_min_.y()) / (ny_ - 1),
                 (bbox_max_.z() - bbox_min_.z()) / (nz_ - 1));
  }
  double min_voxel_edge() const { return voxel_size().minCoeff(); }

  std::size_t index(int c, int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * ny_ + y) * nz_ * channels_ +
           static_cast<std::size_t>(z) * channels_ + c;
  }

  bool half_mode() const { return half_mode_; }

  T value(std::size_t i) const {
    return half_mode_ ? static_cast<T>(half_to_float(half_data_[i])) : data_[i];
  }
  T value(int c, int x, int y, int z) const { return value(index(c, x, y, z)); }

  void set_value(std::size_t i, T v) {
    if (half_mode_)
      half_data_[i] = float_to_half(static_cast<float>(v));
    else
      data_[i] = v;
  }
  void set_value(int c, int x, int y, int z, T v) { set_value(index(c, x, y, z), v); }

  const std::vector<T>& raw_data() const { return data_; }
  const std::vector<std::uint16_t>& raw_half_data() const { return half_data_; }

  /// Switches storage to binary16. Values beyond the half range saturate
  /// to +-65504; one warning is logged if any did.
  void quantize_half() {
    if (half_mode_) return;
    half_data_.resize(data_.size());
    std::size_t saturated = 0;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const float f = static_cast<float>(data_[i]);
      if (std::isfinite(f) && std::fabs(f) > kHalfMax) ++saturated;
      half_data_[i] = float_to_half(f);
    }
    if (saturated > 0)
      std::cerr << "[tnv] warning: " << saturated
                << " voxel value(s) exceeded the half-precision range and were saturated\n";
    data_.clear();
    data_.shrink_to_fit();
    half_mode_ = true;
  }

  void load_half_payload(std::vector<std::uint16_t> values) {
    if (values.size() != num_values()) throw invalid_input("half payload size mismatch");
    half_data_ = std::move(values);
    data_.clear();
    half_mode_ = true;
  }

  // ---- interpolation -------------------------------------------------

  struct StrideCell {
    int ix, iy, iz;        // lower full-grid vertex index per axis
    int step_x, step_y, step_z;
    T fx, fy, fz;          // fractional weights in the subsampled lattice
    bool clamp_x, clamp_y, clamp_z;  // true when beyond the lattice cover
  };

  /// Locates p in stride m's subsampled lattice. Throws when p lies
  /// outside the bbox by more than 1e-9 of the extent on any axis.
  StrideCell locate(int m, const Vec3d& p) const {
    const int s = effective_strides_[m];
    StrideCell cell;
    int* idx[3] = {&cell.ix, &cell.iy, &cell.iz};
    int* step[3] = {&cell.step_x, &cell.step_y, &cell.step_z};
    T* frac[3] = {&cell.fx, &cell.fy, &cell.fz};
    bool* clamp[3] = {&cell.clamp_x, &cell.clamp_y, &cell.clamp_z};
    const int n[3] = {nx_, ny_, nz_};
    for (int a = 0; a < 3; ++a) {
      const double extent = bbox_max_[a] - bbox_min_[a];
      const double tol = 1e-9 * extent;
      if (p[a] < bbox_min_[a] - tol || p[a] > bbox_max_[a] + tol)
        throw invalid_input("interpolation point outside grid bbox");
      double u = (p[a] - bbox_min_[a]) / extent * (n[a] - 1);
      u = std::clamp(u, 0.0, static_cast<double>(n[a] - 1));
      const int verts = (n[a] - 1) / s + 1;  // vertices in the subsampled lattice
      double us = u / s;
      *clamp[a] = us > static_cast<double>(verts - 1);
      us = std::clamp(us, 0.0, static_cast<double>(verts - 1));
      int i = std::min(static_cast<int>(us), verts - 2);
      *idx[a] = i * s;
      *step[a] = s;
      *frac[a] = static_cast<T>(us - i);
    }
    return cell;
  }

  /// Trilinear blend of the 8 cell corners for stride m; writes channels_
  /// values. Exact at vertices, linear along each axis.
  void interpolate_stride(int m, const Vec3d& p, T* out) const {
    const StrideCell cell = locate(m, p);
    blend(cell, out);
  }

  /// Multi-distance interpolation: v_1 ++ ... ++ v_M in stride order.
  void interpolate(const Vec3d& p, T* out) const {
    for (int m = 0; m < num_strides(); ++m) interpolate_stride(m, p, out + m * channels_);
  }

  void blend(const StrideCell& cell, T* out) const {
    const T fx = cell.fx, fy = cell.fy, fz = cell.fz;
    const T wx[2] = {T(1) - fx, fx};
    const T wy[2] = {T(1) - fy, fy};
    const T wz[2] = {T(1) - fz, fz};
    for (int c = 0; c < channels_; ++c) out[c] = T(0);
    for (int dx = 0; dx < 2; ++dx) {
      const int x = cell.ix + dx * cell.step_x;
      for (int dy = 0; dy < 2; ++dy) {
        const int y = cell.iy + dy * cell.step_y;
        const T wxy = wx[dx] * wy[dy];
        for (int dz = 0; dz < 2; ++dz) {
          const int z = cell.iz + dz * cell.step_z;
          const T w = wxy * wz[dz];
          const std::size_t base = index(0, x, y, z);
          for (int c = 0; c < channels_; ++c) out[c] += w * value(base + c);
        }
      }
    }
  }

  /// Reverse-mode of interpolate(): scatters upstream (feature_dim values,
  /// stride order) into `sink` and accumulates d(feature)/dp^T * upstream
  /// into dp. Axes clamped by stride coverage or the bbox contribute zero
  /// positional gradient.
  void interpolate_backward(const Vec3d& p, const T* upstream, GridGrads<T>& sink,
                            Vec3<T>* dp_out) const {
    Vec3<T> dp = Vec3<T>::Zero();
    const Vec3d vsz = voxel_size();
    for (int m = 0; m < num_strides(); ++m) {
      const StrideCell cell = locate(m, p);
      const T* up = upstream + m * channels_;
      const T wx[2] = {T(1) - cell.fx, cell.fx};
      const T wy[2] = {T(1) - cell.fy, cell.fy};
      const T wz[2] = {T(1) - cell.fz, cell.fz};
      T dfx = T(0), dfy = T(0), dfz = T(0);
      for (int dx = 0; dx < 2; ++dx) {
        const int x = cell.ix + dx * cell.step_x;
        const T sx = dx ? T(1) : T(-1);
        for (int dy = 0; dy < 2; ++dy) {
          const int y = cell.iy + dy * cell.step_y;
          const T sy = dy ? T(1) : T(-1);
          for (int dz = 0; dz < 2; ++dz) {
            const int z = cell.iz + dz * cell.step_z;
            const T sz = dz ? T(1) : T(-1);
            const T w = wx[dx] * wy[dy] * wz[dz];
            const std::size_t base = index(0, x, y, z);
            T dot = T(0);
            for (int c = 0; c < channels_; ++c) {
              sink.add(m, base + c, w * up[c]);
              dot += up[c] * value(base + c);
            }
            dfx += sx * wy[dy] * wz[dz] * dot;
            dfy += sy * wx[dx] * wz[dz] * dot;
            dfz += sz * wx[dx] * wy[dy] * dot;
          }
        }
      }
      // d(frac)/d(world) = (N-1)/(extent * s), zero where clamped.
      const int s = effective_strides_[m];
      if (!cell.clamp_x) dp.x() += dfx * static_cast<T>(1.0 / (vsz.x() * s));
      if (!cell.clamp_y) dp.y() += dfy * static_cast<T>(1.0 / (vsz.y() * s));
      if (!cell.clamp_z) dp.z() += dfz * static_cast<T>(1.0 / (vsz.z() * s));
    }
    if (dp_out) *dp_out += dp;
  }

  /// New grid over the same bbox whose vertex values sample this grid's
  /// trilinear interpolant at the new vertex locations (endpoints align).
  VoxelGrid resampled(int new_nx, int new_ny, int new_nz) const {
    VoxelGrid out(channels_, new_nx, new_ny, new_nz, bbox_min_, bbox_max_, strides_);
    const int n_new[3] = {new_nx, new_ny, new_nz};
    std::vector<T> feat(channels_);
    for (int x = 0; x < new_nx; ++x) {
      for (int y = 0; y < new_ny; ++y) {
        for (int z = 0; z < new_nz; ++z) {
          Vec3d p;
          const int ijk[3] = {x, y, z};
          for (int a = 0; a < 3; ++a) {
            const double t = n_new[a] > 1 ? static_cast<double>(ijk[a]) / (n_new[a] - 1) : 0.0;
            p[a] = bbox_min_[a] + t * (bbox_max_[a] - bbox_min_[a]);
          }
          interpolate_stride(stride_one_index(), p, feat.data());
          for (int c = 0; c < channels_; ++c) out.set_value(c, x, y, z, feat[c]);
        }
      }
    }
    return out;
  }

  /// Per-stride L2 norms of the accumulated gradients. Requires at least
  /// one backward pass with per-stride accumulators enabled.
  std::vector<double> grad_magnitude_per_stride() const {
    if (!grads.touched || !grads.per_stride_enabled())
      throw state_error("per-stride gradient magnitudes requested before any backward pass");
    return grads.stride_norms();
  }

  GridGrads<T> grads;

 private:
  /// Index of the stride whose subsampling is the identity; falls back to
  /// the finest stride when 1 is not among them.
  int stride_one_index() const {
    for (int m = 0; m < num_strides(); ++m)
      if (effective_strides_[m] == 1) return m;
    return 0;
  }

  int channels_ = 0;
  int nx_ = 0, ny_ = 0, nz_ = 0;
  Vec3d bbox_min_ = Vec3d::Zero();
  Vec3d bbox_max_ = Vec3d::Ones();
  std::vector<int> strides_;
  std::vector<int> effective_strides_;
  std::vector<T> data_;
  std::vector<std::uint16_t> half_data_;
  bool half_mode_ = false;
};

/// Doubles the per-axis vertex count (2N pattern) by resampling the
/// current interpolant; bbox unchanged, gradients reset.
template <class T>
VoxelGrid<T> upscale_grid(const VoxelGrid<T>& grid, int factor = 2) {
  if (factor != 2) throw invalid_input("upscale_grid supports factor 2 only");
  return grid.resampled(2 * grid.nx(), 2 * grid.ny(), 2 * grid.nz());
}

}  // namespace tnv
