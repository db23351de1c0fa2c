#pragma once

#include <string>
#include <vector>

#include "tineuvox/common.hpp"

namespace tnv {

/// Row-major RGB image, 3 floats per pixel, linear values in [0,1].
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float& at(int row, int col, int c) {
    return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + c];
  }
  float at(int row, int col, int c) const {
    return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + c];
  }
};

/// Decodes an 8/16-bit gray/RGB/RGBA PNG to linear [0,1]. An alpha
/// channel is composited as a*c + (1-a)*background.
Image load_png(const std::string& path, const Vec3<float>& background);

/// Writes 8-bit RGB (values clamped, rounded); the write is atomic
/// (temp file + rename).
void save_png(const Image& img, const std::string& path);

/// Raw f32 dump for exact comparisons. Layout (little-endian): magic
/// "TNVR", u32 version = 1, u32 width, u32 height, then width*height*3
/// f32 row-major RGB. Atomic write.
void save_raw(const Image& img, const std::string& path);
Image load_raw(const std::string& path);

/// Writes `content` to path atomically (temp file in the same directory,
/// then rename).
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace tnv
